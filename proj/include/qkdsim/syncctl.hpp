#pragma once

// Drift application, QBER-window fault classification, frame
// resynchronization search and the session sync state machine.
//
// Fault taxonomy: slow QBER degradation points at bit-level drift and
// is fixed by recalibration; a rapid jump toward 50% means frame
// synchronization was lost and triggers an offset search.  If the
// search fails the fault is fatal and the session aborts.

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "qkdsim/drift.hpp"
#include "qkdsim/errors.hpp"
#include "qkdsim/mathx.hpp"
#include "qkdsim/photonics.hpp"

namespace qkd::syncctl {

// Deterministic per-slot drift of misalignment and transmittance.
inline photonics::ChannelModel apply_drift(const photonics::ChannelModel& base,
                                           std::int64_t slot) {
  if (!base.drift) return base;
  const DriftModel& d = *base.drift;
  if (slot <= d.onset_slot) return base;
  const double k = static_cast<double>(slot - d.onset_slot) / 1000.0;
  photonics::ChannelModel out = base;
  double angle = base.misalignment_angle + d.phase_drift_rate * k;
  if (angle > M_PI) angle = M_PI;
  out.misalignment_angle = angle;
  double eta = base.transmittance() * std::pow(d.transmittance_drift, k);
  if (eta > 1.0) eta = 1.0;
  if (eta < 1e-300) eta = 1e-300;
  out.loss_db = -10.0 * std::log10(eta);
  return out;
}

enum class Classification : std::uint8_t { OK, SLOW_DEGRADE, RAPID_LOSS };

struct SyncConfig {
  std::size_t window_len = 500;       // W slots per QBER window, >= 100
  double rapid_threshold = 0.45;      // "over 50%" with margin for finite windows
  double slow_trend_per_window = 0.005;
  std::size_t trend_windows = 5;
  std::int64_t search_range = 16;
  double recover_factor = 2.0;        // accept resync at <= factor * baseline QBER
  double baseline_qber = 0.02;

  void validate() const {
    if (window_len < 100) throw ConfigError("sync: window_len must be >= 100");
    if (!(rapid_threshold > 0.0 && rapid_threshold < 1.0))
      throw ConfigError("sync: rapid_threshold out of (0,1)");
    if (search_range < 1) throw ConfigError("sync: search_range must be >= 1");
  }
};

struct QberWindow {
  std::size_t window_len = 500;
  std::vector<double> series;  // one QBER value per completed window
};

inline Classification classify(const QberWindow& win, const SyncConfig& cfg = {}) {
  if (win.series.size() < 2)
    throw ConfigError("classify: need at least 2 QBER windows");
  if (win.series.back() >= cfg.rapid_threshold) return Classification::RAPID_LOSS;
  const std::size_t t = std::min(cfg.trend_windows, win.series.size());
  std::vector<double> xs(t), ys(t);
  for (std::size_t i = 0; i < t; ++i) {
    xs[i] = static_cast<double>(i);
    ys[i] = win.series[win.series.size() - t + i];
  }
  const double slope = fit_line(xs, ys).slope;
  if (slope >= cfg.slow_trend_per_window) return Classification::SLOW_DEGRADE;
  return Classification::OK;
}

// Exhaustive shift scan: returns the offset k minimizing the QBER of
// a[i] vs b[i+k], provided that minimum is acceptable.
inline std::optional<std::int64_t> frame_resync(const std::vector<std::uint8_t>& a,
                                                const std::vector<std::uint8_t>& b,
                                                std::int64_t search_range,
                                                double recover_threshold) {
  constexpr std::size_t kMinOverlap = 64;
  double best_qber = 1.0;
  std::optional<std::int64_t> best;
  for (std::int64_t k = -search_range; k <= search_range; ++k) {
    std::size_t mism = 0, total = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::int64_t j = static_cast<std::int64_t>(i) + k;
      if (j < 0 || j >= static_cast<std::int64_t>(b.size())) continue;
      ++total;
      mism += a[i] != b[static_cast<std::size_t>(j)];
    }
    if (total < kMinOverlap) continue;
    const double q = static_cast<double>(mism) / static_cast<double>(total);
    const bool better =
        q < best_qber - 1e-12 ||
        (std::fabs(q - best_qber) <= 1e-12 && best &&
         (std::llabs(k) < std::llabs(*best) || (std::llabs(k) == std::llabs(*best) && k < *best)));
    if (!best || better) {
      best_qber = q;
      best = k;
    }
  }
  if (!best || best_qber > recover_threshold) return std::nullopt;
  return best;
}

enum class SyncPhase : std::uint8_t { ALIGNED, BIT_DRIFT, FRAME_LOST, FATAL };

struct SyncState {
  SyncPhase phase = SyncPhase::ALIGNED;
  std::int64_t frame_offset = 0;
  std::vector<SyncPhase> log{SyncPhase::ALIGNED};
  QberWindow windows;
};

// One state-machine step.  resync_result is consulted only on
// RAPID_LOSS; recalibrate fires on the BIT_DRIFT path.
inline SyncState sync_step(SyncState state, Classification cls,
                           std::optional<std::int64_t> resync_result,
                           const std::function<void()>& recalibrate = {}) {
  if (state.phase == SyncPhase::FATAL)
    throw ConfigError("sync_step: FATAL is terminal");
  switch (cls) {
    case Classification::OK:
      state.phase = SyncPhase::ALIGNED;
      break;
    case Classification::SLOW_DEGRADE:
      state.phase = SyncPhase::BIT_DRIFT;
      state.log.push_back(state.phase);
      if (recalibrate) recalibrate();
      state.phase = SyncPhase::ALIGNED;
      break;
    case Classification::RAPID_LOSS:
      state.phase = SyncPhase::FRAME_LOST;
      state.log.push_back(state.phase);
      if (resync_result) {
        state.frame_offset += *resync_result;
        state.phase = SyncPhase::ALIGNED;
      } else {
        state.phase = SyncPhase::FATAL;
      }
      break;
  }
  state.log.push_back(state.phase);
  return state;
}

}  // namespace qkd::syncctl
