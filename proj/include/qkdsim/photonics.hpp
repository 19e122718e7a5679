#pragma once

// Statistical physical-layer models: weak coherent / single-photon
// sources, lossy misaligned channels, threshold detector pairs with
// dark counts and afterpulsing, the one-slot-delay interferometer for
// phase-train protocols and the three-detector B92 receiver.
//
// Qubit signals are Bloch vectors; the four BB84 states sit on the
// equator at (+-1,0,0) and (0,+-1,0).  Multi-photon pulses carry one
// shared Bloch vector (all photons identically polarized).

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "qkdsim/drift.hpp"
#include "qkdsim/errors.hpp"
#include "qkdsim/rng.hpp"

namespace qkd::photonics {

struct Bloch {
  double x = 0.0, y = 0.0, z = 0.0;

  double dot(const Bloch& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
  Bloch rotated_z(double angle) const {
    const double c = std::cos(angle), s = std::sin(angle);
    return {c * x - s * y, s * x + c * y, z};
  }
};

enum class Basis : std::uint8_t { X, Y };
enum class Bit : std::uint8_t { ZERO = 0, ONE = 1 };

inline Bloch bb84_state(Basis basis, int bit) {
  if (basis == Basis::X) return bit == 0 ? Bloch{1, 0, 0} : Bloch{-1, 0, 0};
  return bit == 0 ? Bloch{0, 1, 0} : Bloch{0, -1, 0};
}

inline Bloch measurement_axis(Basis basis) {
  return basis == Basis::X ? Bloch{1, 0, 0} : Bloch{0, 1, 0};
}

// Born probability of routing to detector 0 when measuring state r
// along axis a.
inline double born_p0(const Bloch& r, const Bloch& a) {
  double p = 0.5 * (1.0 + r.dot(a));
  if (p < 0.0) p = 0.0;
  if (p > 1.0) p = 1.0;
  return p;
}

using ClassId = std::uint32_t;

struct SourceConfig {
  std::vector<double> mu_by_class;  // mean photon number per intensity class
  bool phase_randomized = true;
  bool single_photon = false;  // idealized deterministic n=1 source

  void validate() const {
    if (mu_by_class.empty()) throw ConfigError("source: no intensity classes");
    for (double mu : mu_by_class)
      if (!(mu >= 0.0) || !std::isfinite(mu))
        throw ConfigError("source: mean photon numbers must be finite and >= 0");
  }
};

struct QubitPulse {
  std::uint64_t n = 0;  // photon count
  Bloch bloch;
  ClassId class_id = 0;
  std::int64_t slot = 0;
};

// Train of coherent amplitudes, one per time slot (sqrt-photon units,
// |amp|^2 = mean photon number).
struct CoherentTrain {
  std::vector<std::complex<double>> amps;
  bool global_phase_randomized = true;
};

struct ChannelModel {
  double loss_db = 0.0;
  double misalignment_angle = 0.0;  // rotation about Z, radians
  std::optional<syncctl::DriftModel> drift;

  double transmittance() const { return std::pow(10.0, -loss_db / 10.0); }

  void validate() const {
    if (!(loss_db >= 0.0) || !std::isfinite(loss_db))
      throw ConfigError("channel: loss_db must be finite and >= 0");
    if (misalignment_angle < 0.0 || misalignment_angle > M_PI)
      throw ConfigError("channel: misalignment_angle must lie in [0, pi]");
  }
};

// Misalignment angle that produces a given intrinsic optical QBER
// (error probability sin^2(theta/2) for equatorial states).
inline double misalignment_for_qber(double qber) {
  if (qber < 0.0 || qber > 1.0) throw ConfigError("qber must lie in [0,1]");
  return 2.0 * std::asin(std::sqrt(qber));
}

enum class DoubleClickPolicy : std::uint8_t { RANDOM_BIT, DISCARD };

struct DetectorModel {
  double eff0 = 1.0, eff1 = 1.0;  // per-detector quantum efficiency
  double dark = 0.0;              // dark-count probability per gate
  double afterpulse_p0 = 0.0;     // afterpulse probability right after a fire
  double afterpulse_tau = 1.0;    // exponential decay constant, in gates
  std::int64_t blanking_gates = 0;
  DoubleClickPolicy double_click_policy = DoubleClickPolicy::RANDOM_BIT;

  void validate() const {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0 && std::isfinite(p); };
    if (!prob(eff0) || !prob(eff1)) throw ConfigError("detector: efficiency out of [0,1]");
    if (!(dark >= 0.0 && dark < 1.0)) throw ConfigError("detector: dark must lie in [0,1)");
    if (!(afterpulse_p0 >= 0.0 && afterpulse_p0 <= 1.0))
      throw ConfigError("detector: afterpulse_p0 out of [0,1]");
    if (!(afterpulse_tau > 0.0)) throw ConfigError("detector: afterpulse_tau must be > 0");
    if (blanking_gates < 0) throw ConfigError("detector: blanking_gates must be >= 0");
  }
};

// Per-session mutable detector history (afterpulse memory).
struct DetectorPairState {
  std::int64_t last_fire[2] = {std::numeric_limits<std::int64_t>::min() / 2,
                               std::numeric_limits<std::int64_t>::min() / 2};
};

enum class Outcome : std::uint8_t { NONE, BIT0, BIT1, DOUBLE };

struct DetectionRecord {
  std::int64_t slot = 0;
  Basis basis_used = Basis::X;
  Outcome outcome = Outcome::NONE;
  std::optional<bool> monitor_ok;  // present for B92 only
};

inline QubitPulse emit_pulse_state(const SourceConfig& cfg, ClassId class_id,
                                   const Bloch& state, Rng& rng) {
  if (class_id >= cfg.mu_by_class.size())
    throw ConfigError("emit_pulse_state: unknown intensity class");
  QubitPulse p;
  p.class_id = class_id;
  p.bloch = state;
  if (cfg.single_photon)
    p.n = 1;
  else
    p.n = rng.poisson(cfg.mu_by_class[class_id]);
  return p;
}

inline QubitPulse emit_weak_pulse(const SourceConfig& cfg, ClassId class_id, int bit,
                                  Basis basis, Rng& rng) {
  return emit_pulse_state(cfg, class_id, bb84_state(basis, bit), rng);
}

inline QubitPulse channel_transmit(const QubitPulse& pulse, const ChannelModel& ch,
                                   Rng& rng) {
  QubitPulse out = pulse;
  out.n = rng.binomial(pulse.n, ch.transmittance());
  out.bloch = pulse.bloch.rotated_z(ch.misalignment_angle);
  return out;
}

namespace detail {

inline double afterpulse_prob(const DetectorModel& det, std::int64_t gates_since_fire) {
  if (det.afterpulse_p0 <= 0.0) return 0.0;
  if (gates_since_fire <= det.blanking_gates) return 0.0;
  return det.afterpulse_p0 *
         std::exp(-static_cast<double>(gates_since_fire) / det.afterpulse_tau);
}

inline Outcome resolve_clicks(bool fire0, bool fire1, DoubleClickPolicy policy, Rng& rng) {
  if (fire0 && fire1) {
    if (policy == DoubleClickPolicy::DISCARD) return Outcome::DOUBLE;
    return rng.bernoulli(0.5) ? Outcome::BIT1 : Outcome::BIT0;
  }
  if (fire0) return Outcome::BIT0;
  if (fire1) return Outcome::BIT1;
  return Outcome::NONE;
}

}  // namespace detail

// Threshold measurement of a (possibly multi-photon) qubit pulse along
// basis_axis.  Each photon routes by the Born rule and passes the
// efficiency test of its detector; dark counts and afterpulses add on
// top.  The afterpulse clock is the slot index of the pulse.
inline DetectionRecord measure_qubit(const QubitPulse& pulse, const Bloch& basis_axis,
                                     const DetectorModel& det, DetectorPairState& history,
                                     Rng& rng) {
  const double p0 = born_p0(pulse.bloch, basis_axis);
  bool fire[2] = {false, false};
  const double eff[2] = {det.eff0, det.eff1};
  for (std::uint64_t i = 0; i < pulse.n; ++i) {
    const int d = rng.bernoulli(p0) ? 0 : 1;
    if (rng.bernoulli(eff[d])) fire[d] = true;
  }
  for (int d = 0; d < 2; ++d) {
    if (!fire[d] && rng.bernoulli(det.dark)) fire[d] = true;
    if (!fire[d]) {
      const std::int64_t dg = pulse.slot - history.last_fire[d];
      if (rng.bernoulli(detail::afterpulse_prob(det, dg))) fire[d] = true;
    }
  }
  for (int d = 0; d < 2; ++d)
    if (fire[d]) history.last_fire[d] = pulse.slot;

  DetectionRecord rec;
  rec.slot = pulse.slot;
  rec.outcome = detail::resolve_clicks(fire[0], fire[1], det.double_click_policy, rng);
  return rec;
}

struct InterferenceOutputs {
  // entry k combines train slots k and k+1
  std::vector<std::complex<double>> port0, port1;
};

// One-slot-delay Mach-Zehnder: port0 carries the sum, port1 the
// difference of consecutive amplitudes (each halved; the other half of
// the energy exits in the non-overlapping end slots).
inline InterferenceOutputs interfere_train(const CoherentTrain& train, std::size_t delay = 1) {
  if (train.amps.size() < 2) throw ConfigError("interfere_train: need at least 2 pulses");
  if (delay != 1) throw ConfigError("interfere_train: only delay=1 is supported");
  InterferenceOutputs out;
  const std::size_t m = train.amps.size() - 1;
  out.port0.reserve(m);
  out.port1.reserve(m);
  for (std::size_t k = 0; k < m; ++k) {
    out.port0.push_back(0.5 * (train.amps[k] + train.amps[k + 1]));
    out.port1.push_back(0.5 * (train.amps[k] - train.amps[k + 1]));
  }
  return out;
}

// Threshold detection on one interferometer output slot: Poissonian
// photocounts at |amp|^2 * eff plus dark counts.
inline bool coherent_click(std::complex<double> amp, double eff, double dark, Rng& rng) {
  const double mean = std::norm(amp) * eff;
  if (rng.poisson(mean) > 0) return true;
  return rng.bernoulli(dark);
}

// -------- B92 (two-mode coherent signal with strong reference) --------

struct B92Receiver {
  double alpha = 0.5;          // nominal signal amplitude at the source
  double beta = 20.0;          // nominal reference amplitude at the source
  double monitor_ratio = 0.0;  // power fraction of the reference tapped to the monitor
  double monitor_eff = 1.0;
  std::int64_t m_lo = 1, m_hi = std::numeric_limits<std::int64_t>::max();
  DetectorModel det;

  // Monitor tap tuned so the reflected mean photon number equals the
  // incoming signal mean photon number in normal operation.
  static double tuned_monitor_ratio(double alpha, double beta) {
    if (beta <= 0.0) throw ConfigError("b92: beta must be > 0");
    return (alpha * alpha) / (beta * beta);
  }

  void validate() const {
    if (!(alpha > 0.0) || !(beta > 0.0)) throw ConfigError("b92: amplitudes must be > 0");
    if (!(monitor_ratio > 0.0 && monitor_ratio < 1.0))
      throw ConfigError("b92: monitor_ratio must lie in (0,1)");
    if (m_lo < 0 || m_hi < m_lo) throw ConfigError("b92: bad monitor window");
    det.validate();
  }
};

// Two-mode B92 measurement.  train.amps = {signal, reference}.  The
// reference is tapped for the monitor, attenuated to the expected
// signal amplitude and interfered with the signal on a 50/50 splitter.
inline DetectionRecord b92_measure(const CoherentTrain& train, const B92Receiver& rx,
                                   std::int64_t slot, Rng& rng) {
  if (train.amps.size() != 2) throw ConfigError("b92_measure: expected a two-mode signal");
  const std::complex<double> sig = train.amps[0];
  const std::complex<double> ref = train.amps[1];

  const double monitor_mean =
      std::norm(ref) * rx.monitor_ratio * rx.monitor_eff;
  const auto monitor_count = static_cast<std::int64_t>(rng.poisson(monitor_mean));
  const bool monitor_ok = monitor_count >= rx.m_lo && monitor_count <= rx.m_hi;

  // fixed receiver attenuation scales the reference to the level of an
  // honest signal, so interference visibility is loss-independent
  const std::complex<double> local = ref * (rx.alpha / rx.beta);
  const std::complex<double> port0 = (sig + local) / std::sqrt(2.0);
  const std::complex<double> port1 = (sig - local) / std::sqrt(2.0);

  const bool fire0 = coherent_click(port0, rx.det.eff0, rx.det.dark, rng);
  const bool fire1 = coherent_click(port1, rx.det.eff1, rx.det.dark, rng);

  DetectionRecord rec;
  rec.slot = slot;
  rec.outcome = detail::resolve_clicks(fire0, fire1, rx.det.double_click_policy, rng);
  rec.monitor_ok = monitor_ok;
  return rec;
}

}  // namespace qkd::photonics
