#pragma once

// End-to-end session: quantum phase, optional frame-sync monitoring,
// sifting, test-bit estimation, cascade, privacy amplification and the
// rate bound.  Decoy classes are disclosed in full; only the signal
// class contributes code bits.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include "qkdsim/attacks.hpp"
#include "qkdsim/postproc.hpp"
#include "qkdsim/protocols.hpp"
#include "qkdsim/syncctl.hpp"

namespace qkd::pipeline {

using protocols::Protocol;
using protocols::RateMode;

struct PostprocConfig {
  SecurityParams security;
  double abort_qber = 0.11;
  postproc::CascadeOptions cascade;
  std::optional<RateMode> rate_mode;  // defaults per protocol when unset
  std::uint64_t initial_auth_bits = 8192;
};

struct SyncOptions {
  bool enabled = false;
  syncctl::SyncConfig config;
  // test hook: desynchronize Bob's sifted stream by `offset` junk bits
  // starting at sifted position `at`
  std::int64_t inject_offset = 0;
  std::uint64_t inject_at = 0;
};

enum class SessionStatus : std::uint8_t {
  OK,
  ABORT_QBER,
  RECONCILE_FAIL,
  FATAL_SYNC,
  ABORT_AUTH,
  EMPTY_SIFT,
};

inline const char* status_name(SessionStatus s) {
  switch (s) {
    case SessionStatus::OK: return "OK";
    case SessionStatus::ABORT_QBER: return "ABORT_QBER";
    case SessionStatus::RECONCILE_FAIL: return "RECONCILE_FAIL";
    case SessionStatus::FATAL_SYNC: return "FATAL_SYNC";
    case SessionStatus::ABORT_AUTH: return "ABORT_AUTH";
    case SessionStatus::EMPTY_SIFT: return "EMPTY_SIFT";
  }
  return "?";
}

struct SessionResult {
  SessionStatus status = SessionStatus::OK;
  protocols::SessionStats stats;
  postproc::QberEstimate qber;
  std::optional<protocols::DecoyBounds> bounds;
  postproc::SecretKey key_alice, key_bob;
  std::uint64_t reconciled_bits = 0;
  std::uint64_t leak_bits = 0;
  double leak_ec_factor = 0.0;  // measured cascade efficiency
  double rate_bound = 0.0;      // secret bits per pulse from the bound
  bool non_composable_rate = false;
  syncctl::SyncState sync;
  std::uint64_t auth_bits_consumed = 0;
  attacks::EveRecord eve;
};

namespace detail {

struct MonitoredStreams {
  std::vector<std::uint8_t> alice, bob;
  syncctl::SyncState state;
  std::vector<double> window_qber;
  bool fatal = false;
};

// Window-by-window QBER monitoring over the sifted streams with
// resynchronization on rapid loss.  Windows observed while frame sync
// was broken are dropped from the output key material.
inline MonitoredStreams monitor_streams(const std::vector<std::uint8_t>& alice,
                                        const std::vector<std::uint8_t>& bob_raw,
                                        const SyncOptions& opt) {
  const auto& cfg = opt.config;
  cfg.validate();

  std::vector<std::uint8_t> bob = bob_raw;
  if (opt.inject_offset > 0) {
    // splice junk bits in: Bob's indexing runs ahead of Alice's
    std::vector<std::uint8_t> shifted;
    shifted.reserve(bob.size());
    Rng junk(0x6a756e6bULL);
    for (std::uint64_t i = 0; i < opt.inject_at && i < bob.size(); ++i)
      shifted.push_back(bob[i]);
    for (std::int64_t i = 0; i < opt.inject_offset; ++i)
      shifted.push_back(junk.bernoulli(0.5));
    for (std::uint64_t i = opt.inject_at; i < bob.size(); ++i) shifted.push_back(bob[i]);
    shifted.resize(bob.size());
    bob = std::move(shifted);
  }

  MonitoredStreams out;
  out.state.windows.window_len = cfg.window_len;
  std::int64_t offset = 0;  // alice[i] currently compared to bob[i + offset]
  const std::size_t w = cfg.window_len;

  for (std::size_t start = 0; start + w <= alice.size(); start += w) {
    std::size_t mism = 0, total = 0;
    for (std::size_t i = start; i < start + w; ++i) {
      const std::int64_t j = static_cast<std::int64_t>(i) + offset;
      if (j < 0 || j >= static_cast<std::int64_t>(bob.size())) continue;
      ++total;
      mism += alice[i] != bob[static_cast<std::size_t>(j)];
    }
    if (total == 0) break;
    const double q = static_cast<double>(mism) / static_cast<double>(total);
    out.state.windows.series.push_back(q);
    out.window_qber.push_back(q);

    syncctl::Classification cls = syncctl::Classification::OK;
    if (out.state.windows.series.size() >= 2) cls = classify(out.state.windows, cfg);

    if (cls == syncctl::Classification::RAPID_LOSS) {
      // search this window for the absolute frame offset, centered on
      // the current one
      std::vector<std::uint8_t> wa(alice.begin() + static_cast<std::ptrdiff_t>(start),
                                   alice.begin() + static_cast<std::ptrdiff_t>(start + w));
      const std::int64_t blo = std::max<std::int64_t>(
          0, static_cast<std::int64_t>(start) + offset - cfg.search_range);
      const std::int64_t bhi = std::min<std::int64_t>(
          static_cast<std::int64_t>(bob.size()),
          static_cast<std::int64_t>(start + w) + offset + cfg.search_range);
      std::vector<std::uint8_t> wb(bob.begin() + blo, bob.begin() + bhi);
      const std::int64_t rel = static_cast<std::int64_t>(start) - blo;
      auto found = syncctl::frame_resync(wa, wb, rel + std::llabs(offset) + cfg.search_range,
                                         cfg.recover_factor * cfg.baseline_qber);
      std::optional<std::int64_t> delta;
      if (found) delta = (*found - rel) - offset;  // change in absolute offset
      out.state = syncctl::sync_step(std::move(out.state), cls, delta);
      if (out.state.phase == syncctl::SyncPhase::FATAL) {
        out.fatal = true;
        return out;  // no key material leaves a fatal session
      }
      offset = out.state.frame_offset;
      continue;  // drop the corrupted window from the key
    }
    out.state = syncctl::sync_step(std::move(out.state), cls, std::nullopt);
    // window accepted: emit the aligned bits
    for (std::size_t i = start; i < start + w; ++i) {
      const std::int64_t j = static_cast<std::int64_t>(i) + offset;
      if (j < 0 || j >= static_cast<std::int64_t>(bob.size())) continue;
      out.alice.push_back(alice[i]);
      out.bob.push_back(bob[static_cast<std::size_t>(j)]);
    }
  }
  return out;
}

}  // namespace detail

inline RateMode default_rate_mode(const protocols::SessionConfig& cfg) {
  if (cfg.source.single_photon) return RateMode::SINGLE_PHOTON;
  if (cfg.protocol == Protocol::BB84_DECOY) return RateMode::DECOY;
  return RateMode::WCP_WORSTCASE;
}

inline SessionResult run_full_session(const protocols::SessionConfig& cfg,
                                      const photonics::ChannelModel& channel,
                                      const photonics::DetectorModel& det,
                                      const attacks::AttackConfig& attack = {},
                                      const PostprocConfig& post = {},
                                      const SyncOptions& sync = {}) {
  cfg.validate();
  post.security.validate();
  SessionResult res;

  // authentication budget: sifting, test disclosure, per-pass cascade
  // rounds, verification and the PA seed, all before anything is sent
  auto auth = postproc::AuthKeyPool::from_seed(derive_seed(cfg.seed, 0xa07f),
                                               post.initial_auth_bits);
  const std::uint64_t needed_msgs =
      2 + 2 + 2 * static_cast<std::uint64_t>(post.cascade.passes) + 2 + 1;
  if (auth.remaining_bits() < needed_msgs * postproc::AuthKeyPool::kConsumptionPerMessage) {
    res.status = SessionStatus::ABORT_AUTH;
    return res;
  }

  auto phase = protocols::run_quantum_phase(cfg, channel, det, attack);
  res.eve = std::move(phase.eve);
  auto [sift_a, sift_b] = protocols::sift(cfg.protocol, phase.alice, phase.bob);

  auto consume_msgs = [&](std::uint64_t k) {
    for (std::uint64_t i = 0; i < k; ++i) (void)auth.take_message_key();
  };
  consume_msgs(2);  // basis/conclusive-slot announcements

  // frame-sync monitoring over the sifted streams
  std::vector<std::uint8_t> bits_a = sift_a.bits, bits_b = sift_b.bits;
  if (sync.enabled) {
    auto mon = detail::monitor_streams(bits_a, bits_b, sync);
    res.sync = mon.state;
    if (mon.fatal) {
      res.status = SessionStatus::FATAL_SYNC;
      res.auth_bits_consumed = auth.consumed_bits();
      return res;  // in-flight sifted material zeroized with the session
    }
    bits_a = std::move(mon.alice);
    bits_b = std::move(mon.bob);
  }

  if (bits_a.empty()) {
    res.status = SessionStatus::EMPTY_SIFT;
    return res;
  }

  // per-class statistics; decoy classes are disclosed in full, the
  // signal class keeps code bits back
  Rng split_rng(derive_seed(cfg.seed, 0x5b17));
  const bool qubit_protocol =
      cfg.protocol != Protocol::B92 && cfg.protocol != Protocol::DPS;
  const std::size_t signal_class =
      qubit_protocol && !cfg.source.mu_by_class.empty()
          ? static_cast<std::size_t>(
                std::max_element(cfg.source.mu_by_class.begin(),
                                 cfg.source.mu_by_class.end()) -
                cfg.source.mu_by_class.begin())
          : 0;

  std::vector<std::uint8_t> sig_a, sig_b;
  std::vector<std::uint32_t> sig_positions;  // positions in the sifted key
  std::vector<std::uint32_t> disclosed;      // full-disclosure positions
  if (sync.enabled) {
    // monitored streams lose slot alignment; treat everything as one class
    for (std::uint32_t i = 0; i < bits_a.size(); ++i) sig_positions.push_back(i);
    sig_a = bits_a;
    sig_b = bits_b;
  } else {
    for (std::uint32_t i = 0; i < sift_a.slots.size(); ++i) {
      const auto slot = static_cast<std::size_t>(sift_a.slots[i]);
      const auto cls = qubit_protocol ? phase.alice.slots[slot].class_id : 0;
      if (cls == signal_class) {
        sig_positions.push_back(i);
        sig_a.push_back(bits_a[i]);
        sig_b.push_back(bits_b[i]);
      } else {
        disclosed.push_back(i);
      }
    }
  }
  if (sig_a.empty()) {
    res.status = SessionStatus::EMPTY_SIFT;
    return res;
  }

  auto split = postproc::split_test_bits(sig_a, sig_b, cfg.test_fraction, split_rng);
  consume_msgs(2);  // test positions + disclosed values
  for (auto p : split.test_pos) disclosed.push_back(sig_positions[p]);

  if (!sync.enabled) {
    res.stats = protocols::accumulate_stats(cfg, phase.alice, phase.bob, sift_a, sift_b,
                                            disclosed, phase.emitted_photons);
    if (cfg.protocol == Protocol::BB84_DECOY) {
      double mu_sig = 0.0, mu_weak = 0.0;
      for (double mu : cfg.source.mu_by_class) mu_sig = std::max(mu_sig, mu);
      mu_weak = mu_sig;
      for (double mu : cfg.source.mu_by_class)
        if (mu > 0.0 && mu < mu_weak) mu_weak = mu;
      res.bounds = protocols::decoy_bound(res.stats, mu_sig, mu_weak);
    }
  } else {
    res.stats.protocol = cfg.protocol;
    res.stats.n_pulses = cfg.n_pulses;
    res.stats.test_fraction = cfg.test_fraction;
    res.stats.sifted_len = bits_a.size();
  }

  res.qber = postproc::estimate_qber(split.test_a, split.test_b, post.security,
                                     post.abort_qber);
  if (res.qber.abort) {
    res.status = SessionStatus::ABORT_QBER;
    res.auth_bits_consumed = auth.consumed_bits();
    return res;
  }

  Rng cascade_rng(derive_seed(cfg.seed, 0xca5c));
  auto rec = postproc::cascade_reconcile(split.code_a, split.code_b,
                                         std::max(res.qber.point, 1e-3), cascade_rng,
                                         post.cascade);
  consume_msgs(2 * static_cast<std::uint64_t>(post.cascade.passes) + 2);
  res.reconciled_bits = rec.alice.bits.size();
  res.leak_bits = rec.alice.leak_bits;
  const double h2e = binary_entropy(std::max(res.qber.point, 1e-6));
  res.leak_ec_factor =
      static_cast<double>(rec.alice.leak_bits) /
      (static_cast<double>(rec.alice.bits.size()) * std::max(h2e, 1e-9));
  if (!rec.alice.verified) {
    res.status = SessionStatus::RECONCILE_FAIL;
    res.auth_bits_consumed = auth.consumed_bits();
    return res;
  }

  // single-photon fraction and error bound for privacy amplification
  const RateMode mode = post.rate_mode.value_or(default_rate_mode(cfg));
  double a_frac = 1.0, e1 = res.qber.ci_upper;
  res.non_composable_rate =
      cfg.protocol == Protocol::B92 || cfg.protocol == Protocol::DPS;
  if (!sync.enabled && qubit_protocol) {
    const double q_mu = res.stats.gain(signal_class);
    switch (mode) {
      case RateMode::SINGLE_PHOTON:
        break;
      case RateMode::WCP_WORSTCASE: {
        const double p_multi =
            protocols::multi_photon_probability(cfg.source.mu_by_class[signal_class]);
        a_frac = q_mu > p_multi ? (q_mu - p_multi) / q_mu : 0.0;
        e1 = a_frac > 0.0 ? std::min(0.5, res.qber.ci_upper / a_frac) : 0.5;
        break;
      }
      case RateMode::DECOY:
        if (res.bounds) {
          a_frac = std::min(1.0, res.bounds->q1_lower / q_mu);
          e1 = res.bounds->e1_upper;
        }
        break;
    }
  }

  Rng pa_rng(derive_seed(cfg.seed, 0x70e9));
  consume_msgs(1);  // hash choice announcement
  res.key_alice = postproc::privacy_amplify(rec.alice, e1, a_frac, post.security, pa_rng);
  Rng pa_rng_bob(derive_seed(cfg.seed, 0x70e9));
  res.key_bob = postproc::privacy_amplify(rec.bob, e1, a_frac, post.security, pa_rng_bob);
  res.key_alice.meta.non_composable = res.non_composable_rate;
  res.key_bob.meta.non_composable = res.non_composable_rate;

  if (res.non_composable_rate || sync.enabled) {
    const double conclusive =
        static_cast<double>(res.stats.sifted_len) / static_cast<double>(cfg.n_pulses);
    res.rate_bound = std::max(
        0.0, conclusive * (1.0 - cfg.test_fraction) * (1.0 - binary_entropy(res.qber.point)));
  } else {
    res.rate_bound = protocols::key_rate(res.stats, res.bounds, mode,
                                         std::max(1.0, res.leak_ec_factor), post.security);
  }
  res.auth_bits_consumed = auth.consumed_bits();
  return res;
}

}  // namespace qkd::pipeline
