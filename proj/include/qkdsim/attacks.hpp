#pragma once

// Channel-replacement adversaries.  Each attack is a per-slot stream
// transform over the emitted signal; forwarded signals travel to Bob
// over Eve's lossless line, everything else goes through the honest
// channel.  An EveRecord keeps per-slot evidence for analysis.

#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <vector>

#include "qkdsim/errors.hpp"
#include "qkdsim/photonics.hpp"
#include "qkdsim/rng.hpp"

namespace qkd::attacks {

enum class AttackKind : std::uint8_t { NONE, INTERCEPT_RESEND, PNS, USD_SEQUENTIAL };

enum class EveBasisStrategy : std::uint8_t { RANDOM_XY, FIXED_X, FIXED_Y, MATCH_ALICE };

struct InterceptResendConfig {
  double fraction = 1.0;  // probability a pulse is intercepted
  EveBasisStrategy strategy = EveBasisStrategy::RANDOM_XY;

  void validate() const {
    if (!(fraction >= 0.0 && fraction <= 1.0))
      throw ConfigError("intercept_resend: fraction must lie in [0,1]");
  }
};

struct PnsConfig {
  // Target click probability Bob should observe; negative means
  // "match the honest channel", solved from the session parameters.
  double target_click_rate = -1.0;
};

struct UsdConfig {
  std::size_t block_len = 1;

  void validate() const {
    if (block_len < 1) throw ConfigError("usd: block_len must be >= 1");
  }
};

struct EveSlotRecord {
  std::int64_t slot = 0;
  std::optional<int> measured_bit;     // intercept-resend outcome
  std::uint64_t stored_photons = 0;    // PNS
  std::optional<photonics::Bloch> stored_state;
  std::optional<bool> usd_success;
  bool suppressed = false;
};

struct EveRecord {
  std::vector<EveSlotRecord> slots;
  std::uint64_t intercepted = 0;
  std::uint64_t stored_total = 0;
  std::uint64_t usd_successes = 0;
  std::uint64_t usd_trials = 0;
  bool saturated = false;  // PNS could not reach the target click rate
};

// ---------------------------------------------------------------- PNS

// Blocking/thinning policy: suppress single-photon pulses with
// probability block_single; forward multi-photon pulses (one photon,
// losslessly) with probability forward_multi.  Solved analytically so
// Bob's expected any-click rate equals the honest channel's.
struct PnsPolicy {
  double block_single = 0.0;
  double forward_multi = 1.0;
  bool saturated = false;       // singles fully blocked, multis thinned
  bool infeasible = false;      // honest rate unreachable even at full forwarding
  double expected_click_rate = 0.0;
};

namespace detail {

inline double click_dark_only(double dark) { return 1.0 - (1.0 - dark) * (1.0 - dark); }

inline double click_one_photon(double eff, double dark) {
  return 1.0 - (1.0 - dark) * (1.0 - dark) * (1.0 - eff);
}

inline double click_honest_wcp(double mu, double eta, double eff, double dark) {
  return 1.0 - (1.0 - dark) * (1.0 - dark) * std::exp(-mu * eta * eff);
}

}  // namespace detail

// Solve the policy for a Poissonian multi-class source.  mu/probability
// pairs describe the emission mix; eta is the honest channel
// transmittance; detectors are assumed efficiency-symmetric.
inline PnsPolicy solve_pns_policy(const std::vector<double>& mu_by_class,
                                  const std::vector<double>& class_probabilities,
                                  double eta, const photonics::DetectorModel& det,
                                  double target_click_rate = -1.0) {
  if (mu_by_class.size() != class_probabilities.size())
    throw ConfigError("solve_pns_policy: class count mismatch");
  const double eff = 0.5 * (det.eff0 + det.eff1);
  const double dark = det.dark;
  const double pd = detail::click_dark_only(dark);
  const double p1 = detail::click_one_photon(eff, dark);

  double honest = 0.0, w0 = 0.0, w1 = 0.0, wm = 0.0;
  for (std::size_t c = 0; c < mu_by_class.size(); ++c) {
    const double mu = mu_by_class[c], pc = class_probabilities[c];
    honest += pc * detail::click_honest_wcp(mu, eta, eff, dark);
    const double q0 = std::exp(-mu), q1 = mu * std::exp(-mu);
    w0 += pc * q0;
    w1 += pc * q1;
    wm += pc * (1.0 - q0 - q1);
  }
  const double target = target_click_rate >= 0.0 ? target_click_rate : honest;

  PnsPolicy pol;
  // attacked rate: w0*pd + w1*((1-b)*p1 + b*pd) + wm*(f*p1 + (1-f)*pd)
  // with f = 1 solve for b; then clamp and solve for f.
  const double base_f1 = w0 * pd + w1 * p1 + wm * p1;
  if (w1 > 0.0 && p1 > pd) {
    const double b = (base_f1 - target) / (w1 * (p1 - pd));
    if (b < 0.0) {
      pol.block_single = 0.0;
      pol.infeasible = true;  // Bob would see fewer clicks than honest
    } else if (b <= 1.0) {
      pol.block_single = b;
    } else {
      pol.block_single = 1.0;
      pol.saturated = true;
    }
  }
  if (pol.saturated && wm > 0.0 && p1 > pd) {
    double f = (target - w0 * pd - w1 * pd - wm * pd) / (wm * (p1 - pd));
    if (f < 0.0) f = 0.0;
    if (f > 1.0) f = 1.0;
    pol.forward_multi = f;
  }
  pol.expected_click_rate =
      w0 * pd + w1 * ((1.0 - pol.block_single) * p1 + pol.block_single * pd) +
      wm * (pol.forward_multi * p1 + (1.0 - pol.forward_multi) * pd);
  return pol;
}

struct QubitForward {
  photonics::QubitPulse pulse;
  bool bypass_channel = false;  // true when Eve's lossless line carries it
};

// Photon-number splitting on one pulse.  Eve knows n (QND measurement);
// n >= 2 forwards exactly one photon and stores the rest, n = 1 is
// blocked per policy, vacuum passes through.
inline QubitForward pns_transform(const photonics::QubitPulse& pulse,
                                  const PnsPolicy& policy, EveRecord& record, Rng& rng) {
  EveSlotRecord ev;
  ev.slot = pulse.slot;
  QubitForward out;
  out.pulse = pulse;
  if (pulse.n >= 2) {
    if (rng.bernoulli(policy.forward_multi)) {
      out.pulse.n = 1;
      out.bypass_channel = true;
    } else {
      out.pulse.n = 0;
      out.bypass_channel = true;
      ev.suppressed = true;
    }
    ev.stored_photons = pulse.n - 1;
    ev.stored_state = pulse.bloch;
    record.stored_total += ev.stored_photons;
  } else if (pulse.n == 1) {
    if (rng.bernoulli(policy.block_single)) {
      out.pulse.n = 0;
      ev.suppressed = true;
    }
    out.bypass_channel = true;
  } else {
    out.bypass_channel = true;  // vacuum forwarded as vacuum
  }
  record.slots.push_back(ev);
  return out;
}

// ------------------------------------------------- intercept / resend

// Eve measures in her chosen basis and resends a fresh single photon in
// the measured state over a lossless line.  Vacuum stays vacuum.
inline QubitForward intercept_resend(const photonics::QubitPulse& pulse,
                                     const InterceptResendConfig& cfg,
                                     photonics::Basis alice_basis, EveRecord& record,
                                     Rng& rng) {
  EveSlotRecord ev;
  ev.slot = pulse.slot;
  QubitForward out;
  out.pulse = pulse;
  if (!rng.bernoulli(cfg.fraction)) {
    record.slots.push_back(ev);
    return out;  // not intercepted, honest channel applies
  }
  record.intercepted += 1;
  photonics::Basis eve_basis = photonics::Basis::X;
  switch (cfg.strategy) {
    case EveBasisStrategy::RANDOM_XY:
      eve_basis = rng.bernoulli(0.5) ? photonics::Basis::Y : photonics::Basis::X;
      break;
    case EveBasisStrategy::FIXED_X: eve_basis = photonics::Basis::X; break;
    case EveBasisStrategy::FIXED_Y: eve_basis = photonics::Basis::Y; break;
    case EveBasisStrategy::MATCH_ALICE: eve_basis = alice_basis; break;
  }
  if (pulse.n == 0) {
    out.pulse.n = 0;
    out.bypass_channel = true;
    record.slots.push_back(ev);
    return out;
  }
  // ideal threshold measurement, double clicks resolved randomly
  const photonics::Bloch axis = photonics::measurement_axis(eve_basis);
  const double p0 = photonics::born_p0(pulse.bloch, axis);
  bool hit0 = false, hit1 = false;
  for (std::uint64_t i = 0; i < pulse.n; ++i) (rng.bernoulli(p0) ? hit0 : hit1) = true;
  int bit;
  if (hit0 && hit1)
    bit = rng.bernoulli(0.5) ? 1 : 0;
  else
    bit = hit1 ? 1 : 0;
  ev.measured_bit = bit;
  out.pulse.n = 1;
  out.pulse.bloch = photonics::bb84_state(eve_basis, bit);
  out.bypass_channel = true;
  record.slots.push_back(ev);
  return out;
}

// --------------------------------------- unambiguous state discrimination

// Per-pulse USD success probability for the binary coherent alphabet
// {|alpha>, |-alpha>}: 1 - |<alpha|-alpha>| = 1 - exp(-2 mu).
inline double usd_success_probability(double mu) {
  if (mu < 0.0) throw ConfigError("usd_success_probability: mu must be >= 0");
  return 1.0 - std::exp(-2.0 * mu);
}

// Sequential USD over a pulse train: every pulse inside a success run
// of length >= block_len is resent as a clean coherent block scaled to
// the expected channel output; all other pulses are suppressed to
// vacuum.  eta_resend is the honest transmittance Eve mimics.
inline photonics::CoherentTrain usd_sequential(const photonics::CoherentTrain& train,
                                               double mu, const UsdConfig& cfg,
                                               EveRecord& record, Rng& rng,
                                               double eta_resend = 1.0) {
  cfg.validate();
  const double p = usd_success_probability(mu);
  const double scale = std::sqrt(eta_resend);
  const std::size_t n = train.amps.size();
  std::vector<bool> success(n);
  for (std::size_t i = 0; i < n; ++i) {
    success[i] = rng.bernoulli(p);
    record.usd_trials += 1;
    record.usd_successes += success[i];
    EveSlotRecord ev;
    ev.slot = static_cast<std::int64_t>(i);
    ev.usd_success = success[i];
    record.slots.push_back(ev);
  }
  photonics::CoherentTrain out = train;
  std::size_t i = 0;
  while (i < n) {
    if (!success[i]) {
      out.amps[i] = 0.0;
      record.slots[record.slots.size() - n + i].suppressed = true;
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && success[j]) ++j;
    if (j - i < cfg.block_len) {
      for (std::size_t k = i; k < j; ++k) {
        out.amps[k] = 0.0;
        record.slots[record.slots.size() - n + k].suppressed = true;
      }
    } else {
      for (std::size_t k = i; k < j; ++k) out.amps[k] *= scale;
    }
    i = j;
  }
  return out;
}

// USD on one two-mode B92 signal: on success Eve resends the identified
// signal and a clean reference at the expected channel output level, on
// failure she suppresses both modes.
inline photonics::CoherentTrain usd_b92(const photonics::CoherentTrain& two_mode,
                                        double mu_signal, EveRecord& record, Rng& rng,
                                        double eta_resend = 1.0) {
  if (two_mode.amps.size() != 2) throw ConfigError("usd_b92: expected a two-mode signal");
  const bool success = rng.bernoulli(usd_success_probability(mu_signal));
  record.usd_trials += 1;
  record.usd_successes += success;
  EveSlotRecord ev;
  ev.usd_success = success;
  photonics::CoherentTrain out = two_mode;
  if (success) {
    const double scale = std::sqrt(eta_resend);
    out.amps[0] *= scale;
    out.amps[1] *= scale;
  } else {
    out.amps[0] = 0.0;
    out.amps[1] = 0.0;
    ev.suppressed = true;
  }
  record.slots.push_back(ev);
  return out;
}

struct AttackConfig {
  AttackKind kind = AttackKind::NONE;
  InterceptResendConfig intercept;
  PnsConfig pns;
  UsdConfig usd;

  void validate() const {
    intercept.validate();
    usd.validate();
  }
};

}  // namespace qkd::attacks
