#pragma once

// Protocol drivers for the quantum phase (BB84 with and without decoy
// classes, SARG04, B92, DPS), sifting, statistics aggregation, the
// vacuum+weak decoy bounds and the secret key rate bound.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "qkdsim/attacks.hpp"
#include "qkdsim/errors.hpp"
#include "qkdsim/mathx.hpp"
#include "qkdsim/photonics.hpp"
#include "qkdsim/rng.hpp"
#include "qkdsim/security.hpp"
#include "qkdsim/syncctl.hpp"

namespace qkd::protocols {

enum class Protocol : std::uint8_t { BB84, BB84_DECOY, SARG04, B92, DPS };

inline const char* protocol_name(Protocol p) {
  switch (p) {
    case Protocol::BB84: return "BB84";
    case Protocol::BB84_DECOY: return "BB84_DECOY";
    case Protocol::SARG04: return "SARG04";
    case Protocol::B92: return "B92";
    case Protocol::DPS: return "DPS";
  }
  return "?";
}

struct SessionConfig {
  Protocol protocol = Protocol::BB84;
  std::uint64_t n_pulses = 0;
  std::vector<double> class_probabilities;  // aligned with source.mu_by_class
  double test_fraction = 0.1;
  double basis_bias = 0.5;  // probability of choosing the X basis
  std::uint64_t seed = 1;

  photonics::SourceConfig source;
  double dps_alpha = 0.5;          // DPS per-pulse amplitude
  photonics::B92Receiver b92;      // B92 receiver; alpha/beta double as source amplitudes

  void validate() const {
    if (n_pulses < 1) throw ConfigError("session: n_pulses must be >= 1");
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
      throw ConfigError("session: test_fraction must lie in (0,1)");
    if (!(basis_bias >= 0.0 && basis_bias <= 1.0))
      throw ConfigError("session: basis_bias must lie in [0,1]");
    if (protocol == Protocol::B92 || protocol == Protocol::DPS) {
      if (protocol == Protocol::DPS && !(dps_alpha > 0.0))
        throw ConfigError("session: dps_alpha must be > 0");
      return;  // coherent-train protocols ignore the qubit source classes
    }
    source.validate();
    if (class_probabilities.size() != source.mu_by_class.size())
      throw ConfigError("session: class probability count must match intensity classes");
    double sum = 0.0;
    for (double p : class_probabilities) {
      if (!(p >= 0.0)) throw ConfigError("session: class probabilities must be >= 0");
      sum += p;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
      throw ConfigError("session: class probabilities must sum to 1");
    if (protocol == Protocol::BB84_DECOY) {
      bool has_vacuum = false;
      for (double mu : source.mu_by_class) has_vacuum |= mu == 0.0;
      if (!has_vacuum || source.mu_by_class.size() < 3)
        throw ConfigError("session: decoy mode needs vacuum, weak and signal classes");
    }
  }
};

// SARG04 state alphabet: H=+X, V=-X, R=+Y, L=-Y; the four announced
// pairs are a={H,R} b={R,V} c={V,L} d={L,H}, first entry encodes 0.
enum class SargState : std::uint8_t { H, V, R, L };

inline photonics::Bloch sarg_bloch(SargState s) {
  switch (s) {
    case SargState::H: return {1, 0, 0};
    case SargState::V: return {-1, 0, 0};
    case SargState::R: return {0, 1, 0};
    case SargState::L: return {0, -1, 0};
  }
  return {};
}

inline SargState sarg_pair_state(int pair, int bit) {
  static constexpr SargState table[4][2] = {
      {SargState::H, SargState::R},
      {SargState::R, SargState::V},
      {SargState::V, SargState::L},
      {SargState::L, SargState::H}};
  return table[pair & 3][bit & 1];
}

inline SargState sarg_orthogonal(SargState s) {
  switch (s) {
    case SargState::H: return SargState::V;
    case SargState::V: return SargState::H;
    case SargState::R: return SargState::L;
    case SargState::L: return SargState::R;
  }
  return s;
}

inline SargState sarg_outcome_state(photonics::Basis basis, int bit) {
  if (basis == photonics::Basis::X) return bit == 0 ? SargState::H : SargState::V;
  return bit == 0 ? SargState::R : SargState::L;
}

// Conclusive SARG04 decode: an outcome orthogonal to one pair member
// identifies the other.  Returns the decoded bit or nullopt.
inline std::optional<int> sarg_decode(int pair, photonics::Basis basis, int outcome_bit) {
  const SargState o = sarg_outcome_state(basis, outcome_bit);
  if (o == sarg_orthogonal(sarg_pair_state(pair, 0))) return 1;
  if (o == sarg_orthogonal(sarg_pair_state(pair, 1))) return 0;
  return std::nullopt;
}

struct RawSlot {
  std::uint8_t bit = 0;
  std::uint8_t basis_or_pair = 0;  // BB84: Basis; SARG04: pair id; DPS: pulse phase bit
  photonics::ClassId class_id = 0;
};

struct RawLog {
  Protocol protocol = Protocol::BB84;
  std::vector<RawSlot> slots;
};

enum class Owner : std::uint8_t { ALICE, BOB };

struct SiftedKey {
  std::vector<std::uint8_t> bits;
  std::vector<std::int64_t> slots;
  Owner owner = Owner::ALICE;
};

struct ClassCounts {
  double mu = 0.0;
  std::uint64_t sent = 0;
  std::uint64_t clicks = 0;
  std::uint64_t sifted = 0;
  std::uint64_t test_bits = 0;
  std::uint64_t test_errors = 0;
  // simulator-internal ground truth for oracle comparisons
  std::uint64_t gt_single_sent = 0;
  std::uint64_t gt_single_clicks = 0;
};

struct SessionStats {
  Protocol protocol = Protocol::BB84;
  std::uint64_t n_pulses = 0;
  double test_fraction = 0.0;
  double basis_bias = 0.5;
  std::vector<ClassCounts> per_class;
  std::uint64_t clicks_total = 0;
  std::uint64_t sifted_len = 0;
  std::uint64_t sifted_basis_x = 0;
  std::uint64_t sifted_basis_y = 0;

  double gain(std::size_t c) const {
    const auto& cc = per_class.at(c);
    return cc.sent ? static_cast<double>(cc.clicks) / static_cast<double>(cc.sent) : 0.0;
  }
  double error_rate(std::size_t c) const {
    const auto& cc = per_class.at(c);
    return cc.test_bits ? static_cast<double>(cc.test_errors) / static_cast<double>(cc.test_bits)
                        : 0.0;
  }
  double sift_fraction() const {
    return n_pulses ? static_cast<double>(sifted_len) / static_cast<double>(n_pulses) : 0.0;
  }
  double click_fraction() const {
    return n_pulses ? static_cast<double>(clicks_total) / static_cast<double>(n_pulses) : 0.0;
  }
  std::size_t signal_class() const {
    std::size_t best = 0;
    for (std::size_t c = 1; c < per_class.size(); ++c)
      if (per_class[c].mu > per_class[best].mu) best = c;
    return best;
  }
  double qber() const {
    std::uint64_t t = 0, e = 0;
    for (const auto& cc : per_class) {
      t += cc.test_bits;
      e += cc.test_errors;
    }
    return t ? static_cast<double>(e) / static_cast<double>(t) : 0.0;
  }
};

struct QuantumPhaseResult {
  RawLog alice;
  std::vector<photonics::DetectionRecord> bob;
  attacks::EveRecord eve;
  std::vector<std::uint16_t> emitted_photons;  // ground truth per slot
};

namespace detail {

inline photonics::ClassId draw_class(const std::vector<double>& probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t c = 0; c < probs.size(); ++c) {
    acc += probs[c];
    if (u < acc) return static_cast<photonics::ClassId>(c);
  }
  return static_cast<photonics::ClassId>(probs.size() - 1);
}

}  // namespace detail

// Quantum transmission for the qubit protocols (BB84 family, SARG04).
inline QuantumPhaseResult run_qubit_phase(const SessionConfig& cfg,
                                          const photonics::ChannelModel& channel,
                                          const photonics::DetectorModel& det,
                                          const attacks::AttackConfig& attack) {
  using photonics::Basis;
  Rng master(cfg.seed);
  Rng proto_rng = master.fork(1);
  Rng src_rng = master.fork(2);
  Rng atk_rng = master.fork(3);
  Rng ch_rng = master.fork(4);
  Rng det_rng = master.fork(5);

  std::optional<attacks::PnsPolicy> pns;
  if (attack.kind == attacks::AttackKind::PNS)
    pns = attacks::solve_pns_policy(cfg.source.mu_by_class, cfg.class_probabilities,
                                    channel.transmittance(), det,
                                    attack.pns.target_click_rate);

  QuantumPhaseResult res;
  res.alice.protocol = cfg.protocol;
  res.alice.slots.reserve(cfg.n_pulses);
  res.bob.reserve(cfg.n_pulses);
  res.emitted_photons.reserve(cfg.n_pulses);
  if (pns) res.eve.saturated = pns->infeasible;

  photonics::DetectorPairState det_state;
  for (std::uint64_t i = 0; i < cfg.n_pulses; ++i) {
    const auto slot = static_cast<std::int64_t>(i);
    RawSlot raw;
    raw.class_id = detail::draw_class(cfg.class_probabilities, proto_rng);
    raw.bit = proto_rng.bernoulli(0.5) ? 1 : 0;

    photonics::QubitPulse pulse;
    Basis alice_basis = Basis::X;
    if (cfg.protocol == Protocol::SARG04) {
      raw.basis_or_pair = static_cast<std::uint8_t>(proto_rng.below(4));
      const SargState st = sarg_pair_state(raw.basis_or_pair, raw.bit);
      pulse = photonics::emit_pulse_state(cfg.source, raw.class_id, sarg_bloch(st), src_rng);
      alice_basis = (st == SargState::H || st == SargState::V) ? Basis::X : Basis::Y;
    } else {
      alice_basis = proto_rng.bernoulli(cfg.basis_bias) ? Basis::X : Basis::Y;
      raw.basis_or_pair = static_cast<std::uint8_t>(alice_basis);
      pulse = photonics::emit_weak_pulse(cfg.source, raw.class_id, raw.bit, alice_basis, src_rng);
    }
    pulse.slot = slot;
    res.emitted_photons.push_back(
        static_cast<std::uint16_t>(std::min<std::uint64_t>(pulse.n, 65535)));

    attacks::QubitForward fwd{pulse, false};
    switch (attack.kind) {
      case attacks::AttackKind::INTERCEPT_RESEND:
        fwd = attacks::intercept_resend(pulse, attack.intercept, alice_basis, res.eve, atk_rng);
        break;
      case attacks::AttackKind::PNS:
        fwd = attacks::pns_transform(pulse, *pns, res.eve, atk_rng);
        break;
      case attacks::AttackKind::USD_SEQUENTIAL:
        throw ConfigError("run_quantum_phase: USD attack needs a coherent-train protocol");
      case attacks::AttackKind::NONE:
        break;
    }

    photonics::QubitPulse arrived;
    if (fwd.bypass_channel) {
      arrived = fwd.pulse;
    } else {
      const photonics::ChannelModel drifted = syncctl::apply_drift(channel, slot);
      arrived = photonics::channel_transmit(fwd.pulse, drifted, ch_rng);
    }

    const Basis bob_basis = det_rng.bernoulli(cfg.basis_bias) ? Basis::X : Basis::Y;
    auto rec = photonics::measure_qubit(arrived, photonics::measurement_axis(bob_basis), det,
                                        det_state, det_rng);
    rec.basis_used = bob_basis;
    res.bob.push_back(rec);
    res.alice.slots.push_back(raw);
  }
  return res;
}

// DPS quantum phase: one long train, detection on the n_pulses-1
// interference slots.
inline QuantumPhaseResult run_dps_phase(const SessionConfig& cfg,
                                        const photonics::ChannelModel& channel,
                                        const photonics::DetectorModel& det,
                                        const attacks::AttackConfig& attack) {
  if (cfg.n_pulses < 2) throw ConfigError("dps: need at least 2 pulses");
  Rng master(cfg.seed);
  Rng proto_rng = master.fork(1);
  Rng atk_rng = master.fork(3);
  Rng det_rng = master.fork(5);

  QuantumPhaseResult res;
  res.alice.protocol = Protocol::DPS;
  photonics::CoherentTrain train;
  train.amps.reserve(cfg.n_pulses);
  int phase = 0;
  for (std::uint64_t i = 0; i < cfg.n_pulses; ++i) {
    if (i == 0)
      phase = proto_rng.bernoulli(0.5) ? 1 : 0;
    else
      phase ^= proto_rng.bernoulli(0.5) ? 1 : 0;  // random data bits
    RawSlot raw;
    raw.basis_or_pair = static_cast<std::uint8_t>(phase);
    raw.bit = 0;  // data bits are relative phases, recovered in sifting
    res.alice.slots.push_back(raw);
    train.amps.push_back(phase ? -cfg.dps_alpha : cfg.dps_alpha);
  }

  if (attack.kind == attacks::AttackKind::USD_SEQUENTIAL) {
    train = attacks::usd_sequential(train, cfg.dps_alpha * cfg.dps_alpha, attack.usd,
                                    res.eve, atk_rng, channel.transmittance());
  } else if (attack.kind != attacks::AttackKind::NONE) {
    throw ConfigError("dps: only the sequential USD attack applies");
  } else {
    const double amp_scale = std::sqrt(channel.transmittance());
    for (auto& a : train.amps) a *= amp_scale;
  }

  const auto ports = photonics::interfere_train(train);
  for (std::size_t k = 0; k < ports.port0.size(); ++k) {
    const bool f0 = photonics::coherent_click(ports.port0[k], det.eff0, det.dark, det_rng);
    const bool f1 = photonics::coherent_click(ports.port1[k], det.eff1, det.dark, det_rng);
    photonics::DetectionRecord rec;
    rec.slot = static_cast<std::int64_t>(k);
    rec.outcome = photonics::detail::resolve_clicks(
        f0, f1, photonics::DoubleClickPolicy::DISCARD, det_rng);
    res.bob.push_back(rec);
  }
  return res;
}

// B92 quantum phase: per-slot two-mode signal, three-detector receiver.
inline QuantumPhaseResult run_b92_phase(const SessionConfig& cfg,
                                        const photonics::ChannelModel& channel,
                                        const attacks::AttackConfig& attack) {
  cfg.b92.validate();
  Rng master(cfg.seed);
  Rng proto_rng = master.fork(1);
  Rng atk_rng = master.fork(3);
  Rng det_rng = master.fork(5);

  QuantumPhaseResult res;
  res.alice.protocol = Protocol::B92;
  const double amp_scale = std::sqrt(channel.transmittance());
  for (std::uint64_t i = 0; i < cfg.n_pulses; ++i) {
    RawSlot raw;
    raw.bit = proto_rng.bernoulli(0.5) ? 1 : 0;
    res.alice.slots.push_back(raw);

    photonics::CoherentTrain sig;
    sig.amps = {raw.bit ? -cfg.b92.alpha : cfg.b92.alpha, cfg.b92.beta};

    if (attack.kind == attacks::AttackKind::USD_SEQUENTIAL) {
      sig = attacks::usd_b92(sig, cfg.b92.alpha * cfg.b92.alpha, res.eve, atk_rng,
                             channel.transmittance());
    } else if (attack.kind != attacks::AttackKind::NONE) {
      throw ConfigError("b92: only the sequential USD attack applies");
    } else {
      sig.amps[0] *= amp_scale;
      sig.amps[1] *= amp_scale;
    }
    res.bob.push_back(photonics::b92_measure(sig, cfg.b92, static_cast<std::int64_t>(i),
                                             det_rng));
  }
  return res;
}

inline QuantumPhaseResult run_quantum_phase(const SessionConfig& cfg,
                                            const photonics::ChannelModel& channel,
                                            const photonics::DetectorModel& det,
                                            const attacks::AttackConfig& attack = {}) {
  cfg.validate();
  channel.validate();
  det.validate();
  attack.validate();
  switch (cfg.protocol) {
    case Protocol::DPS: return run_dps_phase(cfg, channel, det, attack);
    case Protocol::B92: return run_b92_phase(cfg, channel, attack);
    default: return run_qubit_phase(cfg, channel, det, attack);
  }
}

// ------------------------------------------------------------- sifting

inline std::pair<SiftedKey, SiftedKey> sift(Protocol protocol, const RawLog& alice,
                                            const std::vector<photonics::DetectionRecord>& bob) {
  using photonics::Outcome;
  SiftedKey a, b;
  a.owner = Owner::ALICE;
  b.owner = Owner::BOB;
  const auto conclusive_bit = [](Outcome o) -> std::optional<int> {
    if (o == Outcome::BIT0) return 0;
    if (o == Outcome::BIT1) return 1;
    return std::nullopt;
  };

  switch (protocol) {
    case Protocol::BB84:
    case Protocol::BB84_DECOY: {
      if (alice.slots.size() != bob.size()) throw ConfigError("sift: misaligned logs");
      for (std::size_t i = 0; i < bob.size(); ++i) {
        const auto bit = conclusive_bit(bob[i].outcome);
        if (!bit) continue;
        if (static_cast<photonics::Basis>(alice.slots[i].basis_or_pair) != bob[i].basis_used)
          continue;
        a.bits.push_back(alice.slots[i].bit);
        b.bits.push_back(static_cast<std::uint8_t>(*bit));
        a.slots.push_back(bob[i].slot);
        b.slots.push_back(bob[i].slot);
      }
      break;
    }
    case Protocol::SARG04: {
      if (alice.slots.size() != bob.size()) throw ConfigError("sift: misaligned logs");
      for (std::size_t i = 0; i < bob.size(); ++i) {
        const auto bit = conclusive_bit(bob[i].outcome);
        if (!bit) continue;
        const auto decoded = sarg_decode(alice.slots[i].basis_or_pair, bob[i].basis_used, *bit);
        if (!decoded) continue;
        a.bits.push_back(alice.slots[i].bit);
        b.bits.push_back(static_cast<std::uint8_t>(*decoded));
        a.slots.push_back(bob[i].slot);
        b.slots.push_back(bob[i].slot);
      }
      break;
    }
    case Protocol::B92: {
      if (alice.slots.size() != bob.size()) throw ConfigError("sift: misaligned logs");
      for (std::size_t i = 0; i < bob.size(); ++i) {
        const auto bit = conclusive_bit(bob[i].outcome);
        if (!bit) continue;
        if (!bob[i].monitor_ok.value_or(false)) continue;
        a.bits.push_back(alice.slots[i].bit);
        b.bits.push_back(static_cast<std::uint8_t>(*bit));
        a.slots.push_back(bob[i].slot);
        b.slots.push_back(bob[i].slot);
      }
      break;
    }
    case Protocol::DPS: {
      if (alice.slots.size() != bob.size() + 1) throw ConfigError("sift: misaligned logs");
      for (std::size_t k = 0; k < bob.size(); ++k) {
        const auto bit = conclusive_bit(bob[k].outcome);
        if (!bit) continue;
        const int alice_bit =
            alice.slots[k].basis_or_pair ^ alice.slots[k + 1].basis_or_pair;
        a.bits.push_back(static_cast<std::uint8_t>(alice_bit));
        b.bits.push_back(static_cast<std::uint8_t>(*bit));
        a.slots.push_back(bob[k].slot);
        b.slots.push_back(bob[k].slot);
      }
      break;
    }
  }
  return {std::move(a), std::move(b)};
}

// --------------------------------------------------------- statistics

// Aggregate per-class gains and (disclosed-only) error rates.
// disclosed holds positions into the sifted keys whose bits were made
// public as test bits.
inline SessionStats accumulate_stats(const SessionConfig& cfg, const RawLog& alice,
                                     const std::vector<photonics::DetectionRecord>& bob,
                                     const SiftedKey& sifted_a, const SiftedKey& sifted_b,
                                     const std::vector<std::uint32_t>& disclosed,
                                     const std::vector<std::uint16_t>& emitted_photons = {}) {
  if (cfg.test_fraction > 0.0 && disclosed.empty() && !sifted_a.bits.empty())
    throw ConfigError("accumulate_stats: empty test set");
  SessionStats st;
  st.protocol = cfg.protocol;
  st.n_pulses = cfg.n_pulses;
  st.test_fraction = cfg.test_fraction;
  st.basis_bias = cfg.basis_bias;
  const std::size_t n_classes =
      cfg.source.mu_by_class.empty() ? 1 : cfg.source.mu_by_class.size();
  st.per_class.resize(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c)
    st.per_class[c].mu = cfg.source.mu_by_class.empty() ? 0.0 : cfg.source.mu_by_class[c];

  const bool qubit_protocol = cfg.protocol != Protocol::B92 && cfg.protocol != Protocol::DPS;
  for (std::size_t i = 0; i < alice.slots.size(); ++i) {
    auto& cc = st.per_class[alice.slots[i].class_id];
    cc.sent += 1;
    if (qubit_protocol && i < emitted_photons.size() && emitted_photons[i] == 1)
      cc.gt_single_sent += 1;
  }
  for (std::size_t i = 0; i < bob.size(); ++i) {
    if (bob[i].outcome == photonics::Outcome::NONE) continue;
    st.clicks_total += 1;
    const auto cls = qubit_protocol ? alice.slots[i].class_id : 0;
    st.per_class[cls].clicks += 1;
    if (qubit_protocol && i < emitted_photons.size() && emitted_photons[i] == 1)
      st.per_class[cls].gt_single_clicks += 1;
  }

  st.sifted_len = sifted_a.bits.size();
  for (std::size_t k = 0; k < sifted_a.slots.size(); ++k) {
    const auto slot = static_cast<std::size_t>(sifted_a.slots[k]);
    if (qubit_protocol) {
      st.per_class[alice.slots[slot].class_id].sifted += 1;
      if (bob[slot].basis_used == photonics::Basis::X)
        st.sifted_basis_x += 1;
      else
        st.sifted_basis_y += 1;
    } else {
      st.per_class[0].sifted += 1;
    }
  }
  for (std::uint32_t pos : disclosed) {
    if (pos >= sifted_a.bits.size()) throw ConfigError("accumulate_stats: bad test index");
    const auto slot = static_cast<std::size_t>(sifted_a.slots[pos]);
    auto& cc = st.per_class[qubit_protocol ? alice.slots[slot].class_id : 0];
    cc.test_bits += 1;
    cc.test_errors += sifted_a.bits[pos] != sifted_b.bits[pos];
  }
  return st;
}

// -------------------------------------------------------- decoy bounds

struct DecoyBounds {
  double y1_lower = 0.0;   // single-photon yield lower bound
  double e1_upper = 0.5;   // single-photon error upper bound
  double q1_lower = 0.0;   // single-photon gain of the signal class
};

// Vacuum + weak-decoy analytic bounds.  The vacuum class pins the
// dark-count yield Y0, the weak class mu_decoy < mu_signal bounds the
// single-photon yield from below and its error rate from above.
inline DecoyBounds decoy_bound(const SessionStats& stats, double mu_signal, double mu_decoy) {
  std::optional<std::size_t> vac, weak, sig;
  for (std::size_t c = 0; c < stats.per_class.size(); ++c) {
    const double mu = stats.per_class[c].mu;
    if (mu == 0.0 && stats.per_class[c].sent > 0) vac = c;
    if (std::fabs(mu - mu_decoy) < 1e-12 && mu > 0.0) weak = c;
    if (std::fabs(mu - mu_signal) < 1e-12) sig = c;
  }
  if (!vac || !weak || !sig)
    throw ConfigError("decoy_bound: need vacuum, weak-decoy and signal classes");
  if (!(mu_decoy < mu_signal))
    throw ConfigError("decoy_bound: degenerate intensities (mu_decoy must be < mu_signal)");

  const double mu = mu_signal, nu = mu_decoy;
  const double y0 = stats.gain(*vac);
  const double q_mu = stats.gain(*sig);
  const double q_nu = stats.gain(*weak);
  const double e_nu = stats.error_rate(*weak);

  DecoyBounds b;
  double y1 = mu / (mu * nu - nu * nu) *
              (q_nu * std::exp(nu) - q_mu * std::exp(mu) * (nu * nu) / (mu * mu) -
               (mu * mu - nu * nu) / (mu * mu) * y0);
  y1 = std::clamp(y1, 0.0, 1.0);
  b.y1_lower = y1;
  b.q1_lower = y1 * mu * std::exp(-mu);
  if (y1 * nu > 1e-15) {
    double e1 = (e_nu * q_nu * std::exp(nu) - 0.5 * y0) / (y1 * nu);
    b.e1_upper = std::clamp(e1, 0.0, 0.5);
  } else {
    b.e1_upper = 0.5;
  }
  return b;
}

// ----------------------------------------------------------- key rate

enum class RateMode : std::uint8_t { SINGLE_PHOTON, WCP_WORSTCASE, DECOY };

inline double multi_photon_probability(double mu) {
  return 1.0 - std::exp(-mu) * (1.0 + mu);
}

// Secret key rate per pulse (GLLP shape): the sifted fraction times the
// single-photon term minus the error-correction cost, with a finite
// size margin of 2l + s bits over the whole session.  Clamped at zero.
inline double key_rate(const SessionStats& stats, const std::optional<DecoyBounds>& bounds,
                       RateMode mode, double leak_ec_factor, const SecurityParams& params) {
  const std::size_t sig = stats.signal_class();
  const auto& cc = stats.per_class[sig];
  if (cc.sent == 0 || cc.sifted == 0) return 0.0;
  const double q_mu = stats.gain(sig);
  const double e_mu = stats.error_rate(sig);
  const double sift_frac =
      static_cast<double>(cc.sifted) / static_cast<double>(stats.n_pulses);

  double single_fraction = 1.0;  // fraction of sifted clicks credited as single photon
  double e1 = e_mu;
  switch (mode) {
    case RateMode::SINGLE_PHOTON:
      break;
    case RateMode::WCP_WORSTCASE: {
      const double p_multi = multi_photon_probability(cc.mu);
      if (q_mu <= p_multi) return 0.0;
      single_fraction = (q_mu - p_multi) / q_mu;
      e1 = std::min(0.5, e_mu / single_fraction);
      break;
    }
    case RateMode::DECOY: {
      if (!bounds) throw ConfigError("key_rate: decoy mode needs decoy bounds");
      single_fraction = std::min(1.0, bounds->q1_lower / q_mu);
      e1 = bounds->e1_upper;
      break;
    }
  }
  double rate = sift_frac * (1.0 - stats.test_fraction) *
                (single_fraction * (1.0 - binary_entropy(e1)) -
                 leak_ec_factor * binary_entropy(e_mu));
  rate -= (2.0 * params.l + params.s) / static_cast<double>(stats.n_pulses);
  return rate > 0.0 ? rate : 0.0;
}

}  // namespace qkd::protocols
