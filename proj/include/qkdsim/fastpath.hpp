#pragma once

// Aggregate BB84 session kernel.  When a session has no per-slot state
// (no afterpulsing, no drift, symmetric detector efficiencies, attack
// none or PNS) every pulse is i.i.d., so per-class/per-photon-number
// outcome counts are sufficient statistics and can be sampled directly
// from exact binomial splits instead of looping over slots.  Used by
// the distance sweeps and rate-model provisioning where slot loops
// would be prohibitively slow.

#include <cmath>
#include <cstdint>
#include <vector>

#include "qkdsim/attacks.hpp"
#include "qkdsim/errors.hpp"
#include "qkdsim/protocols.hpp"
#include "qkdsim/rng.hpp"

namespace qkd::protocols {

namespace detail {

// Joint firing probabilities of the two detectors for n identically
// polarized photons with per-photon detect-at-correct probability a and
// detect-at-wrong probability b, dark probability d per detector.
struct Cells {
  double both = 0, correct_only = 0, wrong_only = 0, none = 1;
  double click() const { return 1.0 - none; }
  // sifted-error weight: wrong-only plus half of the double clicks
  double error() const { return wrong_only + 0.5 * both; }
};

inline Cells qubit_cells(int n, double a, double b, double d) {
  const double p00 = std::pow(1.0 - a - b, n);
  const double p_noc = std::pow(1.0 - a, n);
  const double p_now = std::pow(1.0 - b, n);
  const double q10 = p_now - p00;  // photon fire: correct only
  const double q01 = p_noc - p00;
  const double nd = 1.0 - d;
  Cells c;
  c.none = p00 * nd * nd;
  c.correct_only = (q10 + p00 * d) * nd;
  c.wrong_only = (q01 + p00 * d) * nd;
  c.both = 1.0 - c.none - c.correct_only - c.wrong_only;
  return c;
}

struct Branch {
  double prob = 0;   // probability within the class
  Cells matched;     // basis-matched cells
  Cells mismatched;  // conjugate-basis cells
  bool single_emission = false;
};

inline void check_aggregate_support(const SessionConfig& cfg,
                                    const photonics::ChannelModel& channel,
                                    const photonics::DetectorModel& det,
                                    const attacks::AttackConfig& attack) {
  if (cfg.protocol != Protocol::BB84 && cfg.protocol != Protocol::BB84_DECOY)
    throw ConfigError("aggregate kernel: BB84-family protocols only");
  if (det.eff0 != det.eff1)
    throw ConfigError("aggregate kernel: needs symmetric detector efficiencies");
  if (det.afterpulse_p0 != 0.0)
    throw ConfigError("aggregate kernel: afterpulsing needs the slot-level path");
  if (channel.drift)
    throw ConfigError("aggregate kernel: drift needs the slot-level path");
  if (det.double_click_policy != photonics::DoubleClickPolicy::RANDOM_BIT)
    throw ConfigError("aggregate kernel: DISCARD policy needs the slot-level path");
  if (attack.kind != attacks::AttackKind::NONE && attack.kind != attacks::AttackKind::PNS)
    throw ConfigError("aggregate kernel: only the PNS attack is supported");
}

inline std::vector<Branch> class_branches(double mu, bool single_photon, double eta,
                                          double misalignment, const photonics::DetectorModel& det,
                                          const attacks::PnsPolicy* pns) {
  const double eff = det.eff0, d = det.dark;
  const double c_ok = std::cos(misalignment / 2.0) * std::cos(misalignment / 2.0);
  std::vector<Branch> out;

  if (pns) {
    // Eve's line is lossless and error free: strata collapse to
    // "one clean photon arrives" vs "vacuum arrives".
    const Cells clean1_m = qubit_cells(1, eff, 0.0, d);
    const Cells clean1_mm = qubit_cells(1, eff * 0.5, eff * 0.5, d);
    const Cells vac = qubit_cells(0, 0.0, 0.0, d);
    const double p0 = single_photon ? 0.0 : std::exp(-mu);
    const double p1 = single_photon ? 1.0 : mu * std::exp(-mu);
    const double pm = 1.0 - p0 - p1;
    out.push_back({p0, vac, vac, false});
    out.push_back({p1 * (1.0 - pns->block_single), clean1_m, clean1_mm, true});
    out.push_back({p1 * pns->block_single, vac, vac, true});
    out.push_back({pm * pns->forward_multi, clean1_m, clean1_mm, false});
    out.push_back({pm * (1.0 - pns->forward_multi), vac, vac, false});
    return out;
  }

  const double a_m = eta * eff * c_ok, b_m = eta * eff * (1.0 - c_ok);
  const double a_mm = eta * eff * 0.5;
  if (single_photon) {
    out.push_back({1.0, qubit_cells(1, a_m, b_m, d), qubit_cells(1, a_mm, a_mm, d), true});
    return out;
  }
  const int kmax = static_cast<int>(mu + 12.0 * std::sqrt(mu + 1.0) + 4.0);
  double tail = 1.0;
  double pmf = std::exp(-mu);
  for (int n = 0; n <= kmax; ++n) {
    const double p = n == kmax ? tail : pmf;  // residual tail lumped into the last stratum
    out.push_back({p, qubit_cells(n, a_m, b_m, d), qubit_cells(n, a_mm, a_mm, d), n == 1});
    tail -= pmf;
    pmf *= mu / (n + 1.0);
  }
  return out;
}

}  // namespace detail

// Draw an exact aggregate SessionStats for a BB84-family session.  The
// error tallies cover every sifted bit (census disclosure) rather than
// a sampled test subset; the configured test_fraction is carried along
// for the rate formula's overhead term.
inline SessionStats run_aggregate_session(const SessionConfig& cfg,
                                          const photonics::ChannelModel& channel,
                                          const photonics::DetectorModel& det,
                                          const attacks::AttackConfig& attack = {}) {
  cfg.validate();
  detail::check_aggregate_support(cfg, channel, det, attack);
  Rng rng(cfg.seed);

  std::optional<attacks::PnsPolicy> pns;
  if (attack.kind == attacks::AttackKind::PNS)
    pns = attacks::solve_pns_policy(cfg.source.mu_by_class, cfg.class_probabilities,
                                    channel.transmittance(), det,
                                    attack.pns.target_click_rate);

  SessionStats st;
  st.protocol = cfg.protocol;
  st.n_pulses = cfg.n_pulses;
  st.test_fraction = cfg.test_fraction;
  st.basis_bias = cfg.basis_bias;
  st.per_class.resize(cfg.source.mu_by_class.size());
  const double qb = cfg.basis_bias * cfg.basis_bias +
                    (1.0 - cfg.basis_bias) * (1.0 - cfg.basis_bias);

  std::uint64_t left = cfg.n_pulses;
  double prob_left = 1.0;
  for (std::size_t c = 0; c < cfg.source.mu_by_class.size(); ++c) {
    auto& cc = st.per_class[c];
    cc.mu = cfg.source.mu_by_class[c];
    const double pc = cfg.class_probabilities[c];
    const std::uint64_t sent =
        c + 1 == cfg.source.mu_by_class.size() ? left : rng.binomial(left, pc / prob_left);
    left -= sent;
    prob_left -= pc;
    cc.sent = sent;

    const auto branches = detail::class_branches(cc.mu, cfg.source.single_photon,
                                                 channel.transmittance(),
                                                 channel.misalignment_angle, det,
                                                 pns ? &*pns : nullptr);
    std::uint64_t b_left = sent;
    double b_prob_left = 1.0;
    for (const auto& br : branches) {
      const std::uint64_t cnt = (&br == &branches.back())
                                    ? b_left
                                    : rng.binomial(b_left, br.prob / b_prob_left);
      b_left -= cnt;
      b_prob_left -= br.prob;
      if (cnt == 0) continue;

      const std::uint64_t matched = rng.binomial(cnt, qb);
      // matched-basis outcome cells
      const auto& m = br.matched;
      const std::uint64_t n_both = rng.binomial(matched, m.both);
      std::uint64_t rest = matched - n_both;
      double p_rest = 1.0 - m.both;
      const std::uint64_t n_corr =
          p_rest > 0 ? rng.binomial(rest, m.correct_only / p_rest) : 0;
      rest -= n_corr;
      p_rest -= m.correct_only;
      const std::uint64_t n_wrong =
          p_rest > 0 ? rng.binomial(rest, m.wrong_only / p_rest) : 0;
      const std::uint64_t sifted = n_both + n_corr + n_wrong;
      const std::uint64_t errors = n_wrong + rng.binomial(n_both, 0.5);

      const std::uint64_t mm_clicks = rng.binomial(cnt - matched, br.mismatched.click());

      cc.clicks += sifted + mm_clicks;
      cc.sifted += sifted;
      cc.test_bits += sifted;
      cc.test_errors += errors;
      st.clicks_total += sifted + mm_clicks;
      st.sifted_len += sifted;
      if (br.single_emission) {
        cc.gt_single_sent += cnt;
        cc.gt_single_clicks += sifted + mm_clicks;
      }
    }
  }
  const std::uint64_t sx = rng.binomial(st.sifted_len, cfg.basis_bias * cfg.basis_bias /
                                                           (qb > 0 ? qb : 1.0));
  st.sifted_basis_x = sx;
  st.sifted_basis_y = st.sifted_len - sx;
  return st;
}

// Expected-value twin of run_aggregate_session: fills a SessionStats
// with rounded expected counts over a large virtual pulse budget.
// Drives the provisioning rate model and per-point mu optimization.
inline SessionStats expected_session_stats(const SessionConfig& cfg,
                                           const photonics::ChannelModel& channel,
                                           const photonics::DetectorModel& det,
                                           const attacks::AttackConfig& attack = {},
                                           double virtual_pulses = 1e12) {
  cfg.validate();
  detail::check_aggregate_support(cfg, channel, det, attack);

  std::optional<attacks::PnsPolicy> pns;
  if (attack.kind == attacks::AttackKind::PNS)
    pns = attacks::solve_pns_policy(cfg.source.mu_by_class, cfg.class_probabilities,
                                    channel.transmittance(), det,
                                    attack.pns.target_click_rate);

  SessionStats st;
  st.protocol = cfg.protocol;
  st.n_pulses = static_cast<std::uint64_t>(virtual_pulses);
  st.test_fraction = cfg.test_fraction;
  st.basis_bias = cfg.basis_bias;
  st.per_class.resize(cfg.source.mu_by_class.size());
  const double qb = cfg.basis_bias * cfg.basis_bias +
                    (1.0 - cfg.basis_bias) * (1.0 - cfg.basis_bias);

  for (std::size_t c = 0; c < cfg.source.mu_by_class.size(); ++c) {
    auto& cc = st.per_class[c];
    cc.mu = cfg.source.mu_by_class[c];
    const double sent = virtual_pulses * cfg.class_probabilities[c];
    cc.sent = static_cast<std::uint64_t>(std::llround(sent));
    const auto branches = detail::class_branches(cc.mu, cfg.source.single_photon,
                                                 channel.transmittance(),
                                                 channel.misalignment_angle, det,
                                                 pns ? &*pns : nullptr);
    double clicks = 0, sifted = 0, errors = 0, gt1 = 0, gt1c = 0;
    for (const auto& br : branches) {
      const double cnt = sent * br.prob;
      const double m_click = cnt * qb * br.matched.click();
      const double mm_click = cnt * (1.0 - qb) * br.mismatched.click();
      clicks += m_click + mm_click;
      sifted += m_click;
      errors += cnt * qb * br.matched.error();
      if (br.single_emission) {
        gt1 += cnt;
        gt1c += m_click + mm_click;
      }
    }
    cc.clicks = static_cast<std::uint64_t>(std::llround(clicks));
    cc.sifted = static_cast<std::uint64_t>(std::llround(sifted));
    cc.test_bits = cc.sifted;
    cc.test_errors = static_cast<std::uint64_t>(std::llround(errors));
    cc.gt_single_sent = static_cast<std::uint64_t>(std::llround(gt1));
    cc.gt_single_clicks = static_cast<std::uint64_t>(std::llround(gt1c));
    st.clicks_total += cc.clicks;
    st.sifted_len += cc.sifted;
  }
  st.sifted_basis_x = st.sifted_len / 2;
  st.sifted_basis_y = st.sifted_len - st.sifted_basis_x;
  return st;
}

}  // namespace qkd::protocols
