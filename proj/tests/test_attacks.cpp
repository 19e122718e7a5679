#include <catch2/catch.hpp>

#include <cmath>

#include "qkdsim/attacks.hpp"
#include "qkdsim/fastpath.hpp"
#include "qkdsim/protocols.hpp"

using namespace qkd;
using namespace qkd::attacks;
using namespace qkd::protocols;
using photonics::Basis;

namespace {

SessionConfig ideal_bb84(std::uint64_t n, std::uint64_t seed) {
  SessionConfig cfg;
  cfg.protocol = Protocol::BB84;
  cfg.n_pulses = n;
  cfg.seed = seed;
  cfg.source.mu_by_class = {0.0};
  cfg.source.single_photon = true;
  cfg.class_probabilities = {1.0};
  return cfg;
}

double sifted_qber(const SessionConfig& cfg, const AttackConfig& atk) {
  photonics::ChannelModel ch;
  photonics::DetectorModel det;
  const auto res = run_quantum_phase(cfg, ch, det, atk);
  const auto [a, b] = sift(cfg.protocol, res.alice, res.bob);
  REQUIRE(a.bits.size() > 0);
  std::size_t err = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) err += a.bits[i] != b.bits[i];
  return static_cast<double>(err) / static_cast<double>(a.bits.size());
}

// Enumerate 4 BB84 states x 2 Eve bases x Born outcomes: the expected
// sifted QBER contribution of a full intercept-resend.
double enumerate_ir_qber() {
  double err = 0.0;
  int cases = 0;
  for (Basis ab : {Basis::X, Basis::Y})
    for (int bit : {0, 1})
      for (Basis eb : {Basis::X, Basis::Y}) {
        const auto sent = photonics::bb84_state(ab, bit);
        const auto eve_axis = photonics::measurement_axis(eb);
        const double p_eve0 = photonics::born_p0(sent, eve_axis);
        for (int eve_bit : {0, 1}) {
          const double pe = eve_bit == 0 ? p_eve0 : 1.0 - p_eve0;
          const auto fwd = photonics::bb84_state(eb, eve_bit);
          // Bob measures in Alice's basis (sifted slots only)
          const double p_bob0 =
              photonics::born_p0(fwd, photonics::measurement_axis(ab));
          const double p_wrong = bit == 0 ? 1.0 - p_bob0 : p_bob0;
          err += pe * p_wrong;
        }
        ++cases;
      }
  return err / cases;  // Eve basis and state priors are uniform
}

}  // namespace

TEST_CASE("intercept-resend enumeration oracle gives 1/4", "[attacks]") {
  REQUIRE(enumerate_ir_qber() == Approx(0.25).epsilon(1e-12));
}

TEST_CASE("full intercept-resend produces 25% sifted QBER", "[attacks]") {
  auto cfg = ideal_bb84(400000, 101);
  AttackConfig atk;
  atk.kind = AttackKind::INTERCEPT_RESEND;
  const double q = sifted_qber(cfg, atk);
  REQUIRE(q == Approx(0.25).margin(0.01));
}

TEST_CASE("matched-basis interception is transparent", "[attacks]") {
  auto cfg = ideal_bb84(50000, 102);
  AttackConfig atk;
  atk.kind = AttackKind::INTERCEPT_RESEND;
  atk.intercept.strategy = EveBasisStrategy::MATCH_ALICE;
  REQUIRE(sifted_qber(cfg, atk) == 0.0);
}

TEST_CASE("fractional interception mixes linearly", "[attacks]") {
  auto cfg = ideal_bb84(400000, 103);
  AttackConfig atk;
  atk.kind = AttackKind::INTERCEPT_RESEND;
  atk.intercept.fraction = 0.5;
  REQUIRE(sifted_qber(cfg, atk) == Approx(0.125).margin(0.01));
}

TEST_CASE("intercept-resend QBER never dips below the linear law", "[attacks]") {
  for (double f : {0.25, 0.75}) {
    auto cfg = ideal_bb84(200000, 104 + static_cast<std::uint64_t>(f * 100));
    AttackConfig atk;
    atk.kind = AttackKind::INTERCEPT_RESEND;
    atk.intercept.fraction = f;
    const double q = sifted_qber(cfg, atk);
    const double sigma = std::sqrt(0.25 * f * (1 - 0.25 * f) / 100000.0);
    REQUIRE(q >= 0.25 * f - 3 * sigma);
  }
}

TEST_CASE("pns keeps one photon and stores the rest", "[attacks]") {
  Rng rng(7);
  PnsPolicy pol;  // no blocking
  EveRecord rec;
  photonics::QubitPulse p;
  p.n = 3;
  p.bloch = {1, 0, 0};
  const auto fwd = pns_transform(p, pol, rec, rng);
  REQUIRE(fwd.pulse.n == 1);
  REQUIRE(fwd.bypass_channel);
  REQUIRE(rec.slots.back().stored_photons == 2);
  REQUIRE(rec.stored_total == 2);
}

TEST_CASE("pns stored copies decode perfectly after basis announcement", "[attacks]") {
  // all photons of a pulse share one Bloch vector, so a same-basis
  // measurement of the stored photons recovers the bit exactly
  Rng rng(8);
  PnsPolicy pol;
  EveRecord rec;
  for (int bit : {0, 1})
    for (Basis basis : {Basis::X, Basis::Y}) {
      photonics::QubitPulse p;
      p.n = 4;
      p.bloch = photonics::bb84_state(basis, bit);
      (void)pns_transform(p, pol, rec, rng);
      const auto& stored = *rec.slots.back().stored_state;
      const double p0 = photonics::born_p0(stored, photonics::measurement_axis(basis));
      REQUIRE((bit == 0 ? p0 : 1.0 - p0) == Approx(1.0));
    }
}

TEST_CASE("pns policy matches the honest click rate", "[attacks]") {
  // mu = 0.1 at 20 dB: multi-photon forwarding overshoots, so singles
  // are fully blocked and multis thinned (saturated policy)
  photonics::DetectorModel det;
  det.dark = 1e-6;
  const auto pol = solve_pns_policy({0.1}, {1.0}, 0.01, det);
  REQUIRE(pol.saturated);
  REQUIRE(pol.block_single == 1.0);
  REQUIRE(pol.forward_multi < 1.0);
  const double honest = 1.0 - (1.0 - det.dark) * (1.0 - det.dark) * std::exp(-0.1 * 0.01);
  REQUIRE(pol.expected_click_rate == Approx(honest).epsilon(1e-9));
}

TEST_CASE("pns empirical click rate tracks honest within 1%", "[attacks]") {
  SessionConfig cfg;
  cfg.protocol = Protocol::BB84;
  cfg.n_pulses = 100000000;
  cfg.seed = 105;
  cfg.source.mu_by_class = {0.1};
  cfg.class_probabilities = {1.0};
  photonics::ChannelModel ch;
  ch.loss_db = 20.0;
  photonics::DetectorModel det;
  det.dark = 1e-6;

  const auto honest = run_aggregate_session(cfg, ch, det);
  cfg.seed = 106;
  AttackConfig atk;
  atk.kind = AttackKind::PNS;
  const auto attacked = run_aggregate_session(cfg, ch, det, atk);
  REQUIRE(attacked.click_fraction() ==
          Approx(honest.click_fraction()).epsilon(0.01));
}

TEST_CASE("usd success probability law", "[attacks]") {
  REQUIRE(usd_success_probability(0.5) == Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));
  Rng rng(9);
  for (double mu : {0.1, 0.5, 1.0}) {
    EveRecord rec;
    photonics::CoherentTrain t;
    t.amps.assign(100000, std::sqrt(mu));
    UsdConfig ucfg;
    (void)usd_sequential(t, mu, ucfg, rec, rng);
    const double p = 1.0 - std::exp(-2.0 * mu);
    const double rate =
        static_cast<double>(rec.usd_successes) / static_cast<double>(rec.usd_trials);
    const double sigma = std::sqrt(p * (1 - p) / 100000.0);
    REQUIRE(std::fabs(rate - p) <= 3.0 * sigma + 1e-4);
  }
}

TEST_CASE("usd in the vanishing-amplitude limit forwards nothing", "[attacks]") {
  Rng rng(10);
  EveRecord rec;
  photonics::CoherentTrain t;
  t.amps.assign(5000, 1e-6);
  UsdConfig ucfg;
  const auto out = usd_sequential(t, 1e-12, ucfg, rec, rng);
  REQUIRE(rec.usd_successes == 0);
  for (const auto& a : out.amps) REQUIRE(std::abs(a) == 0.0);
}

TEST_CASE("usd block rule suppresses short runs", "[attacks]") {
  Rng rng(11);
  EveRecord rec;
  photonics::CoherentTrain t;
  t.amps.assign(20000, 0.5);
  UsdConfig ucfg;
  ucfg.block_len = 3;
  const auto out = usd_sequential(t, 0.25, ucfg, rec, rng);
  // forwarded pulses only appear inside success runs of length >= 3
  std::size_t i = 0;
  while (i < out.amps.size()) {
    if (std::abs(out.amps[i]) == 0.0) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < out.amps.size() && std::abs(out.amps[j]) > 0.0) ++j;
    REQUIRE(j - i >= 3);
    i = j;
  }
}

TEST_CASE("usd suppression trips the b92 monitor", "[attacks]") {
  // honest vs attacked B92 sessions at 20 dB; Eve's suppressions drive
  // the monitor-failure rate well above the honest baseline
  SessionConfig cfg;
  cfg.protocol = Protocol::B92;
  cfg.n_pulses = 40000;
  cfg.b92.alpha = 0.6;
  cfg.b92.beta = 30.0;
  cfg.b92.monitor_ratio = 0.45;  // monitor mean ~ 4 photons at 20 dB
  cfg.b92.m_lo = 1;
  cfg.b92.m_hi = 9;
  photonics::ChannelModel ch;
  ch.loss_db = 20.0;

  auto monitor_failure_rate = [&](const AttackConfig& atk, std::uint64_t seed) {
    auto c = cfg;
    c.seed = seed;
    const auto res = run_quantum_phase(c, ch, {}, atk);
    std::size_t fails = 0;
    for (const auto& r : res.bob) fails += !r.monitor_ok.value_or(false);
    return static_cast<double>(fails) / static_cast<double>(res.bob.size());
  };
  const double honest = monitor_failure_rate({}, 301);
  AttackConfig atk;
  atk.kind = AttackKind::USD_SEQUENTIAL;
  const double attacked = monitor_failure_rate(atk, 302);
  REQUIRE(honest < 0.2);
  REQUIRE(attacked >= 2.0 * honest);
}

TEST_CASE("attack-free runs are reproducible stream transforms", "[attacks]") {
  auto cfg = ideal_bb84(20000, 107);
  photonics::ChannelModel ch;
  ch.loss_db = 3.0;
  photonics::DetectorModel det;
  const auto r1 = run_quantum_phase(cfg, ch, det, {});
  const auto r2 = run_quantum_phase(cfg, ch, det, {});
  REQUIRE(r1.bob.size() == r2.bob.size());
  for (std::size_t i = 0; i < r1.bob.size(); ++i) {
    REQUIRE(r1.bob[i].outcome == r2.bob[i].outcome);
    REQUIRE(r1.alice.slots[i].bit == r2.alice.slots[i].bit);
  }
}
