#include <catch2/catch.hpp>

#include <cmath>
#include <set>

#include "qkdsim/fastpath.hpp"
#include "qkdsim/protocols.hpp"

using namespace qkd;
using namespace qkd::protocols;
using photonics::Basis;

namespace {

SessionConfig single_photon_cfg(Protocol p, std::uint64_t n, std::uint64_t seed) {
  SessionConfig cfg;
  cfg.protocol = p;
  cfg.n_pulses = n;
  cfg.seed = seed;
  cfg.source.mu_by_class = {0.0};
  cfg.source.single_photon = true;
  cfg.class_probabilities = {1.0};
  return cfg;
}

SessionConfig decoy_cfg(std::uint64_t n, std::uint64_t seed) {
  SessionConfig cfg;
  cfg.protocol = Protocol::BB84_DECOY;
  cfg.n_pulses = n;
  cfg.seed = seed;
  cfg.source.mu_by_class = {0.0, 0.1, 0.5};
  cfg.class_probabilities = {0.1, 0.3, 0.6};
  return cfg;
}

}  // namespace

TEST_CASE("lossless ideal BB84 clicks on every pulse", "[protocols]") {
  auto cfg = single_photon_cfg(Protocol::BB84, 1000, 1);
  const auto res = run_quantum_phase(cfg, {}, {});
  for (const auto& r : res.bob) REQUIRE(r.outcome != photonics::Outcome::NONE);
}

TEST_CASE("poisson thinning sets the click fraction", "[protocols]") {
  SessionConfig cfg;
  cfg.protocol = Protocol::BB84;
  cfg.n_pulses = 500000;
  cfg.seed = 2;
  cfg.source.mu_by_class = {0.1};
  cfg.class_probabilities = {1.0};
  photonics::ChannelModel ch;
  ch.loss_db = 10.0;
  const auto res = run_quantum_phase(cfg, ch, {});
  std::size_t clicks = 0;
  for (const auto& r : res.bob) clicks += r.outcome != photonics::Outcome::NONE;
  const double expect = 1.0 - std::exp(-0.01);
  REQUIRE(static_cast<double>(clicks) / cfg.n_pulses == Approx(expect).epsilon(0.1));
}

TEST_CASE("bb84 sifted fraction is one half", "[protocols]") {
  auto cfg = single_photon_cfg(Protocol::BB84, 100000, 3);
  const auto res = run_quantum_phase(cfg, {}, {});
  const auto [a, b] = sift(cfg.protocol, res.alice, res.bob);
  REQUIRE(a.bits.size() == b.bits.size());
  REQUIRE(static_cast<double>(a.bits.size()) / cfg.n_pulses == Approx(0.5).margin(0.01));
}

// Brute-force enumeration of SARG04: 4 announced pairs x 2 bits x 2
// measurement bases x Born outcomes.
static std::pair<double, double> enumerate_sarg() {
  double conclusive = 0.0, wrong = 0.0;
  int cases = 0;
  for (int pair = 0; pair < 4; ++pair)
    for (int bit = 0; bit < 2; ++bit) {
      const auto sent = sarg_bloch(sarg_pair_state(pair, bit));
      for (Basis basis : {Basis::X, Basis::Y}) {
        const double p0 = photonics::born_p0(sent, photonics::measurement_axis(basis));
        for (int outcome : {0, 1}) {
          const double p = outcome == 0 ? p0 : 1.0 - p0;
          const auto decoded = sarg_decode(pair, basis, outcome);
          if (decoded) {
            conclusive += 0.5 * p;  // basis prior
            if (*decoded != bit) wrong += 0.5 * p;
          }
        }
      }
      ++cases;
    }
  return {conclusive / cases, wrong / cases};
}

TEST_CASE("sarg04 conclusive fraction matches the enumeration oracle", "[protocols]") {
  const auto [conclusive, wrong] = enumerate_sarg();
  REQUIRE(conclusive == Approx(0.25).epsilon(1e-12));
  REQUIRE(wrong == 0.0);  // ideal channel: conclusive implies correct

  auto cfg = single_photon_cfg(Protocol::SARG04, 100000, 4);
  const auto res = run_quantum_phase(cfg, {}, {});
  const auto [a, b] = sift(cfg.protocol, res.alice, res.bob);
  REQUIRE(static_cast<double>(a.bits.size()) / cfg.n_pulses == Approx(0.25).margin(0.01));
  for (std::size_t i = 0; i < a.bits.size(); ++i) REQUIRE(a.bits[i] == b.bits[i]);
}

TEST_CASE("forcing one basis makes sifted equal clicks", "[protocols]") {
  auto cfg = single_photon_cfg(Protocol::BB84, 20000, 5);
  cfg.basis_bias = 1.0;  // everyone measures X
  const auto res = run_quantum_phase(cfg, {}, {});
  const auto [a, b] = sift(cfg.protocol, res.alice, res.bob);
  std::size_t clicks = 0;
  for (const auto& r : res.bob) clicks += r.outcome != photonics::Outcome::NONE;
  REQUIRE(a.bits.size() == clicks);
}

TEST_CASE("sifted keys stay aligned and error free on an ideal channel", "[protocols]") {
  for (Protocol p : {Protocol::BB84, Protocol::SARG04, Protocol::DPS}) {
    auto cfg = single_photon_cfg(p, 20000, 6 + static_cast<int>(p));
    if (p == Protocol::DPS) cfg.dps_alpha = 0.5;
    const auto res = run_quantum_phase(cfg, {}, {});
    const auto [a, b] = sift(p, res.alice, res.bob);
    REQUIRE(a.bits.size() == b.bits.size());
    REQUIRE(a.slots == b.slots);
    REQUIRE(std::is_sorted(a.slots.begin(), a.slots.end()));
    std::size_t err = 0;
    for (std::size_t i = 0; i < a.bits.size(); ++i) err += a.bits[i] != b.bits[i];
    REQUIRE(err == 0);
    REQUIRE(a.bits.size() > 0);
  }
}

TEST_CASE("dps conclusive clicks land on detector 0 for a flat train", "[protocols]") {
  // relative phase 0 everywhere: only port 0 can click
  photonics::CoherentTrain t;
  t.amps.assign(1000, 0.8);
  const auto ports = photonics::interfere_train(t);
  Rng rng(7);
  std::size_t clicks0 = 0, clicks1 = 0;
  for (std::size_t k = 0; k < ports.port0.size(); ++k) {
    clicks0 += photonics::coherent_click(ports.port0[k], 1.0, 0.0, rng);
    clicks1 += photonics::coherent_click(ports.port1[k], 1.0, 0.0, rng);
  }
  REQUIRE(clicks1 == 0);
  REQUIRE(clicks0 > 0);
}

TEST_CASE("stats report zero error on a clean channel", "[protocols]") {
  auto cfg = single_photon_cfg(Protocol::BB84, 20000, 8);
  const auto res = run_quantum_phase(cfg, {}, {});
  const auto [a, b] = sift(cfg.protocol, res.alice, res.bob);
  std::vector<std::uint32_t> disclosed;
  for (std::uint32_t i = 0; i < a.bits.size(); i += 10) disclosed.push_back(i);
  const auto st = accumulate_stats(cfg, res.alice, res.bob, a, b, disclosed,
                                   res.emitted_photons);
  REQUIRE(st.qber() == 0.0);
  REQUIRE(st.sifted_len == a.bits.size());
  REQUIRE(st.per_class[0].test_bits == disclosed.size());
}

TEST_CASE("misalignment calibrates the error rate", "[protocols]") {
  auto cfg = single_photon_cfg(Protocol::BB84, 1000000, 9);
  photonics::ChannelModel ch;
  ch.misalignment_angle = photonics::misalignment_for_qber(0.02);
  const auto st = run_aggregate_session(cfg, ch, {});
  REQUIRE(st.qber() == Approx(0.02).margin(0.005));
}

TEST_CASE("vacuum class gain equals the dark-driven click rate", "[protocols]") {
  auto cfg = decoy_cfg(2000000, 10);
  photonics::DetectorModel det;
  det.dark = 1e-3;
  const auto st = run_aggregate_session(cfg, {}, det);
  // vacuum gain ~ 1-(1-d)^2 ~ 2d
  REQUIRE(st.gain(0) == Approx(2e-3).epsilon(0.1));
}

TEST_CASE("aggregate and slot kernels agree", "[protocols]") {
  auto cfg = decoy_cfg(1000000, 11);
  photonics::ChannelModel ch;
  ch.loss_db = 6.0;
  ch.misalignment_angle = photonics::misalignment_for_qber(0.01);
  photonics::DetectorModel det;
  det.eff0 = det.eff1 = 0.4;
  det.dark = 1e-5;

  const auto agg = run_aggregate_session(cfg, ch, det);

  cfg.seed = 12;
  const auto res = run_quantum_phase(cfg, ch, det);
  const auto [a, b] = sift(cfg.protocol, res.alice, res.bob);
  std::vector<std::uint32_t> all;
  for (std::uint32_t i = 0; i < a.bits.size(); ++i) all.push_back(i);
  const auto slot = accumulate_stats(cfg, res.alice, res.bob, a, b, all,
                                     res.emitted_photons);

  REQUIRE(agg.click_fraction() == Approx(slot.click_fraction()).epsilon(0.05));
  REQUIRE(agg.sift_fraction() == Approx(slot.sift_fraction()).epsilon(0.05));
  REQUIRE(agg.qber() == Approx(slot.qber()).margin(0.004));
  REQUIRE(agg.gain(2) == Approx(slot.gain(2)).epsilon(0.05));
}

TEST_CASE("decoy bound stays below the true single-photon yield", "[protocols]") {
  auto cfg = decoy_cfg(2000000, 13);
  photonics::ChannelModel ch;
  ch.loss_db = 10.0;
  ch.misalignment_angle = photonics::misalignment_for_qber(0.01);
  photonics::DetectorModel det;
  det.dark = 1e-5;
  const auto st = run_aggregate_session(cfg, ch, det);
  const auto bounds = decoy_bound(st, 0.5, 0.1);

  const auto& sig = st.per_class[st.signal_class()];
  const double true_y1 = static_cast<double>(sig.gt_single_clicks) /
                         static_cast<double>(sig.gt_single_sent);
  REQUIRE(bounds.y1_lower <= true_y1 * 1.02 + 3e-3);
  REQUIRE(bounds.y1_lower >= true_y1 * 0.7);  // vacuum+weak stays usefully tight
  // single-photon error bound must cover the injected optical error
  REQUIRE(bounds.e1_upper >= 0.01 * 0.8);
  REQUIRE(bounds.e1_upper < 0.1);
}

TEST_CASE("pns collapses the decoy bound", "[protocols]") {
  auto cfg = decoy_cfg(4000000, 14);
  photonics::ChannelModel ch;
  ch.loss_db = 10.0;
  photonics::DetectorModel det;
  det.dark = 1e-6;
  const auto honest = decoy_bound(run_aggregate_session(cfg, ch, det), 0.5, 0.1);

  cfg.seed = 15;
  attacks::AttackConfig atk;
  atk.kind = attacks::AttackKind::PNS;
  const auto attacked = decoy_bound(run_aggregate_session(cfg, ch, det, atk), 0.5, 0.1);
  REQUIRE(attacked.y1_lower < honest.y1_lower * 0.7);
}

TEST_CASE("decoy bound needs distinct intensities", "[protocols]") {
  auto cfg = decoy_cfg(1000, 16);
  const auto st = run_aggregate_session(cfg, {}, {});
  REQUIRE_THROWS_AS(decoy_bound(st, 0.5, 0.5), ConfigError);
  REQUIRE_THROWS_AS(decoy_bound(st, 0.5, 0.3), ConfigError);  // no such class
}

namespace {

SessionStats synthetic_stats(std::uint64_t n, double mu, std::uint64_t sent,
                             std::uint64_t clicks, std::uint64_t sifted,
                             std::uint64_t test_bits, std::uint64_t test_errors) {
  SessionStats st;
  st.protocol = Protocol::BB84;
  st.n_pulses = n;
  st.test_fraction = 0.0;
  ClassCounts cc;
  cc.mu = mu;
  cc.sent = sent;
  cc.clicks = clicks;
  cc.sifted = sifted;
  cc.test_bits = test_bits;
  cc.test_errors = test_errors;
  st.per_class = {cc};
  st.clicks_total = clicks;
  st.sifted_len = sifted;
  return st;
}

}  // namespace

TEST_CASE("key rate of an ideal single-photon session is one half", "[protocols]") {
  const auto st = synthetic_stats(1000, 1.0, 1000, 1000, 500, 100, 0);
  SecurityParams sec;
  sec.s = 0;
  sec.l = 0;
  REQUIRE(key_rate(st, std::nullopt, RateMode::SINGLE_PHOTON, 1.1, sec) == Approx(0.5));
}

TEST_CASE("worst-case rate clamps at the multi-photon crossover", "[protocols]") {
  // click rate below the multi-photon probability: everything to Eve
  const auto st = synthetic_stats(1000000, 0.5, 1000000, 500, 250, 100, 0);
  REQUIRE(key_rate(st, std::nullopt, RateMode::WCP_WORSTCASE, 1.1, {}) == 0.0);
}

TEST_CASE("key rate is monotone in error bound and leakage", "[protocols]") {
  auto cfg = decoy_cfg(1000000, 17);
  photonics::ChannelModel ch;
  ch.loss_db = 5.0;
  const auto st = run_aggregate_session(cfg, ch, {});
  auto bounds = decoy_bound(st, 0.5, 0.1);
  double prev = 2.0;
  for (double e1 : {0.0, 0.02, 0.05, 0.1, 0.3}) {
    auto b = bounds;
    b.e1_upper = e1;
    const double r = key_rate(st, b, RateMode::DECOY, 1.1, {});
    REQUIRE(r <= prev);
    prev = r;
  }
  prev = 2.0;
  for (double f : {0.8, 1.0, 1.3, 2.0}) {
    const double r = key_rate(st, bounds, RateMode::DECOY, f, {});
    REQUIRE(r <= prev);
    prev = r;
  }
}

TEST_CASE("decoy mode dominates the plain worst case", "[protocols]") {
  for (double loss : {3.0, 6.0, 10.0}) {
    auto cfg = decoy_cfg(2000000, 18 + static_cast<std::uint64_t>(loss));
    photonics::ChannelModel ch;
    ch.loss_db = loss;
    const auto st = run_aggregate_session(cfg, ch, {});
    const auto bounds = decoy_bound(st, 0.5, 0.1);
    const double r_decoy = key_rate(st, bounds, RateMode::DECOY, 1.1, {});
    const double r_wcp = key_rate(st, std::nullopt, RateMode::WCP_WORSTCASE, 1.1, {});
    REQUIRE(r_decoy >= r_wcp);
  }
}

TEST_CASE("sarg04 bound sits below bb84 at equal loss", "[protocols]") {
  // identical ideal single-photon statistics: only the conclusive
  // fraction differs (1/4 vs 1/2)
  photonics::ChannelModel ch;
  ch.loss_db = 3.0;
  auto bb = single_photon_cfg(Protocol::BB84, 200000, 19);
  auto sa = single_photon_cfg(Protocol::SARG04, 200000, 19);
  const auto res_b = run_quantum_phase(bb, ch, {});
  const auto res_s = run_quantum_phase(sa, ch, {});
  const auto [ab, bbk] = sift(bb.protocol, res_b.alice, res_b.bob);
  const auto [as, bsk] = sift(sa.protocol, res_s.alice, res_s.bob);
  std::vector<std::uint32_t> db, ds;
  for (std::uint32_t i = 0; i < ab.bits.size(); i += 10) db.push_back(i);
  for (std::uint32_t i = 0; i < as.bits.size(); i += 10) ds.push_back(i);
  const auto st_b =
      accumulate_stats(bb, res_b.alice, res_b.bob, ab, bbk, db, res_b.emitted_photons);
  const auto st_s =
      accumulate_stats(sa, res_s.alice, res_s.bob, as, bsk, ds, res_s.emitted_photons);
  const double r_b = key_rate(st_b, std::nullopt, RateMode::SINGLE_PHOTON, 1.1, {});
  const double r_s = key_rate(st_s, std::nullopt, RateMode::SINGLE_PHOTON, 1.1, {});
  REQUIRE(r_s < r_b);
  REQUIRE(r_s > 0.0);
}

TEST_CASE("protocol and signal model mismatches are rejected", "[protocols]") {
  auto cfg = single_photon_cfg(Protocol::DPS, 1000, 20);
  attacks::AttackConfig atk;
  atk.kind = attacks::AttackKind::PNS;
  REQUIRE_THROWS_AS(run_quantum_phase(cfg, {}, {}, atk), ConfigError);

  auto cfg2 = single_photon_cfg(Protocol::BB84, 1000, 21);
  attacks::AttackConfig atk2;
  atk2.kind = attacks::AttackKind::USD_SEQUENTIAL;
  REQUIRE_THROWS_AS(run_quantum_phase(cfg2, {}, {}, atk2), ConfigError);

  auto bad = decoy_cfg(1000, 22);
  bad.class_probabilities = {0.5, 0.5, 0.5};
  REQUIRE_THROWS_AS(run_quantum_phase(bad, {}, {}), ConfigError);
}
