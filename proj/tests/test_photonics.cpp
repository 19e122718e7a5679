#include <catch2/catch.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "qkdsim/photonics.hpp"

using namespace qkd;
using namespace qkd::photonics;

TEST_CASE("vacuum class emits no photons", "[photonics]") {
  SourceConfig cfg;
  cfg.mu_by_class = {0.0};
  Rng rng(1);
  for (int i = 0; i < 1000; ++i)
    REQUIRE(emit_weak_pulse(cfg, 0, 0, Basis::X, rng).n == 0);
}

TEST_CASE("poissonian source mass at mu=0.5 and mu=0.1", "[photonics]") {
  SourceConfig cfg;
  cfg.mu_by_class = {0.5, 0.1};
  Rng rng(2);
  const int n = 1000000;
  int zeros = 0;
  for (int i = 0; i < n; ++i) zeros += emit_weak_pulse(cfg, 0, 0, Basis::X, rng).n == 0;
  REQUIRE(static_cast<double>(zeros) / n == Approx(std::exp(-0.5)).margin(0.005));

  int multi = 0;
  for (int i = 0; i < n; ++i) multi += emit_weak_pulse(cfg, 1, 0, Basis::X, rng).n >= 2;
  // P(n>=2) = 1 - e^-0.1 (1 + 0.1)
  REQUIRE(static_cast<double>(multi) / n ==
          Approx(1.0 - std::exp(-0.1) * 1.1).margin(0.0005));
}

TEST_CASE("unknown intensity class is a configuration error", "[photonics]") {
  SourceConfig cfg;
  cfg.mu_by_class = {0.5};
  Rng rng(3);
  REQUIRE_THROWS_AS(emit_weak_pulse(cfg, 7, 0, Basis::X, rng), ConfigError);
}

TEST_CASE("identity channel leaves the pulse unchanged", "[photonics]") {
  ChannelModel ch;  // 0 dB, no misalignment
  Rng rng(4);
  QubitPulse p;
  p.n = 3;
  p.bloch = {1, 0, 0};
  const auto out = channel_transmit(p, ch, rng);
  REQUIRE(out.n == 3);
  REQUIRE(out.bloch.x == Approx(1.0));
  REQUIRE(out.bloch.y == Approx(0.0).margin(1e-15));
}

TEST_CASE("channel survival rates at 10 dB and 3 dB", "[photonics]") {
  Rng rng(5);
  for (auto [loss, expect, margin] :
       {std::tuple{10.0, 0.1, 0.005}, std::tuple{3.0, std::pow(10.0, -0.3), 0.01}}) {
    ChannelModel ch;
    ch.loss_db = loss;
    REQUIRE(ch.transmittance() == Approx(expect).epsilon(1e-12));
    int survived = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      QubitPulse p;
      p.n = 1;
      survived += channel_transmit(p, ch, rng).n;
    }
    REQUIRE(static_cast<double>(survived) / n == Approx(expect).margin(margin));
  }
}

TEST_CASE("photon number is never increased by the channel", "[photonics]") {
  Rng rng(6);
  ChannelModel ch;
  ch.loss_db = 1.3;
  for (int i = 0; i < 2000; ++i) {
    QubitPulse p;
    p.n = static_cast<std::uint64_t>(rng.below(6));
    REQUIRE(channel_transmit(p, ch, rng).n <= p.n);
  }
}

TEST_CASE("eigenstate measurement is deterministic", "[photonics]") {
  DetectorModel det;
  DetectorPairState st;
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    QubitPulse p;
    p.n = 1;
    p.bloch = {1, 0, 0};
    p.slot = i;
    REQUIRE(measure_qubit(p, {1, 0, 0}, det, st, rng).outcome == Outcome::BIT0);
  }
}

TEST_CASE("conjugate basis gives a fair coin", "[photonics]") {
  DetectorModel det;
  DetectorPairState st;
  Rng rng(8);
  int zeros = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    QubitPulse p;
    p.n = 1;
    p.bloch = {1, 0, 0};
    p.slot = i;
    zeros += measure_qubit(p, {0, 1, 0}, det, st, rng).outcome == Outcome::BIT0;
  }
  REQUIRE(static_cast<double>(zeros) / n == Approx(0.5).margin(0.01));
}

TEST_CASE("dark counts dominate vacuum gates", "[photonics]") {
  DetectorModel det;
  det.dark = 1e-5;
  DetectorPairState st;
  Rng rng(9);
  std::int64_t clicks = 0;
  const std::int64_t n = 10000000;
  for (std::int64_t i = 0; i < n; ++i) {
    QubitPulse p;
    p.slot = i;
    if (measure_qubit(p, {1, 0, 0}, det, st, rng).outcome != Outcome::NONE) ++clicks;
  }
  // 1 - (1-d)^2 ~ 2e-5
  const double rate = static_cast<double>(clicks) / static_cast<double>(n);
  REQUIRE(rate == Approx(2e-5).epsilon(0.2));
}

TEST_CASE("born rule calibration over random states", "[photonics]") {
  Rng rng(10);
  DetectorModel det;
  for (int trial = 0; trial < 8; ++trial) {
    Bloch r{rng.normal(), rng.normal(), rng.normal()};
    const double nr = r.norm();
    r = {r.x / nr, r.y / nr, r.z / nr};
    Bloch a{rng.normal(), rng.normal(), rng.normal()};
    const double na = a.norm();
    a = {a.x / na, a.y / na, a.z / na};
    const double p = born_p0(r, a);
    DetectorPairState st;
    int zeros = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      QubitPulse pulse;
      pulse.n = 1;
      pulse.bloch = r;
      pulse.slot = i;
      zeros += measure_qubit(pulse, a, det, st, rng).outcome == Outcome::BIT0;
    }
    const double sigma = std::sqrt(std::max(p * (1 - p), 1e-12) / n);
    REQUIRE(std::fabs(static_cast<double>(zeros) / n - p) <= 3.0 * sigma + 1e-3);
  }
}

TEST_CASE("detector label symmetry", "[photonics]") {
  DetectorModel det;
  det.eff0 = det.eff1 = 0.8;
  Rng rng(11);
  auto outcome_rate = [&](Bloch state, Outcome want) {
    DetectorPairState st;
    int hits = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      QubitPulse p;
      p.n = 1;
      p.bloch = state;
      p.slot = i;
      hits += measure_qubit(p, {1, 0, 0}, det, st, rng).outcome == want;
    }
    return static_cast<double>(hits) / n;
  };
  // swapping detector labels and bit labels leaves statistics invariant
  const double p0_plus = outcome_rate({0.6, 0.8, 0}, Outcome::BIT0);
  const double p1_minus = outcome_rate({-0.6, -0.8, 0}, Outcome::BIT1);
  REQUIRE(p0_plus == Approx(p1_minus).margin(0.012));
}

TEST_CASE("afterpulse correlation never grows with blanking", "[photonics]") {
  Rng rng(12);
  auto vacuum_clicks = [&](std::int64_t blanking) {
    DetectorModel det;
    det.afterpulse_p0 = 0.25;
    det.afterpulse_tau = 5.0;
    det.blanking_gates = blanking;
    DetectorPairState st;
    std::int64_t ap_clicks = 0;
    const std::int64_t n = 200000;
    for (std::int64_t g = 0; g < n; ++g) {
      QubitPulse p;
      p.slot = g;
      p.bloch = {1, 0, 0};
      p.n = (g % 4 == 0) ? 1 : 0;  // photon every 4th gate, vacuum between
      const auto rec = measure_qubit(p, {1, 0, 0}, det, st, rng);
      if (p.n == 0 && rec.outcome != Outcome::NONE) ++ap_clicks;
    }
    return ap_clicks;
  };
  const auto c0 = vacuum_clicks(0);
  const auto c3 = vacuum_clicks(3);
  const auto c10 = vacuum_clicks(10);
  REQUIRE(c0 >= c3);
  REQUIRE(c3 >= c10);
  REQUIRE(c10 == 0);  // spacing never exceeds the blanking window
}

TEST_CASE("identical seed and config give identical records", "[photonics]") {
  auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    DetectorModel det;
    det.dark = 1e-3;
    det.eff0 = det.eff1 = 0.7;
    DetectorPairState st;
    std::vector<Outcome> out;
    for (int i = 0; i < 5000; ++i) {
      QubitPulse p;
      p.n = rng.poisson(0.4);
      p.bloch = {1, 0, 0};
      p.slot = i;
      out.push_back(measure_qubit(p, {0, 1, 0}, det, st, rng).outcome);
    }
    return out;
  };
  REQUIRE(run(99) == run(99));
}

TEST_CASE("interferometer identities", "[photonics]") {
  CoherentTrain t;
  const std::complex<double> a{0.7, 0.0};
  t.amps = {a, a, a, a};
  const auto out = interfere_train(t);
  for (const auto& v : out.port1) REQUIRE(std::abs(v) == Approx(0.0).margin(1e-15));
  for (const auto& v : out.port0) REQUIRE(std::abs(v) == Approx(std::abs(a)).margin(1e-12));

  CoherentTrain t2;
  t2.amps = {a, -a};
  const auto out2 = interfere_train(t2);
  REQUIRE(std::abs(out2.port0[0]) == Approx(0.0).margin(1e-15));
  REQUIRE(std::abs(out2.port1[0]) == Approx(std::abs(a)).margin(1e-12));

  REQUIRE_THROWS_AS(interfere_train(CoherentTrain{{a}, true}), ConfigError);
}

TEST_CASE("interferometer conserves half the pairwise energy", "[photonics]") {
  Rng rng(13);
  CoherentTrain t;
  for (int i = 0; i < 50; ++i)
    t.amps.emplace_back(rng.normal(), rng.normal());
  const auto out = interfere_train(t);
  for (std::size_t k = 0; k + 1 < t.amps.size(); ++k) {
    const double lhs = std::norm(out.port0[k]) + std::norm(out.port1[k]);
    const double rhs = 0.5 * (std::norm(t.amps[k]) + std::norm(t.amps[k + 1]));
    REQUIRE(lhs == Approx(rhs).epsilon(1e-10));
  }
}

static photonics::B92Receiver test_receiver() {
  B92Receiver rx;
  rx.alpha = 0.6;
  rx.beta = 20.0;
  rx.monitor_ratio = 0.01;  // monitor mean 4 photons at eta = 1
  rx.m_lo = 1;
  rx.m_hi = 9;
  return rx;
}

TEST_CASE("b92 vacuum fails the monitor", "[photonics]") {
  const auto rx = test_receiver();
  Rng rng(14);
  CoherentTrain sig;
  sig.amps = {0.0, 0.0};  // Eve-suppressed pulse
  for (int i = 0; i < 200; ++i) {
    const auto rec = b92_measure(sig, rx, i, rng);
    REQUIRE(rec.monitor_ok.has_value());
    REQUIRE_FALSE(*rec.monitor_ok);
  }
}

TEST_CASE("b92 honest channel passes the monitor", "[photonics]") {
  const auto rx = test_receiver();
  Rng rng(15);
  CoherentTrain sig;
  sig.amps = {rx.alpha, rx.beta};
  int ok = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) ok += *b92_measure(sig, rx, i, rng).monitor_ok;
  REQUIRE(static_cast<double>(ok) / n >= 0.9);
}

TEST_CASE("b92 destructive port stays dark for bit 0", "[photonics]") {
  const auto rx = test_receiver();
  Rng rng(16);
  CoherentTrain sig;
  sig.amps = {rx.alpha, rx.beta};
  for (int i = 0; i < 20000; ++i)
    REQUIRE(b92_measure(sig, rx, i, rng).outcome != Outcome::BIT1);
  REQUIRE_THROWS_AS(b92_measure(CoherentTrain{{0.1}, true}, rx, 0, rng), ConfigError);
}
