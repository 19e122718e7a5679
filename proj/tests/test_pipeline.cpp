#include <catch2/catch.hpp>

#include <cmath>

#include "qkdsim/pipeline.hpp"

using namespace qkd;
using namespace qkd::pipeline;
using protocols::Protocol;

namespace {

protocols::SessionConfig base_cfg(Protocol p, std::uint64_t n, std::uint64_t seed) {
  protocols::SessionConfig cfg;
  cfg.protocol = p;
  cfg.n_pulses = n;
  cfg.seed = seed;
  cfg.source.mu_by_class = {0.0};
  cfg.source.single_photon = true;
  cfg.class_probabilities = {1.0};
  return cfg;
}

}  // namespace

TEST_CASE("clean session ends with identical secret keys", "[pipeline]") {
  auto cfg = base_cfg(Protocol::BB84, 30000, 1);
  photonics::ChannelModel ch;
  ch.misalignment_angle = photonics::misalignment_for_qber(0.02);
  const auto res = run_full_session(cfg, ch, {});
  REQUIRE(res.status == SessionStatus::OK);
  REQUIRE(res.key_alice.bits.size() > 0);
  REQUIRE(res.key_alice.bits == res.key_bob.bits);
  REQUIRE(res.qber.point == Approx(0.02).margin(0.01));
  REQUIRE(res.rate_bound > 0.0);
}

TEST_CASE("secret length is reproducible from the logged metadata", "[pipeline]") {
  auto cfg = base_cfg(Protocol::BB84, 30000, 2);
  photonics::ChannelModel ch;
  ch.misalignment_angle = photonics::misalignment_for_qber(0.02);
  const auto res = run_full_session(cfg, ch, {});
  REQUIRE(res.status == SessionStatus::OK);
  const auto& m = res.key_alice.meta;
  const auto expect = postproc::secret_length(m.n_in, m.single_photon_fraction, m.e1_upper,
                                              m.leak_bits, m.params);
  REQUIRE(static_cast<std::int64_t>(res.key_alice.bits.size()) == expect);
  REQUIRE(res.leak_ec_factor > 0.9);
  REQUIRE(res.leak_ec_factor < 2.0);
}

TEST_CASE("decoy session produces a key with bounds attached", "[pipeline]") {
  protocols::SessionConfig cfg;
  cfg.protocol = Protocol::BB84_DECOY;
  cfg.n_pulses = 400000;
  cfg.seed = 3;
  cfg.source.mu_by_class = {0.0, 0.1, 0.5};
  cfg.class_probabilities = {0.1, 0.3, 0.6};
  photonics::ChannelModel ch;
  ch.loss_db = 3.0;
  const auto res = run_full_session(cfg, ch, {});
  REQUIRE(res.status == SessionStatus::OK);
  REQUIRE(res.bounds.has_value());
  REQUIRE(res.bounds->y1_lower > 0.0);
  REQUIRE(res.key_alice.bits == res.key_bob.bits);
  REQUIRE(res.key_alice.bits.size() > 0);
}

TEST_CASE("full interception aborts at estimation", "[pipeline]") {
  auto cfg = base_cfg(Protocol::BB84, 20000, 4);
  attacks::AttackConfig atk;
  atk.kind = attacks::AttackKind::INTERCEPT_RESEND;
  const auto res = run_full_session(cfg, {}, {}, atk);
  REQUIRE(res.status == SessionStatus::ABORT_QBER);
  REQUIRE(res.key_alice.bits.size() == 0);
  REQUIRE(res.key_bob.bits.size() == 0);
}

TEST_CASE("b92 session flags its heuristic rate as non-composable", "[pipeline]") {
  protocols::SessionConfig cfg;
  cfg.protocol = Protocol::B92;
  cfg.n_pulses = 60000;
  cfg.seed = 5;
  cfg.b92.alpha = 0.6;
  cfg.b92.beta = 20.0;
  cfg.b92.monitor_ratio = 0.01;
  cfg.b92.m_lo = 1;
  cfg.b92.m_hi = 9;
  const auto res = run_full_session(cfg, {}, {});
  REQUIRE(res.status == SessionStatus::OK);
  REQUIRE(res.non_composable_rate);
  REQUIRE(res.key_alice.meta.non_composable);
  REQUIRE(res.key_alice.bits == res.key_bob.bits);
}

TEST_CASE("underfunded auth pool aborts before any disclosure", "[pipeline]") {
  auto cfg = base_cfg(Protocol::BB84, 5000, 6);
  PostprocConfig post;
  post.initial_auth_bits = 256;
  const auto res = run_full_session(cfg, {}, {}, {}, post);
  REQUIRE(res.status == SessionStatus::ABORT_AUTH);
  REQUIRE(res.auth_bits_consumed == 0);
  REQUIRE(res.leak_bits == 0);
}

TEST_CASE("injected frame offset is detected and recovered", "[pipeline]") {
  auto cfg = base_cfg(Protocol::BB84, 24000, 7);
  photonics::ChannelModel ch;
  ch.misalignment_angle = photonics::misalignment_for_qber(0.02);
  SyncOptions sync;
  sync.enabled = true;
  sync.config.baseline_qber = 0.02;
  sync.inject_offset = 7;
  sync.inject_at = 3000;  // sifted position, window 7 of ~24
  const auto res = run_full_session(cfg, ch, {}, {}, {}, sync);

  REQUIRE(res.status == SessionStatus::OK);
  REQUIRE(res.sync.frame_offset == 7);
  // the qber series shows the rapid degradation toward 50%
  const auto& series = res.sync.windows.series;
  const auto spike = std::max_element(series.begin(), series.end());
  REQUIRE(*spike >= 0.45);
  // detection within 3 windows of the injection point
  const std::size_t inject_window = sync.inject_at / sync.config.window_len;
  const auto spike_window = static_cast<std::size_t>(spike - series.begin());
  REQUIRE(spike_window >= inject_window);
  REQUIRE(spike_window <= inject_window + 3);
  // post-recovery QBER back to baseline levels
  REQUIRE(res.qber.point <= 0.03);
  REQUIRE(res.key_alice.bits == res.key_bob.bits);
  REQUIRE(res.key_alice.bits.size() > 0);
  REQUIRE(std::count(res.sync.log.begin(), res.sync.log.end(),
                     syncctl::SyncPhase::FRAME_LOST) == 1);
}

TEST_CASE("unrecoverable offset is fatal and emits no key", "[pipeline]") {
  auto cfg = base_cfg(Protocol::BB84, 24000, 8);
  photonics::ChannelModel ch;
  ch.misalignment_angle = photonics::misalignment_for_qber(0.02);
  SyncOptions sync;
  sync.enabled = true;
  sync.config.baseline_qber = 0.02;
  sync.inject_offset = 200;  // far beyond the search range
  sync.inject_at = 3000;
  const auto res = run_full_session(cfg, ch, {}, {}, {}, sync);
  REQUIRE(res.status == SessionStatus::FATAL_SYNC);
  REQUIRE(res.sync.phase == syncctl::SyncPhase::FATAL);
  REQUIRE(res.key_alice.bits.size() == 0);
  REQUIRE(res.key_bob.bits.size() == 0);
  REQUIRE(res.reconciled_bits == 0);
}

TEST_CASE("post-recovery qber stays within 1.5x baseline across offsets", "[pipeline]") {
  for (std::int64_t off : {1, 4, 11, 15}) {
    auto cfg = base_cfg(Protocol::BB84, 24000, 60 + static_cast<std::uint64_t>(off));
    photonics::ChannelModel ch;
    ch.misalignment_angle = photonics::misalignment_for_qber(0.02);
    SyncOptions sync;
    sync.enabled = true;
    sync.config.baseline_qber = 0.02;
    sync.inject_offset = off;
    sync.inject_at = 2500;
    const auto res = run_full_session(cfg, ch, {}, {}, {}, sync);
    REQUIRE(res.status == SessionStatus::OK);
    REQUIRE(res.sync.frame_offset == off);
    REQUIRE(res.qber.point <= 1.5 * 0.02 + 0.005);
  }
}
