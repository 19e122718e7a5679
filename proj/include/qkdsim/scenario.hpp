#pragma once

// Scenario file schema: strict JSON with unknown-field rejection and
// error messages that carry the offending field path.

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qkdsim/attacks.hpp"
#include "qkdsim/errors.hpp"
#include "qkdsim/mathx.hpp"
#include "qkdsim/netsim.hpp"
#include "qkdsim/pipeline.hpp"
#include "qkdsim/protocols.hpp"
#include "qkdsim/qnrc.hpp"

namespace qkd::app {

using json = nlohmann::json;

namespace detail {

inline void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
}

inline void reject_unknown(const json& j, const std::string& path,
                           const std::vector<std::string>& allowed) {
  expect_object(j, path);
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const auto& a : allowed) ok |= a == key;
    if (!ok) throw ConfigError(path + "." + key + ": unknown field");
  }
}

template <typename T>
T get_num(const json& j, const std::string& path, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number()) throw ConfigError(path + "." + key + ": expected a number");
  return v.get<T>();
}

inline bool get_bool(const json& j, const std::string& path, const std::string& key,
                     bool fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_boolean()) throw ConfigError(path + "." + key + ": expected a boolean");
  return v.get<bool>();
}

inline std::string get_str(const json& j, const std::string& path, const std::string& key,
                           const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_string()) throw ConfigError(path + "." + key + ": expected a string");
  return v.get<std::string>();
}

inline const json& require(const json& j, const std::string& path, const std::string& key) {
  if (!j.contains(key)) throw ConfigError(path + "." + key + ": required field missing");
  return j.at(key);
}

}  // namespace detail

struct SessionBundle {
  protocols::SessionConfig session;
  photonics::ChannelModel channel;
  photonics::DetectorModel detector;
  attacks::AttackConfig attack;
  pipeline::PostprocConfig post;
  pipeline::SyncOptions sync;
};

struct SweepSpec {
  std::vector<double> loss_db;
  std::vector<protocols::RateMode> modes;
  bool optimize_mu = true;
  std::uint64_t pulses_per_point = 50000000;
  double mu_signal = 0.5;
  double mu_weak = 0.1;
};

struct NetworkSpec {
  std::vector<std::string> nodes;
  struct LinkSpec {
    std::string a, b;
    double loss_db = 0.0;
  };
  std::vector<LinkSpec> links;
  std::uint64_t bootstrap_bits = 4096;
  netsim::ProvisionMode mode = netsim::ProvisionMode::FULL_SIM;
  std::uint64_t provision_pulses = 20000;
  SessionBundle link_template;
  struct TransportSpec {
    std::string src, dst;
    std::uint32_t bytes = 0;
  };
  std::vector<TransportSpec> transports;
};

struct QnrcSpec {
  qnrc::Y00Config cfg;
  std::uint64_t n_symbols = 100000;
  std::uint64_t seed_key = 0x5eedULL;
  int lfsr_degree = 31;
};

struct Scenario {
  enum class Kind { SESSION, SWEEP, NETWORK, QNRC, VERIFY } kind = Kind::SESSION;
  std::uint64_t seed = 1;
  std::string out = "runs";
  SessionBundle bundle;
  SweepSpec sweep;
  NetworkSpec network;
  QnrcSpec qnrc;
};

namespace detail {

inline protocols::Protocol parse_protocol(const std::string& s, const std::string& path) {
  if (s == "BB84") return protocols::Protocol::BB84;
  if (s == "BB84_DECOY") return protocols::Protocol::BB84_DECOY;
  if (s == "SARG04") return protocols::Protocol::SARG04;
  if (s == "B92") return protocols::Protocol::B92;
  if (s == "DPS") return protocols::Protocol::DPS;
  throw ConfigError(path + ": unknown protocol '" + s + "'");
}

inline protocols::RateMode parse_rate_mode(const std::string& s, const std::string& path) {
  if (s == "SINGLE_PHOTON") return protocols::RateMode::SINGLE_PHOTON;
  if (s == "WCP_WORSTCASE") return protocols::RateMode::WCP_WORSTCASE;
  if (s == "DECOY") return protocols::RateMode::DECOY;
  throw ConfigError(path + ": unknown rate mode '" + s + "'");
}

inline SessionBundle parse_session(const json& j, const std::string& path) {
  reject_unknown(j, path,
                 {"protocol", "n_pulses", "test_fraction", "basis_bias", "source", "channel",
                  "detector", "attack", "postproc", "sync", "b92", "dps"});
  SessionBundle b;
  b.session.protocol = parse_protocol(get_str(j, path, "protocol", "BB84"), path + ".protocol");
  b.session.n_pulses = get_num<std::uint64_t>(j, path, "n_pulses", 100000);
  b.session.test_fraction = get_num<double>(j, path, "test_fraction", 0.1);
  b.session.basis_bias = get_num<double>(j, path, "basis_bias", 0.5);

  if (j.contains("source")) {
    const auto& s = j.at("source");
    const auto sp = path + ".source";
    reject_unknown(s, sp, {"classes", "single_photon", "phase_randomized"});
    b.session.source.single_photon = get_bool(s, sp, "single_photon", false);
    b.session.source.phase_randomized = get_bool(s, sp, "phase_randomized", true);
    if (s.contains("classes")) {
      const auto& cl = s.at("classes");
      if (!cl.is_array() || cl.empty())
        throw ConfigError(sp + ".classes: expected a non-empty array");
      for (std::size_t i = 0; i < cl.size(); ++i) {
        const auto cp = sp + ".classes[" + std::to_string(i) + "]";
        reject_unknown(cl.at(i), cp, {"mu", "p"});
        b.session.source.mu_by_class.push_back(get_num<double>(cl.at(i), cp, "mu", 0.0));
        b.session.class_probabilities.push_back(get_num<double>(cl.at(i), cp, "p", 0.0));
      }
    }
  }
  if (b.session.source.mu_by_class.empty()) {
    b.session.source.mu_by_class = {0.5};
    b.session.class_probabilities = {1.0};
  }

  if (j.contains("channel")) {
    const auto& c = j.at("channel");
    const auto cp = path + ".channel";
    reject_unknown(c, cp, {"loss_db", "misalignment_qber", "misalignment_rad", "drift"});
    b.channel.loss_db = get_num<double>(c, cp, "loss_db", 0.0);
    if (c.contains("misalignment_rad"))
      b.channel.misalignment_angle = get_num<double>(c, cp, "misalignment_rad", 0.0);
    else
      b.channel.misalignment_angle =
          photonics::misalignment_for_qber(get_num<double>(c, cp, "misalignment_qber", 0.0));
    if (c.contains("drift")) {
      const auto& d = c.at("drift");
      const auto dp = cp + ".drift";
      reject_unknown(d, dp, {"phase_rate", "transmittance", "onset"});
      syncctl::DriftModel drift;
      drift.phase_drift_rate = get_num<double>(d, dp, "phase_rate", 0.0);
      drift.transmittance_drift = get_num<double>(d, dp, "transmittance", 1.0);
      drift.onset_slot = get_num<std::int64_t>(d, dp, "onset", 0);
      b.channel.drift = drift;
    }
  }

  if (j.contains("detector")) {
    const auto& d = j.at("detector");
    const auto dp = path + ".detector";
    reject_unknown(d, dp,
                   {"eff0", "eff1", "dark", "afterpulse_p0", "afterpulse_tau",
                    "blanking_gates", "double_click"});
    b.detector.eff0 = get_num<double>(d, dp, "eff0", 1.0);
    b.detector.eff1 = get_num<double>(d, dp, "eff1", 1.0);
    b.detector.dark = get_num<double>(d, dp, "dark", 0.0);
    b.detector.afterpulse_p0 = get_num<double>(d, dp, "afterpulse_p0", 0.0);
    b.detector.afterpulse_tau = get_num<double>(d, dp, "afterpulse_tau", 1.0);
    b.detector.blanking_gates = get_num<std::int64_t>(d, dp, "blanking_gates", 0);
    const auto policy = get_str(d, dp, "double_click", "RANDOM_BIT");
    if (policy == "RANDOM_BIT")
      b.detector.double_click_policy = photonics::DoubleClickPolicy::RANDOM_BIT;
    else if (policy == "DISCARD")
      b.detector.double_click_policy = photonics::DoubleClickPolicy::DISCARD;
    else
      throw ConfigError(dp + ".double_click: unknown policy '" + policy + "'");
  }

  if (j.contains("attack")) {
    const auto& a = j.at("attack");
    const auto ap = path + ".attack";
    reject_unknown(a, ap, {"kind", "fraction", "strategy", "block_len", "target_click_rate"});
    const auto kind = get_str(a, ap, "kind", "NONE");
    if (kind == "NONE") {
      b.attack.kind = attacks::AttackKind::NONE;
    } else if (kind == "INTERCEPT_RESEND") {
      b.attack.kind = attacks::AttackKind::INTERCEPT_RESEND;
      b.attack.intercept.fraction = get_num<double>(a, ap, "fraction", 1.0);
      const auto strat = get_str(a, ap, "strategy", "RANDOM_XY");
      if (strat == "RANDOM_XY")
        b.attack.intercept.strategy = attacks::EveBasisStrategy::RANDOM_XY;
      else if (strat == "FIXED_X")
        b.attack.intercept.strategy = attacks::EveBasisStrategy::FIXED_X;
      else if (strat == "FIXED_Y")
        b.attack.intercept.strategy = attacks::EveBasisStrategy::FIXED_Y;
      else if (strat == "MATCH_ALICE")
        b.attack.intercept.strategy = attacks::EveBasisStrategy::MATCH_ALICE;
      else
        throw ConfigError(ap + ".strategy: unknown strategy '" + strat + "'");
    } else if (kind == "PNS") {
      b.attack.kind = attacks::AttackKind::PNS;
      b.attack.pns.target_click_rate = get_num<double>(a, ap, "target_click_rate", -1.0);
    } else if (kind == "USD_SEQUENTIAL") {
      b.attack.kind = attacks::AttackKind::USD_SEQUENTIAL;
      b.attack.usd.block_len = get_num<std::size_t>(a, ap, "block_len", 1);
    } else {
      throw ConfigError(ap + ".kind: unknown attack '" + kind + "'");
    }
  }

  if (j.contains("postproc")) {
    const auto& p = j.at("postproc");
    const auto pp = path + ".postproc";
    reject_unknown(p, pp, {"s", "l", "abort_qber", "cascade_passes", "rate_mode", "auth_bits"});
    b.post.security.s = get_num<int>(p, pp, "s", 10);
    b.post.security.l = get_num<int>(p, pp, "l", 10);
    b.post.abort_qber = get_num<double>(p, pp, "abort_qber", 0.11);
    b.post.cascade.passes = get_num<int>(p, pp, "cascade_passes", 4);
    b.post.initial_auth_bits = get_num<std::uint64_t>(p, pp, "auth_bits", 8192);
    const auto mode = get_str(p, pp, "rate_mode", "AUTO");
    if (mode != "AUTO") b.post.rate_mode = parse_rate_mode(mode, pp + ".rate_mode");
  }

  if (j.contains("sync")) {
    const auto& s = j.at("sync");
    const auto sp = path + ".sync";
    reject_unknown(s, sp,
                   {"enabled", "window", "baseline_qber", "search_range", "inject_offset",
                    "inject_at"});
    b.sync.enabled = get_bool(s, sp, "enabled", true);
    b.sync.config.window_len = get_num<std::size_t>(s, sp, "window", 500);
    b.sync.config.baseline_qber = get_num<double>(s, sp, "baseline_qber", 0.02);
    b.sync.config.search_range = get_num<std::int64_t>(s, sp, "search_range", 16);
    b.sync.inject_offset = get_num<std::int64_t>(s, sp, "inject_offset", 0);
    b.sync.inject_at = get_num<std::uint64_t>(s, sp, "inject_at", 0);
  }

  if (j.contains("b92")) {
    const auto& v = j.at("b92");
    const auto vp = path + ".b92";
    reject_unknown(v, vp, {"alpha", "beta", "monitor_ratio", "m_lo", "m_hi"});
    b.session.b92.alpha = get_num<double>(v, vp, "alpha", 0.6);
    b.session.b92.beta = get_num<double>(v, vp, "beta", 20.0);
    b.session.b92.monitor_ratio = get_num<double>(
        v, vp, "monitor_ratio",
        photonics::B92Receiver::tuned_monitor_ratio(b.session.b92.alpha, b.session.b92.beta));
    b.session.b92.m_lo = get_num<std::int64_t>(v, vp, "m_lo", 1);
    b.session.b92.m_hi = get_num<std::int64_t>(v, vp, "m_hi", 9);
  }
  if (j.contains("dps")) {
    const auto& v = j.at("dps");
    reject_unknown(v, path + ".dps", {"alpha"});
    b.session.dps_alpha = get_num<double>(v, path + ".dps", "alpha", 0.5);
  }
  return b;
}

}  // namespace detail

inline Scenario parse_scenario(const json& j) {
  using namespace detail;
  reject_unknown(j, "scenario",
                 {"kind", "seed", "out", "session", "sweep", "network", "qnrc"});
  Scenario sc;
  const auto kind = get_str(j, "scenario", "kind", "SESSION");
  if (kind == "SESSION")
    sc.kind = Scenario::Kind::SESSION;
  else if (kind == "SWEEP")
    sc.kind = Scenario::Kind::SWEEP;
  else if (kind == "NETWORK")
    sc.kind = Scenario::Kind::NETWORK;
  else if (kind == "QNRC")
    sc.kind = Scenario::Kind::QNRC;
  else if (kind == "VERIFY")
    sc.kind = Scenario::Kind::VERIFY;
  else
    throw ConfigError("scenario.kind: unknown kind '" + kind + "'");
  sc.seed = get_num<std::uint64_t>(j, "scenario", "seed", 1);
  sc.out = get_str(j, "scenario", "out", "runs");

  if (sc.kind == Scenario::Kind::SESSION || sc.kind == Scenario::Kind::SWEEP) {
    if (!j.contains("session"))
      throw ConfigError("scenario.session: required field missing");
    sc.bundle = parse_session(j.at("session"), "scenario.session");
  }

  if (sc.kind == Scenario::Kind::SWEEP) {
    const auto& s = require(j, "scenario", "sweep");
    const std::string sp = "scenario.sweep";
    reject_unknown(s, sp,
                   {"loss_db", "modes", "optimize_mu", "pulses_per_point", "mu_signal",
                    "mu_weak"});
    const auto& losses = require(s, sp, "loss_db");
    if (!losses.is_array() || losses.size() < 3)
      throw ConfigError(sp + ".loss_db: need at least 3 loss points");
    for (const auto& v : losses) sc.sweep.loss_db.push_back(v.get<double>());
    if (s.contains("modes")) {
      for (const auto& m : s.at("modes"))
        sc.sweep.modes.push_back(parse_rate_mode(m.get<std::string>(), sp + ".modes"));
    } else {
      sc.sweep.modes = {protocols::RateMode::DECOY, protocols::RateMode::WCP_WORSTCASE,
                        protocols::RateMode::SINGLE_PHOTON};
    }
    sc.sweep.optimize_mu = get_bool(s, sp, "optimize_mu", true);
    sc.sweep.pulses_per_point = get_num<std::uint64_t>(s, sp, "pulses_per_point", 50000000);
    sc.sweep.mu_signal = get_num<double>(s, sp, "mu_signal", 0.5);
    sc.sweep.mu_weak = get_num<double>(s, sp, "mu_weak", 0.1);
  }

  if (sc.kind == Scenario::Kind::NETWORK) {
    const auto& n = require(j, "scenario", "network");
    const std::string np = "scenario.network";
    reject_unknown(n, np,
                   {"nodes", "links", "bootstrap_bits", "provision", "session", "transports"});
    for (const auto& v : require(n, np, "nodes"))
      sc.network.nodes.push_back(v.get<std::string>());
    const auto& links = require(n, np, "links");
    for (std::size_t i = 0; i < links.size(); ++i) {
      const auto lp = np + ".links[" + std::to_string(i) + "]";
      reject_unknown(links.at(i), lp, {"a", "b", "loss_db"});
      NetworkSpec::LinkSpec l;
      l.a = require(links.at(i), lp, "a").get<std::string>();
      l.b = require(links.at(i), lp, "b").get<std::string>();
      l.loss_db = get_num<double>(links.at(i), lp, "loss_db", 0.0);
      sc.network.links.push_back(l);
    }
    sc.network.bootstrap_bits = get_num<std::uint64_t>(n, np, "bootstrap_bits", 4096);
    if (n.contains("provision")) {
      const auto& p = n.at("provision");
      const auto pp = np + ".provision";
      reject_unknown(p, pp, {"mode", "pulses"});
      const auto mode = get_str(p, pp, "mode", "FULL_SIM");
      if (mode == "FULL_SIM")
        sc.network.mode = netsim::ProvisionMode::FULL_SIM;
      else if (mode == "RATE_MODEL")
        sc.network.mode = netsim::ProvisionMode::RATE_MODEL;
      else
        throw ConfigError(pp + ".mode: unknown mode '" + mode + "'");
      sc.network.provision_pulses = get_num<std::uint64_t>(p, pp, "pulses", 20000);
    }
    if (n.contains("session"))
      sc.network.link_template = parse_session(n.at("session"), np + ".session");
    else {
      sc.network.link_template.session.source.mu_by_class = {0.0};
      sc.network.link_template.session.source.single_photon = true;
      sc.network.link_template.session.class_probabilities = {1.0};
    }
    if (n.contains("transports")) {
      const auto& ts = n.at("transports");
      for (std::size_t i = 0; i < ts.size(); ++i) {
        const auto tp = np + ".transports[" + std::to_string(i) + "]";
        reject_unknown(ts.at(i), tp, {"src", "dst", "bytes"});
        NetworkSpec::TransportSpec t;
        t.src = require(ts.at(i), tp, "src").get<std::string>();
        t.dst = require(ts.at(i), tp, "dst").get<std::string>();
        t.bytes = get_num<std::uint32_t>(ts.at(i), tp, "bytes", 16);
        sc.network.transports.push_back(t);
      }
    }
  }

  if (sc.kind == Scenario::Kind::QNRC) {
    const auto& q = require(j, "scenario", "qnrc");
    const std::string qp = "scenario.qnrc";
    reject_unknown(q, qp,
                   {"m", "alpha", "channel_eta", "excess_noise", "n_symbols", "seed_key",
                    "lfsr_degree"});
    sc.qnrc.cfg.m = get_num<std::uint32_t>(q, qp, "m", 64);
    sc.qnrc.cfg.alpha = get_num<double>(q, qp, "alpha", 5.0);
    sc.qnrc.cfg.channel_eta = get_num<double>(q, qp, "channel_eta", 1.0);
    sc.qnrc.cfg.excess_noise = get_num<double>(q, qp, "excess_noise", 0.0);
    sc.qnrc.n_symbols = get_num<std::uint64_t>(q, qp, "n_symbols", 100000);
    sc.qnrc.seed_key = get_num<std::uint64_t>(q, qp, "seed_key", 0x5eed);
    sc.qnrc.lfsr_degree = get_num<int>(q, qp, "lfsr_degree", 31);
  }
  return sc;
}

inline Scenario load_scenario_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("scenario: cannot open " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario: JSON parse error: ") + e.what());
  }
  return parse_scenario(j);
}

// Content hash over the effective configuration (after CLI overrides).
inline std::uint64_t scenario_hash(const json& j, std::uint64_t seed) {
  const std::string dump = j.dump();
  return fnv1a64(dump.data(), dump.size(), 0xcbf29ce484222325ULL ^ seed);
}

}  // namespace qkd::app
