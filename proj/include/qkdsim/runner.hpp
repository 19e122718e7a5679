#pragma once

// Scenario execution: dispatches a parsed scenario to the session,
// sweep, network or qnrc engines and writes CSV artifacts plus a run
// metadata record into a content-addressed output directory.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "qkdsim/csvio.hpp"
#include "qkdsim/fastpath.hpp"
#include "qkdsim/netsim.hpp"
#include "qkdsim/pipeline.hpp"
#include "qkdsim/qnrc.hpp"
#include "qkdsim/scenario.hpp"

namespace qkd::app {

constexpr const char* kVersion = "1.0.0";

inline int log_level() {
  const char* env = std::getenv("QKDSIM_LOG");
  if (!env) return 1;
  return std::atoi(env);
}

inline void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[qkdsim] " << msg << "\n";
}

inline void log_debug(const std::string& msg) {
  if (log_level() >= 2) std::cerr << "[qkdsim:debug] " << msg << "\n";
}

struct RunPaths {
  std::filesystem::path dir;
};

inline RunPaths prepare_run_dir(const std::string& out_root, std::uint64_t config_hash) {
  std::ostringstream name;
  name << std::hex << std::setw(16) << std::setfill('0') << config_hash;
  RunPaths p;
  p.dir = std::filesystem::path(out_root) / name.str();
  std::filesystem::create_directories(p.dir);
  return p;
}

// The output root is where results land, not what they are: it stays
// out of the config hash and the metadata record.
inline json semantic_config(json effective_config) {
  effective_config.erase("out");
  return effective_config;
}

inline void write_runmeta(const RunPaths& paths, const json& effective_config,
                          std::uint64_t seed, std::uint64_t config_hash) {
  json meta;
  meta["config_hash"] = config_hash;
  meta["seed"] = seed;
  meta["version"] = kVersion;
  meta["config"] = semantic_config(effective_config);
  std::ofstream f(paths.dir / "runmeta.json", std::ios::trunc);
  f << meta.dump(2) << "\n";
}

// ------------------------------------------------------------ session

inline std::vector<std::string> session_csv_header() {
  return {"protocol",  "status",      "n_pulses",   "clicks",    "sifted",
          "qber",      "qber_ci",     "leak_bits",  "f_ec",      "secret_bits",
          "rate_bound", "y1_lower",   "e1_upper",   "auth_bits", "non_composable"};
}

inline std::vector<std::string> session_csv_row(const pipeline::SessionResult& res) {
  return {protocols::protocol_name(res.stats.protocol),
          pipeline::status_name(res.status),
          std::to_string(res.stats.n_pulses),
          std::to_string(res.stats.clicks_total),
          std::to_string(res.stats.sifted_len),
          fmt_double(res.qber.point),
          fmt_double(res.qber.ci_upper),
          std::to_string(res.leak_bits),
          fmt_double(res.leak_ec_factor, 6),
          std::to_string(res.key_alice.bits.size()),
          fmt_double(res.rate_bound),
          res.bounds ? fmt_double(res.bounds->y1_lower) : "",
          res.bounds ? fmt_double(res.bounds->e1_upper) : "",
          std::to_string(res.auth_bits_consumed),
          res.non_composable_rate ? "1" : "0"};
}

inline int run_session_scenario(const Scenario& sc, const RunPaths& paths) {
  auto bundle = sc.bundle;
  bundle.session.seed = sc.seed;
  const auto res = pipeline::run_full_session(bundle.session, bundle.channel,
                                              bundle.detector, bundle.attack, bundle.post,
                                              bundle.sync);
  CsvWriter csv((paths.dir / "session.csv").string());
  csv.row(session_csv_header());
  csv.row(session_csv_row(res));

  CsvWriter cls((paths.dir / "classes.csv").string());
  cls.row({"class", "mu", "sent", "clicks", "gain", "sifted", "test_bits", "error_rate"});
  for (std::size_t c = 0; c < res.stats.per_class.size(); ++c) {
    const auto& cc = res.stats.per_class[c];
    cls.row({std::to_string(c), fmt_double(cc.mu), std::to_string(cc.sent),
             std::to_string(cc.clicks), fmt_double(res.stats.gain(c)),
             std::to_string(cc.sifted), std::to_string(cc.test_bits),
             fmt_double(res.stats.error_rate(c))});
  }

  if (res.status == pipeline::SessionStatus::OK && res.key_alice.bits.size() > 0) {
    postproc::write_key_file((paths.dir / "key_alice.qkey").string(), res.key_alice.bits);
    postproc::write_key_file((paths.dir / "key_bob.qkey").string(), res.key_bob.bits);
  }
  if (sc.bundle.sync.enabled) {
    const char* phase_names[] = {"ALIGNED", "BIT_DRIFT", "FRAME_LOST", "FATAL"};
    CsvWriter sync_csv((paths.dir / "sync.csv").string());
    sync_csv.row({"window", "qber"});
    for (std::size_t w = 0; w < res.sync.windows.series.size(); ++w)
      sync_csv.row({std::to_string(w), fmt_double(res.sync.windows.series[w])});
    CsvWriter log_csv((paths.dir / "sync_transitions.csv").string());
    log_csv.row({"step", "phase"});
    for (std::size_t i = 0; i < res.sync.log.size(); ++i)
      log_csv.row({std::to_string(i),
                   phase_names[static_cast<int>(res.sync.log[i])]});
  }
  log_info(std::string("session status ") + pipeline::status_name(res.status) +
           ", secret bits " + std::to_string(res.key_alice.bits.size()));
  return res.status == pipeline::SessionStatus::OK ? 0 : 3;
}

// -------------------------------------------------------------- sweep

inline const char* rate_mode_name(protocols::RateMode m) {
  switch (m) {
    case protocols::RateMode::SINGLE_PHOTON: return "SINGLE_PHOTON";
    case protocols::RateMode::WCP_WORSTCASE: return "WCP_WORSTCASE";
    case protocols::RateMode::DECOY: return "DECOY";
  }
  return "?";
}

// Session template for one sweep mode.
inline protocols::SessionConfig sweep_session(const Scenario& sc, protocols::RateMode mode,
                                              double mu_override = -1.0) {
  protocols::SessionConfig cfg = sc.bundle.session;
  cfg.basis_bias = 0.5;
  switch (mode) {
    case protocols::RateMode::SINGLE_PHOTON:
      cfg.protocol = protocols::Protocol::BB84;
      cfg.source.single_photon = true;
      cfg.source.mu_by_class = {0.0};
      cfg.class_probabilities = {1.0};
      break;
    case protocols::RateMode::WCP_WORSTCASE:
      cfg.protocol = protocols::Protocol::BB84;
      cfg.source.single_photon = false;
      cfg.source.mu_by_class = {mu_override > 0 ? mu_override : sc.sweep.mu_signal};
      cfg.class_probabilities = {1.0};
      break;
    case protocols::RateMode::DECOY:
      cfg.protocol = protocols::Protocol::BB84_DECOY;
      cfg.source.single_photon = false;
      cfg.source.mu_by_class = {0.0, sc.sweep.mu_weak, sc.sweep.mu_signal};
      cfg.class_probabilities = {0.2, 0.3, 0.5};
      break;
  }
  return cfg;
}

// Golden-section search for the worst-case-optimal mean photon number
// on the analytic rate curve.
inline double optimal_wcp_mu(const Scenario& sc, double loss_db) {
  const double phi = 0.6180339887498949;
  double lo = 1e-6, hi = 1.0;
  auto rate_at = [&](double mu) {
    auto cfg = sweep_session(sc, protocols::RateMode::WCP_WORSTCASE, mu);
    cfg.n_pulses = 1000;
    return netsim::analytic_rate(cfg, loss_db, sc.bundle.detector,
                                 protocols::RateMode::WCP_WORSTCASE, 1.1,
                                 sc.bundle.post.security);
  };
  double a = lo, b = hi;
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = rate_at(x1), f2 = rate_at(x2);
  for (int i = 0; i < 60; ++i) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = rate_at(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = rate_at(x1);
    }
  }
  return 0.5 * (a + b);
}

struct SweepPoint {
  protocols::RateMode mode{};
  double loss_db = 0.0;
  double eta = 0.0;
  double mu = 0.0;
  double q_mu = 0.0;
  double e_mu = 0.0;
  double rate = 0.0;
  std::string status = "ok";
};

inline SweepPoint run_sweep_point(const Scenario& sc, protocols::RateMode mode,
                                  double loss_db, std::uint64_t seed) {
  SweepPoint pt;
  pt.mode = mode;
  pt.loss_db = loss_db;
  pt.eta = db_to_transmittance(loss_db);
  double mu = sc.sweep.mu_signal;
  if (mode == protocols::RateMode::WCP_WORSTCASE && sc.sweep.optimize_mu)
    mu = optimal_wcp_mu(sc, loss_db);
  if (mode == protocols::RateMode::SINGLE_PHOTON) mu = 1.0;
  pt.mu = mu;

  auto cfg = sweep_session(sc, mode, mu);
  cfg.n_pulses = sc.sweep.pulses_per_point;
  cfg.seed = seed;
  photonics::ChannelModel ch = sc.bundle.channel;
  ch.loss_db = loss_db;
  try {
    const auto stats = protocols::run_aggregate_session(cfg, ch, sc.bundle.detector);
    const auto sig = stats.signal_class();
    pt.q_mu = stats.gain(sig);
    pt.e_mu = stats.error_rate(sig);
    std::optional<protocols::DecoyBounds> bounds;
    if (mode == protocols::RateMode::DECOY)
      bounds = protocols::decoy_bound(stats, sc.sweep.mu_signal, sc.sweep.mu_weak);
    pt.rate = protocols::key_rate(stats, bounds, mode, 1.1, sc.bundle.post.security);
    if (pt.rate <= 0.0) pt.status = "zero_rate";
  } catch (const AbortError& e) {
    pt.status = std::string("abort: ") + e.what();
  }
  return pt;
}

inline int run_sweep_scenario(const Scenario& sc, const RunPaths& paths, int jobs) {
  struct Task {
    protocols::RateMode mode;
    double loss;
    std::size_t index;
  };
  std::vector<Task> tasks;
  for (const auto mode : sc.sweep.modes)
    for (double loss : sc.sweep.loss_db)
      tasks.push_back({mode, loss, tasks.size()});

  std::vector<SweepPoint> points(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      points[tasks[i].index] = run_sweep_point(sc, tasks[i].mode, tasks[i].loss,
                                               derive_seed(sc.seed, tasks[i].index));
    }
  };
  const int n_workers = std::max(1, jobs);
  std::vector<std::thread> pool;
  for (int i = 1; i < n_workers; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  CsvWriter csv((paths.dir / "sweep.csv").string());
  csv.row({"mode", "loss_db", "eta", "mu", "q_mu", "e_mu", "rate", "status"});
  for (const auto& pt : points)
    csv.row({rate_mode_name(pt.mode), fmt_double(pt.loss_db), fmt_double(pt.eta),
             fmt_double(pt.mu, 6), fmt_double(pt.q_mu), fmt_double(pt.e_mu),
             fmt_double(pt.rate), pt.status});

  CsvWriter fit((paths.dir / "fit.csv").string());
  fit.row({"mode", "slope", "slope_stderr", "intercept", "points"});
  for (const auto mode : sc.sweep.modes) {
    std::vector<double> lx, ly;
    for (const auto& pt : points)
      if (pt.mode == mode && pt.rate > 0.0) {
        lx.push_back(std::log10(pt.eta));
        ly.push_back(std::log10(pt.rate));
      }
    if (lx.size() >= 2) {
      const auto f = fit_line(lx, ly);
      fit.row({rate_mode_name(mode), fmt_double(f.slope, 6), fmt_double(f.slope_stderr, 6),
               fmt_double(f.intercept, 6), std::to_string(f.n)});
    } else {
      fit.row({rate_mode_name(mode), "", "", "", std::to_string(lx.size())});
    }
  }
  return 0;
}

// ------------------------------------------------------------ network

inline int run_network_scenario(const Scenario& sc, const RunPaths& paths) {
  const auto& spec = sc.network;
  netsim::NetworkGraph graph;
  graph.node_names = spec.nodes;
  auto node_id = [&](const std::string& name) -> netsim::NodeId {
    for (std::size_t i = 0; i < spec.nodes.size(); ++i)
      if (spec.nodes[i] == name) return static_cast<netsim::NodeId>(i);
    throw ConfigError("network: unknown node '" + name + "'");
  };
  for (const auto& l : spec.links) {
    netsim::Link link;
    link.a = node_id(l.a);
    link.b = node_id(l.b);
    link.cfg.loss_db = l.loss_db;
    link.cfg.session = spec.link_template.session;
    link.cfg.post = spec.link_template.post;
    graph.links.push_back(link);
  }
  graph.validate();

  netsim::NetworkState net(std::move(graph));
  net.bootstrap(spec.bootstrap_bits, derive_seed(sc.seed, 0xb001));
  const auto prov = netsim::provision_links(net, spec.mode, spec.provision_pulses,
                                            derive_seed(sc.seed, 0x9307));

  CsvWriter pcsv((paths.dir / "provisioning.csv").string());
  pcsv.row({"link", "a", "b", "loss_db", "deposited_bits", "zero_rate"});
  for (const auto& l : prov.links) {
    pcsv.row({std::to_string(l.link), net.graph.node_names[net.graph.links[l.link].a],
              net.graph.node_names[net.graph.links[l.link].b],
              fmt_double(net.graph.links[l.link].cfg.loss_db),
              std::to_string(l.deposited_bits), l.zero_rate ? "1" : "0"});
    // provisioned material exported in the key-file format
    if (l.deposited_bits > 0)
      postproc::write_key_file(
          (paths.dir / ("link" + std::to_string(l.link) + ".qkey")).string(),
          BitVec::from_bytes(l.deposited));
  }

  CsvWriter csv((paths.dir / "network.csv").string());
  csv.row({"src", "dst", "bytes", "path", "status", "per_link_consumption"});
  std::vector<netsim::DeliveryReport> transcript;
  for (std::size_t t = 0; t < spec.transports.size(); ++t) {
    const auto& req = spec.transports[t];
    const auto src = node_id(req.src), dst = node_id(req.dst);
    const std::uint64_t need =
        req.bytes * 8ull + postproc::AuthKeyPool::kConsumptionPerMessage;
    const auto path = netsim::find_path(net, src, dst, need);
    std::string path_str, consumption, status;
    if (path.status == netsim::PathStatus::NO_PATH) {
      status = "NO_PATH";
    } else if (path.status == netsim::PathStatus::NO_KEY) {
      status = "NO_KEY";
      for (std::size_t i = 0; i < path.nodes.size(); ++i)
        path_str += (i ? ">" : "") + net.graph.node_names[path.nodes[i]];
    } else {
      const auto payload =
          netsim::SecretPayload::random(req.bytes, derive_seed(sc.seed, 0x9a9a + t));
      const auto rep = netsim::hop_transport(payload, path.nodes, net);
      transcript.push_back(rep);
      for (std::size_t i = 0; i < path.nodes.size(); ++i)
        path_str += (i ? ">" : "") + net.graph.node_names[path.nodes[i]];
      switch (rep.status) {
        case netsim::TransportStatus::DELIVERED:
          status = rep.delivered == payload.bytes ? "DELIVERED" : "CORRUPT";
          break;
        case netsim::TransportStatus::AUTH_FAIL: status = "AUTH_FAIL"; break;
        case netsim::TransportStatus::NO_KEY: status = "NO_KEY"; break;
        case netsim::TransportStatus::NO_PATH: status = "NO_PATH"; break;
      }
      for (std::size_t h = 0; h < rep.hops.size(); ++h)
        consumption += (h ? ";" : "") + std::to_string(rep.hops[h].link) + ":" +
                       std::to_string(rep.hops[h].consumed_bits);
    }
    csv.row({req.src, req.dst, std::to_string(req.bytes), path_str, status, consumption});
  }
  return 0;
}

// --------------------------------------------------------------- qnrc

struct QnrcRunResult {
  double bob_ber = 0.0;
  double eve_co_symbol_error = 0.0;  // ciphertext-only (X,Z) symbol error
  double eve_co_z_error = 0.0;
  double eve_kp_z_error = 0.0;  // known-plaintext running-key error
  std::uint32_t gamma = 0;
  std::uint32_t gamma_mc = 0;
};

inline QnrcRunResult run_qnrc_sim(const QnrcSpec& spec, std::uint64_t seed) {
  spec.cfg.validate();
  qnrc::RunningKeyGen keygen(spec.seed_key, spec.cfg.m, spec.lfsr_degree);
  Rng rng(seed);
  QnrcRunResult out;
  out.gamma = qnrc::masking_count(spec.cfg);

  std::uint64_t bob_err = 0, eve_sym_err = 0, eve_z_err = 0, eve_kp_err = 0;
  double phase_sq = 0.0;
  for (std::uint64_t i = 0; i < spec.n_symbols; ++i) {
    const int x = rng.bernoulli(0.5);
    const auto z = keygen.next_symbol();
    const auto sym = qnrc::y00_encrypt(x, z, spec.cfg, static_cast<std::int64_t>(i));

    const auto bob = qnrc::homodyne_measure(sym, qnrc::bob_decode_angle(z, spec.cfg),
                                            spec.cfg, rng);
    bob_err += qnrc::y00_decrypt(bob, z, spec.cfg) != x;

    const auto het = qnrc::heterodyne_measure(sym, spec.cfg, rng);
    const auto est = qnrc::eve_nearest_state(het, spec.cfg);
    eve_sym_err += est.x != x || est.z != z;
    eve_z_err += est.z != z;
    eve_kp_err += qnrc::eve_known_plaintext_z(het, x, spec.cfg) != z;

    const double theta = qnrc::y00_phase(x, z, spec.cfg);
    double d = std::atan2(het.p, het.x) - theta;
    while (d > M_PI) d -= 2 * M_PI;
    while (d < -M_PI) d += 2 * M_PI;
    phase_sq += d * d;
  }
  const auto n = static_cast<double>(spec.n_symbols);
  out.bob_ber = static_cast<double>(bob_err) / n;
  out.eve_co_symbol_error = static_cast<double>(eve_sym_err) / n;
  out.eve_co_z_error = static_cast<double>(eve_z_err) / n;
  out.eve_kp_z_error = static_cast<double>(eve_kp_err) / n;
  const double sigma_mc = std::sqrt(phase_sq / n);
  out.gamma_mc =
      1u + 2u * static_cast<std::uint32_t>(std::floor(sigma_mc / (M_PI / spec.cfg.m)));
  return out;
}

inline int run_qnrc_scenario(const Scenario& sc, const RunPaths& paths) {
  const auto res = run_qnrc_sim(sc.qnrc, derive_seed(sc.seed, 0x900));
  CsvWriter csv((paths.dir / "qnrc.csv").string());
  csv.row({"m", "alpha", "channel_eta", "excess_noise", "n_symbols", "bob_ber",
           "eve_co_symbol_error", "eve_co_z_error", "eve_kp_z_error", "gamma", "gamma_mc"});
  csv.row({std::to_string(sc.qnrc.cfg.m), fmt_double(sc.qnrc.cfg.alpha),
           fmt_double(sc.qnrc.cfg.channel_eta), fmt_double(sc.qnrc.cfg.excess_noise),
           std::to_string(sc.qnrc.n_symbols), fmt_double(res.bob_ber),
           fmt_double(res.eve_co_symbol_error), fmt_double(res.eve_co_z_error),
           fmt_double(res.eve_kp_z_error), std::to_string(res.gamma),
           std::to_string(res.gamma_mc)});
  return 0;
}

}  // namespace qkd::app
