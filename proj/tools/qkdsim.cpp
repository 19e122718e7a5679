// qkdsim command-line front end.
//
// Subcommands: run-session, sweep, run-network, run-qnrc, verify.
// Scenarios are JSON files; outputs land in a content-addressed
// directory under --out.  Exit codes: 0 success, 2 configuration
// error, 3 runtime abort.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <thread>

#include "qkdsim/runner.hpp"
#include "qkdsim/scenario.hpp"
#include "qkdsim/verify.hpp"

namespace {

struct CommonOpts {
  std::string scenario_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  int jobs = static_cast<int>(std::thread::hardware_concurrency());
};

qkd::app::json load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw qkd::ConfigError("scenario: cannot open " + path);
  qkd::app::json j;
  try {
    f >> j;
  } catch (const qkd::app::json::exception& e) {
    throw qkd::ConfigError(std::string("scenario: JSON parse error: ") + e.what());
  }
  return j;
}

int run_from_file(const CommonOpts& opts, qkd::app::Scenario::Kind expected) {
  using namespace qkd::app;
  json j = load_json(opts.scenario_path);
  if (opts.seed) j["seed"] = *opts.seed;
  if (opts.out) j["out"] = *opts.out;
  Scenario sc = parse_scenario(j);
  if (sc.kind != expected)
    throw qkd::ConfigError("scenario.kind: does not match the chosen subcommand");

  const auto hash = scenario_hash(qkd::app::semantic_config(j), sc.seed);
  const auto paths = prepare_run_dir(sc.out, hash);
  write_runmeta(paths, j, sc.seed, hash);
  log_info("output dir " + paths.dir.string());

  switch (sc.kind) {
    case Scenario::Kind::SESSION: return run_session_scenario(sc, paths);
    case Scenario::Kind::SWEEP: return run_sweep_scenario(sc, paths, opts.jobs);
    case Scenario::Kind::NETWORK: return run_network_scenario(sc, paths);
    case Scenario::Kind::QNRC: return run_qnrc_scenario(sc, paths);
    case Scenario::Kind::VERIFY: break;
  }
  return 0;
}

int run_verify(const CommonOpts& opts) {
  using namespace qkd::app;
  json j;
  j["kind"] = "VERIFY";
  j["seed"] = opts.seed.value_or(12345);
  j["out"] = opts.out.value_or("runs");
  const Scenario sc = parse_scenario(j);
  const auto hash = scenario_hash(qkd::app::semantic_config(j), sc.seed);
  const auto paths = prepare_run_dir(sc.out, hash);
  write_runmeta(paths, j, sc.seed, hash);

  const auto results = run_acceptance(sc.seed, paths.dir / "scratch", opts.jobs);
  const int failures = write_acceptance_results(results, paths.dir, std::cout);
  std::filesystem::remove_all(paths.dir / "scratch");
  log_info("acceptance results in " + (paths.dir / "acceptance.csv").string());
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qkdsim: quantum key distribution link, attack and network simulator"};
  app.require_subcommand(1);

  CommonOpts opts;
  auto add_common = [&](CLI::App* cmd, bool needs_file) {
    if (needs_file)
      cmd->add_option("scenario", opts.scenario_path, "scenario JSON file")->required();
    cmd->add_option("--seed", [&](const CLI::results_t& v) {
      opts.seed = std::strtoull(v[0].c_str(), nullptr, 0);
      return true;
    }, "master seed override");
    cmd->add_option("--out", [&](const CLI::results_t& v) {
      opts.out = v[0];
      return true;
    }, "output root directory override");
    cmd->add_option("--jobs", opts.jobs, "parallel workers for sweeps");
  };

  auto* s_session = app.add_subcommand("run-session", "run one QKD session scenario");
  add_common(s_session, true);
  auto* s_sweep = app.add_subcommand("sweep", "distance sweep with rate fits");
  add_common(s_sweep, true);
  auto* s_network = app.add_subcommand("run-network", "trusted-repeater network scenario");
  add_common(s_network, true);
  auto* s_qnrc = app.add_subcommand("run-qnrc", "Y00 quantum-noise cipher run");
  add_common(s_qnrc, true);
  auto* s_verify = app.add_subcommand("verify", "run the acceptance suite");
  add_common(s_verify, false);

  CLI11_PARSE(app, argc, argv);

  try {
    using qkd::app::Scenario;
    if (s_session->parsed()) return run_from_file(opts, Scenario::Kind::SESSION);
    if (s_sweep->parsed()) return run_from_file(opts, Scenario::Kind::SWEEP);
    if (s_network->parsed()) return run_from_file(opts, Scenario::Kind::NETWORK);
    if (s_qnrc->parsed()) return run_from_file(opts, Scenario::Kind::QNRC);
    if (s_verify->parsed()) return run_verify(opts);
  } catch (const qkd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const qkd::AbortError& e) {
    std::cerr << "runtime abort: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
