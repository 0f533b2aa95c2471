// polard: validate configs, run simulations and comparisons, serve the session API.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include <polard/config.hpp>
#include <polard/engine.hpp>
#include <polard/transcript.hpp>

#include "../common/log.hpp"
#include "../service/service.hpp"

namespace fs = std::filesystem;
using namespace polard;

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kConfig = 2;

void report(const fs::path& path, const ConfigError& e) {
  std::cerr << path.string();
  if (e.line) std::cerr << ":" << *e.line;
  std::cerr << ": error: " << e.what() << "\n";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::vector<std::uint64_t> pick_seeds(const std::vector<std::uint64_t>& flags, const ConfigFile& file) {
  if (!flags.empty()) return flags;
  if (!file.seeds.empty()) return file.seeds;
  return {file.session.sampler.rng_seed};
}

fs::path pick_out(const std::string& flag, const ConfigFile& file) {
  if (!flag.empty()) return flag;
  if (file.output_dir) return *file.output_dir;
  return "polard-out";
}

int cmd_validate(const fs::path& path) {
  try {
    const ConfigFile file = load_config_file(path);
    for (const auto& w : file.warnings) std::cerr << path.string() << ": warning: " << w << "\n";
    std::cout << path.string() << ": ok";
    if (!file.conditions.empty()) std::cout << " (" << file.conditions.size() << " conditions)";
    std::cout << "\n";
    return kOk;
  } catch (const ConfigError& e) {
    report(path, e);
    return kConfig;
  }
}

int cmd_simulate(const fs::path& path, const std::vector<std::uint64_t>& seed_flags,
                 const std::string& out_flag, bool timing) {
  ConfigFile file;
  try {
    file = load_config_file(path);
  } catch (const ConfigError& e) {
    report(path, e);
    return kConfig;
  }
  for (const auto& w : file.warnings) log::warn(w);
  if (!file.session.synthetic) {
    std::cerr << path.string() << ": error: source: simulate needs a synthetic source\n";
    return kConfig;
  }
  const fs::path out = pick_out(out_flag, file);
  fs::create_directories(out);
  for (std::uint64_t seed : pick_seeds(seed_flags, file)) {
    const SimulationResult run = run_simulation(file.session, seed, {timing});
    const fs::path dir = out / ("seed-" + std::to_string(seed));
    fs::create_directories(dir);
    write_text(dir / "metrics.csv", metrics_csv(run.metrics));
    write_text(dir / "transcript.jsonl", transcript_jsonl(run.state.transcript));
    write_text(dir / "posterior.json", posterior_snapshot(run.state).dump(2) + "\n");
    std::cout << "seed " << seed << ": final optimal_action_error "
              << run.metrics.optimal_action_error.back() << ", ordinal_prediction_error "
              << run.metrics.ordinal_prediction_error.back() << " -> " << dir.string() << "\n";
  }
  return kOk;
}

int cmd_compare(const fs::path& path, const std::vector<std::uint64_t>& seed_flags,
                const std::string& out_flag, unsigned workers, bool timing) {
  ConfigFile file;
  try {
    file = load_config_file(path);
  } catch (const ConfigError& e) {
    report(path, e);
    return kConfig;
  }
  for (const auto& w : file.warnings) log::warn(w);
  std::vector<Condition> conditions = file.conditions;
  if (conditions.empty()) conditions.push_back({"base", file.session});
  for (const auto& c : conditions)
    if (!c.config.synthetic) {
      std::cerr << path.string() << ": error: condition '" << c.name
                << "' has no synthetic source\n";
      return kConfig;
    }
  const auto seeds = pick_seeds(seed_flags, file);
  const ComparisonResult result =
      compare_runs(conditions, seeds, workers ? workers : file.workers, {timing});
  const fs::path out = pick_out(out_flag, file);
  fs::create_directories(out);
  write_text(out / "comparison.csv", comparison_csv(result));
  std::cout << conditions.size() << " conditions x " << seeds.size() << " seeds -> "
            << (out / "comparison.csv").string() << "\n";
  return kOk;
}

service::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const std::string& path, int port, const std::string& host,
              const std::string& data_dir, int timeout) {
  std::optional<SessionConfig> defaults;
  if (!path.empty()) {
    try {
      defaults = load_config_file(path).session;
    } catch (const ConfigError& e) {
      report(path, e);
      return kConfig;
    }
  }
  const fs::path dir = data_dir.empty() ? service::default_data_dir() : fs::path(data_dir);
  service::SessionService sessions(dir, defaults);
  log::info("data directory " + dir.string() + " (" + std::to_string(sessions.restored()) +
            " sessions restored)");
  service::HttpServer server(sessions, {host, port, "*", timeout});
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.run();
  g_server = nullptr;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"polard: preference, coactive and ordinal feedback learning over discrete action grids"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "debug, info, warn, error or off")->capture_default_str();

  std::string config;
  std::vector<std::uint64_t> seeds;
  std::string out;
  bool timing = false;
  unsigned workers = 0;
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string data_dir;
  int timeout = 120;

  auto* validate = app.add_subcommand("validate", "Check a config file");
  validate->add_option("config", config, "Config file")->required();

  auto* simulate = app.add_subcommand("simulate", "Run simulations against the synthetic user");
  simulate->add_option("config", config, "Config file")->required();
  simulate->add_option("--seed", seeds, "Seed (repeatable)");
  simulate->add_option("--out", out, "Output directory");
  simulate->add_flag("--timing", timing, "Record wall-clock posterior update times");

  auto* compare = app.add_subcommand("compare", "Run every condition under every seed");
  compare->add_option("config", config, "Config file with a conditions list")->required();
  compare->add_option("--seed", seeds, "Seed (repeatable)");
  compare->add_option("--out", out, "Output directory");
  compare->add_option("--workers", workers, "Worker threads (0 = all cores)");
  compare->add_flag("--timing", timing, "Record wall-clock posterior update times");

  auto* serve = app.add_subcommand("serve", "Serve the HTTP session API");
  serve->add_option("config", config, "Default session config for POST /sessions with an empty body");
  serve->add_option("--port", port, "Port")->capture_default_str();
  serve->add_option("--host", host, "Bind address")->capture_default_str();
  serve->add_option("--data-dir", data_dir, "Session storage (default: $POLARD_DATA_DIR or ./polard-data)");
  serve->add_option("--timeout", timeout, "Request timeout in seconds")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfig;
  }

  try {
    log::threshold() = log::parse_level(log_level);
    if (*validate) return cmd_validate(config);
    if (*simulate) return cmd_simulate(config, seeds, out, timing);
    if (*compare) return cmd_compare(config, seeds, out, workers, timing);
    if (*serve) return cmd_serve(config, port, host, data_dir, timeout);
  } catch (const ConfigError& e) {
    report(config, e);
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}
