#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kpz/config.hpp"
#include "kpz/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo laboratory for periodic KPZ transport constants"};
  app.name("kpztorus");
  app.set_version_flag("--version", kpz::kArtifactVersion);

  std::string experiment;
  app.add_option("experiment", experiment,
                 "constants | brunet | simulate | mixing | reversal | "
                 "jointlaw | clt")
      ->required();
  std::string config_path;
  app.add_option("--config", config_path, "key=value config file");
  std::vector<std::string> sets;
  app.add_option("--set", sets, "override one config key (repeatable)")
      ->take_all();
  uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "RNG seed");
  int workers = 0;
  auto* workers_opt =
      app.add_option("--workers", workers, "worker threads (0 = available)");
  std::string out_dir;
  auto* out_opt = app.add_option("--out", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    kpz::Experiment ex;
    if (!kpz::parse_experiment(experiment, &ex))
      throw kpz::ConfigError("unknown experiment '" + experiment + "'");

    std::string text;
    if (!config_path.empty()) {
      std::ifstream is(config_path, std::ios::binary);
      if (!is)
        throw kpz::ConfigError("cannot read config file: " + config_path);
      std::ostringstream ss;
      ss << is.rdbuf();
      text = ss.str();
    }
    kpz::ExperimentConfig cfg = kpz::parse_config(text);
    int slot = 0;
    for (const std::string& kv : sets) kpz::apply_override(cfg, kv, ++slot);
    cfg.experiment = ex;  // the positional command wins
    if (seed_opt->count()) cfg.seed = seed;
    if (workers_opt->count()) cfg.workers = workers;
    if (out_opt->count()) cfg.output_dir = out_dir;
    kpz::validate(cfg);

    kpz::RunResult rr = kpz::run(cfg);
    for (const auto& [name, ok] : rr.flags)
      std::printf("%-44s %s\n", name.c_str(), ok ? "PASS" : "FAIL");
    for (const std::string& f : rr.files)
      std::printf("wrote %s\n", f.c_str());
    std::printf("manifest %s\n", rr.manifest_path.c_str());
    return rr.all_pass ? 0 : 1;
  } catch (const kpz::ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
