// zodmc: config-driven sampling experiments.
//
//   zodmc run configs/gmm2d.json --out out/gmm2d
//   zodmc score-error configs/score_error_5d.json
//   zodmc acceptance configs/acceptance_gmm.json --workers 4
//   zodmc validate configs/radius_sweep.json
//
// Exit codes: 0 success, 1 runtime failure, 2 config error, 3 every cell failed.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "zodmc/bench.hpp"
#include "zodmc/io.hpp"

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> out;

  template <typename Config>
  void apply(Config& c) const {
    if (seed) c.seed = *seed;
    if (workers) c.workers = *workers;
    if (out) c.output_dir = *out;
  }
};

void add_common(CLI::App* cmd, std::string& path, Overrides& o) {
  cmd->add_option("config", path, "JSON config file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Override the config seed");
  cmd->add_option("--workers", o.workers, "Worker threads (0 = all cores)");
  cmd->add_option("--out", o.out, "Override the output directory");
}

int cmd_run(const std::string& path, const Overrides& o) {
  auto config = zodmc::parse_experiment_config(zodmc::read_text(path));
  o.apply(config);
  const auto result = zodmc::run_experiment(config);
  for (const auto& cell : result.cells) {
    std::cout << cell.algorithm;
    if (cell.sweep_value) std::cout << " " << config.sweep_param << "=" << *cell.sweep_value;
    std::cout << " budget=" << cell.budget << " ";
    if (!cell.ok) {
      std::cout << "FAILED: " << cell.error << "\n";
      continue;
    }
    std::cout << "queries=" << cell.total_queries;
    if (cell.has_metrics) std::cout << " mmd=" << cell.metrics.mmd << " w2=" << cell.metrics.w2;
    std::cout << "\n";
  }
  std::cout << "wrote " << (result.output_dir / "curves.csv").string() << "\n";
  if (!result.cells.empty() && result.failed == result.cells.size()) return 3;
  return 0;
}

int cmd_score_error(const std::string& path, const Overrides& o) {
  auto config = zodmc::parse_score_error_config(zodmc::read_text(path));
  o.apply(config);
  for (const auto& r : zodmc::run_score_error_study(config))
    std::cout << "t=" << r.t << " mean=" << r.mean << " std=" << r.std << "\n";
  return 0;
}

int cmd_acceptance(const std::string& path, const Overrides& o) {
  auto config = zodmc::parse_acceptance_config(zodmc::read_text(path));
  o.apply(config);
  for (const auto& r : zodmc::run_acceptance_study(config)) {
    std::cout << "t=" << r.t << " accepted=" << r.mean_accepted << " se=" << r.std_error;
    if (r.predicted) std::cout << " predicted=" << *r.predicted;
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zeroth-order diffusion Monte Carlo sampler and benchmark harness"};
  app.set_version_flag("--version", ZODMC_VERSION);
  app.require_subcommand(1);

  std::string path;
  Overrides o;
  auto* run = app.add_subcommand("run", "Run an experiment config");
  auto* score = app.add_subcommand("score-error", "Score L2 error over the schedule grid");
  auto* accept = app.add_subcommand("acceptance", "Accepted proposals per grid time");
  auto* validate = app.add_subcommand("validate", "Check a config without running it");
  for (auto* cmd : {run, score, accept}) add_common(cmd, path, o);
  validate->add_option("config", path, "JSON config file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(path, o);
    if (*score) return cmd_score_error(path, o);
    if (*accept) return cmd_acceptance(path, o);
    std::cout << zodmc::validate_config(zodmc::read_text(path)) << "\n";
    return 0;
  } catch (const zodmc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
