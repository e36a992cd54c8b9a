#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "zodmc/baselines.hpp"
#include "zodmc/diffuser.hpp"
#include "zodmc/metrics.hpp"
#include "zodmc/target.hpp"

namespace zodmc {

/// Declarative target description as read from a config file.
struct TargetSpec {
  std::string kind = "gmm";  ///< gmm | gmm+annulus | mueller-brown | randomized-gmm | gaussian
  std::string preset = "d1";  ///< d1 | d4 when no explicit mixture is given
  std::optional<GmmSpec> mixture;
  std::optional<double> radius;  ///< rescales the d1 means so the (0, 11) mode sits at (0, radius)
  double inner = 5.0, outer = 11.0, height = 8.0;
  double beta = 0.1;
  bool standard_form = false;
  int dim = 2;
  int modes = 5;
  std::uint64_t seed = 0;

  /// Canonical text used to content-address ground-truth batches.
  std::string canonical() const;
};

Target build_target(const TargetSpec& spec);
/// Copy of `spec` with the sweep parameter ("radius" or "dim") set to `value`.
TargetSpec apply_sweep(TargetSpec spec, const std::string& param, double value);

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::exp_decay;
  double horizon = 2.0;
  int steps = 25;
  double early_stop = 5e-3;

  Schedule build() const { return build_schedule(kind, horizon, steps, early_stop); }
};

struct AlgorithmSpec {
  std::string name;  ///< zodmc | ula
  ScheduleSpec schedule;
  SampleCountPolicy::Kind policy = SampleCountPolicy::Kind::budget;
  double c = 1.0, eps = 0.5;
  std::size_t n_min = 1, n_max = 100000;
  StarvedAction on_starved = StarvedAction::importance;
  std::size_t rgo_batch = 256;
  double ula_step = 0.01;
  UlaConfig::Init ula_init = UlaConfig::Init::origin;
  double fd_step = 1e-5;
};

struct ExperimentConfig {
  std::string name = "experiment";
  TargetSpec target;
  std::string sweep_param;  ///< empty, "radius" or "dim"
  std::vector<double> sweep_values;
  std::vector<AlgorithmSpec> algorithms;
  std::vector<std::uint64_t> oracle_budgets;  ///< proposals per score evaluation
  std::size_t n_output_samples = 1000;
  std::size_t ground_truth_n = 100000;
  double ground_truth_inflation = 3.0;
  std::size_t w2_points = 2048;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  int workers = 0;
};

struct ScoreErrorConfig {
  std::string name = "score-error";
  TargetSpec target;
  ScheduleSpec schedule;
  SampleCountPolicy policy = SampleCountPolicy::fixed(100);
  std::size_t n_eval_points = 200;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  int workers = 0;
};

struct AcceptanceConfig {
  std::string name = "acceptance";
  TargetSpec target;
  ScheduleSpec schedule{ScheduleKind::exp_decay, 5.0, 50, 1e-2};
  std::size_t trajectories = 1000;
  std::size_t proposals = 10000;
  /// Run the trajectories once beforehand and start the minimizer from the best point they found.
  bool pilot = true;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  int workers = 0;
};

/// Parses the "type" field and the matching body; unknown keys are rejected. Throws ConfigError.
std::string config_type(const std::string& json_text);
ExperimentConfig parse_experiment_config(const std::string& json_text);
ScoreErrorConfig parse_score_error_config(const std::string& json_text);
AcceptanceConfig parse_acceptance_config(const std::string& json_text);

/// Resolves every target and schedule in a config of any type; returns a one-line summary.
std::string validate_config(const std::string& json_text);

struct CellResult {
  std::string algorithm;
  std::optional<double> sweep_value;
  std::uint64_t budget = 0;
  bool ok = false;
  std::string error;
  std::uint64_t total_queries = 0;
  std::uint64_t planned_queries = 0;  ///< budget·N·n plus minimizer queries
  MetricsReport metrics;
  bool has_metrics = false;
  double unassigned = 0.0;
  std::vector<double> region_mass;  ///< annulus targets: inner disc, annulus, outside
  std::uint64_t fallbacks = 0;
  std::uint64_t envelope_violations = 0;
  std::string samples_file;
};

struct ExperimentResult {
  std::vector<CellResult> cells;
  std::size_t failed = 0;
  std::filesystem::path output_dir;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

/// Masses of {‖x‖ ≤ inner}, {inner < ‖x‖ < outer}, {‖x‖ ≥ outer}.
std::vector<double> region_masses(const Matrix& points, double inner, double outer);

/// Ground truth for targets with a known dominating proposal; cached on disk by content hash.
Matrix ground_truth_batch(const TargetSpec& spec, std::size_t n, double inflation, std::uint64_t seed,
                          const std::filesystem::path& cache_dir);

struct ScoreErrorRow {
  double t = 0.0;
  double mean = 0.0;
  double std = 0.0;
  std::size_t n_points = 0;
};

std::vector<ScoreErrorRow> run_score_error_study(const ScoreErrorConfig& config);

struct AcceptanceRow {
  double t = 0.0;
  double mean_accepted = 0.0;  ///< per `proposals` proposals, averaged over trajectories
  double std_error = 0.0;
  std::optional<double> predicted;       ///< mean of proposals/expected_proposals over trajectory states
  std::optional<double> predicted_std_error;  ///< binomial standard error of the mean given the states
};

/// Drives trajectories with `proposals` per score evaluation and reports the accepted counts at every grid time.
std::vector<AcceptanceRow> run_acceptance_study(const AcceptanceConfig& config);

}  // namespace zodmc
