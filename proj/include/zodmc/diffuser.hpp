#pragma once

#include <optional>
#include <string>
#include <vector>

#include "zodmc/common.hpp"
#include "zodmc/rgo.hpp"
#include "zodmc/schedule.hpp"
#include "zodmc/score.hpp"
#include "zodmc/target.hpp"

namespace zodmc {

/// Per-step accounting across all trajectories.
struct StepStats {
  double t = 0.0;  ///< forward time at which the score was evaluated
  double mean_acceptance = 0.0;
  std::uint64_t proposals = 0;
  std::uint64_t accepted = 0;
  double accepted_sq = 0.0;  ///< Σ over trajectories of accepted²
  std::uint64_t envelope_violations = 0;
  std::uint64_t fallbacks = 0;
};

/// Output of any sampler run.
struct SampleBatch {
  std::string algorithm;
  std::uint64_t seed = 0;
  Matrix points;  ///< one sample per row
  LedgerTotals ledger;
  std::vector<double> per_step_acceptance;
  std::vector<StepStats> steps;
  std::vector<Matrix> trace;  ///< states at every grid point when requested
  bool truncated = false;
  std::size_t diverged = 0;
  double vstar = INFINITY;
  Vector vstar_point;
  std::uint64_t envelope_violations = 0;
  std::uint64_t fallbacks = 0;
};

struct ZodmcConfig {
  Schedule schedule = build_schedule(ScheduleKind::exp_decay, 2.0, 25, 5e-3);
  SampleCountPolicy policy = SampleCountPolicy::budget(2200);
  std::size_t batch_size = 1024;  ///< independent trajectories
  std::uint64_t seed = 0;
  /// Minimizer seeds; empty means the origin plus 8 standard normal draws.
  std::vector<Vector> opt_starts;
  bool record_trace = false;
  int workers = 0;
  ScoreOptions score;
  MinimizerOptions minimizer;
  /// Stop after the step during which the ledger total reaches this value.
  std::optional<std::uint64_t> max_total_queries;
};

/// e^γ x + 2(e^γ − 1)s + √(e^{2γ} − 1)·ξ.
Vector ei_step(PointRef x, PointRef s, double gamma, PointRef xi);

/// A run stopped by a starved conditional sampler; carries the states reached so far.
class ZodmcAborted : public std::runtime_error {
 public:
  ZodmcAborted(SampleBatch partial, int step, std::size_t trajectory, double t, Vector state,
               std::uint64_t proposals_used);
  SampleBatch partial;
  int step;
  std::size_t trajectory;
  double t;
  Vector state;
  std::uint64_t proposals_used;
};

/// Locates V̂* from every start and merges into one tracker.
MinTracker locate_minimum(const Target& target, const std::vector<Vector>& starts, QueryLedger& ledger,
                          const MinimizerOptions& options = {});
std::vector<Vector> default_opt_starts(int dim, std::uint64_t seed);

/// Reverse diffusion with the rejection-sampled Monte Carlo score.
///
/// Every trajectory owns an RNG stream derived from (seed, index); the V̂*
/// tracker is frozen within a step and merged in index order afterwards, so
/// the output depends on the seed only, not on the worker count.
SampleBatch run_zodmc(const Target& target, const ZodmcConfig& config, QueryLedger& ledger);

/// The same recursion driven by an arbitrary score function (no oracle queries).
SampleBatch run_ddmc(const Target& target, const ZodmcConfig& config, const ScoreFn& score);

}  // namespace zodmc
