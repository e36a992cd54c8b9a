#pragma once

#include <functional>
#include <optional>

#include "zodmc/common.hpp"
#include "zodmc/rgo.hpp"
#include "zodmc/target.hpp"

namespace zodmc {

/// How many conditional samples to request per score evaluation.
///
/// `budget` spends exactly `n_fixed` proposals per evaluation and keeps every
/// acceptance among them, which is how per-score oracle budgets are matched.
struct SampleCountPolicy {
  enum class Kind { fixed, theory, budget };
  Kind kind = Kind::budget;
  std::size_t n_fixed = 2200;
  double c = 1.0;
  double eps = 0.5;
  std::size_t n_min = 1;
  std::size_t n_max = 100000;

  static SampleCountPolicy fixed(std::size_t n);
  static SampleCountPolicy theory(double c, double eps, std::size_t n_min, std::size_t n_max);
  static SampleCountPolicy budget(std::size_t proposals);

  /// Throws ConfigError when the fields violate n_min ≥ 1, n_max ≥ n_min or positivity.
  void validate() const;
};

std::string_view policy_kind_name(SampleCountPolicy::Kind kind);
SampleCountPolicy::Kind parse_policy_kind(std::string_view name);

/// fixed/budget → n_fixed; theory → clamp(⌈c·cov_hint·e^{−2t}/(1 − e^{−2t})²/eps²⌉, n_min, n_max).
std::size_t sample_count(const SampleCountPolicy& policy, double t, double cov_hint);

/// What to do when a request produces no acceptance at all.
enum class StarvedAction {
  abort,       ///< propagate RgoStarved
  importance,  ///< fall back to the self-normalized importance posterior mean of the same proposals
};

struct ScoreOptions {
  RgoOptions rgo;
  StarvedAction on_starved = StarvedAction::abort;
  /// Trace of Cov_p used by the theory policy; defaults to d.
  std::optional<double> cov_hint;
  /// Overrides the per-request proposal cap for fixed/theory policies.
  std::optional<std::uint64_t> max_proposals;
};

struct ScoreEstimate {
  double t = 0.0;
  Vector x;
  Vector value;
  std::size_t n_used = 0;
  std::uint64_t proposals_used = 0;
  std::uint64_t envelope_violations = 0;
  bool fallback_used = false;
};

/// (1/n)·Σᵢ (e^{−t} zᵢ − x)/(1 − e^{−2t}) over the rows of `samples`.
Vector score_from_samples(double t, PointRef x, const Matrix& samples);
/// The same map applied to a posterior mean m: (e^{−t} m − x)/(1 − e^{−2t}).
Vector score_from_mean(double t, PointRef x, PointRef mean);

/// Monte Carlo score estimate at (t, x) from exact conditional samples.
ScoreEstimate estimate_score(const Target& target, MinTracker& tracker, double t, PointRef x,
                             const SampleCountPolicy& policy, QueryLedger& ledger, Rng& rng,
                             const ScoreOptions& options = {});

/// Any score approximation s(t, x).
using ScoreFn = std::function<Vector(double, PointRef, Rng&)>;

struct ScoreErrorStats {
  double mean = 0.0;
  double std = 0.0;
  std::size_t n_points = 0;
};

/// Empirical E‖s(t, X) − ∇log p_t(X)‖² with X drawn exactly from p_t.
/// Requires an analytic score and an exact mixture sampler; throws ConfigError otherwise.
ScoreErrorStats score_l2_error(const Target& target, double t, const ScoreFn& estimator, std::size_t n_eval_points,
                               Rng& rng);

/// Same metric for the Monte Carlo estimator. Evaluation points run in parallel
/// on independent streams derived from `seed`.
ScoreErrorStats score_l2_error(const Target& target, double t, const SampleCountPolicy& policy,
                               const MinTracker& tracker, std::size_t n_eval_points, std::uint64_t seed,
                               int workers = 0, const ScoreOptions& options = {});

}  // namespace zodmc
