#include "zodmc/score.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "zodmc/ou.hpp"

namespace zodmc {

SampleCountPolicy SampleCountPolicy::fixed(std::size_t n) {
  SampleCountPolicy p;
  p.kind = Kind::fixed;
  p.n_fixed = n;
  return p;
}

SampleCountPolicy SampleCountPolicy::theory(double c, double eps, std::size_t n_min, std::size_t n_max) {
  SampleCountPolicy p;
  p.kind = Kind::theory;
  p.c = c;
  p.eps = eps;
  p.n_min = n_min;
  p.n_max = n_max;
  return p;
}

SampleCountPolicy SampleCountPolicy::budget(std::size_t proposals) {
  SampleCountPolicy p;
  p.kind = Kind::budget;
  p.n_fixed = proposals;
  return p;
}

void SampleCountPolicy::validate() const {
  switch (kind) {
    case Kind::fixed:
    case Kind::budget:
      if (n_fixed < 1) throw ConfigError("sample-count policy: n must be at least 1");
      break;
    case Kind::theory:
      if (!(c > 0.0) || !(eps > 0.0)) throw ConfigError("sample-count policy: c and eps must be positive");
      if (n_min < 1) throw ConfigError("sample-count policy: n_min must be at least 1");
      if (n_max < n_min) throw ConfigError("sample-count policy: n_max must be >= n_min");
      break;
  }
}

std::string_view policy_kind_name(SampleCountPolicy::Kind kind) {
  switch (kind) {
    case SampleCountPolicy::Kind::fixed: return "fixed";
    case SampleCountPolicy::Kind::theory: return "theory";
    case SampleCountPolicy::Kind::budget: return "budget";
  }
  return "unknown";
}

SampleCountPolicy::Kind parse_policy_kind(std::string_view name) {
  if (name == "fixed") return SampleCountPolicy::Kind::fixed;
  if (name == "theory") return SampleCountPolicy::Kind::theory;
  if (name == "budget") return SampleCountPolicy::Kind::budget;
  throw ConfigError("unknown sample-count policy '" + std::string(name) + "'");
}

std::size_t sample_count(const SampleCountPolicy& policy, double t, double cov_hint) {
  if (!(t > 0.0)) throw ArgumentError("sample_count: t must be positive");
  if (policy.kind != SampleCountPolicy::Kind::theory) return policy.n_fixed;
  const double one_minus = -std::expm1(-2.0 * t);
  const double raw = policy.c * cov_hint * std::exp(-2.0 * t) / (one_minus * one_minus) / (policy.eps * policy.eps);
  const double lo = static_cast<double>(policy.n_min), hi = static_cast<double>(policy.n_max);
  const double n = std::ceil(raw);
  if (!(n > lo)) return policy.n_min;
  if (n >= hi) return policy.n_max;
  return static_cast<std::size_t>(n);
}

Vector score_from_mean(double t, PointRef x, PointRef mean) {
  return (std::exp(-t) * mean - x) / (-std::expm1(-2.0 * t));
}

Vector score_from_samples(double t, PointRef x, const Matrix& samples) {
  if (samples.rows() == 0) throw ArgumentError("score_from_samples: no samples");
  const Vector mean = samples.colwise().mean().transpose();
  return score_from_mean(t, x, mean);
}

ScoreEstimate estimate_score(const Target& target, MinTracker& tracker, double t, PointRef x,
                             const SampleCountPolicy& policy, QueryLedger& ledger, Rng& rng,
                             const ScoreOptions& options) {
  if (!(t > 0.0)) throw ArgumentError("estimate_score: t must be positive");
  const double cov_hint = options.cov_hint.value_or(static_cast<double>(target.dim()));
  const std::size_t n = sample_count(policy, t, cov_hint);

  RgoRequest req;
  req.t = t;
  req.x = x;
  req.n = n;
  if (policy.kind == SampleCountPolicy::Kind::budget)
    req.max_proposals = n;
  else
    req.max_proposals = options.max_proposals.value_or(default_max_proposals(target, tracker, t, x, n));

  ScoreEstimate est;
  est.t = t;
  est.x = x;
  try {
    const RgoResult r = rgo_sample(target, tracker, req, ledger, rng, options.rgo);
    est.value = score_from_samples(t, x, r.samples);
    est.n_used = static_cast<std::size_t>(r.samples.rows());
    est.proposals_used = r.proposals_used;
    est.envelope_violations = r.envelope_violations;
  } catch (const RgoStarved& e) {
    if (options.on_starved == StarvedAction::abort) throw;
    est.value = score_from_mean(t, x, e.importance_mean);
    est.n_used = 0;
    est.proposals_used = e.proposals_used;
    est.fallback_used = true;
  }
  return est;
}

namespace {

ScoreErrorStats summarize(const std::vector<double>& errs) {
  ScoreErrorStats s;
  s.n_points = errs.size();
  if (errs.empty()) return s;
  double sum = 0.0;
  for (double e : errs) sum += e;
  s.mean = sum / errs.size();
  double ss = 0.0;
  for (double e : errs) ss += (e - s.mean) * (e - s.mean);
  s.std = errs.size() > 1 ? std::sqrt(ss / (errs.size() - 1)) : 0.0;
  return s;
}

void require_exact(const Target& target) {
  if (!target.has_analytic_score() || !target.mixture)
    throw ConfigError("score error: target '" + target.name() + "' has no analytic score at time t");
}

}  // namespace

ScoreErrorStats score_l2_error(const Target& target, double t, const ScoreFn& estimator, std::size_t n_eval_points,
                               Rng& rng) {
  require_exact(target);
  if (!(t > 0.0)) throw ArgumentError("score_l2_error: t must be positive");
  const OuGmm pt(*target.mixture, t);
  std::vector<double> errs(n_eval_points);
  Vector x(target.dim());
  for (std::size_t i = 0; i < n_eval_points; ++i) {
    pt.sample(rng, x);
    errs[i] = (estimator(t, x, rng) - target.analytic_score_at_time(t, x)).squaredNorm();
  }
  return summarize(errs);
}

ScoreErrorStats score_l2_error(const Target& target, double t, const SampleCountPolicy& policy,
                               const MinTracker& tracker, std::size_t n_eval_points, std::uint64_t seed, int workers,
                               const ScoreOptions& options) {
  require_exact(target);
  if (!(t > 0.0)) throw ArgumentError("score_l2_error: t must be positive");
  policy.validate();
  const OuGmm pt(*target.mixture, t);
  std::vector<double> errs(n_eval_points);
  parallel_for(n_eval_points, workers, [&](std::size_t i) {
    Rng rng = make_stream(seed, i, 0x5c0e);
    QueryLedger ledger;
    MinTracker local = tracker;
    Vector x(target.dim());
    pt.sample(rng, x);
    const ScoreEstimate est = estimate_score(target, local, t, x, policy, ledger, rng, options);
    errs[i] = (est.value - target.analytic_score_at_time(t, x)).squaredNorm();
  });
  return summarize(errs);
}

}  // namespace zodmc
