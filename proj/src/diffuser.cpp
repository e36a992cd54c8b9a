#include "zodmc/diffuser.hpp"

#include <cmath>

namespace zodmc {

namespace {
constexpr std::uint64_t kTagInit = 0x1a17;
constexpr std::uint64_t kTagOpt = 0x0b7;
}  // namespace

Vector ei_step(PointRef x, PointRef s, double gamma, PointRef xi) {
  if (!(gamma > 0.0)) throw ArgumentError("ei_step: gamma must be positive");
  const double eg = std::exp(gamma);
  return eg * x + 2.0 * std::expm1(gamma) * s + std::sqrt(std::expm1(2.0 * gamma)) * xi;
}

ZodmcAborted::ZodmcAborted(SampleBatch partial_, int step_, std::size_t trajectory_, double t_, Vector state_,
                           std::uint64_t proposals_used_)
    : std::runtime_error("run aborted at step " + std::to_string(step_) + " (t=" + std::to_string(t_) +
                         ", trajectory " + std::to_string(trajectory_) + "): conditional sampler starved after " +
                         std::to_string(proposals_used_) + " proposals"),
      partial(std::move(partial_)),
      step(step_),
      trajectory(trajectory_),
      t(t_),
      state(std::move(state_)),
      proposals_used(proposals_used_) {}

std::vector<Vector> default_opt_starts(int dim, std::uint64_t seed) {
  std::vector<Vector> starts{Vector::Zero(dim)};
  Rng rng = make_stream(seed, 0, kTagOpt);
  for (int i = 0; i < 8; ++i) {
    Vector z(dim);
    fill_normal(rng, z);
    starts.push_back(z);
  }
  return starts;
}

MinTracker locate_minimum(const Target& target, const std::vector<Vector>& starts, QueryLedger& ledger,
                          const MinimizerOptions& options) {
  if (starts.empty()) throw ConfigError("at least one minimizer start is required");
  MinTracker best;
  for (const Vector& s : starts) {
    if (s.size() != target.dim()) throw ConfigError("minimizer start has the wrong dimension");
    best.merge(find_potential_min(target, s, ledger, options));
  }
  if (!best.initialized()) throw ConfigError("potential is not finite at any minimizer start");
  return best;
}

namespace {

struct TrajectoryStep {
  Vector score;
  std::uint64_t proposals = 0;
  std::uint64_t accepted = 0;
  std::uint64_t violations = 0;
  bool fallback = false;
};

using StepFn = std::function<TrajectoryStep(std::size_t, double, PointRef, Rng&, MinTracker&)>;

void check_config(const Target& target, const ZodmcConfig& config) {
  if (config.batch_size < 1) throw ConfigError("batch_size must be at least 1");
  const auto problems = validate_schedule(config.schedule);
  if (!problems.empty()) throw ConfigError("invalid schedule: " + problems.front());
  config.policy.validate();
  for (const Vector& s : config.opt_starts)
    if (s.size() != target.dim()) throw ConfigError("minimizer start has the wrong dimension");
}

SampleBatch drive(const Target& target, const ZodmcConfig& config, QueryLedger& ledger, MinTracker tracker,
                  const StepFn& step_fn, const std::string& algorithm) {
  const auto n = config.batch_size;
  const int d = target.dim();
  const Schedule& sched = config.schedule;

  SampleBatch batch;
  batch.algorithm = algorithm;
  batch.seed = config.seed;

  Matrix states(static_cast<Eigen::Index>(n), d);
  std::vector<Rng> rngs;
  rngs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    rngs.push_back(make_stream(config.seed, i, kTagInit));
    Vector x0(d);
    fill_normal(rngs.back(), x0);
    states.row(static_cast<Eigen::Index>(i)) = x0.transpose();
  }
  if (config.record_trace) batch.trace.push_back(states);

  auto finish = [&](SampleBatch& b, const Matrix& st) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < st.rows(); ++i)
      if (st.row(i).allFinite()) keep.push_back(i);
    b.points.resize(static_cast<Eigen::Index>(keep.size()), d);
    for (std::size_t j = 0; j < keep.size(); ++j) b.points.row(static_cast<Eigen::Index>(j)) = st.row(keep[j]);
    b.diverged = static_cast<std::size_t>(st.rows()) - keep.size();
    b.ledger = ledger.snapshot();
    b.vstar = tracker.best_value;
    b.vstar_point = tracker.best_point;
  };

  std::vector<TrajectoryStep> results(n);
  std::vector<MinTracker> trackers(n);
  std::vector<std::optional<RgoStarved>> starved(n);

  for (int k = 0; k < sched.steps; ++k) {
    const double t = sched.score_time(k);
    const double gamma = sched.gammas[static_cast<std::size_t>(k)];
    parallel_for(n, config.workers, [&](std::size_t i) {
      const auto row = static_cast<Eigen::Index>(i);
      trackers[i] = tracker;
      const Vector x = states.row(row).transpose();
      try {
        results[i] = step_fn(i, t, x, rngs[i], trackers[i]);
      } catch (const RgoStarved& e) {
        starved[i] = e;
        return;
      }
      Vector xi(d);
      fill_normal(rngs[i], xi);
      states.row(row) = ei_step(x, results[i].score, gamma, xi).transpose();
    });

    for (std::size_t i = 0; i < n; ++i) {
      if (!starved[i]) continue;
      // Rows already advanced this step are reported as they are.
      finish(batch, states);
      throw ZodmcAborted(std::move(batch), k, i, t, starved[i]->x, starved[i]->proposals_used);
    }

    StepStats st;
    st.t = t;
    double acc_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      tracker.merge(trackers[i]);
      const auto& r = results[i];
      st.proposals += r.proposals;
      st.accepted += r.accepted;
      st.accepted_sq += static_cast<double>(r.accepted) * static_cast<double>(r.accepted);
      st.envelope_violations += r.violations;
      st.fallbacks += r.fallback ? 1 : 0;
      acc_sum += r.proposals > 0 ? static_cast<double>(r.accepted) / static_cast<double>(r.proposals) : 0.0;
    }
    st.mean_acceptance = acc_sum / static_cast<double>(n);
    batch.steps.push_back(st);
    batch.per_step_acceptance.push_back(st.mean_acceptance);
    batch.envelope_violations += st.envelope_violations;
    batch.fallbacks += st.fallbacks;
    if (config.record_trace) batch.trace.push_back(states);

    if (config.max_total_queries && ledger.zeroth_order_count() >= *config.max_total_queries &&
        k + 1 < sched.steps) {
      batch.truncated = true;
      break;
    }
  }
  finish(batch, states);
  return batch;
}

}  // namespace

SampleBatch run_zodmc(const Target& target, const ZodmcConfig& config, QueryLedger& ledger) {
  check_config(target, config);
  const auto starts = config.opt_starts.empty() ? default_opt_starts(target.dim(), config.seed) : config.opt_starts;
  MinTracker tracker = locate_minimum(target, starts, ledger, config.minimizer);

  const StepFn step = [&](std::size_t, double t, PointRef x, Rng& rng, MinTracker& local) {
    const ScoreEstimate est = estimate_score(target, local, t, x, config.policy, ledger, rng, config.score);
    TrajectoryStep r;
    r.score = est.value;
    r.proposals = est.proposals_used;
    r.accepted = est.n_used;
    r.violations = est.envelope_violations;
    r.fallback = est.fallback_used;
    return r;
  };
  return drive(target, config, ledger, std::move(tracker), step, "zodmc");
}

SampleBatch run_ddmc(const Target& target, const ZodmcConfig& config, const ScoreFn& score) {
  check_config(target, config);
  QueryLedger ledger;
  MinTracker tracker;
  const StepFn step = [&](std::size_t, double t, PointRef x, Rng& rng, MinTracker&) {
    TrajectoryStep r;
    r.score = score(t, x, rng);
    return r;
  };
  return drive(target, config, ledger, std::move(tracker), step, "ddmc");
}

}  // namespace zodmc
