#include "zodmc/rgo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace zodmc {

bool MinTracker::offer(PointRef z, double v) {
  if (!(v < best_value)) return false;
  best_point = z;
  best_value = v;
  ++update_count;
  return true;
}

void MinTracker::merge(const MinTracker& other) {
  if (other.best_value < best_value) {
    best_point = other.best_point;
    best_value = other.best_value;
  }
  update_count += other.update_count;
}

Vector fd_gradient(const Target& target, PointRef x, double h, QueryLedger& ledger, Phase phase) {
  const auto d = x.size();
  Vector g(d);
  Vector probe = x;
  for (Eigen::Index i = 0; i < d; ++i) {
    probe[i] = x[i] + h;
    const double fp = eval_potential(target, probe, ledger, phase);
    probe[i] = x[i] - h;
    const double fm = eval_potential(target, probe, ledger, phase);
    probe[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

MinTracker find_potential_min(const Target& target, PointRef x0, QueryLedger& ledger,
                              const MinimizerOptions& options) {
  if (!x0.allFinite()) throw ArgumentError("find_potential_min: starting point must be finite");
  const auto d = x0.size();
  constexpr Phase phase = Phase::optimization;

  MinTracker tracker;
  Vector x = x0;
  double fx = eval_potential(target, x, ledger, phase);
  if (!std::isfinite(fx)) {
    tracker.best_point = x;
    tracker.best_value = fx;
    return tracker;
  }
  tracker.offer(x, fx);

  auto step_h = [&](const Vector& p) { return options.fd_scale * (1.0 + p.cwiseAbs().maxCoeff()); };
  Vector g = fd_gradient(target, x, step_h(x), ledger, phase);
  Matrix hinv = Matrix::Identity(d, d);

  for (int iter = 0; iter < options.max_iters; ++iter) {
    if (!g.allFinite() || g.norm() < options.grad_tol) break;
    Vector p = -hinv * g;
    double slope = g.dot(p);
    if (!(slope < 0.0)) {
      hinv.setIdentity();
      p = -g;
      slope = -g.squaredNorm();
    }
    // Backtracking Armijo line search.
    double alpha = 1.0;
    Vector x_new;
    double f_new = INFINITY;
    bool accepted = false;
    bool non_finite = false;
    while (alpha > 1e-16) {
      x_new = x + alpha * p;
      f_new = eval_potential(target, x_new, ledger, phase);
      if (!std::isfinite(f_new)) {
        non_finite = true;
        break;
      }
      if (f_new <= fx + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (non_finite || !accepted) break;

    const Vector g_new = fd_gradient(target, x_new, step_h(x_new), ledger, phase);
    const Vector s = x_new - x;
    const Vector y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Matrix eye = Matrix::Identity(d, d);
      hinv = (eye - rho * s * y.transpose()) * hinv * (eye - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    x = x_new;
    fx = f_new;
    g = g_new;
    tracker.offer(x, fx);
  }
  return tracker;
}

RgoStarved::RgoStarved(double t_, Vector x_, std::uint64_t proposals_used_, Vector importance_mean_)
    : std::runtime_error("rgo starved: no acceptance in " + std::to_string(proposals_used_) +
                         " proposals at t=" + std::to_string(t_)),
      t(t_),
      x(std::move(x_)),
      proposals_used(proposals_used_),
      importance_mean(std::move(importance_mean_)) {}

RgoResult rgo_sample(const Target& target, MinTracker& tracker, const RgoRequest& req, QueryLedger& ledger,
                     Rng& rng, const RgoOptions& options) {
  if (!(req.t > 0.0)) throw ArgumentError("rgo_sample: t must be strictly positive");
  if (req.n == 0) throw ArgumentError("rgo_sample: n must be at least 1");
  if (req.x.size() != target.dim()) throw ConfigError("rgo_sample: state dimension mismatch");
  if (!tracker.initialized()) throw ArgumentError("rgo_sample: tracker is not initialized");

  const auto d = static_cast<Eigen::Index>(target.dim());
  const double center_scale = std::exp(req.t);
  const double spread = std::sqrt(std::expm1(2.0 * req.t));
  const Vector center = center_scale * req.x;
  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);

  RgoResult out;
  out.samples.resize(static_cast<Eigen::Index>(req.n), d);
  std::size_t kept = 0;

  Matrix proposals(d, static_cast<Eigen::Index>(batch));
  std::vector<double> values(batch);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // Self-normalized importance accumulator, kept in scaled form.
  double lw_max = -INFINITY, w_sum = 0.0;
  Vector w_acc = Vector::Zero(d);

  while (kept < req.n && out.proposals_used < req.max_proposals) {
    const std::size_t m = static_cast<std::size_t>(
        std::min<std::uint64_t>(batch, req.max_proposals - out.proposals_used));
    if (static_cast<std::size_t>(proposals.cols()) != m) proposals.resize(d, static_cast<Eigen::Index>(m));
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(m); ++j)
      for (Eigen::Index i = 0; i < d; ++i) proposals(i, j) = center[i] + spread * normal(rng);
    eval_potential_batch(target, proposals, ledger, Phase::score_estimation, values);
    out.proposals_used += m;

    for (std::size_t j = 0; j < m; ++j) {
      const double v = values[j];
      const auto col = proposals.col(static_cast<Eigen::Index>(j));
      const double u = unit(rng);
      if (std::isfinite(v)) {
        const double lw = -v;
        if (lw > lw_max) {
          const double f = std::exp(lw_max - lw);
          w_sum = w_sum * f + 1.0;
          w_acc = w_acc * f + col;
          lw_max = lw;
        } else {
          const double w = std::exp(lw - lw_max);
          w_sum += w;
          w_acc += w * col;
        }
      }
      // Test against the envelope in force before this proposal.
      const bool accept = u <= std::exp(tracker.best_value - v);
      if (v < tracker.best_value) {
        ++out.envelope_violations;
        out.vstar_improved = true;
        tracker.offer(col, v);
      }
      if (accept) {
        ++out.accepted_total;
        if (kept < req.n) out.samples.row(static_cast<Eigen::Index>(kept++)) = col.transpose();
      }
    }
  }

  out.samples.conservativeResize(static_cast<Eigen::Index>(kept), d);
  out.complete = kept == req.n;
  out.acceptance_rate = out.proposals_used > 0 ? static_cast<double>(out.accepted_total) / out.proposals_used : 0.0;
  out.importance_mean = w_sum > 0.0 ? Vector(w_acc / w_sum) : center;
  if (kept == 0) throw RgoStarved(req.t, req.x, out.proposals_used, out.importance_mean);
  return out;
}

double expected_proposals(double smoothness, double t, PointRef x, PointRef xstar, std::size_t n) {
  if (!(smoothness > 0.0)) throw ArgumentError("expected_proposals: L must be positive");
  if (!(t > 0.0)) throw ArgumentError("expected_proposals: t must be positive");
  const double denom = smoothness * std::expm1(2.0 * t) + 1.0;
  const double d = static_cast<double>(x.size());
  const double dist2 = (smoothness * xstar - std::exp(t) * x).squaredNorm();
  return static_cast<double>(n) * std::exp(0.5 * d * std::log(denom) + 0.5 * dist2 / denom);
}

std::uint64_t default_max_proposals(const Target& target, const MinTracker& tracker, double t, PointRef x,
                                    std::size_t n) {
  constexpr std::uint64_t fallback = 1'000'000;
  if (!target.smoothness_hint || !tracker.initialized()) return fallback;
  const double expected = expected_proposals(*target.smoothness_hint, t, x, tracker.best_point, n);
  const double cap = 100.0 * expected;
  if (!std::isfinite(cap) || cap > 1e15) return static_cast<std::uint64_t>(1e15);
  return std::max<std::uint64_t>(static_cast<std::uint64_t>(std::ceil(cap)), n);
}

}  // namespace zodmc
