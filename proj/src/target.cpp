#include "zodmc/target.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "zodmc/ou.hpp"

namespace zodmc {

std::string_view phase_name(Phase phase) {
  switch (phase) {
    case Phase::optimization: return "optimization";
    case Phase::score_estimation: return "score-estimation";
    case Phase::baseline: return "baseline";
    case Phase::ground_truth: return "ground-truth";
  }
  return "unknown";
}

std::uint64_t LedgerTotals::total() const {
  return std::accumulate(by_phase.begin(), by_phase.end(), std::uint64_t{0});
}

LedgerTotals LedgerTotals::operator-(const LedgerTotals& rhs) const {
  LedgerTotals out;
  for (std::size_t i = 0; i < kPhaseCount; ++i) out.by_phase[i] = by_phase[i] - rhs.by_phase[i];
  return out;
}

std::uint64_t QueryLedger::zeroth_order_count() const { return snapshot().total(); }

LedgerTotals QueryLedger::snapshot() const {
  LedgerTotals out;
  for (std::size_t i = 0; i < kPhaseCount; ++i) out.by_phase[i] = by_phase_[i].load(std::memory_order_relaxed);
  return out;
}

// ---------------------------------------------------------------------------
// GmmSpec

void GmmSpec::validate() const {
  const std::size_t k = weights.size();
  if (k == 0) throw ConfigError("gmm: at least one component required");
  if (means.size() != k || covariances.size() != k)
    throw ConfigError("gmm: weights, means and covariances must have the same length");
  const auto d = means.front().size();
  if (d == 0) throw ConfigError("gmm: zero-dimensional means");
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (!(weights[i] >= 0.0)) throw ConfigError("gmm: negative weight");
    sum += weights[i];
    if (means[i].size() != d) throw ConfigError("gmm: mean dimension mismatch");
    const Matrix& cov = covariances[i];
    if (cov.rows() != d || cov.cols() != d) throw ConfigError("gmm: covariance shape mismatch");
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + cov.cwiseAbs().maxCoeff()))
      throw ConfigError("gmm: covariance " + std::to_string(i) + " is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov, Eigen::EigenvaluesOnly);
    if (!(eig.eigenvalues().minCoeff() > 0.0))
      throw ConfigError("gmm: covariance " + std::to_string(i) + " is not positive definite");
  }
  if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("gmm: weights must sum to 1");
}

double GmmSpec::second_moment() const {
  double m2 = 0.0;
  for (std::size_t i = 0; i < size(); ++i) m2 += weights[i] * (means[i].squaredNorm() + covariances[i].trace());
  return m2;
}

Vector GmmSpec::mean() const {
  Vector m = Vector::Zero(dim());
  for (std::size_t i = 0; i < size(); ++i) m += weights[i] * means[i];
  return m;
}

Matrix GmmSpec::covariance() const {
  const Vector m = mean();
  Matrix c = Matrix::Zero(dim(), dim());
  for (std::size_t i = 0; i < size(); ++i) {
    const Vector dm = means[i] - m;
    c += weights[i] * (covariances[i] + dm * dm.transpose());
  }
  return c;
}

double GmmSpec::covariance_trace() const { return covariance().trace(); }

// ---------------------------------------------------------------------------
// GmmSampler / GmmLogDensity

GmmSampler::GmmSampler(const GmmSpec& spec) : means_(spec.means) {
  spec.validate();
  double acc = 0.0;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    acc += spec.weights[i];
    cumulative_.push_back(acc);
    chol_.push_back(spec.covariances[i].llt().matrixL());
  }
  cumulative_.back() = 1.0;
}

std::size_t GmmSampler::sample_with_label(Rng& rng, Eigen::Ref<Vector> out) const {
  const double u = uniform01(rng);
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), means_.size() - 1);
  Vector xi(out.size());
  fill_normal(rng, xi);
  out = means_[k] + chol_[k] * xi;
  return k;
}

void GmmSampler::sample(Rng& rng, Eigen::Ref<Vector> out) const { sample_with_label(rng, out); }

Matrix GmmSampler::sample(Rng& rng, std::size_t n) const {
  const auto d = means_.front().size();
  Matrix out(static_cast<Eigen::Index>(n), d);
  Vector x(d);
  for (std::size_t i = 0; i < n; ++i) {
    sample(rng, x);
    out.row(static_cast<Eigen::Index>(i)) = x.transpose();
  }
  return out;
}

GmmLogDensity::GmmLogDensity(const GmmSpec& spec) : dim_(spec.dim()) {
  spec.validate();
  const double log2pi = std::log(2.0 * std::numbers::pi);
  for (std::size_t i = 0; i < spec.size(); ++i) {
    Eigen::LLT<Matrix> llt(spec.covariances[i]);
    const Matrix lower = llt.matrixL();
    const Matrix whiten = lower.triangularView<Eigen::Lower>().solve(Matrix::Identity(dim_, dim_));
    const double logdet = 2.0 * lower.diagonal().array().log().sum();
    const double log_w = spec.weights[i] > 0.0 ? std::log(spec.weights[i]) : -INFINITY;
    components_.push_back({spec.means[i], whiten, log_w - 0.5 * (dim_ * log2pi + logdet)});
  }
}

double GmmLogDensity::operator()(PointRef x) const {
  // One-pass log-sum-exp; no heap traffic in this hot path.
  double m = -INFINITY;
  double s = 0.0;
  for (const auto& c : components_) {
    double q = 0.0;
    for (int a = 0; a < dim_; ++a) {
      double r = 0.0;
      for (int b = 0; b <= a; ++b) r += c.whiten(a, b) * (x[b] - c.mean[b]);
      q += r * r;
    }
    const double e = c.log_coef - 0.5 * q;
    if (e > m) {
      s = s * std::exp(m - e) + 1.0;
      m = e;
    } else {
      s += std::exp(e - m);
    }
  }
  return m + std::log(s);
}

// ---------------------------------------------------------------------------
// Target

Target::Target(std::string name, int dim, PotentialFn potential)
    : name_(std::move(name)), dim_(dim), potential_(std::move(potential)) {
  if (dim_ <= 0) throw ConfigError("target dimension must be positive");
  if (!potential_) throw ConfigError("target requires a potential");
}

double Target::analytic_log_density(PointRef x) const {
  if (!log_density_) throw ArgumentError("target '" + name_ + "' has no analytic log-density");
  return log_density_(x);
}

Vector Target::analytic_score_at_time(double t, PointRef x) const {
  if (!score_at_time_) throw ArgumentError("target '" + name_ + "' has no analytic OU score");
  return score_at_time_(t, x);
}

double eval_potential(const Target& target, PointRef x, QueryLedger& ledger, Phase phase) {
  if (x.size() != target.dim_)
    throw ConfigError("dimension mismatch: point has " + std::to_string(x.size()) + ", target expects " +
                      std::to_string(target.dim_));
  ledger.add(phase);
  return target.potential_(x);
}

void eval_potential_batch(const Target& target, const Matrix& points, QueryLedger& ledger, Phase phase,
                          std::span<double> out) {
  if (points.rows() != target.dim_) throw ConfigError("dimension mismatch in batch evaluation");
  if (out.size() < static_cast<std::size_t>(points.cols())) throw ArgumentError("output span too small");
  ledger.add(phase, static_cast<std::uint64_t>(points.cols()));
  for (Eigen::Index j = 0; j < points.cols(); ++j) out[static_cast<std::size_t>(j)] = target.potential_(points.col(j));
}

Target make_gmm(const GmmSpec& spec, std::string name) {
  spec.validate();
  auto density = std::make_shared<GmmLogDensity>(spec);
  Target target(std::move(name), spec.dim(), [density](PointRef x) { return -(*density)(x); });
  target.set_analytic_log_density([density](PointRef x) { return (*density)(x); });
  auto cache = std::make_shared<OuGmmCache>(spec);
  target.set_analytic_score([cache](double t, PointRef x) { return cache->at(t)->score(x); });
  target.second_moment_hint = spec.second_moment();
  if (spec.size() == 1) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(spec.covariances.front(), Eigen::EigenvaluesOnly);
    target.smoothness_hint = 1.0 / eig.eigenvalues().minCoeff();
  }
  target.mixture = spec;
  return target;
}

Target make_standard_gaussian(int dim) {
  if (dim <= 0) throw ConfigError("dimension must be positive");
  GmmSpec spec{{1.0}, {Vector::Zero(dim)}, {Matrix::Identity(dim, dim)}};
  Target target("gaussian", dim, [](PointRef x) { return 0.5 * x.squaredNorm(); });
  target.set_analytic_log_density([](PointRef x) { return -0.5 * x.squaredNorm(); });
  target.set_analytic_score([](double, PointRef x) { return Vector(-x); });
  target.second_moment_hint = static_cast<double>(dim);
  target.smoothness_hint = 1.0;
  target.mixture = spec;
  return target;
}

double annulus_penalty(PointRef x, double inner, double outer, double height) {
  const double r = x.norm();
  if (r > inner && r < outer) return height * std::floor(r);
  return 0.0;
}

Target apply_annulus_penalty(const Target& target, double inner, double outer, double height) {
  if (!(inner >= 0.0 && inner < outer)) throw ConfigError("annulus requires 0 <= inner < outer");
  if (!(height >= 0.0)) throw ConfigError("annulus height must be nonnegative");
  auto base = target.potential_;
  Target out(target.name() + "+annulus", target.dim(), [base, inner, outer, height](PointRef x) {
    return base(x) + annulus_penalty(x, inner, outer, height);
  });
  if (target.has_analytic_log_density()) {
    auto base_density = target.log_density_;
    out.set_analytic_log_density([base_density, inner, outer, height](PointRef x) {
      return base_density(x) - annulus_penalty(x, inner, outer, height);
    });
  }
  out.smoothness_hint = std::nullopt;
  out.second_moment_hint = std::nullopt;
  return out;
}

// ---------------------------------------------------------------------------
// Müller-Brown

double mueller_brown_vm(double x, double y, bool standard_form) {
  const double s = standard_form ? -1.0 : 1.0;
  const double a = x + 0.5, b = y - 1.5;
  const double c = x + 1.0, e = y - 1.0;
  return -170.0 * std::exp(-6.5 * a * a + 11.0 * a * b - 6.5 * b * b)
         - 100.0 * std::exp(-x * x - 10.0 * (y - 0.5) * (y - 0.5))
         + 15.0 * std::exp(s * (0.7 * c * c + 0.6 * c * e + 0.7 * e * e))
         - 200.0 * std::exp(-(x - 1.0) * (x - 1.0) - 10.0 * y * y);
}

Vector mueller_brown_middle_well(bool standard_form) {
  // Damped Newton on V_m with finite-difference derivatives; 2D and smooth.
  auto f = [standard_form](double x, double y) { return mueller_brown_vm(x, y, standard_form); };
  double x = -0.05, y = 0.47;
  const double h = 1e-4;
  for (int it = 0; it < 100; ++it) {
    const double gx = (f(x + h, y) - f(x - h, y)) / (2 * h);
    const double gy = (f(x, y + h) - f(x, y - h)) / (2 * h);
    if (std::hypot(gx, gy) < 1e-10) break;
    const double fxx = (f(x + h, y) - 2 * f(x, y) + f(x - h, y)) / (h * h);
    const double fyy = (f(x, y + h) - 2 * f(x, y) + f(x, y - h)) / (h * h);
    const double fxy = (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4 * h * h);
    const double det = fxx * fyy - fxy * fxy;
    double dx, dy;
    if (det > 0 && fxx > 0) {
      dx = -(fyy * gx - fxy * gy) / det;
      dy = -(-fxy * gx + fxx * gy) / det;
    } else {
      dx = -1e-3 * gx;
      dy = -1e-3 * gy;
    }
    double step = 1.0;
    const double f0 = f(x, y);
    while (step > 1e-12 && f(x + step * dx, y + step * dy) > f0) step *= 0.5;
    x += step * dx;
    y += step * dy;
  }
  Vector out(2);
  out << x, y;
  return out;
}

Target make_mueller_brown(const MuellerBrownOptions& options) {
  if (!(options.beta > 0.0)) throw ConfigError("mueller-brown: beta must be positive");
  const Vector center = options.center ? *options.center : mueller_brown_middle_well(options.standard_form);
  if (center.size() != 2) throw ConfigError("mueller-brown: center must be 2D");
  const double beta = options.beta, xc = center[0], yc = center[1];
  const bool standard_form = options.standard_form;
  auto potential = [beta, xc, yc, standard_form](PointRef p) {
    const double x = p[0], y = p[1];
    const double vq = 35.0136 * (x - xc) * (x - xc) + 59.8399 * (y - yc) * (y - yc);
    return beta * (mueller_brown_vm(x, y, standard_form) + vq);
  };
  Target target("mueller-brown", 2, potential);
  target.set_analytic_log_density([potential](PointRef p) { return -potential(p); });
  return target;
}

// ---------------------------------------------------------------------------
// Benchmark problems

namespace {
Matrix mat2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}
Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}
}  // namespace

GmmSpec benchmark_gmm_2d() {
  GmmSpec spec;
  spec.weights = {0.1, 0.2, 0.3, 0.4};
  spec.means = {vec2(0, 0), vec2(0, 11), vec2(9, 9), vec2(11, 0)};
  spec.covariances = {mat2(1, 0.5, 0.5, 1), mat2(0.3, -0.2, -0.2, 0.3), mat2(1, 0.3, 0.3, 1),
                      mat2(1.2, -1, -1, 1.2)};
  return spec;
}

GmmSpec benchmark_gmm_2d_radius(double radius) {
  if (!(radius > 0.0)) throw ConfigError("radius must be positive");
  GmmSpec spec = benchmark_gmm_2d();
  const double scale = radius / 11.0;
  for (auto& m : spec.means) m *= scale;
  return spec;
}

GmmSpec benchmark_gmm_5d() {
  GmmSpec spec;
  spec.weights = {0.25, 0.5, 0.25};
  Vector m1(5), m2(5), m3(5);
  m1 << -4, -4, -3, -4, -4;
  m2 << 4, 3, 4, 2, 4;
  m3 << -4, -2, -4, 4, -1;
  spec.means = {m1, m2, m3};
  Matrix c1(5, 5), c2(5, 5), c3(5, 5);
  c1 << 3, 2, 0, 0, 0,
        2, 3, 0, 0, 0,
        0, 0, 4, 2, 0,
        0, 0, 2, 4, 0,
        0, 0, 0, 0, 1;
  c2 << 9, 0, 7, 0, 0,
        0, 1, 0, 0.4, 0,
        7, 0, 9, 0, 0,
        0, 0.4, 0, 1, 0,
        0, 0, 0, 0, 1;
  c3 << 1, 0.4, 0, 0, 0,
        0.4, 1, 0, 0, 0,
        0, 0, 4, 3, 0,
        0, 0, 3, 4, 0,
        0, 0, 0, 0, 1;
  spec.covariances = {c1, c2, c3};
  return spec;
}

GmmSpec randomized_gmm(int dim, std::uint64_t seed, int modes) {
  if (dim <= 0 || modes <= 0) throw ConfigError("randomized gmm: dim and modes must be positive");
  Rng rng = make_stream(seed, 0, 0x5eed);
  std::uniform_real_distribution<double> unit(0.0, 1.0), var(0.3, 1.3);
  GmmSpec spec;
  for (int k = 0; k < modes; ++k) {
    Vector z(dim);
    do {
      for (int i = 0; i < dim; ++i) z[i] = unit(rng);
    } while (z.norm() == 0.0);
    spec.means.push_back(12.0 * z / z.norm());
    spec.covariances.push_back(var(rng) * Matrix::Identity(dim, dim));
    spec.weights.push_back(1.0 / modes);
  }
  // Equal weights must sum to 1 within 1e-12 after rounding.
  const double sum = std::accumulate(spec.weights.begin(), spec.weights.end(), 0.0);
  spec.weights.back() += 1.0 - sum;
  return spec;
}

}  // namespace zodmc
