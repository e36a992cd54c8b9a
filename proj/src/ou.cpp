#include "zodmc/ou.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "zodmc/target.hpp"

namespace zodmc {

OuMarginal ou_marginal(double t) {
  if (!(t >= 0.0)) throw ArgumentError("ou_marginal: t must be nonnegative");
  return {t, std::exp(-t), -std::expm1(-2.0 * t)};
}

OuGmm::OuGmm(const GmmSpec& spec, double t) : t_(t) {
  spec.validate();
  const OuMarginal m = ou_marginal(t);
  const int d = spec.dim();
  const double log2pi = std::log(2.0 * std::numbers::pi);
  double acc = 0.0;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    const Matrix cov = m.shrink * m.shrink * spec.covariances[i] + m.noise_var * Matrix::Identity(d, d);
    Eigen::LLT<Matrix> llt(cov);
    const Matrix lower = llt.matrixL();
    const double logdet = 2.0 * lower.diagonal().array().log().sum();
    const double log_w = spec.weights[i] > 0.0 ? std::log(spec.weights[i]) : -INFINITY;
    components_.push_back({log_w - 0.5 * (d * log2pi + logdet), m.shrink * spec.means[i],
                           llt.solve(Matrix::Identity(d, d)), lower});
    acc += spec.weights[i];
    cumulative_.push_back(acc);
  }
  cumulative_.back() = 1.0;
}

double OuGmm::log_density(PointRef x) const {
  double m = -INFINITY;
  std::vector<double> e(components_.size());
  for (std::size_t i = 0; i < components_.size(); ++i) {
    const auto& c = components_[i];
    const Vector diff = x - c.mean;
    e[i] = c.log_coef - 0.5 * diff.dot(c.precision * diff);
    m = std::max(m, e[i]);
  }
  double s = 0.0;
  for (double v : e) s += std::exp(v - m);
  return m + std::log(s);
}

Vector OuGmm::score(PointRef x) const {
  const std::size_t k = components_.size();
  std::vector<double> e(k);
  std::vector<Vector> grads(k);
  double m = -INFINITY;
  for (std::size_t i = 0; i < k; ++i) {
    const auto& c = components_[i];
    const Vector diff = x - c.mean;
    grads[i] = -(c.precision * diff);
    e[i] = c.log_coef + 0.5 * diff.dot(grads[i]);
    m = std::max(m, e[i]);
  }
  double s = 0.0;
  for (double v : e) s += std::exp(v - m);
  Vector out = Vector::Zero(x.size());
  for (std::size_t i = 0; i < k; ++i) out += (std::exp(e[i] - m) / s) * grads[i];
  return out;
}

void OuGmm::sample(Rng& rng, Eigen::Ref<Vector> out) const {
  const double u = uniform01(rng);
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  const std::size_t k =
      std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), components_.size() - 1);
  Vector xi(out.size());
  fill_normal(rng, xi);
  out = components_[k].mean + components_[k].chol * xi;
}

OuGmmCache::OuGmmCache(const GmmSpec& spec, std::size_t capacity)
    : spec_(std::make_shared<const GmmSpec>(spec)), capacity_(capacity) {}

std::shared_ptr<const OuGmm> OuGmmCache::at(double t) {
  std::lock_guard lock(mu_);
  if (auto it = cache_.find(t); it != cache_.end()) return it->second;
  if (cache_.size() >= capacity_) cache_.clear();
  auto entry = std::make_shared<const OuGmm>(*spec_, t);
  cache_.emplace(t, entry);
  return entry;
}

Vector gmm_score_at_time(const GmmSpec& spec, double t, PointRef x) { return OuGmm(spec, t).score(x); }

double gmm_log_density_at_time(const GmmSpec& spec, double t, PointRef x) {
  return OuGmm(spec, t).log_density(x);
}

double ou_w2_bound(double t, double m2sq, int d) {
  if (!(t >= 0.0)) throw ArgumentError("ou_w2_bound: t must be nonnegative");
  const double a = -std::expm1(-t);
  return std::sqrt(a * a * m2sq + (-std::expm1(-2.0 * t)) * d);
}

double ou_kl_bound(double t, double m2sq, int d) {
  if (!(t > 0.0)) throw ArgumentError("ou_kl_bound: diverges at t = 0");
  return 0.5 * std::exp(-4.0 * t) / (-std::expm1(-2.0 * t)) * d + 0.5 * std::exp(-2.0 * t) * m2sq;
}

OuDecayBounds ou_decay_bounds(double t, double m2sq, int d) {
  return {ou_w2_bound(t, m2sq, d), ou_kl_bound(t, m2sq, d)};
}

namespace {
Matrix psd_sqrt(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a);
  const Vector ev = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
}
}  // namespace

double gaussian_w2(const Vector& m1, const Matrix& s1, const Vector& m2, const Matrix& s2) {
  const Matrix r1 = psd_sqrt(s1);
  const Matrix cross = psd_sqrt(r1 * s2 * r1);
  const double w2sq = (m1 - m2).squaredNorm() + (s1 + s2 - 2.0 * cross).trace();
  return std::sqrt(std::max(0.0, w2sq));
}

}  // namespace zodmc
