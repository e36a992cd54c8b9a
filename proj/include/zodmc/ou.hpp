#pragma once

#include <map>
#include <memory>
#include <mutex>

#include "zodmc/common.hpp"

namespace zodmc {

struct GmmSpec;

/// Law of X_t = shrink·X_0 + √noise_var·Z under the forward OU process.
struct OuMarginal {
  double t = 0.0;
  double shrink = 1.0;     ///< e^{−t}
  double noise_var = 0.0;  ///< 1 − e^{−2t}
};

/// Throws ArgumentError for negative t.
OuMarginal ou_marginal(double t);

/// OU-evolved Gaussian mixture p_t at one fixed time: means e^{−t}μᵢ and
/// covariances e^{−2t}Σᵢ + (1 − e^{−2t})I. Per-component precisions are
/// computed once at construction.
class OuGmm {
 public:
  OuGmm(const GmmSpec& spec, double t);

  double time() const { return t_; }
  double log_density(PointRef x) const;
  /// ∇ log p_t(x), via log-space responsibilities.
  Vector score(PointRef x) const;
  /// Exact draw from p_t.
  void sample(Rng& rng, Eigen::Ref<Vector> out) const;

 private:
  struct Component {
    double log_coef;
    Vector mean;
    Matrix precision;
    Matrix chol;  // of the evolved covariance
  };
  double t_;
  std::vector<double> cumulative_;
  std::vector<Component> components_;
};

/// Thread-safe memo of OuGmm keyed by t.
class OuGmmCache {
 public:
  explicit OuGmmCache(const GmmSpec& spec, std::size_t capacity = 1024);
  std::shared_ptr<const OuGmm> at(double t);

 private:
  std::shared_ptr<const GmmSpec> spec_;
  std::size_t capacity_;
  std::mutex mu_;
  std::map<double, std::shared_ptr<const OuGmm>> cache_;
};

Vector gmm_score_at_time(const GmmSpec& spec, double t, PointRef x);
double gmm_log_density_at_time(const GmmSpec& spec, double t, PointRef x);

struct OuDecayBounds {
  double w2_bound = 0.0;
  double kl_bound = 0.0;
};

/// W2(p_t, p) ≤ √((1 − e^{−t})²·m2sq + (1 − e^{−2t})·d); valid for t ≥ 0.
double ou_w2_bound(double t, double m2sq, int d);
/// KL(p_t | γ^d) ≤ ½·e^{−4t}/(1 − e^{−2t})·d + ½·e^{−2t}·m2sq; requires t > 0.
double ou_kl_bound(double t, double m2sq, int d);
/// Both bounds; throws ArgumentError at t = 0 where the KL bound diverges.
OuDecayBounds ou_decay_bounds(double t, double m2sq, int d);

/// Closed-form W2 between N(m1, s1) and N(m2, s2).
double gaussian_w2(const Vector& m1, const Matrix& s1, const Vector& m2, const Matrix& s2);

}  // namespace zodmc
