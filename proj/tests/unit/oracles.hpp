#pragma once

// Independent reference computations for the tests. Nothing here calls the
// library's density or score code.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Gaussian density by the textbook formula (determinant and inverse, no Cholesky).
inline double normal_pdf(const Vec& x, const Vec& mu, const Mat& cov) {
  const double d = static_cast<double>(x.size());
  const Vec diff = x - mu;
  const double q = diff.dot(cov.inverse() * diff);
  return std::exp(-0.5 * q) / std::sqrt(std::pow(2.0 * std::numbers::pi, d) * cov.determinant());
}

inline double mixture_pdf(const std::vector<double>& w, const std::vector<Vec>& mu, const std::vector<Mat>& cov,
                          const Vec& x) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * normal_pdf(x, mu[i], cov[i]);
  return s;
}

// OU-evolved mixture density at time t, built directly from the marginal law.
inline double ou_mixture_pdf(const std::vector<double>& w, const std::vector<Vec>& mu, const std::vector<Mat>& cov,
                             double t, const Vec& x) {
  const double a = std::exp(-t), s2 = 1.0 - std::exp(-2.0 * t);
  const auto d = x.size();
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i)
    s += w[i] * normal_pdf(x, a * mu[i], a * a * cov[i] + s2 * Mat::Identity(d, d));
  return s;
}

// Posterior law of X0 given X_t = x for a N(mu, c^{-1} I) target: precision c + 1/(e^{2t}-1).
struct GaussianPosterior {
  Vec mean;
  double var;
};

inline GaussianPosterior gaussian_posterior(double c, const Vec& mu, double t, const Vec& x) {
  const double s = std::exp(2.0 * t) - 1.0;
  const double prec = c + 1.0 / s;
  return {(c * mu + std::exp(t) * x / s) / prec, 1.0 / prec};
}

// Kolmogorov-Smirnov distance between a sample and U(0, 1).
inline double ks_uniform(std::vector<double> p) {
  std::sort(p.begin(), p.end());
  const double n = static_cast<double>(p.size());
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    d = std::max(d, (static_cast<double>(i) + 1.0) / n - p[i]);
    d = std::max(d, p[i] - static_cast<double>(i) / n);
  }
  return d;
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

// Least-squares slope of y on x.
inline double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

// Brute-force minimum-cost permutation for tiny n.
inline double brute_assignment(const Mat& cost) {
  std::vector<int> perm(static_cast<std::size_t>(cost.rows()));
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = static_cast<int>(i);
  double best = INFINITY;
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) c += cost(static_cast<Eigen::Index>(i), perm[i]);
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Population MMD² between N(0, I) and N(m, I) for the kernel exp(-‖a-b‖²/(2h²)).
inline double gaussian_mmd2(const Vec& m, double h) {
  const double d = static_cast<double>(m.size());
  const double h2 = h * h;
  const double same = std::pow(h2 / (h2 + 2.0), d / 2.0);
  const double cross = same * std::exp(-m.squaredNorm() / (2.0 * (h2 + 2.0)));
  return 2.0 * same - 2.0 * cross;
}

}  // namespace oracle
