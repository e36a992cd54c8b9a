#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "zodmc/ou.hpp"
#include "zodmc/target.hpp"

using namespace zodmc;

namespace {

Vector fd_grad_log(const GmmSpec& s, double t, const Vector& x) {
  const double h = 1e-5;
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector a = x, b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (std::log(oracle::ou_mixture_pdf(s.weights, s.means, s.covariances, t, a)) -
            std::log(oracle::ou_mixture_pdf(s.weights, s.means, s.covariances, t, b))) /
           (2 * h);
  }
  return g;
}

double gaussian_kl_to_standard(const Vector& m, const Matrix& S) {
  const double d = static_cast<double>(m.size());
  return 0.5 * (S.trace() + m.squaredNorm() - d - std::log(S.determinant()));
}

}  // namespace

TEST_CASE("ou marginal coefficients") {
  const auto m = ou_marginal(0.7);
  CHECK(m.shrink == doctest::Approx(std::exp(-0.7)));
  CHECK(m.noise_var == doctest::Approx(1 - std::exp(-1.4)));
  CHECK(ou_marginal(0.0).noise_var == 0.0);
  CHECK_THROWS_AS(ou_marginal(-1.0), ArgumentError);
}

TEST_CASE("mixture score matches finite differences of the evolved density") {
  for (const GmmSpec& s : {benchmark_gmm_2d(), benchmark_gmm_5d()}) {
    Rng rng = make_stream(4, s.dim());
    for (int i = 0; i < 50; ++i) {
      const double t = 0.05 + 3.0 * uniform01(rng);
      Vector x(s.dim());
      fill_normal(rng, x);
      x = std::exp(-t) * s.means[i % s.size()] + 1.5 * x;
      const Vector g = gmm_score_at_time(s, t, x);
      const Vector ref = fd_grad_log(s, t, x);
      CHECK((g - ref).norm() <= 1e-4 * std::max(1.0, ref.norm()));
      CHECK(gmm_log_density_at_time(s, t, x) ==
            doctest::Approx(std::log(oracle::ou_mixture_pdf(s.weights, s.means, s.covariances, t, x))).epsilon(1e-9));
    }
  }
}

TEST_CASE("exact evolved-mixture draws have the right moments") {
  const GmmSpec s = benchmark_gmm_2d();
  const double t = 0.8;
  OuGmm pt(s, t);
  Rng rng = make_stream(5, 0);
  const int n = 200000;
  Vector x(2), sum = Vector::Zero(2);
  for (int i = 0; i < n; ++i) {
    pt.sample(rng, x);
    sum += x;
  }
  const Vector mean = sum / n;
  const Vector expected = std::exp(-t) * s.mean();
  const Matrix cov = std::exp(-2 * t) * s.covariance() + (1 - std::exp(-2 * t)) * Matrix::Identity(2, 2);
  for (int i = 0; i < 2; ++i) CHECK(std::abs(mean[i] - expected[i]) < 5 * std::sqrt(cov(i, i) / n));
}

TEST_CASE("gaussian W2 closed form") {
  const Vector m1 = Vector::Zero(2), m2 = Eigen::Vector2d(3, 4);
  CHECK(gaussian_w2(m1, Matrix::Identity(2, 2), m2, Matrix::Identity(2, 2)) == doctest::Approx(5.0));
  // Scalar case: W2² = (m1-m2)² + (σ1-σ2)².
  Matrix a(1, 1), b(1, 1);
  a << 4.0;
  b << 9.0;
  CHECK(gaussian_w2(Vector::Zero(1), a, Vector::Ones(1), b) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("decay bounds hold for gaussian targets") {
  Rng rng = make_stream(6, 0);
  const std::vector<double> ts{0.01, 0.05, 0.1, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0};
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + trial % 4;
    Vector mu(d);
    fill_normal(rng, mu);
    mu *= 3.0;
    Matrix A(d, d);
    for (int i = 0; i < d; ++i) {
      Vector col(d);
      fill_normal(rng, col);
      A.col(i) = col;
    }
    const Matrix S = A * A.transpose() / d + 0.1 * Matrix::Identity(d, d);
    const double m2 = mu.squaredNorm() + S.trace();
    for (double t : ts) {
      const double a = std::exp(-t);
      const Vector mt = a * mu;
      const Matrix St = a * a * S + (1 - a * a) * Matrix::Identity(d, d);
      CHECK(gaussian_w2(mt, St, mu, S) <= ou_w2_bound(t, m2, d) + 1e-12);
      CHECK(gaussian_kl_to_standard(mt, St) <= ou_kl_bound(t, m2, d) + 1e-12);
    }
  }
  CHECK(ou_w2_bound(0.0, 10.0, 3) == 0.0);
  CHECK_THROWS_AS(ou_kl_bound(0.0, 1.0, 2), ArgumentError);
  CHECK_THROWS_AS(ou_decay_bounds(0.0, 1.0, 2), ArgumentError);
}
