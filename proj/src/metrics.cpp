#include "zodmc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace zodmc {

namespace {

Matrix stack(const Matrix& X, const Matrix& Y) {
  Matrix Z(X.rows() + Y.rows(), X.cols());
  Z << X, Y;
  return Z;
}

Matrix sq_distances(const Matrix& A, const Matrix& B) {
  const Vector na = A.rowwise().squaredNorm();
  const Vector nb = B.rowwise().squaredNorm();
  Matrix D = (-2.0 * A * B.transpose()).colwise() + na;
  D.rowwise() += nb.transpose();
  return D.cwiseMax(0.0);
}

void check_pair(const Matrix& X, const Matrix& Y, const char* who) {
  if (X.cols() != Y.cols()) throw ArgumentError(std::string(who) + ": dimension mismatch");
}

// Unbiased MMD² from a pooled kernel matrix, with `idx` giving the first nx rows as X.
double mmd_from_kernel(const Matrix& K, const std::vector<int>& idx, std::size_t nx) {
  const std::size_t n = idx.size(), ny = n - nx;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    const int i = idx[a];
    for (std::size_t b = a + 1; b < n; ++b) {
      const double k = K(i, idx[b]);
      if (b < nx) sxx += k;
      else if (a >= nx) syy += k;
      else sxy += k;
    }
  }
  const double dx = static_cast<double>(nx), dy = static_cast<double>(ny);
  return 2.0 * sxx / (dx * (dx - 1.0)) + 2.0 * syy / (dy * (dy - 1.0)) - 2.0 * sxy / (dx * dy);
}

}  // namespace

double median_pairwise_distance(const Matrix& X, const Matrix& Y, std::size_t max_points) {
  check_pair(X, Y, "median_pairwise_distance");
  Matrix Z = stack(X, Y);
  if (static_cast<std::size_t>(Z.rows()) > max_points) {
    const Eigen::Index stride = (Z.rows() + static_cast<Eigen::Index>(max_points) - 1) / static_cast<Eigen::Index>(max_points);
    Matrix T((Z.rows() + stride - 1) / stride, Z.cols());
    for (Eigen::Index i = 0, j = 0; i < Z.rows(); i += stride, ++j) T.row(j) = Z.row(i);
    Z = std::move(T);
  }
  const Matrix D = sq_distances(Z, Z);
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(Z.rows() * (Z.rows() - 1) / 2));
  for (Eigen::Index i = 0; i < Z.rows(); ++i)
    for (Eigen::Index j = i + 1; j < Z.rows(); ++j) v.push_back(D(i, j));
  if (v.empty()) throw ArgumentError("median_pairwise_distance: need at least two points");
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return std::sqrt(*mid);
}

double mmd(const Matrix& X, const Matrix& Y, std::optional<double> bandwidth) {
  check_pair(X, Y, "mmd");
  if (X.rows() < 2 || Y.rows() < 2) throw ArgumentError("mmd: each batch needs at least 2 points");
  const double h = bandwidth.value_or(median_pairwise_distance(X, Y));
  if (!(h > 0.0)) throw ArgumentError("mmd: bandwidth must be positive");
  const double scale = -0.5 / (h * h);
  auto mean_kernel = [scale](const Matrix& A, const Matrix& B, bool same) {
    const Matrix K = (sq_distances(A, B) * scale).array().exp().matrix();
    double s = K.sum();
    if (same) s -= K.trace();
    const double cnt = same ? static_cast<double>(A.rows()) * (A.rows() - 1)
                            : static_cast<double>(A.rows()) * static_cast<double>(B.rows());
    return s / cnt;
  };
  return mean_kernel(X, X, true) + mean_kernel(Y, Y, true) - 2.0 * mean_kernel(X, Y, false);
}

double mmd_permutation_pvalue(const Matrix& X, const Matrix& Y, std::size_t n_perm, Rng& rng,
                              std::optional<double> bandwidth) {
  check_pair(X, Y, "mmd_permutation_pvalue");
  if (X.rows() < 2 || Y.rows() < 2) throw ArgumentError("mmd: each batch needs at least 2 points");
  const double h = bandwidth.value_or(median_pairwise_distance(X, Y));
  const Matrix Z = stack(X, Y);
  const Matrix K = (sq_distances(Z, Z) * (-0.5 / (h * h))).array().exp().matrix();
  std::vector<int> idx(static_cast<std::size_t>(Z.rows()));
  std::iota(idx.begin(), idx.end(), 0);
  const auto nx = static_cast<std::size_t>(X.rows());
  const double observed = mmd_from_kernel(K, idx, nx);
  std::size_t exceed = 0;
  for (std::size_t p = 0; p < n_perm; ++p) {
    std::shuffle(idx.begin(), idx.end(), rng);
    if (mmd_from_kernel(K, idx, nx) >= observed) ++exceed;
  }
  return (1.0 + static_cast<double>(exceed)) / (1.0 + static_cast<double>(n_perm));
}

std::vector<int> solve_assignment(const Matrix& cost) {
  if (cost.rows() != cost.cols()) throw ArgumentError("solve_assignment: cost matrix must be square");
  const int n = static_cast<int>(cost.rows());
  if (n == 0) return {};
  // Shortest augmenting paths with potentials, 1-based with a virtual column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n);
  for (int j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

namespace {
Matrix random_rows(const Matrix& X, std::size_t m, Rng& rng) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(X.rows()));
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  Matrix out(static_cast<Eigen::Index>(m), X.cols());
  for (std::size_t i = 0; i < m; ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(idx[i]);
  return out;
}
}  // namespace

double w2_empirical(const Matrix& X, const Matrix& Y, Rng* subsample) {
  constexpr std::size_t cap = 4096;
  check_pair(X, Y, "w2_empirical");
  if (X.rows() == 0 || Y.rows() == 0) throw ArgumentError("w2_empirical: empty batch");
  const auto nx = static_cast<std::size_t>(X.rows()), ny = static_cast<std::size_t>(Y.rows());
  if (nx == ny && nx <= cap) {
    const Matrix C = sq_distances(X, Y);
    const auto match = solve_assignment(C);
    double total = 0.0;
    for (std::size_t i = 0; i < nx; ++i) total += (X.row(static_cast<Eigen::Index>(i)) - Y.row(match[i])).squaredNorm();
    return std::sqrt(total / static_cast<double>(nx));
  }
  if (!subsample) throw ArgumentError("w2_empirical: batches must have equal size <= 4096 without subsampling");
  const std::size_t m = std::min({nx, ny, cap});
  const Matrix xs = nx == m ? X : random_rows(X, m, *subsample);
  const Matrix ys = ny == m ? Y : random_rows(Y, m, *subsample);
  return w2_empirical(xs, ys, nullptr);
}

ModeWeights mode_weights(const Matrix& X, const std::vector<Vector>& means, std::optional<double> radius) {
  if (means.empty()) throw ArgumentError("mode_weights: need at least one mean");
  ModeWeights out;
  out.counts.assign(means.size(), 0);
  std::size_t unassigned = 0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t k = 0; k < means.size(); ++k) {
      const double dk = (X.row(i).transpose() - means[k]).squaredNorm();
      if (dk < best_d) {
        best_d = dk;
        best = k;
      }
    }
    if (radius && std::sqrt(best_d) > *radius) ++unassigned;
    else ++out.counts[best];
  }
  const std::size_t assigned = static_cast<std::size_t>(X.rows()) - unassigned;
  out.weights.assign(means.size(), 0.0);
  if (assigned > 0)
    for (std::size_t k = 0; k < means.size(); ++k)
      out.weights[k] = static_cast<double>(out.counts[k]) / static_cast<double>(assigned);
  out.unassigned_fraction = X.rows() > 0 ? static_cast<double>(unassigned) / static_cast<double>(X.rows()) : 0.0;
  return out;
}

double total_variation(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw ArgumentError("total_variation: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

Matrix sample_covariance(const Matrix& X) {
  if (X.rows() < 2) throw ArgumentError("sample_covariance: need at least two rows");
  const Matrix centered = X.rowwise() - X.colwise().mean();
  return centered.transpose() * centered / static_cast<double>(X.rows() - 1);
}

double mean_error(const Matrix& X, const Vector& mean) {
  return (X.colwise().mean().transpose() - mean).norm();
}

double cov_error(const Matrix& X, const Matrix& cov) {
  const Matrix diff = sample_covariance(X) - cov;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(diff, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

MetricsReport compare_batches(const Matrix& X, const Matrix& Y, const std::vector<Vector>& means, Rng& rng,
                              std::size_t w2_points) {
  MetricsReport r;
  r.n_x = static_cast<std::size_t>(X.rows());
  r.n_y = static_cast<std::size_t>(Y.rows());
  const std::size_t m = std::min({r.n_x, r.n_y, w2_points});
  const Matrix xs = random_rows(X, m, rng);
  const Matrix ys = random_rows(Y, m, rng);
  r.bandwidth = median_pairwise_distance(xs, ys);
  r.mmd = std::max(0.0, mmd(xs, ys, r.bandwidth));
  r.w2 = w2_empirical(xs, ys);
  if (!means.empty()) {
    r.mode_weights = mode_weights(X, means).weights;
    r.mode_tv = total_variation(r.mode_weights, mode_weights(Y, means).weights);
  }
  r.mean_error = (X.colwise().mean() - Y.colwise().mean()).norm();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sample_covariance(X) - sample_covariance(Y), Eigen::EigenvaluesOnly);
  r.cov_error = eig.eigenvalues().cwiseAbs().maxCoeff();
  return r;
}

}  // namespace zodmc
