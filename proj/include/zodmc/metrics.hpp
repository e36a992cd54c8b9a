#pragma once

#include <optional>
#include <vector>

#include "zodmc/common.hpp"

namespace zodmc {

/// Median Euclidean distance over all distinct pairs of rows of the pooled batch.
/// Pools larger than `max_points` are thinned by a fixed stride first.
double median_pairwise_distance(const Matrix& X, const Matrix& Y, std::size_t max_points = 4096);

/// Unbiased MMD² with kernel exp(−‖a − b‖²/(2h²)). A missing bandwidth means the
/// pooled median distance. Throws ArgumentError if either batch has fewer than 2 rows.
double mmd(const Matrix& X, const Matrix& Y, std::optional<double> bandwidth = std::nullopt);

/// Permutation p-value (1 + #{MMD²_perm ≥ MMD²_obs})/(1 + n_perm).
double mmd_permutation_pvalue(const Matrix& X, const Matrix& Y, std::size_t n_perm, Rng& rng,
                              std::optional<double> bandwidth = std::nullopt);

/// Minimum-cost perfect matching on a square cost matrix; returns row → column.
std::vector<int> solve_assignment(const Matrix& cost);

/// √(mean matched squared distance) under the optimal assignment.
///
/// Needs equal sizes no larger than 4096 unless `subsample` is given, in which
/// case both batches are thinned at random to min(|X|, |Y|, 4096) rows.
double w2_empirical(const Matrix& X, const Matrix& Y, Rng* subsample = nullptr);

struct ModeWeights {
  std::vector<double> weights;  ///< over assigned points; sums to 1 when any are assigned
  std::vector<std::size_t> counts;
  double unassigned_fraction = 0.0;
};

/// Nearest-mean assignment. With a radius, points farther than it from every
/// mean go to an unassigned bucket instead.
ModeWeights mode_weights(const Matrix& X, const std::vector<Vector>& means, std::optional<double> radius = std::nullopt);

double total_variation(const std::vector<double>& p, const std::vector<double>& q);

/// ‖mean(X) − μ‖.
double mean_error(const Matrix& X, const Vector& mean);
/// Operator norm of cov(X) − Σ.
double cov_error(const Matrix& X, const Matrix& cov);
Matrix sample_covariance(const Matrix& X);

struct MetricsReport {
  double mmd = 0.0;
  double w2 = 0.0;
  std::vector<double> mode_weights;
  double mode_tv = 0.0;
  double mean_error = 0.0;
  double cov_error = 0.0;
  std::size_t n_x = 0;
  std::size_t n_y = 0;
  double bandwidth = 0.0;
};

/// All metrics of `X` against the reference `Y`. Mode weights are computed when means are given.
MetricsReport compare_batches(const Matrix& X, const Matrix& Y, const std::vector<Vector>& means, Rng& rng,
                              std::size_t w2_points = 2048);

}  // namespace zodmc
