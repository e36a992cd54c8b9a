#pragma once

#include <array>
#include <atomic>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "zodmc/common.hpp"

namespace zodmc {

/// Phases that consume potential queries.
enum class Phase : int { optimization = 0, score_estimation = 1, baseline = 2, ground_truth = 3 };
inline constexpr std::size_t kPhaseCount = 4;

std::string_view phase_name(Phase phase);

/// Plain copy of a ledger's counters at one instant.
struct LedgerTotals {
  std::array<std::uint64_t, kPhaseCount> by_phase{};

  std::uint64_t total() const;
  std::uint64_t operator[](Phase phase) const { return by_phase[static_cast<int>(phase)]; }
  LedgerTotals operator-(const LedgerTotals& rhs) const;
};

/// Counts zeroth-order queries of the potential, per phase.
///
/// Thread-safe; increments are relaxed atomics. The total is always derived
/// from the per-phase counters, so it equals their sum by construction.
class QueryLedger {
 public:
  QueryLedger() = default;
  QueryLedger(const QueryLedger&) = delete;
  QueryLedger& operator=(const QueryLedger&) = delete;

  void add(Phase phase, std::uint64_t count = 1) {
    by_phase_[static_cast<int>(phase)].fetch_add(count, std::memory_order_relaxed);
  }
  std::uint64_t count(Phase phase) const {
    return by_phase_[static_cast<int>(phase)].load(std::memory_order_relaxed);
  }
  std::uint64_t zeroth_order_count() const;
  LedgerTotals snapshot() const;

 private:
  std::array<std::atomic<std::uint64_t>, kPhaseCount> by_phase_{};
};

/// Gaussian mixture parameters.
struct GmmSpec {
  std::vector<double> weights;
  std::vector<Vector> means;
  std::vector<Matrix> covariances;

  int dim() const { return means.empty() ? 0 : static_cast<int>(means.front().size()); }
  std::size_t size() const { return weights.size(); }

  /// Throws ConfigError unless weights sum to 1 (1e-12), shapes agree and every covariance is PD.
  void validate() const;

  /// E‖X‖² = Σ wᵢ(‖μᵢ‖² + tr Σᵢ).
  double second_moment() const;
  /// Trace of the mixture covariance.
  double covariance_trace() const;
  Vector mean() const;
  Matrix covariance() const;
};

/// Draws exact samples from a Gaussian mixture.
class GmmSampler {
 public:
  explicit GmmSampler(const GmmSpec& spec);
  void sample(Rng& rng, Eigen::Ref<Vector> out) const;
  /// Component index alongside the draw.
  std::size_t sample_with_label(Rng& rng, Eigen::Ref<Vector> out) const;
  Matrix sample(Rng& rng, std::size_t n) const;

 private:
  std::vector<double> cumulative_;
  std::vector<Vector> means_;
  std::vector<Matrix> chol_;
};

/// Log-density of a Gaussian mixture, evaluated with log-sum-exp.
class GmmLogDensity {
 public:
  explicit GmmLogDensity(const GmmSpec& spec);
  double operator()(PointRef x) const;
  int dim() const { return dim_; }

 private:
  struct Component {
    Vector mean;
    Matrix whiten;  // lower-triangular inverse Cholesky factor
    double log_coef;
  };
  int dim_ = 0;
  std::vector<Component> components_;
};

using PotentialFn = std::function<double(PointRef)>;
using LogDensityFn = std::function<double(PointRef)>;
using ScoreAtTimeFn = std::function<Vector(double, PointRef)>;

/// A zeroth-order potential oracle V with p ∝ exp(−V).
///
/// The potential itself is private: the only way to evaluate it is through
/// eval_potential / eval_potential_batch, which charge the query ledger.
/// The analytic hooks are for ground truth and metrics and never count.
class Target {
 public:
  Target(std::string name, int dim, PotentialFn potential);

  const std::string& name() const { return name_; }
  int dim() const { return dim_; }

  bool has_analytic_log_density() const { return static_cast<bool>(log_density_); }
  double analytic_log_density(PointRef x) const;
  bool has_analytic_score() const { return static_cast<bool>(score_at_time_); }
  Vector analytic_score_at_time(double t, PointRef x) const;

  std::optional<double> second_moment_hint;
  std::optional<double> smoothness_hint;
  /// Present when the target is exactly a Gaussian mixture (exact p_t sampling).
  std::optional<GmmSpec> mixture;

  void set_analytic_log_density(LogDensityFn fn) { log_density_ = std::move(fn); }
  void set_analytic_score(ScoreAtTimeFn fn) { score_at_time_ = std::move(fn); }
  void clear_analytic_score() { score_at_time_ = nullptr; }

 private:
  friend double eval_potential(const Target&, PointRef, QueryLedger&, Phase);
  friend void eval_potential_batch(const Target&, const Matrix&, QueryLedger&, Phase, std::span<double>);
  friend Target apply_annulus_penalty(const Target&, double, double, double);

  std::string name_;
  int dim_;
  PotentialFn potential_;
  LogDensityFn log_density_;
  ScoreAtTimeFn score_at_time_;
};

/// V(x), charged as one query in `phase`.
double eval_potential(const Target& target, PointRef x, QueryLedger& ledger, Phase phase);

/// V at every column of `points` (d × m), charged as m queries.
void eval_potential_batch(const Target& target, const Matrix& points, QueryLedger& ledger, Phase phase,
                          std::span<double> out);

Target make_gmm(const GmmSpec& spec, std::string name = "gmm");
Target make_standard_gaussian(int dim);

/// Adds height·⌊‖x‖⌋ on inner < ‖x‖ < outer. Drops the analytic OU score.
Target apply_annulus_penalty(const Target& target, double inner, double outer, double height);
double annulus_penalty(PointRef x, double inner, double outer, double height);

struct MuellerBrownOptions {
  double beta = 0.1;
  /// Quadratic correction center; defaults to the middle-well minimizer of V_m.
  std::optional<Vector> center;
  /// Flip the sign of the fourth exponential's quadratic form.
  bool standard_form = false;
};

double mueller_brown_vm(double x, double y, bool standard_form = false);
/// Minimizer of V_m in the middle well, located by local minimization seeded near (−0.05, 0.47).
Vector mueller_brown_middle_well(bool standard_form = false);
Target make_mueller_brown(const MuellerBrownOptions& options = {});

/// The four-mode 2D benchmark mixture.
GmmSpec benchmark_gmm_2d();
/// Benchmark mixture with means scaled so the mode at (0, 11) sits at (0, radius).
GmmSpec benchmark_gmm_2d_radius(double radius);
/// The unbalanced three-mode 5D mixture used for score-error studies.
GmmSpec benchmark_gmm_5d();
/// Five equal-weight isotropic modes with means 12·z/‖z‖, z ~ U[0,1]^d, σ² ~ U[0.3, 1.3].
GmmSpec randomized_gmm(int dim, std::uint64_t seed, int modes = 5);

}  // namespace zodmc
