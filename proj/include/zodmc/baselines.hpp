#pragma once

#include <functional>
#include <optional>

#include "zodmc/diffuser.hpp"
#include "zodmc/target.hpp"

namespace zodmc {

struct UlaConfig {
  enum class Init { origin, gaussian };
  double step = 0.01;
  std::size_t n_steps = 1000;
  std::size_t n_chains = 1024;
  Init init = Init::origin;
  double fd_step = 1e-5;
  std::uint64_t seed = 0;
  int workers = 0;

  void validate() const;
};

UlaConfig::Init parse_ula_init(std::string_view name);

/// Steps per chain that spend `queries` oracle calls with finite-difference gradients (2d per step).
std::size_t ula_steps_for_budget(std::uint64_t queries, int dim);

/// Unadjusted Langevin x ← x − h·∇̂V(x) + √(2h)·ξ with central finite-difference
/// gradients charged to Phase::baseline. Chains whose norm exceeds 1e8 or
/// turns non-finite are dropped from the output and counted in `diverged`.
SampleBatch run_ula(const Target& target, const UlaConfig& config, QueryLedger& ledger);

/// Proposal q with a claimed bound −V(x) ≤ log_bound + log q(x).
struct Envelope {
  std::function<void(Rng&, Eigen::Ref<Vector>)> sample;
  std::function<double(PointRef)> log_density;
  double log_bound = 0.0;
  std::string description;

  /// Mixture proposal with an explicit bound.
  static Envelope gmm(const GmmSpec& spec, double log_bound);
  /// The mixture with every covariance scaled by `factor` ≥ 1. For a
  /// normalized mixture target the density ratio is at most factor^{d/2}.
  static Envelope inflated_gmm(const GmmSpec& spec, double factor);
  static Envelope gaussian(const Vector& mean, const Matrix& cov, double log_bound);
};

GmmSpec inflate_covariances(const GmmSpec& spec, double factor);

/// max over the columns of `points` of −V(x) − log q(x), charged to Phase::ground_truth.
double audit_log_ratio(const Target& target, const Envelope& envelope, const Matrix& points, QueryLedger& ledger);
/// Regular grid on [lo, hi]² with `per_axis` points per side, as columns.
Matrix grid_2d(double lo, double hi, std::size_t per_axis);

/// Proposal whose density ratio exceeded the claimed bound.
class DominationViolation : public std::runtime_error {
 public:
  DominationViolation(Vector witness, double log_ratio);
  Vector witness;
  double log_ratio;  ///< −V(x) − log q(x) − log_bound at the witness
};

/// Plain rejection sampling against the full target. Every proposal is
/// audited; a ratio above the bound aborts the run with the witness point.
SampleBatch ground_truth_rejection(const Target& target, const Envelope& envelope, std::size_t n, QueryLedger& ledger,
                                   Rng& rng, std::uint64_t max_proposals = 1'000'000'000);

}  // namespace zodmc
