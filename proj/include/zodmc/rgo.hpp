#pragma once

#include <cmath>
#include <optional>

#include "zodmc/common.hpp"
#include "zodmc/target.hpp"

namespace zodmc {

/// Running minimum of the potential; supplies V̂* for the rejection envelope.
struct MinTracker {
  Vector best_point;
  double best_value = INFINITY;
  std::uint64_t update_count = 0;

  bool initialized() const { return best_point.size() > 0 && std::isfinite(best_value); }
  /// Records (z, v) if v improves the minimum. Returns true on improvement.
  bool offer(PointRef z, double v);
  /// Keeps the smaller of the two minima; ties keep *this.
  void merge(const MinTracker& other);
};

struct MinimizerOptions {
  double fd_scale = 1e-5;  ///< h = fd_scale·(1 + ‖x‖∞)
  double grad_tol = 1e-6;
  int max_iters = 200;
};

/// Quasi-Newton (BFGS) descent on V with central finite-difference gradients.
/// Every evaluation is charged to Phase::optimization. Stops on a non-finite
/// value, keeping the best finite point seen.
MinTracker find_potential_min(const Target& target, PointRef x0, QueryLedger& ledger,
                              const MinimizerOptions& options = {});

/// Central finite-difference gradient (2d queries).
Vector fd_gradient(const Target& target, PointRef x, double h, QueryLedger& ledger, Phase phase);

/// Sample from p_{0|t}(·|x) ∝ exp(−V(z) − ‖z − e^t x‖²/(2(e^{2t} − 1))).
struct RgoRequest {
  double t = 0.0;
  Vector x;
  std::size_t n = 1;
  std::uint64_t max_proposals = 1'000'000;
};

struct RgoOptions {
  std::size_t batch_size = 256;
};

struct RgoResult {
  Matrix samples;  ///< accepted draws, one per row
  std::uint64_t proposals_used = 0;
  std::uint64_t accepted_total = 0;  ///< includes acceptances past n in the last batch
  double acceptance_rate = 0.0;      ///< accepted_total / proposals_used
  std::uint64_t envelope_violations = 0;
  bool vstar_improved = false;
  bool complete = false;  ///< n acceptances reached before the proposal cap
  /// Self-normalized importance estimate of E[z] over all proposals, weights exp(−V(z)).
  Vector importance_mean;
};

/// No acceptance before the proposal cap.
class RgoStarved : public std::runtime_error {
 public:
  RgoStarved(double t, Vector x, std::uint64_t proposals_used, Vector importance_mean);
  double t;
  Vector x;
  std::uint64_t proposals_used;
  Vector importance_mean;
};

/// Rejection sampler with the Gaussian envelope N(e^t x, (e^{2t} − 1)I)·exp(−V̂*).
///
/// Proposals are drawn in batches and evaluated together; each costs one
/// Phase::score_estimation query even when discarded. A proposal with
/// V(z) < V̂* is accepted under the pre-update envelope, counted as an
/// envelope violation, and tightens the tracker for later proposals.
RgoResult rgo_sample(const Target& target, MinTracker& tracker, const RgoRequest& request, QueryLedger& ledger,
                     Rng& rng, const RgoOptions& options = {});

/// Predicted proposal count n·(L(e^{2t}−1)+1)^{d/2}·exp(½‖L·x* − e^t x‖²/(L(e^{2t}−1)+1)).
double expected_proposals(double smoothness, double t, PointRef x, PointRef xstar, std::size_t n);

/// 100 × expected_proposals when the target carries a smoothness hint, else 10⁶.
std::uint64_t default_max_proposals(const Target& target, const MinTracker& tracker, double t, PointRef x,
                                    std::size_t n);

}  // namespace zodmc
