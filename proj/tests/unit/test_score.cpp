#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "zodmc/ou.hpp"
#include "zodmc/score.hpp"
#include "zodmc/target.hpp"

using namespace zodmc;

namespace {

MinTracker tracker_for(const Target& t, const Vector& start) {
  QueryLedger ledger;
  return find_potential_min(t, start, ledger);
}

// Mean and per-coordinate standard error of `reps` independent estimates.
std::pair<Vector, Vector> repeat_estimates(const Target& t, double time, const Vector& x, std::size_t n, int reps,
                                           std::uint64_t seed) {
  MinTracker tracker = tracker_for(t, Vector::Zero(t.dim()));
  QueryLedger ledger;
  Rng rng = make_stream(seed, 0);
  Matrix est(reps, t.dim());
  for (int r = 0; r < reps; ++r)
    est.row(r) = estimate_score(t, tracker, time, x, SampleCountPolicy::fixed(n), ledger, rng).value.transpose();
  const Vector mean = est.colwise().mean().transpose();
  const Matrix centered = est.rowwise() - mean.transpose();
  const Vector se = (centered.array().square().colwise().sum() / (reps - 1) / reps).sqrt().transpose();
  return {mean, se};
}

}  // namespace

TEST_CASE("sample count policies") {
  CHECK(sample_count(SampleCountPolicy::fixed(100), 0.3, 2.0) == 100);
  CHECK(sample_count(SampleCountPolicy::budget(2200), 5.0, 2.0) == 2200);
  const auto th = SampleCountPolicy::theory(1.0, 0.5, 1, 100000);
  const double raw = 2.0 * std::exp(-0.2) / std::pow(1.0 - std::exp(-0.2), 2) / 0.25;
  CHECK(sample_count(th, 0.1, 2.0) == static_cast<std::size_t>(std::ceil(raw)));
  CHECK(sample_count(th, 0.1, 2.0) == 200);
  CHECK(sample_count(th, 5.0, 2.0) == 1);
  CHECK(sample_count(SampleCountPolicy::theory(1.0, 0.5, 7, 9), 0.01, 2.0) == 9);
  CHECK_THROWS_AS(SampleCountPolicy::theory(1.0, 0.5, 10, 5).validate(), ConfigError);
  CHECK_THROWS_AS(SampleCountPolicy::theory(1.0, 0.5, 0, 5).validate(), ConfigError);
  CHECK_THROWS_AS(sample_count(th, 0.0, 2.0), ArgumentError);
}

TEST_CASE("estimate is the Tweedie map of the accepted samples") {
  const Target t = make_gmm(benchmark_gmm_2d());
  MinTracker tracker = tracker_for(t, Eigen::Vector2d(11, 0));
  QueryLedger ledger;
  Rng rng = make_stream(12, 0);
  const Vector x = Eigen::Vector2d(3, 1);
  Rng replay = rng;
  MinTracker replay_tracker = tracker;
  const ScoreEstimate est = estimate_score(t, tracker, 0.7, x, SampleCountPolicy::fixed(40), ledger, rng);
  QueryLedger scratch;
  const RgoResult r = rgo_sample(t, replay_tracker, RgoRequest{0.7, x, 40, est.proposals_used}, scratch, replay);
  Vector manual = Vector::Zero(2);
  for (Eigen::Index i = 0; i < r.samples.rows(); ++i)
    manual += (std::exp(-0.7) * r.samples.row(i).transpose() - x) / (1 - std::exp(-1.4));
  manual /= static_cast<double>(r.samples.rows());
  CHECK(est.n_used == 40);
  CHECK((est.value - manual).norm() < 1e-12);
}

TEST_CASE("standard gaussian: the estimate is unbiased for -x") {
  const Target t = make_standard_gaussian(2);
  const auto [mean, se] = repeat_estimates(t, 0.5, Eigen::Vector2d(1, 1), 50, 200, 13);
  for (int i = 0; i < 2; ++i) CHECK(std::abs(mean[i] + 1.0) < 4 * se[i]);
}

TEST_CASE("single shifted gaussian: the estimate is unbiased for -(x - e^{-t} mu)") {
  const Vector mu = Eigen::Vector2d(2, -1);
  const Target t = make_gmm(GmmSpec{{1.0}, {mu}, {Matrix::Identity(2, 2)}});
  Rng rng = make_stream(14, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const double time = 0.2 + 1.5 * uniform01(rng);
    Vector x(2);
    fill_normal(rng, x);
    const Vector expected = -(x - std::exp(-time) * mu);
    CHECK((t.analytic_score_at_time(time, x) - expected).norm() < 1e-10);
    const auto [mean, se] = repeat_estimates(t, time, x, 50, 200, 100 + trial);
    for (int i = 0; i < 2; ++i) CHECK(std::abs(mean[i] - expected[i]) < 4 * se[i]);
  }
}

TEST_CASE("variance decays as 1/n on the four-mode mixture") {
  const Target t = make_gmm(benchmark_gmm_2d());
  const double time = 1.0;
  const Vector x = Eigen::Vector2d(2.5, 2.0);
  std::vector<double> logn, logv;
  for (std::size_t n : {1, 10, 100, 1000, 10000}) {
    const auto [mean, se] = repeat_estimates(t, time, x, n, 200, 15 + n);
    const double var = (se.array().square() * 200.0).sum();
    logn.push_back(std::log(static_cast<double>(n)));
    logv.push_back(std::log(var));
  }
  const double s = oracle::slope(logn, logv);
  CHECK(s >= -1.1);
  CHECK(s <= -0.9);
}

TEST_CASE("score error against the analytic score") {
  const Target t = make_gmm(benchmark_gmm_2d());
  Rng rng = make_stream(16, 0);
  const ScoreFn exact = [&](double time, PointRef x, Rng&) { return t.analytic_score_at_time(time, x); };
  const auto self = score_l2_error(t, 0.4, exact, 100, rng);
  CHECK(self.mean == 0.0);
  CHECK(self.std == 0.0);

  const Target annulus = apply_annulus_penalty(t, 5, 11, 8);
  CHECK_THROWS_AS(score_l2_error(annulus, 0.4, exact, 10, rng), ConfigError);
  CHECK_THROWS_AS(score_l2_error(make_mueller_brown(), 0.4, exact, 10, rng), ConfigError);
}

TEST_CASE("standard gaussian score error matches its closed form") {
  const Target t = make_standard_gaussian(2);
  const MinTracker tracker = tracker_for(t, Vector::Zero(2));
  for (double time : {0.5, 1.0}) {
    const std::size_t n = 50;
    const auto s = score_l2_error(t, time, SampleCountPolicy::fixed(n), tracker, 2000, 17, 0);
    const double expected = 2.0 * std::exp(-2 * time) / ((1 - std::exp(-2 * time)) * n);
    CHECK(s.mean == doctest::Approx(expected).epsilon(0.2));
  }
}

TEST_CASE("variance bound holds on the four-mode mixture") {
  const GmmSpec spec = benchmark_gmm_2d();
  const Target t = make_gmm(spec);
  // Trace of Cov_p from direct draws.
  GmmSampler sampler(spec);
  Rng rng = make_stream(18, 0);
  const Matrix draws = sampler.sample(rng, 1'000'000);
  const Matrix centered = draws.rowwise() - draws.colwise().mean();
  const double tr_cov = centered.array().square().sum() / (draws.rows() - 1);
  CHECK(tr_cov == doctest::Approx(spec.covariance_trace()).epsilon(0.01));

  const MinTracker tracker = tracker_for(t, Eigen::Vector2d(11, 0));
  const std::size_t n = 20;
  for (double time : {0.05, 0.2, 0.5, 1.0, 2.0}) {
    const auto s = score_l2_error(t, time, SampleCountPolicy::fixed(n), tracker, 300, 19, 0);
    const double a = std::exp(-2 * time);
    const double bound = a / ((1 - a) * (1 - a)) * tr_cov / n;
    CHECK_MESSAGE(s.mean <= 1.25 * bound, "t=", time, " measured=", s.mean, " bound=", bound);
  }
}

TEST_CASE("starved requests fall back to the importance estimate when asked") {
  const Target t = make_standard_gaussian(2);
  MinTracker tracker = tracker_for(t, Vector::Zero(2));
  QueryLedger ledger;
  Rng rng = make_stream(20, 0);
  ScoreOptions opts;
  opts.max_proposals = 5;
  const Vector x = Eigen::Vector2d(3, 3);
  CHECK_THROWS_AS(estimate_score(t, tracker, 6.0, x, SampleCountPolicy::fixed(1), ledger, rng, opts), RgoStarved);
  opts.on_starved = StarvedAction::importance;
  const ScoreEstimate e = estimate_score(t, tracker, 6.0, x, SampleCountPolicy::fixed(1), ledger, rng, opts);
  CHECK(e.fallback_used);
  CHECK(e.n_used == 0);
  CHECK(e.value.allFinite());
}
