#include "zodmc/baselines.hpp"

#include <cmath>
#include <memory>
#include <numbers>

namespace zodmc {

namespace {
constexpr std::uint64_t kTagUla = 0x01a;
constexpr double kDivergence = 1e8;
constexpr double kAuditTolerance = 1e-9;
}  // namespace

void UlaConfig::validate() const {
  if (!(step > 0.0)) throw ConfigError("ula: step must be positive");
  if (!(fd_step > 0.0)) throw ConfigError("ula: fd_step must be positive");
  if (n_chains < 1) throw ConfigError("ula: n_chains must be at least 1");
}

UlaConfig::Init parse_ula_init(std::string_view name) {
  if (name == "origin") return UlaConfig::Init::origin;
  if (name == "gaussian") return UlaConfig::Init::gaussian;
  throw ConfigError("unknown ula init '" + std::string(name) + "'");
}

std::size_t ula_steps_for_budget(std::uint64_t queries, int dim) {
  return static_cast<std::size_t>(queries / (2 * static_cast<std::uint64_t>(dim)));
}

SampleBatch run_ula(const Target& target, const UlaConfig& config, QueryLedger& ledger) {
  config.validate();
  const int d = target.dim();
  const std::size_t n = config.n_chains;
  const double noise = std::sqrt(2.0 * config.step);

  Matrix states(static_cast<Eigen::Index>(n), d);
  std::vector<char> alive(n, 1);
  parallel_for(n, config.workers, [&](std::size_t i) {
    Rng rng = make_stream(config.seed, i, kTagUla);
    Vector x = Vector::Zero(d);
    if (config.init == UlaConfig::Init::gaussian) fill_normal(rng, x);
    Vector xi(d);
    for (std::size_t k = 0; k < config.n_steps; ++k) {
      const Vector g = fd_gradient(target, x, config.fd_step, ledger, Phase::baseline);
      fill_normal(rng, xi);
      x = x - config.step * g + noise * xi;
      if (!x.allFinite() || x.norm() > kDivergence) {
        alive[i] = 0;
        break;
      }
    }
    states.row(static_cast<Eigen::Index>(i)) = x.transpose();
  });

  SampleBatch batch;
  batch.algorithm = "ula";
  batch.seed = config.seed;
  std::size_t kept = 0;
  for (char a : alive) kept += a ? 1 : 0;
  batch.points.resize(static_cast<Eigen::Index>(kept), d);
  for (std::size_t i = 0, j = 0; i < n; ++i)
    if (alive[i]) batch.points.row(static_cast<Eigen::Index>(j++)) = states.row(static_cast<Eigen::Index>(i));
  batch.diverged = n - kept;
  batch.ledger = ledger.snapshot();
  return batch;
}

GmmSpec inflate_covariances(const GmmSpec& spec, double factor) {
  if (!(factor > 0.0)) throw ConfigError("inflation factor must be positive");
  GmmSpec out = spec;
  for (Matrix& c : out.covariances) c *= factor;
  return out;
}

Envelope Envelope::gmm(const GmmSpec& spec, double log_bound) {
  spec.validate();
  auto sampler = std::make_shared<GmmSampler>(spec);
  auto density = std::make_shared<GmmLogDensity>(spec);
  Envelope e;
  e.sample = [sampler](Rng& rng, Eigen::Ref<Vector> out) { sampler->sample(rng, out); };
  e.log_density = [density](PointRef x) { return (*density)(x); };
  e.log_bound = log_bound;
  e.description = "gmm";
  return e;
}

Envelope Envelope::inflated_gmm(const GmmSpec& spec, double factor) {
  if (!(factor >= 1.0)) throw ConfigError("inflation factor must be at least 1");
  Envelope e = gmm(inflate_covariances(spec, factor), 0.5 * spec.dim() * std::log(factor));
  e.description = "gmm-inflated-" + format_double(factor);
  return e;
}

Envelope Envelope::gaussian(const Vector& mean, const Matrix& cov, double log_bound) {
  Envelope e = gmm(GmmSpec{{1.0}, {mean}, {cov}}, log_bound);
  e.description = "gaussian";
  return e;
}

double audit_log_ratio(const Target& target, const Envelope& envelope, const Matrix& points, QueryLedger& ledger) {
  double best = -INFINITY;
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    const double r = -eval_potential(target, points.col(j), ledger, Phase::ground_truth) -
                     envelope.log_density(points.col(j));
    if (r > best) best = r;
  }
  return best;
}

Matrix grid_2d(double lo, double hi, std::size_t per_axis) {
  if (per_axis < 2) throw ArgumentError("grid_2d: need at least 2 points per axis");
  Matrix g(2, static_cast<Eigen::Index>(per_axis * per_axis));
  const double h = (hi - lo) / static_cast<double>(per_axis - 1);
  Eigen::Index c = 0;
  for (std::size_t i = 0; i < per_axis; ++i)
    for (std::size_t j = 0; j < per_axis; ++j, ++c) {
      g(0, c) = lo + h * static_cast<double>(i);
      g(1, c) = lo + h * static_cast<double>(j);
    }
  return g;
}

DominationViolation::DominationViolation(Vector witness_, double log_ratio_)
    : std::runtime_error("envelope does not dominate the target (log excess " + format_double(log_ratio_) + ")"),
      witness(std::move(witness_)),
      log_ratio(log_ratio_) {}

SampleBatch ground_truth_rejection(const Target& target, const Envelope& envelope, std::size_t n, QueryLedger& ledger,
                                   Rng& rng, std::uint64_t max_proposals) {
  const int d = target.dim();
  SampleBatch batch;
  batch.algorithm = "ground_truth";
  batch.points.resize(static_cast<Eigen::Index>(n), d);
  Vector z(d);
  std::size_t kept = 0;
  std::uint64_t used = 0;
  while (kept < n) {
    if (used >= max_proposals)
      throw RgoStarved(0.0, Vector::Zero(d), used, Vector::Zero(d));
    envelope.sample(rng, z);
    ++used;
    const double log_ratio =
        -eval_potential(target, z, ledger, Phase::ground_truth) - envelope.log_density(z) - envelope.log_bound;
    if (log_ratio > kAuditTolerance) throw DominationViolation(z, log_ratio);
    if (std::log(uniform01(rng)) <= log_ratio) batch.points.row(static_cast<Eigen::Index>(kept++)) = z.transpose();
  }
  batch.ledger = ledger.snapshot();
  return batch;
}

}  // namespace zodmc
