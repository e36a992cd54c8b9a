#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace zodmc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
/// Read-only view of a point; binds to a Vector or to a column of a Matrix without copying.
using PointRef = Eigen::Ref<const Eigen::VectorXd>;
using Rng = std::mt19937_64;

/// Invalid experiment or target configuration (maps to CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument to a numerical routine.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Deterministic, independent RNG stream for (seed, stream, tag).
///
/// Every parallel unit of work (trajectory, chain, trial) draws from its own
/// stream, so results depend only on the seed and never on scheduling.
Rng make_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t tag = 0);

/// Fills `out` with i.i.d. standard normal draws.
void fill_normal(Rng& rng, Eigen::Ref<Vector> out);

double uniform01(Rng& rng);

/// Number of workers to use when the caller passes 0.
int default_workers();

/// Runs fn(i) for i in [0, n) on up to `workers` threads with static
/// partitioning. If any call throws, the exception from the smallest index is
/// rethrown after all workers have finished.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

/// Stable text form of a double that round-trips exactly.
std::string format_double(double value);

}  // namespace zodmc
