#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "zodmc/common.hpp"

namespace zodmc {

enum class ScheduleKind { constant, linear, exp_decay };

std::string_view schedule_kind_name(ScheduleKind kind);
ScheduleKind parse_schedule_kind(std::string_view name);

/// Reverse-process time grid 0 = t_0 < … < t_N = T − δ.
///
/// The score at step k is evaluated at forward time T − t_k.
struct Schedule {
  ScheduleKind kind = ScheduleKind::exp_decay;
  double horizon = 0.0;     ///< T
  double early_stop = 0.0;  ///< δ
  int steps = 0;            ///< N
  std::vector<double> grid;    ///< N + 1 points
  std::vector<double> gammas;  ///< N step sizes
  std::optional<double> kappa;

  double score_time(int k) const { return horizon - grid[static_cast<std::size_t>(k)]; }
};

/// Builds a schedule of the requested kind. Throws ConfigError on infeasible
/// parameters; for exp_decay with too few steps the message reports the
/// smallest feasible N.
Schedule build_schedule(ScheduleKind kind, double horizon, int steps, double early_stop);

/// Wraps an externally supplied grid (gammas derived); no validation.
Schedule schedule_from_grid(ScheduleKind kind, double horizon, double early_stop, std::vector<double> grid,
                            std::optional<double> kappa = std::nullopt);

/// One message per violated invariant; empty when the schedule is valid.
std::vector<std::string> validate_schedule(const Schedule& schedule);

}  // namespace zodmc
