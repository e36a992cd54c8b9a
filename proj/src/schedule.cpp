#include "zodmc/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace zodmc {

namespace {

constexpr double kMaxRatio = 10.0;
constexpr double kMinRatio = 0.1;

double exp_decay_endpoint(double horizon, int steps, double kappa) {
  double t = 0.0;
  for (int k = 0; k < steps; ++k) t += kappa * std::min(1.0, horizon - t);
  return t;
}

std::vector<double> diffs(const std::vector<double>& grid) {
  std::vector<double> g;
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) g.push_back(grid[k + 1] - grid[k]);
  return g;
}

void check_common(double horizon, int steps, double early_stop) {
  if (!(horizon > 1.0)) throw ConfigError("schedule: T must exceed 1");
  if (!(early_stop > 0.0 && early_stop < 1.0)) throw ConfigError("schedule: delta must lie in (0, 1)");
  if (steps < 1) throw ConfigError("schedule: N must be at least 1");
}

}  // namespace

std::string_view schedule_kind_name(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::constant: return "constant";
    case ScheduleKind::linear: return "linear";
    case ScheduleKind::exp_decay: return "exp_decay";
  }
  return "unknown";
}

ScheduleKind parse_schedule_kind(std::string_view name) {
  if (name == "constant") return ScheduleKind::constant;
  if (name == "linear") return ScheduleKind::linear;
  if (name == "exp_decay" || name == "exp-decay" || name == "exponential") return ScheduleKind::exp_decay;
  throw ConfigError("unknown schedule kind '" + std::string(name) + "'");
}

Schedule schedule_from_grid(ScheduleKind kind, double horizon, double early_stop, std::vector<double> grid,
                            std::optional<double> kappa) {
  Schedule s;
  s.kind = kind;
  s.horizon = horizon;
  s.early_stop = early_stop;
  s.steps = grid.empty() ? 0 : static_cast<int>(grid.size()) - 1;
  s.gammas = diffs(grid);
  s.grid = std::move(grid);
  s.kappa = kappa;
  return s;
}

Schedule build_schedule(ScheduleKind kind, double horizon, int steps, double early_stop) {
  check_common(horizon, steps, early_stop);
  if (kind != ScheduleKind::constant && steps < 2)
    throw ConfigError("schedule: " + std::string(schedule_kind_name(kind)) + " requires N >= 2");

  const double end = horizon - early_stop;
  std::vector<double> grid(static_cast<std::size_t>(steps) + 1);
  std::optional<double> kappa;

  switch (kind) {
    case ScheduleKind::constant: {
      for (int k = 0; k <= steps; ++k) grid[static_cast<std::size_t>(k)] = end * k / steps;
      break;
    }
    case ScheduleKind::linear: {
      // T − t_k = (δ + (N − k)γ)² with γ = (√T − δ)/N, then mapped affinely so
      // the endpoints are exactly 0 and T − δ.
      const double gamma = (std::sqrt(horizon) - early_stop) / steps;
      std::vector<double> raw(grid.size());
      for (int k = 0; k <= steps; ++k) {
        const double r = early_stop + (steps - k) * gamma;
        raw[static_cast<std::size_t>(k)] = horizon - r * r;
      }
      const double lo = raw.front(), hi = raw.back();
      for (std::size_t k = 0; k < grid.size(); ++k) grid[k] = (raw[k] - lo) * end / (hi - lo);
      break;
    }
    case ScheduleKind::exp_decay: {
      if (!(exp_decay_endpoint(horizon, steps, 1.0) > end)) {
        int feasible = steps;
        while (!(exp_decay_endpoint(horizon, feasible, 1.0) > end)) ++feasible;
        std::ostringstream msg;
        msg << "schedule: exp_decay with T=" << horizon << ", delta=" << early_stop << " needs kappa >= 1 at N="
            << steps << "; minimal feasible N is " << feasible;
        throw ConfigError(msg.str());
      }
      // Seed from (T + ln(1/δ))/N, then bisect so N steps land on T − δ.
      double lo = 0.0, hi = 1.0;
      const double seed = std::min(0.5, (horizon + std::log(1.0 / early_stop)) / steps);
      if (exp_decay_endpoint(horizon, steps, seed) < end) lo = seed; else hi = seed;
      for (int it = 0; it < 200 && hi - lo > 1e-17; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (exp_decay_endpoint(horizon, steps, mid) < end) lo = mid; else hi = mid;
      }
      const double k_final = 0.5 * (lo + hi);
      kappa = k_final;
      double t = 0.0;
      grid[0] = 0.0;
      for (int k = 0; k < steps; ++k) {
        t += k_final * std::min(1.0, horizon - t);
        grid[static_cast<std::size_t>(k) + 1] = t;
      }
      break;
    }
  }
  grid.front() = 0.0;
  grid.back() = end;

  Schedule s = schedule_from_grid(kind, horizon, early_stop, std::move(grid), kappa);
  for (std::size_t k = 1; k < s.gammas.size(); ++k) {
    const double ratio = s.gammas[k] / s.gammas[k - 1];
    if (ratio > kMaxRatio || ratio < kMinRatio) {
      std::ostringstream msg;
      msg << "schedule: consecutive step ratio " << ratio << " at k=" << k << " violates [" << kMinRatio << ", "
          << kMaxRatio << "]";
      throw ConfigError(msg.str());
    }
  }
  return s;
}

std::vector<std::string> validate_schedule(const Schedule& s) {
  std::vector<std::string> out;
  auto add = [&out](const std::string& what, long k = -1) {
    out.push_back(k >= 0 ? what + " at k=" + std::to_string(k) : what);
  };
  if (!(s.horizon > 1.0)) add("horizon T must exceed 1");
  if (!(s.early_stop > 0.0 && s.early_stop < 1.0)) add("early stop delta outside (0, 1)");
  if (s.steps < 1 || s.grid.size() != static_cast<std::size_t>(s.steps) + 1) {
    add("grid size does not match N + 1");
    return out;
  }
  if (s.gammas.size() != static_cast<std::size_t>(s.steps)) add("gamma count does not match N");
  if (s.grid.front() != 0.0) add("grid does not start at 0");
  if (std::abs(s.grid.back() - (s.horizon - s.early_stop)) > 1e-12) add("grid does not end at T - delta");

  for (std::size_t k = 0; k + 1 < s.grid.size(); ++k) {
    if (!(s.grid[k + 1] > s.grid[k])) add("non-increasing", static_cast<long>(k + 1));
    if (k < s.gammas.size()) {
      const double g = s.gammas[k];
      if (!(g > 0.0)) add("non-positive step", static_cast<long>(k));
      if (std::abs(g - (s.grid[k + 1] - s.grid[k])) > 1e-12) add("step does not match grid difference", static_cast<long>(k));
    }
  }
  for (std::size_t k = 1; k < s.gammas.size(); ++k) {
    if (!(s.gammas[k - 1] > 0.0)) continue;
    const double ratio = s.gammas[k] / s.gammas[k - 1];
    if (ratio > kMaxRatio || ratio < kMinRatio) add("consecutive-ratio bound", static_cast<long>(k));
  }
  if (s.kind == ScheduleKind::exp_decay) {
    if (!s.kappa) {
      add("exp_decay schedule without kappa");
    } else {
      for (std::size_t k = 0; k < s.gammas.size(); ++k) {
        const double expected = *s.kappa * std::min(1.0, s.horizon - s.grid[k]);
        if (std::abs(s.gammas[k] - expected) > 1e-9) add("exp_decay step identity", static_cast<long>(k));
      }
    }
  }
  return out;
}

}  // namespace zodmc
