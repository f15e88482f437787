#pragma once

#include <limits>
#include <string>
#include <vector>

#include "mecopt/model.hpp"

namespace mecopt {

enum class SolveStatus { optimal, feasible, infeasible, budget_exhausted };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::feasible: return "feasible";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::budget_exhausted: return "budget_exhausted";
  }
  return "unknown";
}

/// Common solver output. `objective_w` is the weighted system power of the
/// returned allocation; `gap` is the relative distance to the best proven
/// lower bound where the solver provides one.
struct SolveReport {
  std::string algo;
  SolveStatus status = SolveStatus::infeasible;
  double objective_w = std::numeric_limits<double>::quiet_NaN();
  double lower_bound_w = std::numeric_limits<double>::quiet_NaN();  // proven bound, where one exists
  double gap = std::numeric_limits<double>::quiet_NaN();
  long iterations = 0;
  bool proven_optimal = false;

  std::vector<std::uint8_t> alpha;
  bool has_allocation = false;
  Allocation allocation;

  double rounding_residual = std::numeric_limits<double>::quiet_NaN();  // SCA solvers
  double penalty_final = std::numeric_limits<double>::quiet_NaN();      // SCA solvers
  bool lower_bound_only = false;  // Shannon baseline: not claimed achievable
  double wall_ms = 0;

  bool is_feasible() const {
    return status == SolveStatus::optimal || status == SolveStatus::feasible;
  }
  int offload_count() const {
    int n = 0;
    for (auto a : alpha) n += (a == 0);
    return n;
  }
};

}  // namespace mecopt
