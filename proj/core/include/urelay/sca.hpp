#pragma once

// Shared types for the successive-convex-approximation stages.

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace urelay::sca {

// Absolute resolution floor for error-probability improvements. In the
// deep-underflow regime relative drops stay large while the linear change is
// physically void; descent loops treat a linear drop at or below this as
// convergence.
inline constexpr double kDropFloor = 1e-30;

struct TraceRow {
  int iteration = 0;
  double objective_true = 0.0;       // exact objective at the accepted iterate
  double objective_surrogate = 0.0;  // convex model value at the same iterate
  double eps_bar_uav = 0.0;
  double max_violation = 0.0;
  double step_norm = 0.0;
  // Filled by the placement stage only; NaN elsewhere.
  double qx = std::numeric_limits<double>::quiet_NaN();
  double qy = std::numeric_limits<double>::quiet_NaN();
  double s_br = std::numeric_limits<double>::quiet_NaN();
  double s_rd = std::numeric_limits<double>::quiet_NaN();
};

using Trace = std::vector<TraceRow>;

enum class StageStatus { converged, iteration_limit, inner_infeasible, numerical_failure };

inline const char* to_string(StageStatus s) {
  switch (s) {
    case StageStatus::converged: return "converged";
    case StageStatus::iteration_limit: return "iteration_limit";
    case StageStatus::inner_infeasible: return "inner_infeasible";
    case StageStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

// Thrown when an expansion anchor falls outside the convexity region that
// justifies the first-order surrogates.
class RegionViolation : public std::runtime_error {
 public:
  RegionViolation(std::string component, const char* condition)
      : std::runtime_error(component + ": anchor outside the convex-model region (" +
                           condition + ")"),
        component_(std::move(component)),
        condition_(condition) {}
  const std::string& component() const { return component_; }
  const char* condition() const { return condition_; }

 private:
  std::string component_;
  const char* condition_;
};

}  // namespace urelay::sca
