#pragma once

// Smooth inequality-constrained minimizer used by the SCA stages: log-barrier
// outer loop with damped Newton inner iterations (finite-difference Hessians
// assembled from analytic gradients), a squared-hinge phase-1 for infeasible
// or boundary starts, and a gradient-descent fallback when the Newton
// direction degenerates. Deterministic: no randomization, fixed iteration
// order.

#include <Eigen/Core>
#include <functional>
#include <vector>

namespace urelay::opt {

// Returns the value at x; when grad is non-null it is resized and filled
// with the analytic gradient. Must be deterministic and smooth on the
// feasible box.
using SmoothFn = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

struct SmoothProgram {
  int dim = 0;
  SmoothFn objective;
  std::vector<SmoothFn> constraints;  // interpreted as c_i(x) <= 0
  Eigen::VectorXd lower, upper;       // box bounds; +-infinity allowed
  // Coordinates that are positive by nature and range over decades; the
  // solver optimizes their logarithm internally for conditioning. Callbacks
  // and reported points always use the physical coordinates.
  std::vector<int> log_coords;
};

enum class SolveStatus { converged, iteration_limit, infeasible, numerical_failure };

struct SolveReport {
  Eigen::VectorXd point;
  double objective = 0.0;
  double kkt_residual = 0.0;
  double max_violation = 0.0;
  double barrier_t = 0.0;  // final barrier parameter (for independent KKT audits)
  int iterations = 0;
  SolveStatus status = SolveStatus::converged;
  int failing_constraint = -1;  // set on numerical_failure (-1 = objective)
};

struct SolveOptions {
  double tol_kkt = 1e-8;
  double tol_feas = 1e-9;
  int max_iter = 200;
  double barrier_t0 = 1.0;
  double barrier_factor = 10.0;
};

// Minimize prog.objective over the feasible set from the given start. For a
// feasible start the returned objective never exceeds the start's value.
SolveReport solve(const SmoothProgram& prog, const Eigen::VectorXd& start,
                  const SolveOptions& opts = {});

// max(0, max_i c_i(x)) plus box violation; 0 means feasible.
double max_violation(const SmoothProgram& prog, const Eigen::VectorXd& x);

// Stationarity residual ||grad F + sum lambda_i grad c_i + bound terms||_inf
// with barrier multiplier estimates at parameter t. Recomputed from the raw
// callbacks, independent of solve() internals.
double kkt_residual(const SmoothProgram& prog, const Eigen::VectorXd& x, double barrier_t);

struct GradientCheck {
  double max_rel_error = 0.0;
  int worst_callback = -2;   // -1 objective, >=0 constraint index, -2 none checked
  int worst_component = -1;
};

// Central-difference audit of every callback's analytic gradient at x.
GradientCheck check_gradients(const SmoothProgram& prog, const Eigen::VectorXd& x,
                              double step = 1e-6);

}  // namespace urelay::opt
