#include "urelay/inner_solver.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace urelay::opt {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct CallbackFailure {
  int index;  // -1 objective, >=0 constraint
};

double eval_callback(const SmoothFn& fn, int index, const Eigen::VectorXd& x,
                     Eigen::VectorXd* grad) {
  const double v = fn(x, grad);
  if (!std::isfinite(v)) throw CallbackFailure{index};
  if (grad && !grad->allFinite()) throw CallbackFailure{index};
  return v;
}

bool in_open_box(const Eigen::VectorXd& x, const Eigen::VectorXd& lo,
                 const Eigen::VectorXd& hi) {
  for (int j = 0; j < x.size(); ++j) {
    if (!(x[j] > lo[j] && x[j] < hi[j])) return false;
  }
  return true;
}

// Largest step in direction d keeping x strictly inside the box, scaled by
// the fraction-to-boundary factor.
double box_step_limit(const Eigen::VectorXd& x, const Eigen::VectorXd& d,
                      const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  double alpha = kInf;
  for (int j = 0; j < x.size(); ++j) {
    if (d[j] > 0 && std::isfinite(hi[j])) alpha = std::min(alpha, (hi[j] - x[j]) / d[j]);
    if (d[j] < 0 && std::isfinite(lo[j])) alpha = std::min(alpha, (lo[j] - x[j]) / d[j]);
  }
  return 0.99 * alpha;
}

// Value (and gradient) of a smooth merit function, +infinity outside its
// domain. Used for both the barrier stages and phase 1.
using MeritFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)>;

struct InnerResult {
  Eigen::VectorXd x;
  double value = kInf;
  double grad_norm = kInf;
  int steps = 0;
  bool stalled = false;
};

// Damped BFGS with Armijo backtracking over an open box. Stops on gradient
// norm, step budget, or stall (no acceptable step).
InnerResult minimize_smooth(const MeritFn& merit, Eigen::VectorXd x,
                            const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                            double grad_tol, int max_steps) {
  const int n = static_cast<int>(x.size());
  Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd grad(n), grad_new(n);

  InnerResult res;
  double value = merit(x, &grad);
  if (!std::isfinite(value)) {
    res.x = x;
    res.stalled = true;
    return res;
  }

  for (int it = 0; it < max_steps; ++it) {
    res.grad_norm = grad.lpNorm<Eigen::Infinity>();
    if (res.grad_norm <= grad_tol) break;

    Eigen::VectorXd dir = -(h_inv * grad);
    double descent = grad.dot(dir);
    if (!(descent < 0) || !dir.allFinite()) {
      h_inv.setIdentity();
      dir = -grad;
      descent = grad.dot(dir);
    }

    double alpha = std::min(1.0, box_step_limit(x, dir, lo, hi));
    if (!(alpha > 0)) {
      res.stalled = true;
      break;
    }

    bool accepted = false;
    double trial_value = kInf;
    Eigen::VectorXd trial;
    for (int bt = 0; bt < 60; ++bt) {
      trial = x + alpha * dir;
      trial_value = merit(trial, nullptr);
      if (std::isfinite(trial_value) && trial_value <= value + 1e-4 * alpha * descent) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      // Retry once along steepest descent before declaring a stall.
      if ((dir + grad).norm() > 1e-14 * grad.norm()) {
        h_inv.setIdentity();
        continue;
      }
      res.stalled = true;
      break;
    }

    trial_value = merit(trial, &grad_new);
    if (!std::isfinite(trial_value) || !grad_new.allFinite()) {
      res.stalled = true;
      break;
    }

    const Eigen::VectorXd s = trial - x;
    const Eigen::VectorXd y = grad_new - grad;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd left =
          Eigen::MatrixXd::Identity(n, n) - rho * s * y.transpose();
      h_inv = left * h_inv * left.transpose() + rho * s * s.transpose();
    }

    x = trial;
    value = trial_value;
    grad = grad_new;
    ++res.steps;
  }

  res.x = x;
  res.value = value;
  res.grad_norm = grad.lpNorm<Eigen::Infinity>();
  return res;
}

// Damped Newton with a central-difference Hessian assembled from analytic
// merit gradients. The quasi-Newton loop above handles the nonsmooth hinge;
// this one drives each barrier stage, whose curvature (log terms plus steep
// error atoms) defeats rank-two updates.
InnerResult minimize_newton(const MeritFn& merit, Eigen::VectorXd x,
                            const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                            double grad_tol, int max_steps) {
  const int n = static_cast<int>(x.size());
  Eigen::VectorXd grad(n), gp(n), gm(n);
  Eigen::MatrixXd hess(n, n);

  InnerResult res;
  double value = merit(x, &grad);
  if (!std::isfinite(value)) {
    res.x = x;
    res.stalled = true;
    return res;
  }

  for (int it = 0; it < max_steps; ++it) {
    res.grad_norm = grad.lpNorm<Eigen::Infinity>();
    if (res.grad_norm <= grad_tol) break;

    // Finite-difference Hessian columns. The box clamp keeps the log-bound
    // terms finite; a probe can still cross a constraint boundary, so shrink
    // the spacing until both sides evaluate. Noise from a tiny spacing is
    // harmless there: curvature near a boundary dwarfs it.
    bool fd_ok = true;
    Eigen::VectorXd xt = x;
    for (int j = 0; j < n && fd_ok; ++j) {
      double h = 1e-6 * std::max(std::abs(x[j]), 1e-3);
      if (std::isfinite(lo[j])) h = std::min(h, 0.45 * (x[j] - lo[j]));
      if (std::isfinite(hi[j])) h = std::min(h, 0.45 * (hi[j] - x[j]));
      bool col_ok = false;
      for (int attempt = 0; attempt < 8 && h > 0; ++attempt) {
        xt[j] = x[j] + h;
        const double vp = merit(xt, &gp);
        xt[j] = x[j] - h;
        const double vm = merit(xt, &gm);
        xt[j] = x[j];
        if (std::isfinite(vp) && std::isfinite(vm) && gp.allFinite() &&
            gm.allFinite()) {
          hess.col(j) = (gp - gm) / (2.0 * h);
          col_ok = true;
          break;
        }
        h *= 0.0625;
      }
      fd_ok = col_ok;
    }

    Eigen::VectorXd dir;
    double descent = 0.0;
    if (fd_ok) {
      hess = 0.5 * (hess + hess.transpose()).eval();
      double damping = 0.0;
      const double scale = std::max(1.0, hess.diagonal().cwiseAbs().maxCoeff());
      for (int attempt = 0; attempt < 40; ++attempt) {
        Eigen::LLT<Eigen::MatrixXd> llt(
            hess + damping * Eigen::MatrixXd::Identity(n, n));
        if (llt.info() == Eigen::Success) {
          dir = -llt.solve(grad);
          descent = grad.dot(dir);
          if (descent < 0 && dir.allFinite()) break;
        }
        dir.resize(0);
        damping = damping == 0.0 ? 1e-10 * scale : damping * 10.0;
      }
    }
    const bool newton_dir = dir.size() > 0;
    if (!newton_dir) {
      dir = -grad;
      descent = grad.dot(dir);
    }

    double alpha = std::min(1.0, box_step_limit(x, dir, lo, hi));
    if (!(alpha > 0)) {
      res.stalled = true;
      break;
    }

    bool accepted = false;
    Eigen::VectorXd trial;
    double trial_value = kInf;
    auto line_search = [&](const Eigen::VectorXd& d, double slope, double a0) {
      double a = a0;
      for (int bt = 0; bt < 60; ++bt) {
        trial = x + a * d;
        trial_value = merit(trial, &gp);
        if (std::isfinite(trial_value) && gp.allFinite() &&
            trial_value <= value + 1e-4 * a * slope) {
          accepted = true;
          return;
        }
        a *= 0.5;
      }
    };
    line_search(dir, descent, alpha);
    if (!accepted && newton_dir) {
      const Eigen::VectorXd sd = -grad;
      const double a0 = std::min(1.0, box_step_limit(x, sd, lo, hi));
      if (a0 > 0) line_search(sd, grad.dot(sd), a0);
    }
    if (!accepted) {
      res.stalled = true;
      break;
    }
    x = trial;
    value = trial_value;
    grad = gp;
    ++res.steps;
  }

  res.x = x;
  res.value = value;
  res.grad_norm = grad.lpNorm<Eigen::Infinity>();
  return res;
}

struct ProgramEval {
  double objective;
  Eigen::VectorXd constraint_values;
};

ProgramEval eval_program(const SmoothProgram& prog, const Eigen::VectorXd& x) {
  ProgramEval ev;
  ev.objective = eval_callback(prog.objective, -1, x, nullptr);
  ev.constraint_values.resize(static_cast<int>(prog.constraints.size()));
  for (int i = 0; i < ev.constraint_values.size(); ++i) {
    ev.constraint_values[i] =
        eval_callback(prog.constraints[static_cast<size_t>(i)], i, x, nullptr);
  }
  return ev;
}

double violation_of(const SmoothProgram& prog, const ProgramEval& ev,
                    const Eigen::VectorXd& x) {
  double v = 0.0;
  if (ev.constraint_values.size() > 0) {
    v = std::max(v, ev.constraint_values.maxCoeff());
  }
  for (int j = 0; j < x.size(); ++j) {
    v = std::max(v, prog.lower[j] - x[j]);
    v = std::max(v, x[j] - prog.upper[j]);
  }
  return v;
}

void validate_program(const SmoothProgram& prog, const Eigen::VectorXd& start) {
  if (prog.dim <= 0) throw std::invalid_argument("program dimension must be positive");
  if (!prog.objective) throw std::invalid_argument("program objective is not set");
  if (start.size() != prog.dim || prog.lower.size() != prog.dim ||
      prog.upper.size() != prog.dim) {
    throw std::invalid_argument("start point or bounds do not match program dimension");
  }
  for (int j = 0; j < prog.dim; ++j) {
    if (!(prog.lower[j] < prog.upper[j])) {
      throw std::invalid_argument("lower bound must be strictly below upper bound");
    }
  }
}

}  // namespace

double max_violation(const SmoothProgram& prog, const Eigen::VectorXd& x) {
  return violation_of(prog, eval_program(prog, x), x);
}

double kkt_residual(const SmoothProgram& prog, const Eigen::VectorXd& x,
                    double barrier_t) {
  const double tiny = std::numeric_limits<double>::min();
  Eigen::VectorXd grad(prog.dim);
  Eigen::VectorXd residual(prog.dim);
  prog.objective(x, &grad);
  residual = grad;
  for (size_t i = 0; i < prog.constraints.size(); ++i) {
    const double c = prog.constraints[i](x, &grad);
    const double lambda = 1.0 / (barrier_t * std::max(-c, tiny));
    residual += lambda * grad;
  }
  for (int j = 0; j < prog.dim; ++j) {
    if (std::isfinite(prog.lower[j])) {
      residual[j] -= 1.0 / (barrier_t * std::max(x[j] - prog.lower[j], tiny));
    }
    if (std::isfinite(prog.upper[j])) {
      residual[j] += 1.0 / (barrier_t * std::max(prog.upper[j] - x[j], tiny));
    }
  }
  return residual.lpNorm<Eigen::Infinity>();
}

SolveReport solve(const SmoothProgram& prog, const Eigen::VectorXd& start,
                  const SolveOptions& opts) {
  if (!prog.log_coords.empty()) {
    std::vector<char> mask(static_cast<size_t>(prog.dim), 0);
    for (int j : prog.log_coords) {
      if (j < 0 || j >= prog.dim) throw std::invalid_argument("log coordinate out of range");
      if (!(prog.upper[j] > 0)) {
        throw std::invalid_argument("log coordinate needs a positive upper bound");
      }
      mask[static_cast<size_t>(j)] = 1;
    }
    auto to_phys = [mask](const Eigen::VectorXd& u) {
      Eigen::VectorXd z = u;
      for (int j = 0; j < u.size(); ++j) {
        if (mask[static_cast<size_t>(j)]) z[j] = std::exp(u[j]);
      }
      return z;
    };
    auto wrap = [mask, to_phys](SmoothFn f) {
      return [mask, to_phys, f = std::move(f)](const Eigen::VectorXd& u,
                                               Eigen::VectorXd* g) {
        const Eigen::VectorXd z = to_phys(u);
        const double v = f(z, g);
        if (g) {
          for (int j = 0; j < u.size(); ++j) {
            if (mask[static_cast<size_t>(j)]) (*g)[j] *= z[j];
          }
        }
        return v;
      };
    };
    SmoothProgram work;
    work.dim = prog.dim;
    work.objective = wrap(prog.objective);
    work.constraints.reserve(prog.constraints.size());
    for (const auto& c : prog.constraints) work.constraints.push_back(wrap(c));
    work.lower = prog.lower;
    work.upper = prog.upper;
    Eigen::VectorXd u0 = start;
    for (int j = 0; j < prog.dim; ++j) {
      if (!mask[static_cast<size_t>(j)]) continue;
      work.lower[j] = prog.lower[j] > 0 ? std::log(prog.lower[j]) : -kInf;
      work.upper[j] = std::isfinite(prog.upper[j]) ? std::log(prog.upper[j]) : kInf;
      u0[j] = std::log(std::max(start[j], 1e-300));
    }
    SolveReport rep = solve(work, u0, opts);
    rep.point = to_phys(rep.point);
    return rep;
  }

  validate_program(prog, start);
  SolveReport report;
  report.point = start;

  try {
    // Nudge the start strictly inside finite box bounds. Starts already
    // strictly interior are left untouched; the pad is relative to the
    // coordinate, not the box width, so a wide box cannot teleport the start.
    Eigen::VectorXd x = start;
    for (int j = 0; j < prog.dim; ++j) {
      const bool lo_fin = std::isfinite(prog.lower[j]);
      const bool hi_fin = std::isfinite(prog.upper[j]);
      double pad = 1e-9 * std::max(1.0, std::abs(x[j]));
      if (lo_fin && hi_fin) {
        pad = std::min(pad, 0.25 * (prog.upper[j] - prog.lower[j]));
      }
      if (lo_fin && !(x[j] > prog.lower[j])) x[j] = prog.lower[j] + pad;
      if (hi_fin && !(x[j] < prog.upper[j])) x[j] = prog.upper[j] - pad;
    }

    // Track the best feasible point by true objective, seeded with the start
    // when it is feasible, so a feasible start can never get worse.
    bool have_best = false;
    Eigen::VectorXd best_x;
    double best_obj = kInf;
    auto consider = [&](const Eigen::VectorXd& cand) {
      ProgramEval ev = eval_program(prog, cand);
      if (violation_of(prog, ev, cand) <= opts.tol_feas &&
          ev.objective < best_obj) {
        best_obj = ev.objective;
        best_x = cand;
        have_best = true;
      }
    };
    consider(start);

    const int n_con = static_cast<int>(prog.constraints.size());
    int iterations = 0;

    // Phase 1: push strictly inside the constraint set (squared hinge with a
    // small margin). Also handles feasible starts sitting on a boundary.
    const double margin = 1e-9;
    auto hinge = [&](const Eigen::VectorXd& z, Eigen::VectorXd* grad) {
      if (grad) grad->setZero(prog.dim);
      double total = 0.0;
      Eigen::VectorXd cg(prog.dim);
      for (int i = 0; i < n_con; ++i) {
        const double c = eval_callback(prog.constraints[static_cast<size_t>(i)], i, z,
                                       grad ? &cg : nullptr);
        const double h = c + margin;
        if (h > 0) {
          total += h * h;
          if (grad) *grad += 2.0 * h * cg;
        }
      }
      return total;
    };

    // The barrier needs every constraint strictly negative; the hinge aims a
    // little beyond that, but strict interiorness is enough to stop.
    auto strictly_inside = [&](const Eigen::VectorXd& z) {
      for (int i = 0; i < n_con; ++i) {
        if (eval_callback(prog.constraints[static_cast<size_t>(i)], i, z, nullptr) >= 0) {
          return false;
        }
      }
      return true;
    };

    if (n_con > 0 && !strictly_inside(x)) {
      Eigen::VectorXd x_pre = x;
      for (int round = 0; round < 8; ++round) {
        InnerResult r =
            minimize_smooth(hinge, x, prog.lower, prog.upper, 1e-14, 120);
        x = r.x;
        iterations += r.steps;
        if (strictly_inside(x) || r.stalled || r.steps == 0) break;
      }
      if (!strictly_inside(x)) {
        ProgramEval ev_pre = eval_program(prog, x_pre);
        ProgramEval ev = eval_program(prog, x);
        // Keep whichever point violates less; phase 1 may stall on a merit
        // plateau away from the start.
        if (violation_of(prog, ev_pre, x_pre) < violation_of(prog, ev, x)) {
          x = x_pre;
          ev = ev_pre;
        }
        report.point = have_best ? best_x : x;
        report.objective = have_best ? best_obj : ev.objective;
        report.max_violation = max_violation(prog, report.point);
        report.iterations = iterations;
        report.status = report.max_violation <= opts.tol_feas
                            ? SolveStatus::converged
                            : SolveStatus::infeasible;
        if (report.status == SolveStatus::infeasible) return report;
      }
    }

    // Barrier stages.
    const int n_bounds = [&] {
      int k = 0;
      for (int j = 0; j < prog.dim; ++j) {
        k += std::isfinite(prog.lower[j]) ? 1 : 0;
        k += std::isfinite(prog.upper[j]) ? 1 : 0;
      }
      return k;
    }();
    const double total_constraints = std::max(1, n_con + n_bounds);

    double t = opts.barrier_t0;
    bool converged = false;
    Eigen::VectorXd x_stage_prev;
    // Beyond this t the barrier gap bound total/t meets the requested
    // tolerance; further stages only fight fd noise.
    const double t_cap = total_constraints / opts.tol_kkt;
    while (iterations < opts.max_iter) {
      auto barrier = [&](const Eigen::VectorXd& z, Eigen::VectorXd* grad) -> double {
        if (!in_open_box(z, prog.lower, prog.upper)) return kInf;
        Eigen::VectorXd cg(prog.dim);
        double val = eval_callback(prog.objective, -1, z, grad);
        double logsum = 0.0;
        Eigen::VectorXd logsum_grad;
        if (grad) logsum_grad.setZero(prog.dim);
        for (int i = 0; i < n_con; ++i) {
          const double c = eval_callback(prog.constraints[static_cast<size_t>(i)], i, z,
                                         grad ? &cg : nullptr);
          if (c >= 0) return kInf;
          logsum -= std::log(-c);
          if (grad) logsum_grad += cg / (-c);
        }
        for (int j = 0; j < prog.dim; ++j) {
          if (std::isfinite(prog.lower[j])) {
            logsum -= std::log(z[j] - prog.lower[j]);
            if (grad) logsum_grad[j] -= 1.0 / (z[j] - prog.lower[j]);
          }
          if (std::isfinite(prog.upper[j])) {
            logsum -= std::log(prog.upper[j] - z[j]);
            if (grad) logsum_grad[j] += 1.0 / (prog.upper[j] - z[j]);
          }
        }
        if (grad) *grad += logsum_grad / t;
        return val + logsum / t;
      };

      const double stage_tol = std::max(opts.tol_kkt, 0.1 / t);
      const int budget = std::min(20, opts.max_iter - iterations);
      InnerResult r = minimize_newton(barrier, x, prog.lower, prog.upper, stage_tol,
                                      budget);
      if (std::isfinite(r.value)) x = r.x;
      iterations += std::max(r.steps, 1);
      consider(x);

      const double gap = total_constraints / t;
      report.barrier_t = t;
      if (gap <= opts.tol_kkt && kkt_residual(prog, x, t) <= opts.tol_kkt) {
        converged = true;
        break;
      }
      // Raising t further is pointless once the iterate stops moving; the
      // arithmetic floor of the current point has been reached.
      if (x_stage_prev.size() > 0 &&
          (x - x_stage_prev).lpNorm<Eigen::Infinity>() <=
              1e-8 * (1.0 + x.lpNorm<Eigen::Infinity>())) {
        converged = true;
        break;
      }
      x_stage_prev = x;
      if (t >= t_cap) break;
      t *= opts.barrier_factor;
    }

    consider(x);
    report.point = have_best ? best_x : x;
    ProgramEval ev = eval_program(prog, report.point);
    report.objective = ev.objective;
    report.max_violation = violation_of(prog, ev, report.point);
    report.kkt_residual = kkt_residual(prog, report.point, std::max(report.barrier_t, 1.0));
    report.iterations = iterations;
    if (converged) {
      report.status = SolveStatus::converged;
    } else if (report.max_violation <= opts.tol_feas) {
      report.status = SolveStatus::iteration_limit;
    } else {
      report.status = SolveStatus::infeasible;
    }
    return report;
  } catch (const CallbackFailure& fail) {
    report.status = SolveStatus::numerical_failure;
    report.failing_constraint = fail.index;
    report.max_violation = kInf;
    report.kkt_residual = kInf;
    return report;
  }
}

GradientCheck check_gradients(const SmoothProgram& prog, const Eigen::VectorXd& x,
                              double step) {
  GradientCheck result;
  Eigen::VectorXd analytic(prog.dim);
  Eigen::VectorXd xp = x, xm = x;
  auto audit = [&](const SmoothFn& fn, int index) {
    fn(x, &analytic);
    for (int j = 0; j < prog.dim; ++j) {
      const double h = step * std::max(1.0, std::abs(x[j]));
      xp[j] = x[j] + h;
      xm[j] = x[j] - h;
      const double numeric = (fn(xp, nullptr) - fn(xm, nullptr)) / (2.0 * h);
      xp[j] = x[j];
      xm[j] = x[j];
      const double scale = std::max({std::abs(analytic[j]), std::abs(numeric), 1.0});
      const double rel = std::abs(analytic[j] - numeric) / scale;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_callback = index;
        result.worst_component = j;
      }
    }
  };
  audit(prog.objective, -1);
  for (size_t i = 0; i < prog.constraints.size(); ++i) {
    audit(prog.constraints[i], static_cast<int>(i));
  }
  if (result.worst_callback == -2) result.worst_callback = -1;
  return result;
}

}  // namespace urelay::opt
