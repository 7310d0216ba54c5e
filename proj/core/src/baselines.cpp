#include "urelay/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "urelay/fbl.hpp"
#include "urelay/inner_solver.hpp"

namespace urelay::baselines {
namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

// d log dep / d gamma, stable in the deep tail.
double dlogdep_dgamma(double gamma, double m, double d_bits) {
  const double f = fbl::f_arg(gamma, m, d_bits);
  const double log_q = fbl::log_q_func(f);
  const double e = -0.5 * f * f - kHalfLog2Pi - log_q;
  const double ratio = e >= 700.0 ? std::exp(700.0) : std::exp(e);
  return -ratio * fbl::df_dgamma(gamma, m, d_bits);
}

// Smallest SNR meeting dep(gamma, m, d) <= cap, by bisection on f_arg.
double min_snr_for_cap(double m, double d_bits, double cap) {
  const double f_target = fbl::q_inv(cap);
  double lo = std::exp2(d_bits / m) - 1.0;
  double hi = 2.0 * lo + 1.0;
  while (fbl::f_arg(hi, m, d_bits) < f_target) {
    hi *= 2.0;
    if (hi > 1e30) return hi;
  }
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (fbl::f_arg(mid, m, d_bits) < f_target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

struct OmaPoint {
  int m1 = 0, m2 = 0;
  double p1 = 0.0, p2 = 0.0;
  double log_eps1 = 0.0;
};

// Smooth 2-variable refinement of one pair; returns an improved feasible
// point or the input when the solver does not find one.
OmaPoint oma_polish(const OmaPoint& pt, double gb, double gd,
                    const SystemParams& sys) {
  const double pm = sys.p_max_w;
  const double log_cap = std::log(sys.eps_uav_max);
  const double m1 = pt.m1, m2 = pt.m2;
  const double d_bits = sys.payload_bits;

  opt::SmoothProgram prog;
  prog.dim = 2;
  prog.lower = Eigen::VectorXd::Constant(2, 1e-9);
  prog.upper = Eigen::VectorXd::Constant(2, 1.0);
  prog.objective = [=](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    const double g1 = x[0] * pm * gd;
    if (grad) {
      grad->setZero(2);
      (*grad)[0] = dlogdep_dgamma(g1, m1, d_bits) * pm * gd;
    }
    return fbl::log_dep(g1, m1, d_bits);
  };
  prog.constraints.push_back([=](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    const double g2 = x[1] * pm * gb;
    if (grad) {
      grad->setZero(2);
      (*grad)[1] = dlogdep_dgamma(g2, m2, d_bits) * pm * gb / (-log_cap);
    }
    return (fbl::log_dep(g2, m2, d_bits) - log_cap) / (-log_cap);
  });
  prog.constraints.push_back([=](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    if (grad) {
      grad->setZero(2);
      (*grad)[0] = m1 * pm / sys.e_tot;
      (*grad)[1] = m2 * pm / sys.e_tot;
    }
    return (m1 * x[0] * pm + m2 * x[1] * pm - sys.e_tot) / sys.e_tot;
  });

  Eigen::VectorXd x0(2);
  x0[0] = std::min(1.0 - 1e-9, pt.p1 / pm * (1.0 - 1e-9));
  x0[1] = std::min(1.0 - 1e-9, pt.p2 / pm * (1.0 + 1e-9));
  opt::SolveOptions opts;
  opts.max_iter = 200;
  opt::SolveReport rep;
  try {
    rep = opt::solve(prog, x0, opts);
  } catch (const std::exception&) {
    return pt;
  }
  if (rep.status != opt::SolveStatus::converged &&
      rep.status != opt::SolveStatus::iteration_limit) {
    return pt;
  }
  OmaPoint ref = pt;
  ref.p1 = rep.point[0] * pm;
  ref.p2 = rep.point[1] * pm;
  ref.log_eps1 = fbl::log_dep(ref.p1 * gd, pt.m1, d_bits);
  const bool feasible =
      fbl::log_dep(ref.p2 * gb, pt.m2, d_bits) <= log_cap * (1.0 - 1e-9) &&
      m1 * ref.p1 + m2 * ref.p2 <= sys.e_tot * (1.0 + 1e-12);
  if (!feasible || ref.log_eps1 > pt.log_eps1) return pt;
  return ref;
}

}  // namespace

ao::AoReport solve_fixed_location(const ao::Problem& pb) {
  ao::StageToggles tg;
  tg.location = false;
  return ao::solve(pb, tg);
}

ao::AoReport solve_fixed_location(ao::Problem pb, const Eigen::Vector3d& q_fix) {
  pb.geom.uav = q_fix;
  ao::StageToggles tg;
  tg.location = false;
  return ao::solve(pb, tg);
}

ao::AoReport solve_fixed_power(const ao::Problem& pb) {
  ao::StageToggles tg;
  tg.power = false;
  return ao::solve(pb, tg);
}

ao::AoReport solve_oma(const ao::Problem& pb) {
  const SystemParams& sys = pb.params;
  ao::AoReport rep;

  Eigen::Vector3d q{std::clamp(pb.geom.uav.x(), sys.x_min, sys.x_max),
                    std::clamp(pb.geom.uav.y(), sys.y_min, sys.y_max),
                    sys.uav_height};
  const LinkState link = ao::link_for(pb, q);
  const double gb = link.gain_br_sq / link.noise_bs_w;
  const double gd = link.gain_bd_sq / link.noise_bs_w;

  // Per-pair closed form: the UAV slot takes the least power meeting the
  // cap (a function of m2 only), the device slot takes everything the energy
  // budget leaves, up to the per-slot cap. The device error is decreasing in
  // its power, so this is the exact per-pair minimizer.
  const auto worse = [](const OmaPoint& a, const OmaPoint& b) {
    return a.log_eps1 < b.log_eps1;
  };
  bool found = false;
  OmaPoint best;
  std::vector<OmaPoint> shortlist;
  for (int m2 = 1; m2 < sys.m_total; ++m2) {
    const double p2 =
        min_snr_for_cap(m2, sys.payload_bits, sys.eps_uav_max) / gb;
    if (p2 > sys.p_max_w) continue;
    const double left = sys.e_tot - m2 * p2;
    if (left <= 0.0) continue;
    for (int m1 = 1; m1 + m2 <= sys.m_total; ++m1) {
      OmaPoint cand;
      cand.m1 = m1;
      cand.m2 = m2;
      cand.p1 = std::min(sys.p_max_w, left / m1);
      cand.p2 = p2;
      cand.log_eps1 = fbl::log_dep(cand.p1 * gd, m1, sys.payload_bits);
      if (!found || cand.log_eps1 < best.log_eps1) {
        found = true;
        best = cand;
      }
      shortlist.push_back(cand);
      std::push_heap(shortlist.begin(), shortlist.end(), worse);
      if (shortlist.size() > 8) {
        std::pop_heap(shortlist.begin(), shortlist.end(), worse);
        shortlist.pop_back();
      }
    }
  }

  if (!found) {
    rep.status = ao::AoStatus::infeasible;
    rep.failure = "no orthogonal blocklength split meets the UAV cap within "
                  "the power and energy budgets";
    return rep;
  }

  for (const OmaPoint& pt : shortlist) {
    const OmaPoint ref = oma_polish(pt, gb, gd, sys);
    if (ref.log_eps1 < best.log_eps1) best = ref;
  }

  rep.status = ao::AoStatus::converged;
  rep.alloc.pw = PowerTriple{best.p1, best.p2, 0.0};
  rep.alloc.m = BlocklengthPair{best.m1, best.m2};
  rep.alloc.q = q;
  rep.link = link;
  rep.log_objective = best.log_eps1;
  rep.outer_iterations = 1;

  DepBreakdown b{};
  b.eps1 = std::exp(best.log_eps1);
  b.eps2 = fbl::dep(best.p2 * gb, best.m2, sys.payload_bits);
  b.eps2_fail = b.eps2;
  b.eps12 = 0.0;
  b.eps3 = 0.0;
  b.eps_bar_uav = b.eps2;
  b.eps_bar_dev = b.eps1;
  b.eps_obj = b.eps1;
  rep.breakdown = b;
  rep.objective_history = {b.eps1};
  rep.log_objective_history = {best.log_eps1};
  return rep;
}

}  // namespace urelay::baselines
