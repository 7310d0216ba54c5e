#pragma once

// Independent reference implementations used by the tests: a long-double
// Gaussian tail, central differences, an unrestricted blocklength brute
// force composed directly from the per-step error primitives, and an
// active-set enumeration solver for small quadratic programs.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "urelay/dep.hpp"
#include "urelay/fbl.hpp"
#include "urelay/link.hpp"
#include "urelay/scenario.hpp"

namespace oracle {

// Gaussian tail via the 80-bit erfc; exact to long-double rounding for
// x up to ~40 (erfcl there is ~1e-349, far above the long-double minimum).
inline long double q_ref(long double x) {
  return 0.5L * erfcl(x / sqrtl(2.0L));
}

inline double central_diff(const std::function<double(double)>& f, double x,
                           double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// Objective and UAV-error of one blocklength pair, composed from the raw
// SINR and single-step error primitives only (no shared breakdown code).
struct PairEval {
  double objective = 0.0;
  double eps_bar_uav = 0.0;
  bool energy_ok = false;
};

inline PairEval eval_pair(const urelay::LinkState& ls,
                          const urelay::PowerTriple& pw, int m2, int m3,
                          const urelay::SystemParams& params) {
  using urelay::fbl::dep;
  const double d = params.payload_bits;
  const double g1 = urelay::sinr_device_p1(ls, pw.p1, pw.p2);
  const double g2 = urelay::snr_uav(ls, pw.p2);
  const double gt = urelay::sinr_uav_s1(ls, pw.p1, pw.p2);
  const double gp = urelay::sinr_uav_failed_sic(ls, pw.p1, pw.p2);
  const double g3 = urelay::snr_device_p2(ls, pw.pu);
  const double e1 = dep(g1, m2, d);
  const double e2 = dep(g2, m2, d);
  const double e12 = dep(gt, m2, d);
  const double e2f =
      d / m2 > std::log2(1.0 + gp) ? 1.0 : dep(gp, m2, d);
  const double e3 = dep(g3, m3, d);
  PairEval out;
  out.objective = e1 * (e3 + e12);
  out.eps_bar_uav = e2 * (1.0 - e12) + e2f * e12;
  out.energy_ok =
      m2 * (pw.p1 + pw.p2) + pw.pu * m3 <= params.e_tot;
  return out;
}

struct BrutePair {
  int m2 = 0, m3 = 0;
  double objective = 0.0;
  bool found = false;
};

// Unrestricted enumeration of every pair m2 + m3 <= m_total with both >= 1,
// keeping the cap- and energy-feasible minimizer (ties: smaller m2, then m3).
inline BrutePair brute_force_blocklength(const urelay::LinkState& ls,
                                         const urelay::PowerTriple& pw,
                                         const urelay::SystemParams& params) {
  BrutePair best;
  for (int m2 = 1; m2 < params.m_total; ++m2) {
    for (int m3 = 1; m3 + m2 <= params.m_total; ++m3) {
      const PairEval e = eval_pair(ls, pw, m2, m3, params);
      if (!e.energy_ok || e.eps_bar_uav > params.eps_uav_max) continue;
      if (!best.found || e.objective < best.objective) {
        best = {m2, m3, e.objective, true};
      }
    }
  }
  return best;
}

// minimize 1/2 x'Qx + c'x subject to a_i'x <= b_i, solved by enumerating
// every candidate active set and checking primal feasibility plus dual
// nonnegativity. Returns nothing when no KKT point exists (unbounded or
// infeasible inputs are outside the tests' use).
struct Qp {
  Eigen::MatrixXd q;
  Eigen::VectorXd c;
  Eigen::MatrixXd a;  // rows are constraint normals
  Eigen::VectorXd b;
};

inline std::optional<double> active_set_qp(const Qp& qp) {
  const int n = static_cast<int>(qp.q.rows());
  const int mc = static_cast<int>(qp.a.rows());
  double best = std::numeric_limits<double>::infinity();
  bool found = false;
  for (unsigned mask = 0; mask < (1u << mc); ++mask) {
    std::vector<int> act;
    for (int i = 0; i < mc; ++i)
      if (mask & (1u << i)) act.push_back(i);
    const int k = static_cast<int>(act.size());
    if (k > n) continue;
    Eigen::MatrixXd kkt(n + k, n + k);
    kkt.setZero();
    kkt.topLeftCorner(n, n) = qp.q;
    Eigen::VectorXd rhs(n + k);
    rhs.head(n) = -qp.c;
    for (int i = 0; i < k; ++i) {
      kkt.block(0, n + i, n, 1) = qp.a.row(act[i]).transpose();
      kkt.block(n + i, 0, 1, n) = qp.a.row(act[i]);
      rhs(n + i) = qp.b(act[i]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    if (!lu.isInvertible()) continue;
    const Eigen::VectorXd sol = lu.solve(rhs);
    const Eigen::VectorXd x = sol.head(n);
    const Eigen::VectorXd lam = sol.tail(k);
    if (k > 0 && lam.minCoeff() < -1e-9) continue;
    if (mc > 0 &&
        ((qp.a * x - qp.b).maxCoeff() > 1e-9)) continue;
    const double val = 0.5 * x.dot(qp.q * x) + qp.c.dot(x);
    if (!found || val < best) {
      best = val;
      found = true;
    }
  }
  if (!found) return std::nullopt;
  return best;
}

}  // namespace oracle
