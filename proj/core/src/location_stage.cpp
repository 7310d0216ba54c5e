#include "urelay/location_stage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "urelay/fbl.hpp"
#include "urelay/inner_solver.hpp"

namespace urelay::location {
namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;
constexpr double kRatioExpCap = 150.0;

struct Atom {
  double eps;
  double deps;  // d eps / d gamma
  double log_eps;
  double f;
  double dfdg;
};

Atom make_atom(double gamma, double m, double d_bits) {
  Atom a;
  a.f = fbl::f_arg(gamma, m, d_bits);
  a.dfdg = fbl::df_dgamma(gamma, m, d_bits);
  a.log_eps = fbl::log_q_func(a.f);
  a.eps = fbl::q_func(a.f);
  a.deps = -fbl::gauss_pdf(a.f) * a.dfdg;
  return a;
}

struct Ratio {
  double r;
  double g;
};

Ratio ratio_atom(double gamma, double m, double d_bits, double log_scale) {
  Atom a = make_atom(gamma, m, d_bits);
  const double e_val = a.log_eps - log_scale;
  if (e_val >= kRatioExpCap) return {std::exp(kRatioExpCap), 0.0};
  const double e_grad = -0.5 * a.f * a.f - kHalfLog2Pi - log_scale;
  const double phi_s = e_grad <= -745.0 ? 0.0 : std::exp(e_grad);
  return {std::exp(e_val), -phi_s * a.dfdg};
}

const char* region_fail(double gamma, double m, double d_bits) {
  if (gamma <= 0.0) return "gamma >= 1";
  fbl::RegionCheck rc = fbl::convexity_region_check(gamma, m, d_bits);
  return rc.ok ? nullptr : rc.failed_condition;
}

// SINRs at given slacks; gains are beta0^2 / S.
struct SlackSinrs {
  double g2, gt, gp, g3;
};

SlackSinrs slack_sinrs(double s_br, double s_rd, const PowerTriple& pw,
                       const SystemParams& params, const LinkState& base) {
  const double bb = params.beta0_sq;
  SlackSinrs g;
  g.g2 = pw.p2 * bb / (base.noise_bs_w * s_br);
  g.gt = pw.p1 * bb / (pw.p2 * bb + base.noise_bs_w * s_br);
  g.gp = pw.p2 * bb / (pw.p1 * bb + base.noise_bs_w * s_br);
  g.g3 = pw.pu * bb / (base.noise_dev_w * s_rd);
  return g;
}

struct AnchorAtoms {
  SlackSinrs g;
  Atom a2, a12, a3, a1;
  Atom ap;  // unused while pinned at 1 in the fail branch
  bool sic_fail_branch;
};

AnchorAtoms anchor_atoms(const LocationScaState& s, const PowerTriple& pw,
                         const BlocklengthPair& m, const SystemParams& params,
                         const LinkState& base, const char** fail_component,
                         const char** fail_condition) {
  AnchorAtoms at{};
  const double d = params.payload_bits;
  at.g = slack_sinrs(s.s_br, s.s_rd, pw, params, base);
  at.sic_fail_branch = d / m.m_bcast > std::log2(1.0 + at.g.gp);

  struct Entry {
    const char* name;
    double gamma;
    double blocklen;
    bool active;
  };
  const Entry entries[] = {
      {"eps2", at.g.g2, static_cast<double>(m.m_bcast), true},
      {"eps12", at.g.gt, static_cast<double>(m.m_bcast), true},
      {"eps3", at.g.g3, static_cast<double>(m.m_relay), true},
      {"eps2_fail", at.g.gp, static_cast<double>(m.m_bcast), !at.sic_fail_branch},
  };
  for (const Entry& e : entries) {
    if (!e.active) continue;
    if (const char* cond = region_fail(e.gamma, e.blocklen, d)) {
      *fail_component = e.name;
      *fail_condition = cond;
      return at;
    }
  }
  *fail_component = nullptr;
  at.a2 = make_atom(at.g.g2, m.m_bcast, d);
  at.a12 = make_atom(at.g.gt, m.m_bcast, d);
  at.a3 = make_atom(at.g.g3, m.m_relay, d);
  at.a1 = make_atom(sinr_device_p1(base, pw.p1, pw.p2), m.m_bcast, d);
  if (!at.sic_fail_branch) at.ap = make_atom(at.g.gp, m.m_bcast, d);
  return at;
}

AnchorAtoms anchor_atoms_or_throw(const LocationScaState& s, const PowerTriple& pw,
                                  const BlocklengthPair& m,
                                  const SystemParams& params,
                                  const LinkState& base) {
  const char* comp = nullptr;
  const char* cond = nullptr;
  AnchorAtoms at = anchor_atoms(s, pw, m, params, base, &comp, &cond);
  if (comp) throw sca::RegionViolation(comp, cond);
  return at;
}

// Normalized inner-solver layout.
enum : int { kQx = 0, kQy, kSb, kSr, kDim };

struct StageScales {
  double x0, wx, y0, wy;  // box offsets/widths for q
  double sb, sr;          // slack anchors
  double cap, d;
  double m_bcast, m_relay;
};

StageScales make_scales(const LocationScaState& anchor,
                        const BlocklengthPair& m, const SystemParams& params) {
  StageScales sc{};
  sc.x0 = params.x_min;
  sc.wx = params.x_max - params.x_min;
  sc.y0 = params.y_min;
  sc.wy = params.y_max - params.y_min;
  sc.sb = anchor.s_br;
  sc.sr = anchor.s_rd;
  sc.cap = params.eps_uav_max;
  sc.d = params.payload_bits;
  sc.m_bcast = m.m_bcast;
  sc.m_relay = m.m_relay;
  return sc;
}

Eigen::VectorXd normalize_state(const LocationScaState& s, const StageScales& sc) {
  Eigen::VectorXd x(kDim);
  x[kQx] = (s.qx - sc.x0) / sc.wx;
  x[kQy] = (s.qy - sc.y0) / sc.wy;
  x[kSb] = s.s_br / sc.sb;
  x[kSr] = s.s_rd / sc.sr;
  return x;
}

LocationScaState denormalize_state(const Eigen::VectorXd& x, const StageScales& sc) {
  LocationScaState s;
  s.qx = sc.x0 + x[kQx] * sc.wx;
  s.qy = sc.y0 + x[kQy] * sc.wy;
  s.s_br = x[kSb] * sc.sb;
  s.s_rd = x[kSr] * sc.sr;
  return s;
}

// Exact constraint slacks at a position (normalized; each <= 0 if feasible).
double true_violation(double qx, double qy, const PowerTriple& pw,
                      const BlocklengthPair& m, const SystemParams& params,
                      const Geometry& geom, const LinkState& base) {
  double v = std::max({params.x_min - qx, qx - params.x_max, params.y_min - qy,
                       qy - params.y_max}) /
             std::max(params.x_max - params.x_min, params.y_max - params.y_min);
  const LinkState link = link_at(qx, qy, geom, params, base);
  const double d = params.payload_bits;
  const double e2 = fbl::dep(snr_uav(link, pw.p2), m.m_bcast, d);
  const double e12 = fbl::dep(sinr_uav_s1(link, pw.p1, pw.p2), m.m_bcast, d);
  const double gp = sinr_uav_failed_sic(link, pw.p1, pw.p2);
  const double e2f =
      d / m.m_bcast > std::log2(1.0 + gp) ? 1.0 : fbl::dep(gp, m.m_bcast, d);
  const double bar = effective_eps_uav(e2, e2f, e12);
  v = std::max(v, (bar - params.eps_uav_max) / params.eps_uav_max);
  return v;
}

}  // namespace

LocationScaState anchor_state(double qx, double qy, const Geometry& geom,
                              const SystemParams& params) {
  LocationScaState s;
  s.qx = qx;
  s.qy = qy;
  const double dzb = params.uav_height - geom.controller.z();
  const double dzd = params.uav_height - geom.device.z();
  s.s_br = (qx - geom.controller.x()) * (qx - geom.controller.x()) +
           (qy - geom.controller.y()) * (qy - geom.controller.y()) + dzb * dzb;
  s.s_rd = (qx - geom.device.x()) * (qx - geom.device.x()) +
           (qy - geom.device.y()) * (qy - geom.device.y()) + dzd * dzd;
  return s;
}

DistanceLinearization linearize_distance(double qx_t, double qy_t, double ex,
                                         double ey, double dz) {
  DistanceLinearization l;
  l.qx_t = qx_t;
  l.qy_t = qy_t;
  l.anchor_sq = (qx_t - ex) * (qx_t - ex) + (qy_t - ey) * (qy_t - ey) + dz * dz;
  l.grad_x = 2.0 * (qx_t - ex);
  l.grad_y = 2.0 * (qy_t - ey);
  return l;
}

double dgamma2_dsbr(double p2, double beta0_sq, double noise, double s_br) {
  return -p2 * beta0_sq / (noise * s_br * s_br);
}

double dgamma3_dsrd(double pu, double beta0_sq, double noise, double s_rd) {
  return -pu * beta0_sq / (noise * s_rd * s_rd);
}

double dgamma_tilde_dsbr(double p1, double p2, double beta0_sq, double noise,
                         double s_br) {
  const double den = p2 * beta0_sq + noise * s_br;
  return -p1 * beta0_sq * noise / (den * den);
}

double dgamma_prime_dsbr(double p1, double p2, double beta0_sq, double noise,
                         double s_br) {
  const double den = p1 * beta0_sq + noise * s_br;
  return -p2 * beta0_sq * noise / (den * den);
}

LocationSurrogates location_gradients(const LocationScaState& prev,
                                      const PowerTriple& pw,
                                      const BlocklengthPair& m,
                                      const SystemParams& params,
                                      const LinkState& base_link) {
  const AnchorAtoms at =
      anchor_atoms_or_throw(prev, pw, m, params, base_link);
  const Vector2 anchor{prev.s_br, prev.s_rd};
  const double bb = params.beta0_sq;
  const double nb = base_link.noise_bs_w;
  const double nd = base_link.noise_dev_w;

  LocationSurrogates out;
  out.sic_fail_branch = at.sic_fail_branch;

  out.eps2.anchor = anchor;
  out.eps2.value_anchor = at.a2.eps;
  out.eps2.gradient[0] = at.a2.deps * dgamma2_dsbr(pw.p2, bb, nb, prev.s_br);

  out.eps12.anchor = anchor;
  out.eps12.value_anchor = at.a12.eps;
  out.eps12.gradient[0] =
      at.a12.deps * dgamma_tilde_dsbr(pw.p1, pw.p2, bb, nb, prev.s_br);

  out.eps2_fail.anchor = anchor;
  if (at.sic_fail_branch) {
    out.eps2_fail.value_anchor = 1.0;
  } else {
    out.eps2_fail.value_anchor = at.ap.eps;
    out.eps2_fail.gradient[0] =
        at.ap.deps * dgamma_prime_dsbr(pw.p1, pw.p2, bb, nb, prev.s_br);
  }

  out.eps3.anchor = anchor;
  out.eps3.value_anchor = at.a3.eps;
  out.eps3.gradient[1] = at.a3.deps * dgamma3_dsrd(pw.pu, bb, nd, prev.s_rd);
  return out;
}

LinkState link_at(double qx, double qy, const Geometry& geom,
                  const SystemParams& params, const LinkState& base_link) {
  Geometry g = geom;
  g.uav = Eigen::Vector3d{qx, qy, params.uav_height};
  SystemParams sys = params;
  sys.noise_bs_w = base_link.noise_bs_w;
  sys.noise_dev_w = base_link.noise_dev_w;
  return link_state(sys, g, base_link.gain_bd_sq);
}

double log_objective(double qx, double qy, const PowerTriple& pw,
                     const BlocklengthPair& m, const SystemParams& params,
                     const Geometry& geom, const LinkState& base_link) {
  const LinkState link = link_at(qx, qy, geom, params, base_link);
  const double d = params.payload_bits;
  const double l1 =
      fbl::log_dep(sinr_device_p1(link, pw.p1, pw.p2), m.m_bcast, d);
  const double l3 = fbl::log_dep(snr_device_p2(link, pw.pu), m.m_relay, d);
  const double l12 =
      fbl::log_dep(sinr_uav_s1(link, pw.p1, pw.p2), m.m_bcast, d);
  const double lm = std::max(l3, l12);
  return l1 + lm + std::log(std::exp(l3 - lm) + std::exp(l12 - lm));
}

StageResult solve_location_stage(const LocationScaState& start,
                                 const PowerTriple& pw,
                                 const BlocklengthPair& m,
                                 const SystemParams& params,
                                 const Geometry& geom,
                                 const LinkState& base_link, double sca_tol,
                                 int sca_max_iter) {
  StageResult result;
  result.state = start;
  result.state.iteration = 0;

  {
    const double v0 =
        true_violation(start.qx, start.qy, pw, m, params, geom, base_link);
    if (v0 > 1e-7) {
      throw std::invalid_argument(
          "location stage start violates the original constraints");
    }
  }

  double cur_log =
      log_objective(start.qx, start.qy, pw, m, params, geom, base_link);

  auto record = [&](int iter, const LocationScaState& s, double log_true,
                    double surrogate, double step) {
    sca::TraceRow row;
    row.iteration = iter;
    row.objective_true = std::exp(log_true);
    row.objective_surrogate = surrogate;
    const LinkState link = link_at(s.qx, s.qy, geom, params, base_link);
    const double d = params.payload_bits;
    const double e2 = fbl::dep(snr_uav(link, pw.p2), m.m_bcast, d);
    const double e12 = fbl::dep(sinr_uav_s1(link, pw.p1, pw.p2), m.m_bcast, d);
    const double gp = sinr_uav_failed_sic(link, pw.p1, pw.p2);
    const double e2f =
        d / m.m_bcast > std::log2(1.0 + gp) ? 1.0 : fbl::dep(gp, m.m_bcast, d);
    row.eps_bar_uav = effective_eps_uav(e2, e2f, e12);
    row.max_violation = std::max(
        0.0, true_violation(s.qx, s.qy, pw, m, params, geom, base_link));
    row.step_norm = step;
    row.qx = s.qx;
    row.qy = s.qy;
    row.s_br = s.s_br;
    row.s_rd = s.s_rd;
    result.trace.push_back(row);
  };
  record(0, start, cur_log, std::exp(cur_log), 0.0);

  LocationScaState cur = start;
  const double gamma_min_p1 = fbl::region_gamma_min(m.m_bcast, params.payload_bits);
  const double gamma_min_p2 = fbl::region_gamma_min(m.m_relay, params.payload_bits);
  const double bb = params.beta0_sq;
  const double nb = base_link.noise_bs_w;
  const double nd = base_link.noise_dev_w;
  const double dzb = params.uav_height - geom.controller.z();
  const double dzd = params.uav_height - geom.device.z();

  for (int t = 1; t <= sca_max_iter; ++t) {
    const AnchorAtoms at = anchor_atoms_or_throw(cur, pw, m, params, base_link);
    const StageScales sc = make_scales(cur, m, params);

    // Log-space objective model: the constant eps1 factor and the relay-side
    // sum each rescaled by their own anchor log, so both stay O(1) here and
    // the cross term of the difference-of-squares form survives in doubles.
    const double scale1 = at.a1.log_eps;
    const double hi3 = std::max(at.a3.log_eps, at.a12.log_eps);
    const double scale3 =
        hi3 + std::log1p(std::exp(std::min(at.a3.log_eps, at.a12.log_eps) - hi3));
    auto rescale = [](const Atom& a, double scale) -> Ratio {
      const double e_grad = -0.5 * a.f * a.f - kHalfLog2Pi - scale;
      const double phi_s = e_grad <= -745.0 ? 0.0 : std::exp(e_grad);
      return {std::exp(a.log_eps - scale), -phi_s * a.dfdg};
    };
    const Ratio r1c = rescale(at.a1, scale1);
    const Ratio r3a = rescale(at.a3, scale3);
    const Ratio r12a = rescale(at.a12, scale3);
    const double r1t = r1c.r;
    const double sum3t = r3a.r + r12a.r;
    // Anchor slack-derivatives of the rescaled atoms.
    const double dgt_ds = dgamma_tilde_dsbr(pw.p1, pw.p2, bb, nb, cur.s_br);
    const double dg3_ds = dgamma3_dsrd(pw.pu, bb, nd, cur.s_rd);
    const double g12s_t = r12a.g * dgt_ds;
    const double g3s_t = r3a.g * dg3_ds;
    const double floor_val = r1t * sum3t * 1e-18;
    const double sb_t = cur.s_br;
    const double sr_t = cur.s_rd;

    // Frozen pieces of the eps_bar_uav surrogate (all slack-derivatives).
    const bool fail_branch = at.sic_fail_branch;
    const double eps2_t = at.a2.eps;
    const double g2s_t = at.a2.deps * dgamma2_dsbr(pw.p2, bb, nb, cur.s_br);
    const double eps12_t = at.a12.eps;
    const double g12raw_t = at.a12.deps * dgt_ds;
    const double eps2f_t = fail_branch ? 1.0 : at.ap.eps;
    const double gps_t =
        fail_branch ? 0.0
                    : at.ap.deps * dgamma_prime_dsbr(pw.p1, pw.p2, bb, nb, cur.s_br);
    const double gap_t = eps2f_t - eps2_t;

    // Region upper bounds on the slacks (gamma decreasing in S).
    double sb_max = pw.p2 * bb / (nb * gamma_min_p1);  // gamma2 >= gmin
    sb_max = std::min(sb_max, (pw.p1 * bb / gamma_min_p1 - pw.p2 * bb) / nb);
    if (!fail_branch) {
      sb_max = std::min(sb_max, (pw.p2 * bb / gamma_min_p1 - pw.p1 * bb) / nb);
    }
    const double sr_max = pw.pu * bb / (nd * gamma_min_p2);

    opt::SmoothProgram prog;
    prog.dim = kDim;
    prog.lower = Eigen::VectorXd::Constant(kDim, 0.0);
    prog.upper = Eigen::VectorXd::Constant(kDim, 1.0);
    prog.lower[kSb] = 0.999 * dzb * dzb / sc.sb;
    prog.upper[kSb] = sb_max * (1.0 + 1e-9) / sc.sb;
    prog.lower[kSr] = 0.999 * dzd * dzd / sc.sr;
    prog.upper[kSr] = sr_max * (1.0 + 1e-9) / sc.sr;
    bool bad_box = false;
    for (int j = 0; j < kDim; ++j) {
      if (!(prog.lower[j] < prog.upper[j])) bad_box = true;
    }
    if (bad_box) {
      result.status = sca::StageStatus::inner_infeasible;
      return result;
    }

    prog.objective = [sc, r1t, sum3t, g12s_t, g3s_t, floor_val, sb_t, sr_t,
                      scale1, scale3, pw, bb, nb, nd](const Eigen::VectorXd& x,
                                                      Eigen::VectorXd* grad) {
      const double s_br = x[kSb] * sc.sb;
      const double s_rd = x[kSr] * sc.sr;
      const double gt = pw.p1 * bb / (pw.p2 * bb + nb * s_br);
      const double g3 = pw.pu * bb / (nd * s_rd);
      const Ratio r12 = ratio_atom(gt, sc.m_bcast, sc.d, scale3);
      const Ratio r3 = ratio_atom(g3, sc.m_relay, sc.d, scale3);
      const double a = r1t + r3.r + r12.r;
      const double lin3 = 0.5 * sum3t * sum3t +
                          sum3t * (g3s_t * (s_rd - sr_t) + g12s_t * (s_br - sb_t));
      const double s = 0.5 * a * a - 0.5 * r1t * r1t - lin3;
      const double s_eff = std::max(s, floor_val);
      if (grad) {
        grad->setZero(kDim);
        if (s > floor_val) {
          const double dgt = dgamma_tilde_dsbr(pw.p1, pw.p2, bb, nb, s_br);
          const double dg3 = dgamma3_dsrd(pw.pu, bb, nd, s_rd);
          (*grad)[kSb] = (a * r12.g * dgt - sum3t * g12s_t) * sc.sb / s_eff;
          (*grad)[kSr] = (a * r3.g * dg3 - sum3t * g3s_t) * sc.sr / s_eff;
        }
      }
      return scale1 + scale3 + std::log(s_eff);
    };

    const DistanceLinearization lin_b =
        linearize_distance(cur.qx, cur.qy, geom.controller.x(),
                           geom.controller.y(), dzb);
    const DistanceLinearization lin_d = linearize_distance(
        cur.qx, cur.qy, geom.device.x(), geom.device.y(), dzd);

    prog.constraints.push_back(
        [sc, lin_b](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
          const double qx = sc.x0 + x[kQx] * sc.wx;
          const double qy = sc.y0 + x[kQy] * sc.wy;
          if (grad) {
            grad->setZero(kDim);
            (*grad)[kQx] = lin_b.grad_x * sc.wx / sc.sb;
            (*grad)[kQy] = lin_b.grad_y * sc.wy / sc.sb;
            (*grad)[kSb] = -1.0;
          }
          return (lin_b.value(qx, qy) - x[kSb] * sc.sb) / sc.sb;
        });
    prog.constraints.push_back(
        [sc, lin_d](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
          const double qx = sc.x0 + x[kQx] * sc.wx;
          const double qy = sc.y0 + x[kQy] * sc.wy;
          if (grad) {
            grad->setZero(kDim);
            (*grad)[kQx] = lin_d.grad_x * sc.wx / sc.sr;
            (*grad)[kQy] = lin_d.grad_y * sc.wy / sc.sr;
            (*grad)[kSr] = -1.0;
          }
          return (lin_d.value(qx, qy) - x[kSr] * sc.sr) / sc.sr;
        });
    // Residual-limit surrogate over s_br, grouped for exact cancellation of
    // the O(1) terms (same shape as the power stage).
    prog.constraints.push_back([sc, fail_branch, eps2_t, g2s_t, eps12_t,
                                g12raw_t, eps2f_t, gps_t, gap_t, sb_t, pw, bb,
                                nb](const Eigen::VectorXd& x,
                                    Eigen::VectorXd* grad) {
      const double s_br = x[kSb] * sc.sb;
      const double g2 = pw.p2 * bb / (nb * s_br);
      const double gt = pw.p1 * bb / (pw.p2 * bb + nb * s_br);
      const Atom a2 = make_atom(g2, sc.m_bcast, sc.d);
      const Atom a12 = make_atom(gt, sc.m_bcast, sc.d);
      double dprime = 0.0, dprime_ds = 0.0;
      if (!fail_branch) {
        const double gp = pw.p2 * bb / (pw.p1 * bb + nb * s_br);
        const Atom ap = make_atom(gp, sc.m_bcast, sc.d);
        dprime = ap.eps - eps2f_t;
        dprime_ds = ap.deps * dgamma_prime_dsbr(pw.p1, pw.p2, bb, nb, s_br);
      }
      const double ds = s_br - sb_t;
      const double w = a12.eps + dprime - g2s_t * ds;
      const double val = a2.eps + gap_t * (a12.eps + dprime - gps_t * ds) +
                         0.5 * w * w - 0.5 * eps12_t * eps12_t -
                         eps12_t * g12raw_t * ds - sc.cap;
      if (grad) {
        grad->setZero(kDim);
        const double dgt = dgamma_tilde_dsbr(pw.p1, pw.p2, bb, nb, s_br);
        const double dg2 = dgamma2_dsbr(pw.p2, bb, nb, s_br);
        const double de12_ds = a12.deps * dgt;
        const double de2_ds = a2.deps * dg2;
        (*grad)[kSb] = (de2_ds + gap_t * (de12_ds + dprime_ds - gps_t) +
                        w * (de12_ds + dprime_ds - g2s_t) -
                        eps12_t * g12raw_t) *
                       sc.sb / sc.cap;
      }
      return val / sc.cap;
    });

    opt::SolveOptions inner_opts;
    inner_opts.tol_kkt = 1e-6;
    inner_opts.tol_feas = 1e-9;
    inner_opts.max_iter = 400;
    inner_opts.barrier_t0 = 1e4;
    inner_opts.barrier_factor = 20.0;
    const Eigen::VectorXd x0 = normalize_state(cur, sc);
    opt::SolveReport rep = opt::solve(prog, x0, inner_opts);
    result.inner_iterations += rep.iterations;

    if (rep.status == opt::SolveStatus::numerical_failure) {
      result.status = sca::StageStatus::numerical_failure;
      return result;
    }
    if (rep.status == opt::SolveStatus::infeasible) {
      result.status = sca::StageStatus::inner_infeasible;
      return result;
    }

    // Candidate acceptance at exact distances: descent, feasibility, and
    // region membership after re-anchoring. Extended multiples of the inner
    // step are tried first (the relaxation penalizes distance from the
    // anchor), then halvings toward the previous iterate (the position
    // moves, the slacks re-tighten).
    const Eigen::VectorXd dx = rep.point - x0;
    bool accepted = false;
    LocationScaState next;
    double next_log = cur_log;
    for (double k : {8.0, 4.0, 2.0, 1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125,
                     0.015625, 0.0078125, 0.00390625, 0.001953125}) {
      Eigen::VectorXd xc = x0 + k * dx;
      if (k > 1.0) xc = xc.cwiseMax(prog.lower).cwiseMin(prog.upper);
      const LocationScaState cand_raw = denormalize_state(xc, sc);
      LocationScaState cand =
          anchor_state(cand_raw.qx, cand_raw.qy, geom, params);
      const double cand_log =
          log_objective(cand.qx, cand.qy, pw, m, params, geom, base_link);
      const char* comp = nullptr;
      const char* cond = nullptr;
      anchor_atoms(cand, pw, m, params, base_link, &comp, &cond);
      const bool ok_region = comp == nullptr;
      const bool ok_feas =
          true_violation(cand.qx, cand.qy, pw, m, params, geom, base_link) <=
          1e-7;
      if (cand_log <= cur_log && ok_region && ok_feas) {
        accepted = true;
        next = cand;
        next_log = cand_log;
        break;
      }
    }
    if (!accepted) {
      result.status = sca::StageStatus::converged;
      return result;
    }

    const double step = (normalize_state(next, sc) - x0).norm();
    double surrogate = 0.0;
    {
      const Eigen::VectorXd xn = normalize_state(next, sc);
      surrogate = std::exp(prog.objective(xn, nullptr));
    }
    cur = next;
    cur.iteration = t;
    result.state = cur;
    record(t, cur, next_log, surrogate, step);

    const double drop = cur_log - next_log;
    const double lin_drop = std::exp(cur_log) - std::exp(next_log);
    cur_log = next_log;
    if (drop <= sca_tol || lin_drop <= sca::kDropFloor) {
      result.status = sca::StageStatus::converged;
      return result;
    }
  }
  result.status = sca::StageStatus::iteration_limit;
  return result;
}

}  // namespace urelay::location
