#include "urelay/power_stage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "urelay/fbl.hpp"

namespace urelay::power {
namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;
constexpr double kRatioExpCap = 150.0;  // caps anchor-relative ratios at ~1e65

struct Atom {
  double eps;      // Q(f)
  double deps;     // d eps / d gamma
  double log_eps;  // log Q(f)
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

// Atom value and gamma-derivative rescaled by exp(-log_scale). Atoms far
// above the scale are frozen (flat) so the rescaled values stay finite.
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

struct AnchorAtoms {
  double gamma2, gamma3;
  Atom a2, a12, a1, a3;
  Atom ap;  // failed-SIC atom, unused while pinned at 1 in the fail branch
  bool sic_fail_branch;
};

AnchorAtoms anchor_atoms(const PowerScaState& s, const LinkState& link,
                         const BlocklengthPair& m, const SystemParams& params,
                         const char** fail_component, const char** fail_condition) {
  AnchorAtoms at{};
  const double d = params.payload_bits;
  at.gamma2 = snr_uav(link, s.p2);
  at.gamma3 = snr_device_p2(link, s.pu);
  at.sic_fail_branch = d / m.m_bcast > std::log2(1.0 + s.mu_prime);

  struct Entry {
    const char* name;
    double gamma;
    double blocklen;
    bool active;
  };
  const Entry entries[] = {
      {"eps2", at.gamma2, static_cast<double>(m.m_bcast), true},
      {"eps12", s.mu_tilde, static_cast<double>(m.m_bcast), true},
      {"eps1", s.mu_one, static_cast<double>(m.m_bcast), true},
      {"eps3", at.gamma3, static_cast<double>(m.m_relay), true},
      {"eps2_fail", s.mu_prime, static_cast<double>(m.m_bcast), !at.sic_fail_branch},
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
  at.a2 = make_atom(at.gamma2, m.m_bcast, d);
  at.a12 = make_atom(s.mu_tilde, m.m_bcast, d);
  at.a1 = make_atom(s.mu_one, m.m_bcast, d);
  at.a3 = make_atom(at.gamma3, m.m_relay, d);
  if (!at.sic_fail_branch) at.ap = make_atom(s.mu_prime, m.m_bcast, d);
  return at;
}

AnchorAtoms anchor_atoms_or_throw(const PowerScaState& s, const LinkState& link,
                                  const BlocklengthPair& m, const SystemParams& params) {
  const char* comp = nullptr;
  const char* cond = nullptr;
  AnchorAtoms at = anchor_atoms(s, link, m, params, &comp, &cond);
  if (comp) throw sca::RegionViolation(comp, cond);
  return at;
}

Vector6 state_vec(const PowerScaState& s) {
  Vector6 v;
  v << s.p1, s.p2, s.mu_tilde, s.mu_prime, s.mu_one, s.pu;
  return v;
}

// Normalized inner-solver layout.
enum : int { kX1 = 0, kX2, kNMuT, kNMuP, kNMu1, kXu, kNZp, kNZt, kNZd, kDim };

struct StageScales {
  double pm, etot, cap, d;
  double gb, gd, gr;     // per-watt SNR gains at the respective receivers
  double gbf, gdf, grf;  // full-power SNRs: g * p_max
  double mt, mp, m1;     // mu anchors
  double zp, zt, zd;     // zeta/noise anchors
  double m_bcast, m_relay;
};

StageScales make_scales(const PowerScaState& anchor, const LinkState& link,
                        const BlocklengthPair& m, const SystemParams& params) {
  StageScales sc{};
  sc.pm = params.p_max_w;
  sc.etot = params.e_tot;
  sc.cap = params.eps_uav_max;
  sc.d = params.payload_bits;
  sc.gb = link.gain_br_sq / link.noise_bs_w;
  sc.gd = link.gain_bd_sq / link.noise_bs_w;
  sc.gr = link.gain_rd_sq / link.noise_dev_w;
  sc.gbf = sc.gb * sc.pm;
  sc.gdf = sc.gd * sc.pm;
  sc.grf = sc.gr * sc.pm;
  sc.mt = anchor.mu_tilde;
  sc.mp = anchor.mu_prime;
  sc.m1 = anchor.mu_one;
  sc.zp = anchor.zeta_prime / link.noise_bs_w;
  sc.zt = anchor.zeta_tilde / link.noise_bs_w;
  sc.zd = anchor.zeta_dprime / link.noise_bs_w;
  sc.m_bcast = m.m_bcast;
  sc.m_relay = m.m_relay;
  return sc;
}

Eigen::VectorXd normalize_state(const PowerScaState& s, const StageScales& sc,
                                double noise_bs) {
  Eigen::VectorXd x(kDim);
  x[kX1] = s.p1 / sc.pm;
  x[kX2] = s.p2 / sc.pm;
  x[kNMuT] = s.mu_tilde / sc.mt;
  x[kNMuP] = s.mu_prime / sc.mp;
  x[kNMu1] = s.mu_one / sc.m1;
  x[kXu] = s.pu / sc.pm;
  x[kNZp] = s.zeta_prime / noise_bs / sc.zp;
  x[kNZt] = s.zeta_tilde / noise_bs / sc.zt;
  x[kNZd] = s.zeta_dprime / noise_bs / sc.zd;
  return x;
}

PowerScaState denormalize_state(const Eigen::VectorXd& x, const StageScales& sc,
                                double noise_bs) {
  PowerScaState s;
  s.p1 = x[kX1] * sc.pm;
  s.p2 = x[kX2] * sc.pm;
  s.mu_tilde = x[kNMuT] * sc.mt;
  s.mu_prime = x[kNMuP] * sc.mp;
  s.mu_one = x[kNMu1] * sc.m1;
  s.pu = x[kXu] * sc.pm;
  s.zeta_prime = x[kNZp] * sc.zp * noise_bs;
  s.zeta_tilde = x[kNZt] * sc.zt * noise_bs;
  s.zeta_dprime = x[kNZd] * sc.zd * noise_bs;
  return s;
}

// Exact constraint slacks of the original problem at a state whose mu/zeta
// are tight (normalized units: each ≤ 0 when feasible).
double true_violation(const PowerScaState& s, const LinkState& link,
                      const BlocklengthPair& m, const SystemParams& params) {
  double v = (s.p1 + s.p2 - params.p_max_w) / params.p_max_w;
  v = std::max(v, energy_constraint(s, m, params) / params.e_tot);
  const double d = params.payload_bits;
  const double e2 = fbl::dep(snr_uav(link, s.p2), m.m_bcast, d);
  const double e12 = fbl::dep(sinr_uav_s1(link, s.p1, s.p2), m.m_bcast, d);
  const double gp = sinr_uav_failed_sic(link, s.p1, s.p2);
  const double e2f = d / m.m_bcast > std::log2(1.0 + gp)
                         ? 1.0
                         : fbl::dep(gp, m.m_bcast, d);
  const double bar = effective_eps_uav(e2, e2f, e12);
  v = std::max(v, (bar - params.eps_uav_max) / params.eps_uav_max);
  return v;
}

// Product surrogate eps1*(eps3+eps12) in the difference-of-squares form, each
// factor rescaled by its own anchor log so both stay O(1) at the anchor (a
// shared scale would cancel the cross term away whenever the factors differ
// by more than ~8 orders of magnitude).
struct ObjectiveModel {
  double scale1;              // log eps1 at the anchor
  double scale3;              // log(eps3 + eps12) at the anchor
  double r1t, r3t, r12t;      // anchor ratios under their factor scales
  double g1t, g3t, g12t;      // anchor gamma-derivatives, rescaled per factor
  double sum3t;               // r3t + r12t
  double mu1_t, mut_t, g3_t;  // anchor mu_one, mu_tilde, gamma3
  double floor_val;
};

ObjectiveModel objective_model(const PowerScaState& anchor, const AnchorAtoms& at) {
  ObjectiveModel om{};
  om.scale1 = at.a1.log_eps;
  const double hi = std::max(at.a3.log_eps, at.a12.log_eps);
  om.scale3 = hi + std::log1p(std::exp(std::min(at.a3.log_eps, at.a12.log_eps) - hi));
  auto rescale = [](const Atom& a, double scale) -> Ratio {
    const double e_grad = -0.5 * a.f * a.f - kHalfLog2Pi - scale;
    const double phi_s = e_grad <= -745.0 ? 0.0 : std::exp(e_grad);
    return {std::exp(a.log_eps - scale), -phi_s * a.dfdg};
  };
  const Ratio r1 = rescale(at.a1, om.scale1);
  const Ratio r3 = rescale(at.a3, om.scale3);
  const Ratio r12 = rescale(at.a12, om.scale3);
  om.r1t = r1.r;
  om.r3t = r3.r;
  om.r12t = r12.r;
  om.g1t = r1.g;
  om.g3t = r3.g;
  om.g12t = r12.g;
  om.sum3t = om.r3t + om.r12t;
  om.mu1_t = anchor.mu_one;
  om.mut_t = anchor.mu_tilde;
  om.g3_t = at.gamma3;
  om.floor_val = om.r1t * om.sum3t * 1e-18;
  return om;
}

}  // namespace

PowerScaState anchor_state(const PowerTriple& pw, const LinkState& link) {
  PowerScaState s;
  s.p1 = pw.p1;
  s.p2 = pw.p2;
  s.pu = pw.pu;
  s.mu_tilde = sinr_uav_s1(link, pw.p1, pw.p2);
  s.mu_prime = sinr_uav_failed_sic(link, pw.p1, pw.p2);
  s.mu_one = sinr_device_p1(link, pw.p1, pw.p2);
  s.zeta_prime = pw.p1 * link.gain_br_sq + link.noise_bs_w;
  s.zeta_tilde = pw.p2 * link.gain_br_sq + link.noise_bs_w;
  s.zeta_dprime = pw.p2 * link.gain_bd_sq + link.noise_bs_w;
  return s;
}

PowerTriple powers_of(const PowerScaState& s) { return {s.p1, s.p2, s.pu}; }

double energy_constraint(const PowerScaState& s, const BlocklengthPair& m,
                         const SystemParams& params) {
  return m.m_bcast * (s.p1 + s.p2) + s.pu * m.m_relay - params.e_tot;
}

double ProductRelaxation::upper_bound(double mu, double zeta) const {
  const double sum = mu + zeta;
  return 0.5 * sum * sum - 0.5 * (mu_anchor * mu_anchor + zeta_anchor * zeta_anchor) -
         zeta_anchor * (zeta - zeta_anchor) - mu_anchor * (mu - mu_anchor);
}

double ProductRelaxation::d_mu(double mu, double zeta) const {
  return (mu + zeta) - mu_anchor;
}

double ProductRelaxation::d_zeta(double mu, double zeta) const {
  return (mu + zeta) - zeta_anchor;
}

BilinearConstraints bilinear_relaxations(const PowerScaState& prev) {
  BilinearConstraints b;
  b.sic_keep = {prev.mu_prime, prev.zeta_prime};
  b.sic_decode = {prev.mu_tilde, prev.zeta_tilde};
  b.direct = {prev.mu_one, prev.zeta_dprime};
  return b;
}

PowerSurrogates taylor_surrogates(const PowerScaState& prev, const LinkState& link,
                                  const BlocklengthPair& m,
                                  const SystemParams& params) {
  const AnchorAtoms at = anchor_atoms_or_throw(prev, link, m, params);
  const Vector6 anchor = state_vec(prev);
  PowerSurrogates out;
  out.sic_fail_branch = at.sic_fail_branch;

  const double dg2_dp2 = link.gain_br_sq / link.noise_bs_w;
  const double dg3_dpu = link.gain_rd_sq / link.noise_dev_w;
  const double deps2_dp2 = at.a2.deps * dg2_dp2;
  const double eps2f = at.sic_fail_branch ? 1.0 : at.ap.eps;
  const double deps2f = at.sic_fail_branch ? 0.0 : at.ap.deps;
  const double gap = eps2f - at.a2.eps;
  const double relay_sum = at.a3.eps + at.a12.eps;

  out.eps2.anchor = anchor;
  out.eps2.value_anchor = at.a2.eps;
  out.eps2.gradient[kP2] = deps2_dp2;

  out.eps12_sq.anchor = anchor;
  out.eps12_sq.value_anchor = at.a12.eps * at.a12.eps;
  out.eps12_sq.gradient[kMuTilde] = 2.0 * at.a12.eps * at.a12.deps;

  out.sic_gap_sq.anchor = anchor;
  out.sic_gap_sq.value_anchor = gap * gap;
  out.sic_gap_sq.gradient[kMuPrime] = 2.0 * gap * deps2f;
  out.sic_gap_sq.gradient[kP2] = -2.0 * gap * deps2_dp2;

  out.relay_sum_sq.anchor = anchor;
  out.relay_sum_sq.value_anchor = relay_sum * relay_sum;
  out.relay_sum_sq.gradient[kPu] = 2.0 * relay_sum * at.a3.deps * dg3_dpu;
  out.relay_sum_sq.gradient[kMuTilde] = 2.0 * relay_sum * at.a12.deps;

  out.eps1_sq.anchor = anchor;
  out.eps1_sq.value_anchor = at.a1.eps * at.a1.eps;
  out.eps1_sq.gradient[kMuOne] = 2.0 * at.a1.eps * at.a1.deps;
  return out;
}

double true_eps2(const Vector6& v, const LinkState& link, const BlocklengthPair& m,
                 const SystemParams& params) {
  return fbl::dep(snr_uav(link, v[kP2]), m.m_bcast, params.payload_bits);
}

double true_eps12_sq(const Vector6& v, const BlocklengthPair& m,
                     const SystemParams& params) {
  const double e = fbl::dep(v[kMuTilde], m.m_bcast, params.payload_bits);
  return e * e;
}

double true_sic_gap_sq(const Vector6& v, const LinkState& link,
                       const BlocklengthPair& m, const SystemParams& params,
                       bool sic_fail_branch) {
  const double e2f =
      sic_fail_branch ? 1.0 : fbl::dep(v[kMuPrime], m.m_bcast, params.payload_bits);
  const double gap = e2f - true_eps2(v, link, m, params);
  return gap * gap;
}

double true_relay_sum_sq(const Vector6& v, const LinkState& link,
                         const BlocklengthPair& m, const SystemParams& params) {
  const double e3 =
      fbl::dep(snr_device_p2(link, v[kPu]), m.m_relay, params.payload_bits);
  const double e12 = fbl::dep(v[kMuTilde], m.m_bcast, params.payload_bits);
  return (e3 + e12) * (e3 + e12);
}

double true_eps1_sq(const Vector6& v, const BlocklengthPair& m,
                    const SystemParams& params) {
  const double e = fbl::dep(v[kMuOne], m.m_bcast, params.payload_bits);
  return e * e;
}

double log_objective(const PowerTriple& pw, const LinkState& link,
                     const BlocklengthPair& m, const SystemParams& params) {
  const double d = params.payload_bits;
  const double l1 =
      fbl::log_dep(sinr_device_p1(link, pw.p1, pw.p2), m.m_bcast, d);
  const double l3 = fbl::log_dep(snr_device_p2(link, pw.pu), m.m_relay, d);
  const double l12 = fbl::log_dep(sinr_uav_s1(link, pw.p1, pw.p2), m.m_bcast, d);
  const double lm = std::max(l3, l12);
  return l1 + lm + std::log(std::exp(l3 - lm) + std::exp(l12 - lm));
}

const char* region_scan(const PowerTriple& pw, const LinkState& link,
                        const BlocklengthPair& m, const SystemParams& params,
                        const char** condition) {
  const char* comp = nullptr;
  const char* cond = nullptr;
  anchor_atoms(anchor_state(pw, link), link, m, params, &comp, &cond);
  if (condition) *condition = cond;
  return comp;
}

StageResult solve_power_stage(const PowerScaState& start, const LinkState& link,
                              const BlocklengthPair& m, const SystemParams& params,
                              double sca_tol, int sca_max_iter, bool fix_pu) {
  if (!(start.p1 > 0.0 && start.p2 > 0.0 && start.pu > 0.0)) {
    throw std::invalid_argument("power stage requires strictly positive start powers");
  }
  StageResult result;
  result.state = start;
  result.state.iteration = 0;

  {
    const double v0 = true_violation(start, link, m, params);
    if (v0 > 1e-7) {
      throw std::invalid_argument("power stage start violates the original constraints");
    }
  }

  const double noise_bs = link.noise_bs_w;
  double cur_log = log_objective(powers_of(start), link, m, params);

  auto record = [&](int iter, const PowerScaState& s, double log_true,
                    double surrogate, double step) {
    sca::TraceRow row;
    row.iteration = iter;
    row.objective_true = std::exp(log_true);
    row.objective_surrogate = surrogate;
    const double d = params.payload_bits;
    const double e2 = fbl::dep(snr_uav(link, s.p2), m.m_bcast, d);
    const double e12 = fbl::dep(sinr_uav_s1(link, s.p1, s.p2), m.m_bcast, d);
    const double gp = sinr_uav_failed_sic(link, s.p1, s.p2);
    const double e2f =
        d / m.m_bcast > std::log2(1.0 + gp) ? 1.0 : fbl::dep(gp, m.m_bcast, d);
    row.eps_bar_uav = effective_eps_uav(e2, e2f, e12);
    row.max_violation = std::max(0.0, true_violation(s, link, m, params));
    row.step_norm = step;
    result.trace.push_back(row);
  };
  record(0, start, cur_log, std::exp(cur_log), 0.0);

  PowerScaState cur = start;
  const double gamma_min_p1 = fbl::region_gamma_min(m.m_bcast, params.payload_bits);
  const double gamma_min_p2 = fbl::region_gamma_min(m.m_relay, params.payload_bits);

  for (int t = 1; t <= sca_max_iter; ++t) {
    const AnchorAtoms at = anchor_atoms_or_throw(cur, link, m, params);
    const StageScales sc = make_scales(cur, link, m, params);
    const ObjectiveModel om = objective_model(cur, at);
    // Bilinear relaxations in noise-normalized units (zeta/sigma^2).
    const ProductRelaxation rx_p = {cur.mu_prime, sc.zp};
    const ProductRelaxation rx_t = {cur.mu_tilde, sc.zt};
    const ProductRelaxation rx_1 = {cur.mu_one, sc.zd};

    // Frozen pieces of the eps_bar_uav surrogate.
    const bool fail_branch = at.sic_fail_branch;
    const double eps2_t = at.a2.eps;
    const double g2_t = at.a2.deps * sc.gb;  // d eps2 / d p2 (per watt)
    const double eps12_t = at.a12.eps;
    const double g12_t = at.a12.deps;
    const double eps2f_t = fail_branch ? 1.0 : at.ap.eps;
    const double gp_t = fail_branch ? 0.0 : at.ap.deps;
    const double gap_t = eps2f_t - eps2_t;

    opt::SmoothProgram prog;
    prog.dim = kDim;
    prog.lower = Eigen::VectorXd::Constant(kDim, 0.0);
    prog.upper = Eigen::VectorXd::Constant(kDim, 1.0);
    prog.lower[kX1] = 0.0;
    prog.upper[kX1] = 1.0;
    prog.lower[kX2] = gamma_min_p1 / sc.gbf;
    prog.upper[kX2] = 1.0;
    prog.lower[kNMuT] = gamma_min_p1 / sc.mt;
    prog.upper[kNMuT] = 1.01 * sc.gbf / sc.mt;
    prog.lower[kNMuP] = fail_branch ? 1e-9 : gamma_min_p1 / sc.mp;
    prog.upper[kNMuP] = 1.01 * sc.gbf / sc.mp;
    prog.lower[kNMu1] = gamma_min_p1 / sc.m1;
    prog.upper[kNMu1] = 1.01 * sc.gdf / sc.m1;
    prog.lower[kXu] = gamma_min_p2 / sc.grf;
    prog.upper[kXu] = params.e_tot / (sc.m_relay * sc.pm);
    prog.lower[kNZp] = 0.5 / sc.zp;
    prog.upper[kNZp] = (sc.gbf + 2.0) / sc.zp;
    prog.lower[kNZt] = 0.5 / sc.zt;
    prog.upper[kNZt] = (sc.gbf + 2.0) / sc.zt;
    prog.lower[kNZd] = 0.5 / sc.zd;
    prog.upper[kNZd] = (sc.gdf + 2.0) / sc.zd;
    if (fix_pu) {
      const double xu0 = cur.pu / sc.pm;
      prog.lower[kXu] = xu0 * (1.0 - 1e-9);
      prog.upper[kXu] = xu0 * (1.0 + 1e-9);
    }
    bool bad_box = false;
    for (int j = 0; j < kDim; ++j) {
      if (!(prog.lower[j] < prog.upper[j])) bad_box = true;
    }
    if (bad_box) {
      result.status = sca::StageStatus::inner_infeasible;
      return result;
    }
    // Powers and SINR surrogates live decades below their box scale; the
    // decode-error cap makes the merit double-exponentially steep in them.
    prog.log_coords = {kX1, kX2, kNMuT, kNMuP, kNMu1, kXu, kNZp, kNZt, kNZd};

    prog.objective = [sc, om](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
      const double mu1 = x[kNMu1] * sc.m1;
      const double mut = x[kNMuT] * sc.mt;
      const double g3 = x[kXu] * sc.grf;
      const Ratio r1 = ratio_atom(mu1, sc.m_bcast, sc.d, om.scale1);
      const Ratio r12 = ratio_atom(mut, sc.m_bcast, sc.d, om.scale3);
      const Ratio r3 = ratio_atom(g3, sc.m_relay, sc.d, om.scale3);
      const double a = r1.r + r3.r + r12.r;
      const double lin1 = 0.5 * om.r1t * om.r1t + om.r1t * om.g1t * (mu1 - om.mu1_t);
      const double lin3 = 0.5 * om.sum3t * om.sum3t +
                          om.sum3t * (om.g3t * (g3 - om.g3_t) +
                                      om.g12t * (mut - om.mut_t));
      const double s = 0.5 * a * a - lin1 - lin3;
      const double s_eff = std::max(s, om.floor_val);
      if (grad) {
        grad->setZero(kDim);
        if (s > om.floor_val) {
          (*grad)[kNMu1] = (a * r1.g - om.r1t * om.g1t) * sc.m1 / s_eff;
          (*grad)[kNMuT] = (a * r12.g - om.sum3t * om.g12t) * sc.mt / s_eff;
          (*grad)[kXu] = (a * r3.g - om.sum3t * om.g3t) * sc.grf / s_eff;
        }
      }
      return om.scale1 + om.scale3 + std::log(s_eff);
    };

    auto linear = [&](auto fn) { prog.constraints.push_back(fn); };

    linear([](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
      if (grad) {
        grad->setZero(kDim);
        (*grad)[kX1] = 1.0;
        (*grad)[kX2] = 1.0;
      }
      return x[kX1] + x[kX2] - 1.0;
    });
    linear([sc](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
      const double c1 = sc.m_bcast * sc.pm / sc.etot;
      const double c2 = sc.m_relay * sc.pm / sc.etot;
      if (grad) {
        grad->setZero(kDim);
        (*grad)[kX1] = c1;
        (*grad)[kX2] = c1;
        (*grad)[kXu] = c2;
      }
      return c1 * (x[kX1] + x[kX2]) + c2 * x[kXu] - 1.0;
    });
    linear([sc](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
      if (grad) {
        grad->setZero(kDim);
        (*grad)[kX1] = sc.gbf / sc.zp;
        (*grad)[kNZp] = -1.0;
      }
      return (x[kX1] * sc.gbf + 1.0) / sc.zp - x[kNZp];
    });
    linear([sc](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
      if (grad) {
        grad->setZero(kDim);
        (*grad)[kX2] = sc.gbf / sc.zt;
        (*grad)[kNZt] = -1.0;
      }
      return (x[kX2] * sc.gbf + 1.0) / sc.zt - x[kNZt];
    });
    linear([sc](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
      if (grad) {
        grad->setZero(kDim);
        (*grad)[kX2] = sc.gdf / sc.zd;
        (*grad)[kNZd] = -1.0;
      }
      return (x[kX2] * sc.gdf + 1.0) / sc.zd - x[kNZd];
    });
    linear([sc, rx_p](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
      const double mu = x[kNMuP] * sc.mp;
      const double zh = x[kNZp] * sc.zp;
      const double s = sc.mp * sc.zp;
      if (grad) {
        grad->setZero(kDim);
        (*grad)[kNMuP] = rx_p.d_mu(mu, zh) * sc.mp / s;
        (*grad)[kNZp] = rx_p.d_zeta(mu, zh) * sc.zp / s;
        (*grad)[kX2] = -sc.gbf / s;
      }
      return (rx_p.upper_bound(mu, zh) - x[kX2] * sc.gbf) / s;
    });
    linear([sc, rx_t](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
      const double mu = x[kNMuT] * sc.mt;
      const double zh = x[kNZt] * sc.zt;
      const double s = sc.mt * sc.zt;
      if (grad) {
        grad->setZero(kDim);
        (*grad)[kNMuT] = rx_t.d_mu(mu, zh) * sc.mt / s;
        (*grad)[kNZt] = rx_t.d_zeta(mu, zh) * sc.zt / s;
        (*grad)[kX1] = -sc.gbf / s;
      }
      return (rx_t.upper_bound(mu, zh) - x[kX1] * sc.gbf) / s;
    });
    linear([sc, rx_1](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
      const double mu = x[kNMu1] * sc.m1;
      const double zh = x[kNZd] * sc.zd;
      const double s = sc.m1 * sc.zd;
      if (grad) {
        grad->setZero(kDim);
        (*grad)[kNMu1] = rx_1.d_mu(mu, zh) * sc.m1 / s;
        (*grad)[kNZd] = rx_1.d_zeta(mu, zh) * sc.zd / s;
        (*grad)[kX1] = -sc.gdf / s;
      }
      return (rx_1.upper_bound(mu, zh) - x[kX1] * sc.gdf) / s;
    });
    // Residual-limit surrogate: eps2 + ehh_t*(eps12 + dprime - gp_t*dmu_p)
    //   + w^2/2 - eps12_t^2/2 - eps12_t*g12_t*dmu_t <= cap, with
    // w = eps12 + dprime - g2_t*dp2. Algebraically identical to the
    // spec-form difference of squares, grouped so the O(1) terms cancel
    // exactly instead of in floating point.
    {
      const PowerScaState anchor_copy = cur;
      linear([sc, anchor_copy, fail_branch, eps2_t, g2_t, eps12_t, g12_t, eps2f_t,
              gp_t, gap_t](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
        const double p2 = x[kX2] * sc.pm;
        const double mut = x[kNMuT] * sc.mt;
        const double mup = x[kNMuP] * sc.mp;
        const Atom a2 = make_atom(p2 * sc.gb, sc.m_bcast, sc.d);
        const Atom a12 = make_atom(mut, sc.m_bcast, sc.d);
        double dprime = 0.0, g_mup = 0.0;
        if (!fail_branch) {
          const Atom ap = make_atom(mup, sc.m_bcast, sc.d);
          dprime = ap.eps - eps2f_t;
          g_mup = ap.deps;
        }
        const double dp2 = p2 - anchor_copy.p2;
        const double dmut = mut - anchor_copy.mu_tilde;
        const double dmup = mup - anchor_copy.mu_prime;
        const double w = a12.eps + dprime - g2_t * dp2;
        const double val = a2.eps + gap_t * (a12.eps + dprime - gp_t * dmup) +
                           0.5 * w * w - 0.5 * eps12_t * eps12_t -
                           eps12_t * g12_t * dmut - sc.cap;
        if (grad) {
          grad->setZero(kDim);
          const double de2_dp2 = a2.deps * sc.gb;
          (*grad)[kX2] = (de2_dp2 - w * g2_t) * sc.pm / sc.cap;
          (*grad)[kNMuT] =
              (gap_t * a12.deps + w * a12.deps - eps12_t * g12_t) * sc.mt / sc.cap;
          if (!fail_branch) {
            (*grad)[kNMuP] = (gap_t * (g_mup - gp_t) + w * g_mup) * sc.mp / sc.cap;
          }
        }
        return val / sc.cap;
      });
    }

    opt::SolveOptions inner_opts;
    inner_opts.tol_kkt = 1e-6;
    inner_opts.tol_feas = 1e-9;
    inner_opts.max_iter = 400;
    inner_opts.barrier_t0 = 1e4;
    inner_opts.barrier_factor = 20.0;
    const Eigen::VectorXd x0 = normalize_state(cur, sc, noise_bs);
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

    // Candidate acceptance: exact-objective descent, exact feasibility, and
    // convexity-region membership at the re-anchored SINRs. The inner step is
    // conservative (the product relaxation penalizes distance from the
    // anchor), so extended multiples are tried first, then halvings toward
    // the previous iterate.
    const Eigen::VectorXd dx = rep.point - x0;
    bool accepted = false;
    PowerScaState next;
    double next_log = cur_log;
    for (double k : {8.0, 4.0, 2.0, 1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125,
                     0.015625, 0.0078125, 0.00390625, 0.001953125}) {
      Eigen::VectorXd xc = x0 + k * dx;
      if (k > 1.0) xc = xc.cwiseMax(prog.lower).cwiseMin(prog.upper);
      const PowerScaState cand_raw = denormalize_state(xc, sc, noise_bs);
      PowerScaState cand = anchor_state(powers_of(cand_raw), link);
      const double cand_log = log_objective(powers_of(cand), link, m, params);
      const char* comp = nullptr;
      const char* cond = nullptr;
      anchor_atoms(cand, link, m, params, &comp, &cond);
      const bool ok_region = comp == nullptr;
      const bool ok_feas = true_violation(cand, link, m, params) <= 1e-7;
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

    const double step = (normalize_state(next, sc, noise_bs) - x0).norm();
    double surrogate = 0.0;
    {
      const Eigen::VectorXd xn = normalize_state(next, sc, noise_bs);
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

}  // namespace urelay::power
