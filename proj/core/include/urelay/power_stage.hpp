#pragma once

// Power-allocation SCA stage: at fixed position and blocklengths, minimize
// the joint error objective eps1*(eps3+eps12) over the transmit powers
// (p1, p2, pu) together with SINR lower-bound variables (mu_*) and
// interference-plus-noise upper-bound variables (zeta_*). Non-convex products
// and concave terms are replaced by first-order expansions anchored at the
// previous iterate; each convexified subproblem goes to the inner solver.

#include <Eigen/Core>

#include "urelay/dep.hpp"
#include "urelay/inner_solver.hpp"
#include "urelay/link.hpp"
#include "urelay/sca.hpp"
#include "urelay/scenario.hpp"

namespace urelay::power {

struct PowerScaState {
  double p1 = 0.0, p2 = 0.0, pu = 0.0;  // watts
  // SINR lower bounds: mu_tilde for the UAV decoding the device message
  // (pre-SIC), mu_prime for the UAV decoding its own message under failed
  // SIC, mu_one for the direct link at the device.
  double mu_tilde = 0.0, mu_prime = 0.0, mu_one = 0.0;
  // Interference-plus-noise upper bounds (watts) paired with the mu's:
  // zeta_prime >= p1*h_br + sigma^2, zeta_tilde >= p2*h_br + sigma^2,
  // zeta_dprime >= p2*h_bd + sigma^2.
  double zeta_prime = 0.0, zeta_tilde = 0.0, zeta_dprime = 0.0;
  int iteration = 0;
};

// State with mu's at the exact SINRs of pw and zeta's tight: every expansion
// is anchored where it is exact.
PowerScaState anchor_state(const PowerTriple& pw, const LinkState& link);

PowerTriple powers_of(const PowerScaState& s);

// Energy budget slack: m_bcast*(p1+p2) + pu*m_relay - e_tot (<= 0 feasible).
double energy_constraint(const PowerScaState& s, const BlocklengthPair& m,
                         const SystemParams& params);

// Variable order for expansion gradients: [p1, p2, mu_tilde, mu_prime,
// mu_one, pu], raw units.
using Vector6 = Eigen::Matrix<double, 6, 1>;

enum : int {
  kP1 = 0,
  kP2 = 1,
  kMuTilde = 2,
  kMuPrime = 3,
  kMuOne = 4,
  kPu = 5,
};

// First-order model a(v) = value_anchor + gradient . (v - anchor).
struct Expansion {
  double value_anchor = 0.0;
  Vector6 gradient = Vector6::Zero();
  Vector6 anchor = Vector6::Zero();
  double value(const Vector6& v) const {
    return value_anchor + gradient.dot(v - anchor);
  }
};

// The five linearized quantities of the convexified power problem:
//   eps2          UAV decodes its message after successful SIC (f of gamma2(p2))
//   eps12_sq      squared UAV error on the device message (f of mu_tilde)
//   sic_gap_sq    squared (eps2_fail - eps2)
//   relay_sum_sq  squared (eps3 + eps12), the relayed-path error sum
//   eps1_sq       squared direct-link error (f of mu_one)
struct PowerSurrogates {
  Expansion eps2, eps12_sq, sic_gap_sq, relay_sum_sq, eps1_sq;
  bool sic_fail_branch = false;  // eps2_fail branch frozen at the anchor
};

// Builds the expansions about prev. Throws sca::RegionViolation when any
// anchor SINR lies outside the convexity region (the failed-SIC component is
// exempt while pinned at 1 in its infeasible-rate branch).
PowerSurrogates taylor_surrogates(const PowerScaState& prev, const LinkState& link,
                                  const BlocklengthPair& m,
                                  const SystemParams& params);

// Exact counterparts of the surrogate targets, as functions of v (for anchor
// exactness and under-estimator audits).
double true_eps2(const Vector6& v, const LinkState& link, const BlocklengthPair& m,
                 const SystemParams& params);
double true_eps12_sq(const Vector6& v, const BlocklengthPair& m,
                     const SystemParams& params);
double true_sic_gap_sq(const Vector6& v, const LinkState& link,
                       const BlocklengthPair& m, const SystemParams& params,
                       bool sic_fail_branch);
double true_relay_sum_sq(const Vector6& v, const LinkState& link,
                         const BlocklengthPair& m, const SystemParams& params);
double true_eps1_sq(const Vector6& v, const BlocklengthPair& m,
                    const SystemParams& params);

// Convex over-estimate of the product mu*zeta anchored at (mu_t, zeta_t):
//   1/2 (mu+zeta)^2 - 1/2 (mu_t^2 + zeta_t^2) - zeta_t (zeta - zeta_t)
//                   - mu_t (mu - mu_t).
// Exceeds mu*zeta by 1/2 ((mu-mu_t)^2 + (zeta-zeta_t)^2) everywhere, so
// "received power >= over-estimate" restricts the true SINR constraint.
struct ProductRelaxation {
  double mu_anchor = 0.0, zeta_anchor = 0.0;
  double upper_bound(double mu, double zeta) const;
  double d_mu(double mu, double zeta) const;
  double d_zeta(double mu, double zeta) const;
};

// The three relaxed SINR constraints, in the order:
//   sic_keep:   p2*h_br >= upper(mu_prime, zeta_prime)
//   sic_decode: p1*h_br >= upper(mu_tilde, zeta_tilde)
//   direct:     p1*h_bd >= upper(mu_one, zeta_dprime)
struct BilinearConstraints {
  ProductRelaxation sic_keep, sic_decode, direct;
};
BilinearConstraints bilinear_relaxations(const PowerScaState& prev);

struct StageResult {
  PowerScaState state;
  sca::Trace trace;
  sca::StageStatus status = sca::StageStatus::converged;
  int inner_iterations = 0;
};

// Runs the SCA loop from a feasible, in-region start. Each accepted iterate
// is re-anchored at its exact SINRs; candidate steps failing the
// exact-objective descent test are halved toward the previous iterate.
// Set fix_pu to pin the relay power (used by reduced-instance oracles).
StageResult solve_power_stage(const PowerScaState& start, const LinkState& link,
                              const BlocklengthPair& m, const SystemParams& params,
                              double sca_tol, int sca_max_iter, bool fix_pu = false);

// log of the exact stage objective eps1*(eps3+eps12) at given powers,
// computed in log space so deep-tail values keep resolution.
double log_objective(const PowerTriple& pw, const LinkState& link,
                     const BlocklengthPair& m, const SystemParams& params);

// Scans every error component at the exact SINRs for these powers and
// returns nullptr when all anchors lie inside the convexity region, else the
// offending component name ("eps1", "eps2", ...). When condition is non-null
// it receives the violated region condition.
const char* region_scan(const PowerTriple& pw, const LinkState& link,
                        const BlocklengthPair& m, const SystemParams& params,
                        const char** condition = nullptr);

}  // namespace urelay::power
