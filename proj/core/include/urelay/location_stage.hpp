#pragma once

// UAV-position stage: at fixed powers and blocklengths, improve the hover
// position by successive convex approximation over (qx, qy) and two squared
// distance slacks. The nonconvex squared-distance equalities are replaced by
// first-order lower bounds (linear in q), and the error-probability terms by
// Taylor expansions in the slacks at the previous iterate.

#include <Eigen/Core>

#include "urelay/dep.hpp"
#include "urelay/link.hpp"
#include "urelay/scenario.hpp"
#include "urelay/sca.hpp"

namespace urelay::location {

struct LocationScaState {
  double qx = 0.0, qy = 0.0;
  double s_br = 0.0;  // slack for ||q - controller||^2 (height included)
  double s_rd = 0.0;  // slack for ||q - device||^2
  int iteration = 0;
};

// Slacks tight at the current position.
LocationScaState anchor_state(double qx, double qy, const Geometry& geom,
                              const SystemParams& params);

// Linear under-estimate of ||q - e||^2 around the anchor position: exact at
// the anchor, below the true squared distance elsewhere.
struct DistanceLinearization {
  double anchor_sq = 0.0;  // squared distance at the anchor (height included)
  double grad_x = 0.0, grad_y = 0.0;
  double qx_t = 0.0, qy_t = 0.0;
  double value(double qx, double qy) const {
    return anchor_sq + grad_x * (qx - qx_t) + grad_y * (qy - qy_t);
  }
};

DistanceLinearization linearize_distance(double qx_t, double qy_t, double ex,
                                         double ey, double dz);

// SINR derivatives with respect to the squared-distance slacks.
double dgamma2_dsbr(double p2, double beta0_sq, double noise, double s_br);
double dgamma3_dsrd(double pu, double beta0_sq, double noise, double s_rd);
double dgamma_tilde_dsbr(double p1, double p2, double beta0_sq, double noise,
                         double s_br);
double dgamma_prime_dsbr(double p1, double p2, double beta0_sq, double noise,
                         double s_br);

using Vector2 = Eigen::Vector2d;  // [s_br, s_rd]

// First-order expansion of one error term in the slacks.
struct Expansion2 {
  double value_anchor = 0.0;
  Vector2 gradient = Vector2::Zero();
  Vector2 anchor = Vector2::Zero();
  double value(const Vector2& v) const {
    return value_anchor + gradient.dot(v - anchor);
  }
};

// Taylor expansions at the previous iterate of the error terms entering the
// position subproblem. sic_fail_branch mirrors the power stage: when the
// rate exceeds the interference-limited capacity the failed-SIC error is
// pinned at 1. Throws sca::RegionViolation when an anchor SINR falls outside
// the convexity region.
struct LocationSurrogates {
  Expansion2 eps2;
  Expansion2 eps12;
  Expansion2 eps2_fail;
  Expansion2 eps3;
  bool sic_fail_branch = false;
};

LocationSurrogates location_gradients(const LocationScaState& prev,
                                      const PowerTriple& pw,
                                      const BlocklengthPair& m,
                                      const SystemParams& params,
                                      const LinkState& base_link);

struct StageResult {
  LocationScaState state;
  sca::Trace trace;
  sca::StageStatus status = sca::StageStatus::iteration_limit;
  int inner_iterations = 0;
};

// Runs the SCA loop from `start`. base_link supplies the direct-link gain
// and noise powers; the relay-link gains are recomputed from the candidate
// position each iteration. Candidate steps failing the exact-objective
// descent test or exact feasibility are halved toward the previous iterate.
StageResult solve_location_stage(const LocationScaState& start,
                                 const PowerTriple& pw,
                                 const BlocklengthPair& m,
                                 const SystemParams& params,
                                 const Geometry& geom,
                                 const LinkState& base_link, double sca_tol,
                                 int sca_max_iter);

// log of eps1*(eps3+eps12) at the exact distances for this position.
double log_objective(double qx, double qy, const PowerTriple& pw,
                     const BlocklengthPair& m, const SystemParams& params,
                     const Geometry& geom, const LinkState& base_link);

// Channel state at a given horizontal position (direct gain and noises from
// base_link, relay gains free-space at the configured height).
LinkState link_at(double qx, double qy, const Geometry& geom,
                  const SystemParams& params, const LinkState& base_link);

}  // namespace urelay::location
