#pragma once

// Comparison schemes: the joint design with one stage pinned, and an
// orthogonal (time-division) scheme without superposition or relaying of
// the device message.

#include <Eigen/Core>

#include "urelay/ao.hpp"

namespace urelay::baselines {

// Joint design with the hover position held fixed (default: the scenario's
// configured start position, clamped into the box).
ao::AoReport solve_fixed_location(const ao::Problem& pb);
ao::AoReport solve_fixed_location(ao::Problem pb, const Eigen::Vector3d& q_fix);

// Joint design with the phase powers held at the feasible initial point.
ao::AoReport solve_fixed_power(const ao::Problem& pb);

// Orthogonal scheme: the controller sends the device message directly over
// m_bcast uses at p1, and the UAV message over m_relay uses at p2, with no
// interference on either. Minimizes the device error subject to the UAV
// error cap, the per-slot power cap, the blocklength budget, and the energy
// budget, by exhaustive blocklength enumeration with a closed-form per-pair
// power choice (cross-checked by the smooth inner solver on a shortlist).
// In the report, eps12 and eps3 are zero and the objective is eps1.
ao::AoReport solve_oma(const ao::Problem& pb);

}  // namespace urelay::baselines
