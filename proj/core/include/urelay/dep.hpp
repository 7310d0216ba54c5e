#pragma once

// Decoding-error composition across the two phases: per-step errors from
// the finite-blocklength model, SIC failure handling at the UAV, and the
// effective end-to-end error probabilities.

#include <string>

#include "urelay/link.hpp"

namespace urelay {

struct PowerTriple {
  double p1 = 0.0;  // controller power on s1 (device message)
  double p2 = 0.0;  // controller power on s2 (UAV message)
  double pu = 0.0;  // UAV forward power
};

struct BlocklengthPair {
  int m_bcast = 0;  // phase-1 blocklength (shared by s1 and s2)
  int m_relay = 0;  // phase-2 blocklength
};

// Error probability of the UAV decoding s1 during SIC.
double eps12(const LinkState& ls, const PowerTriple& pw, int m_bcast, double d_bits);

// Error probability of the UAV decoding s2 under failed SIC; equals 1 when
// the coding rate exceeds the interference-limited capacity.
double eps2_fail(const LinkState& ls, const PowerTriple& pw, int m_bcast, double d_bits);

// Effective UAV error: eps2*(1-eps12) + eps2_fail*eps12 (product form).
double effective_eps_uav(double eps2, double eps2_fail, double eps12);

// The same quantity in the difference-of-squares form used by the SCA
// stages: eps2 + ((e12+gap)^2 - e12^2 - gap^2)/2 with gap = eps2_fail-eps2.
// Agrees with the product form to ~1e-15 absolute.
double effective_eps_uav_dc(double eps2, double eps2_fail, double eps12);

// Effective device error: (eps3*(1-eps12) + eps12) * eps1.
double effective_eps_device(double eps1, double eps12, double eps3);

// The optimization objective: eps1 * (eps3 + eps12). Upper-bounds the
// effective device error; the gap is the negligible eps1*eps3*eps12 term.
double objective_simplified(double eps1, double eps12, double eps3);

// Field order is the CSV column order.
struct DepBreakdown {
  double eps1;         // device decodes s1, phase 1
  double eps2;         // UAV decodes s2 after clean SIC
  double eps2_fail;    // UAV decodes s2 after failed SIC
  double eps12;        // UAV decodes s1 (SIC step)
  double eps3;         // device decodes forwarded s1, phase 2
  double eps_bar_uav;  // effective UAV error
  double eps_bar_dev;  // effective device error
  double eps_obj;      // simplified objective eps1*(eps3+eps12)
};

DepBreakdown full_breakdown(const LinkState& ls, const PowerTriple& pw,
                            const BlocklengthPair& m, double d_bits);

std::string breakdown_csv_header();
std::string breakdown_csv_row(const DepBreakdown& b);

}  // namespace urelay
