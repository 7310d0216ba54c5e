#pragma once

// Channel state and SINR expressions for the two-phase cooperative NOMA
// relay: phase 1 the controller superposes both messages (s1 for the
// device, s2 for the UAV); phase 2 the UAV forwards s1 to the device.

#include <Eigen/Core>

#include "urelay/scenario.hpp"

namespace urelay {

// Squared channel gains and per-receiver noise powers. Relay links are
// free-space: gain = beta0_sq / squared distance. The direct link gain is
// supplied (explicit or drawn) since that path is blocked/NLOS.
struct LinkState {
  double gain_br_sq;   // controller -> UAV
  double gain_rd_sq;   // UAV -> device
  double gain_bd_sq;   // controller -> device (direct)
  double noise_bs_w;   // sigma^2: phase-1 receivers
  double noise_dev_w;  // delta^2: device in phase 2
};

LinkState link_state(const SystemParams& sys, const Geometry& geom, double gain_bd_sq);

// gamma_1: device decoding s1 in phase 1, s2 treated as noise.
double sinr_device_p1(const LinkState& ls, double p1, double p2);

// gamma_2: UAV decoding its own s2 after subtracting s1 (perfect SIC).
double snr_uav(const LinkState& ls, double p2);

// gamma_tilde: UAV decoding s1 (the SIC first step), s2 as noise.
double sinr_uav_s1(const LinkState& ls, double p1, double p2);

// gamma_prime: UAV decoding s2 when SIC failed, s1 as noise.
double sinr_uav_failed_sic(const LinkState& ls, double p1, double p2);

// gamma_3: device decoding the forwarded s1 in phase 2.
double snr_device_p2(const LinkState& ls, double pu);

// NOMA decode order at the UAV requires the controller->UAV link to be the
// strong one; false means the scenario violates that ordering.
bool sic_order_ok(const LinkState& ls);

}  // namespace urelay
