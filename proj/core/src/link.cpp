#include "urelay/link.hpp"

#include <stdexcept>

namespace urelay {

LinkState link_state(const SystemParams& sys, const Geometry& geom, double gain_bd_sq) {
  const double s_br = (geom.uav - geom.controller).squaredNorm();
  const double s_rd = (geom.uav - geom.device).squaredNorm();
  if (s_br <= 0.0 || s_rd <= 0.0)
    throw std::invalid_argument("link_state: UAV coincides with an endpoint");
  if (gain_bd_sq <= 0.0)
    throw std::invalid_argument("link_state: direct gain must be positive");
  return {sys.beta0_sq / s_br, sys.beta0_sq / s_rd, gain_bd_sq,
          sys.noise_bs_w, sys.noise_dev_w};
}

double sinr_device_p1(const LinkState& ls, double p1, double p2) {
  return p1 * ls.gain_bd_sq / (p2 * ls.gain_bd_sq + ls.noise_bs_w);
}

double snr_uav(const LinkState& ls, double p2) {
  return p2 * ls.gain_br_sq / ls.noise_bs_w;
}

double sinr_uav_s1(const LinkState& ls, double p1, double p2) {
  return p1 * ls.gain_br_sq / (p2 * ls.gain_br_sq + ls.noise_bs_w);
}

double sinr_uav_failed_sic(const LinkState& ls, double p1, double p2) {
  return p2 * ls.gain_br_sq / (p1 * ls.gain_br_sq + ls.noise_bs_w);
}

double snr_device_p2(const LinkState& ls, double pu) {
  return pu * ls.gain_rd_sq / ls.noise_dev_w;
}

bool sic_order_ok(const LinkState& ls) { return ls.gain_br_sq >= ls.gain_bd_sq; }

}  // namespace urelay
