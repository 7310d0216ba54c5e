#include "urelay/dep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "urelay/fbl.hpp"

namespace urelay {

namespace {

double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

}  // namespace

double eps12(const LinkState& ls, const PowerTriple& pw, int m_bcast, double d_bits) {
  return fbl::dep(sinr_uav_s1(ls, pw.p1, pw.p2), m_bcast, d_bits);
}

double eps2_fail(const LinkState& ls, const PowerTriple& pw, int m_bcast, double d_bits) {
  const double g = sinr_uav_failed_sic(ls, pw.p1, pw.p2);
  if (d_bits / m_bcast > std::log2(1.0 + g)) return 1.0;
  return fbl::dep(g, m_bcast, d_bits);
}

double effective_eps_uav(double eps2, double eps2_fail, double eps12) {
  return eps2 * (1.0 - eps12) + eps2_fail * eps12;
}

double effective_eps_uav_dc(double eps2, double eps2_fail, double eps12) {
  const double gap = eps2_fail - eps2;
  const double sum = eps12 + gap;
  return eps2 + 0.5 * (sum * sum - eps12 * eps12 - gap * gap);
}

double effective_eps_device(double eps1, double eps12, double eps3) {
  return (eps3 * (1.0 - eps12) + eps12) * eps1;
}

double objective_simplified(double eps1, double eps12, double eps3) {
  return eps1 * (eps3 + eps12);
}

DepBreakdown full_breakdown(const LinkState& ls, const PowerTriple& pw,
                            const BlocklengthPair& m, double d_bits) {
  DepBreakdown b{};
  b.eps1 = clamp01(fbl::dep(sinr_device_p1(ls, pw.p1, pw.p2), m.m_bcast, d_bits));
  b.eps2 = clamp01(fbl::dep(snr_uav(ls, pw.p2), m.m_bcast, d_bits));
  b.eps2_fail = clamp01(eps2_fail(ls, pw, m.m_bcast, d_bits));
  b.eps12 = clamp01(eps12(ls, pw, m.m_bcast, d_bits));
  b.eps3 = clamp01(fbl::dep(snr_device_p2(ls, pw.pu), m.m_relay, d_bits));
  b.eps_bar_uav = clamp01(effective_eps_uav(b.eps2, b.eps2_fail, b.eps12));
  b.eps_bar_dev = clamp01(effective_eps_device(b.eps1, b.eps12, b.eps3));
  b.eps_obj = clamp01(objective_simplified(b.eps1, b.eps12, b.eps3));
  return b;
}

std::string breakdown_csv_header() {
  return "eps1,eps2,eps2_fail,eps12,eps3,eps_bar_uav,eps_bar_dev,eps_obj";
}

std::string breakdown_csv_row(const DepBreakdown& b) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g",
                b.eps1, b.eps2, b.eps2_fail, b.eps12, b.eps3,
                b.eps_bar_uav, b.eps_bar_dev, b.eps_obj);
  return buf;
}

}  // namespace urelay
