#include "urelay/blocklength_stage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "urelay/fbl.hpp"

namespace urelay::blocklength {
namespace {

// floor(d/log2(1+gamma)) + 1: the smallest integer m with a strictly
// positive rate margin (an exact-integer quotient still needs one more use).
int strict_min_blocklength(double gamma, double d_bits) {
  if (!(gamma > 0.0)) {
    throw std::domain_error(
        "blocklength bounds need a positive SNR on both hops");
  }
  const double rate_capacity = std::log2(1.0 + gamma);
  return static_cast<int>(std::floor(d_bits / rate_capacity)) + 1;
}

double log_add(double a, double b) {
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  if (hi == -std::numeric_limits<double>::infinity()) return hi;
  return hi + std::log1p(std::exp(lo - hi));
}

// Phase-1 quantities depend on m_bcast only; hoisted out of the m_relay loop.
struct Phase1Row {
  double log_eps1 = 0.0;
  double log_eps12 = 0.0;
  double eps_bar_uav = 0.0;
};

Phase1Row phase1_row(const LinkState& link, const PowerTriple& pw,
                     int m_bcast, double d_bits) {
  const double m = static_cast<double>(m_bcast);
  const double g1 = sinr_device_p1(link, pw.p1, pw.p2);
  const double gt = sinr_uav_s1(link, pw.p1, pw.p2);
  Phase1Row row;
  row.log_eps1 = fbl::log_dep(g1, m, d_bits);
  row.log_eps12 = fbl::log_dep(gt, m, d_bits);
  const double e2 = fbl::dep(snr_uav(link, pw.p2), m, d_bits);
  const double e2f = eps2_fail(link, pw, m_bcast, d_bits);
  row.eps_bar_uav = effective_eps_uav(e2, e2f, std::exp(row.log_eps12));
  return row;
}

}  // namespace

Bounds compute_bounds(const LinkState& link, const PowerTriple& pw,
                      const SystemParams& params) {
  Bounds b;
  b.m2_lb = strict_min_blocklength(snr_uav(link, pw.p2), params.payload_bits);
  b.m3_lb = strict_min_blocklength(snr_device_p2(link, pw.pu),
                                   params.payload_bits);
  b.m2_ub = params.m_total - b.m3_lb;
  return b;
}

bool energy_feasible_m(const PowerTriple& pw, const BlocklengthPair& m,
                       const SystemParams& params) {
  const double used = static_cast<double>(m.m_bcast) * (pw.p1 + pw.p2) +
                      pw.pu * static_cast<double>(m.m_relay);
  return used <= params.e_tot;
}

SearchResult search(const LinkState& link, const PowerTriple& pw,
                    const SystemParams& params) {
  const Bounds b = compute_bounds(link, pw, params);
  if (!b.nonempty()) {
    throw BlocklengthError(
        "bounds", "blocklength search rectangle is empty: minimum lengths " +
                      std::to_string(b.m2_lb) + " + " +
                      std::to_string(b.m3_lb) + " exceed the budget " +
                      std::to_string(params.m_total));
  }

  const double d_bits = params.payload_bits;
  const double g3 = snr_device_p2(link, pw.pu);
  const double phase1_power = pw.p1 + pw.p2;

  // log(eps3) per candidate m_relay, shared across the m_bcast rows.
  const int m3_max = params.m_total - b.m2_lb;
  std::vector<double> log_eps3(static_cast<std::size_t>(m3_max) + 1, 0.0);
  for (int m3 = b.m3_lb; m3 <= m3_max; ++m3) {
    log_eps3[static_cast<std::size_t>(m3)] =
        fbl::log_dep(g3, static_cast<double>(m3), d_bits);
  }

  bool found = false;
  bool any_energy_ok = false;
  double best_log = 0.0;
  BlocklengthPair best{0, 0};

  for (int m2 = b.m2_lb; m2 <= b.m2_ub; ++m2) {
    const Phase1Row row = phase1_row(link, pw, m2, d_bits);
    const bool cap_ok = row.eps_bar_uav <= params.eps_uav_max;
    // Largest m_relay the energy budget allows at this m_bcast.
    int m3_hi = params.m_total - m2;
    if (pw.pu > 0.0) {
      const double slack =
          (params.e_tot - static_cast<double>(m2) * phase1_power) / pw.pu;
      m3_hi = std::min(m3_hi, static_cast<int>(std::floor(slack)));
    } else if (static_cast<double>(m2) * phase1_power > params.e_tot) {
      m3_hi = b.m3_lb - 1;
    }
    if (m3_hi >= b.m3_lb) any_energy_ok = true;
    if (!cap_ok || m3_hi < b.m3_lb) continue;

    for (int m3 = b.m3_lb; m3 <= m3_hi; ++m3) {
      const double log_obj =
          row.log_eps1 +
          log_add(log_eps3[static_cast<std::size_t>(m3)], row.log_eps12);
      if (!found || log_obj < best_log) {
        found = true;
        best_log = log_obj;
        best = BlocklengthPair{m2, m3};
      }
    }
  }

  if (!found) {
    const char* binding = any_energy_ok ? "eps_uav_max" : "energy";
    throw BlocklengthError(
        binding, std::string("no blocklength pair satisfies the ") + binding +
                     " constraint at the current powers");
  }

  SearchResult out;
  out.m = best;
  out.breakdown = full_breakdown(link, pw, best, d_bits);
  out.log_objective = best_log;
  return out;
}

std::vector<LatticeRow> lattice(const LinkState& link, const PowerTriple& pw,
                                const SystemParams& params) {
  const Bounds b = compute_bounds(link, pw, params);
  std::vector<LatticeRow> rows;
  if (!b.nonempty()) return rows;
  const double d_bits = params.payload_bits;
  for (int m2 = b.m2_lb; m2 <= b.m2_ub; ++m2) {
    const Phase1Row row = phase1_row(link, pw, m2, d_bits);
    for (int m3 = b.m3_lb; m3 <= params.m_total - m2; ++m3) {
      const BlocklengthPair m{m2, m3};
      LatticeRow r;
      r.m_bcast = m2;
      r.m_relay = m3;
      const double g3 = snr_device_p2(link, pw.pu);
      r.objective = std::exp(
          row.log_eps1 +
          log_add(fbl::log_dep(g3, static_cast<double>(m3), d_bits),
                  row.log_eps12));
      r.eps_bar_uav = row.eps_bar_uav;
      r.energy = static_cast<double>(m2) * (pw.p1 + pw.p2) +
                 pw.pu * static_cast<double>(m3);
      r.feasible = row.eps_bar_uav <= params.eps_uav_max &&
                   energy_feasible_m(pw, m, params);
      rows.push_back(r);
    }
  }
  return rows;
}

}  // namespace urelay::blocklength
