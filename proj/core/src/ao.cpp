#include "urelay/ao.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>

#include "urelay/blocklength_stage.hpp"
#include "urelay/fbl.hpp"
#include "urelay/location_stage.hpp"
#include "urelay/power_stage.hpp"

namespace urelay::ao {
namespace {

// Relative slack applied to every feasibility test; matches the acceptance
// tolerance of the SCA stages so boundary-tight stage outputs still count
// as feasible.
constexpr double kFeasSlack = 1e-7;

std::string format_amount(double x) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

// Empty string when the allocation is a valid stage start: feasible and with
// every error-term anchor inside the convexity region.
std::string start_check(const Allocation& a, const Problem& pb) {
  const std::vector<ConstraintViolation> viol = check_feasibility(a, pb);
  if (!viol.empty()) {
    return viol.front().name + " violated by " + format_amount(viol.front().amount);
  }
  const LinkState link = link_for(pb, a.q);
  const char* cond = nullptr;
  if (const char* comp = power::region_scan(a.pw, link, a.m, pb.params, &cond)) {
    return std::string("region check failed for ") + comp + " (" + cond + ")";
  }
  return {};
}

}  // namespace

const char* to_string(AoStatus s) {
  switch (s) {
    case AoStatus::converged: return "converged";
    case AoStatus::converged_stall: return "converged_stall";
    case AoStatus::iteration_limit: return "iteration_limit";
    case AoStatus::infeasible: return "infeasible";
  }
  return "unknown";
}

Problem make_problem(const Scenario& sc) {
  Problem pb;
  pb.params = sc.sys;
  pb.geom = sc.geom;
  pb.solver = sc.solver;
  pb.gain_bd_sq = resolve_direct_gain(sc.direct);
  return pb;
}

LinkState link_for(const Problem& pb, const Eigen::Vector3d& q) {
  Geometry g = pb.geom;
  g.uav = q;
  return link_state(pb.params, g, pb.gain_bd_sq);
}

std::vector<ConstraintViolation> check_feasibility(const Allocation& a,
                                                   const Problem& pb) {
  const SystemParams& sys = pb.params;
  std::vector<ConstraintViolation> v;
  auto add = [&](const char* name, double amount, double scale) {
    if (amount > kFeasSlack * scale) v.push_back({name, amount});
  };

  const double pos = std::max(
      {-a.pw.p1, -a.pw.p2, -a.pw.pu, static_cast<double>(1 - a.m.m_bcast),
       static_cast<double>(1 - a.m.m_relay)});
  add("positivity", pos, 1.0);
  add("power_sum", a.pw.p1 + a.pw.p2 - sys.p_max_w, sys.p_max_w);
  const double box_w =
      std::max(sys.x_max - sys.x_min, sys.y_max - sys.y_min);
  add("position_box",
      std::max({sys.x_min - a.q.x(), a.q.x() - sys.x_max, sys.y_min - a.q.y(),
                a.q.y() - sys.y_max}),
      box_w);
  add("blocklength_budget",
      static_cast<double>(a.m.m_bcast + a.m.m_relay - sys.m_total), 1.0);

  if (pos <= 0.0 && a.m.m_bcast >= 1) {
    const LinkState link = link_for(pb, a.q);
    const double d = sys.payload_bits;
    // Zero SINR means certain decoding failure; f_arg itself rejects it.
    auto dep_or_one = [](double gamma, double m, double bits) {
      return gamma > 0.0 ? fbl::dep(gamma, m, bits) : 1.0;
    };
    const double e2 = dep_or_one(snr_uav(link, a.pw.p2), a.m.m_bcast, d);
    const double e12 =
        dep_or_one(sinr_uav_s1(link, a.pw.p1, a.pw.p2), a.m.m_bcast, d);
    const double gp = sinr_uav_failed_sic(link, a.pw.p1, a.pw.p2);
    const double e2f = d / a.m.m_bcast > std::log2(1.0 + gp)
                           ? 1.0
                           : fbl::dep(gp, a.m.m_bcast, d);
    add("eps_uav_cap", effective_eps_uav(e2, e2f, e12) - sys.eps_uav_max,
        sys.eps_uav_max);
  }
  add("energy_budget",
      a.m.m_bcast * (a.pw.p1 + a.pw.p2) + a.pw.pu * a.m.m_relay - sys.e_tot,
      sys.e_tot);
  return v;
}

InitResult initialize(const Problem& pb) {
  InitResult out;
  const SystemParams& sys = pb.params;
  Allocation base;
  base.q = Eigen::Vector3d{std::clamp(pb.geom.uav.x(), sys.x_min, sys.x_max),
                           std::clamp(pb.geom.uav.y(), sys.y_min, sys.y_max),
                           sys.uav_height};
  const LinkState link = link_for(pb, base.q);

  const int mt = sys.m_total;
  std::vector<int> m_candidates;
  auto add_m = [&](int m) {
    if (m < 2 || mt - m < 2) return;
    for (int e : m_candidates) {
      if (e == m) return;
    }
    m_candidates.push_back(m);
  };
  // Bounds midpoint at a nominal power probe, then an outward scan around
  // the budget midpoint.
  {
    const int mb_probe = std::max(2, mt / 2);
    const double s_probe =
        std::min(1.0, 0.9 * sys.e_tot / (mb_probe * sys.p_max_w));
    PowerTriple probe;
    probe.p1 = 0.7 * sys.p_max_w * s_probe;
    probe.p2 = 0.3 * sys.p_max_w * s_probe;
    const int mr_probe = std::max(1, mt - mb_probe);
    probe.pu = 0.9 * (sys.e_tot - mb_probe * sys.p_max_w * s_probe) / mr_probe;
    if (probe.pu > 0.0) {
      try {
        const blocklength::Bounds b = blocklength::compute_bounds(link, probe, sys);
        if (b.nonempty()) add_m((b.m2_lb + b.m2_ub) / 2);
      } catch (const std::domain_error&) {
      }
    }
  }
  add_m(mt / 2);
  const int step = std::max(1, mt / 20);
  for (int k = 1; k <= 10; ++k) {
    add_m(mt / 2 + k * step);
    add_m(mt / 2 - k * step);
  }

  const double ratios[] = {7.0 / 3.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0, 32.0, 48.0};
  std::string first_failure;
  for (double ratio : ratios) {
    for (int mb : m_candidates) {
      const int mr = mt - mb;
      const double s_hi = std::min(1.0, 0.9 * sys.e_tot / (mb * sys.p_max_w));
      double s = s_hi;
      for (int it = 0; it < 40 && s > 1e-12; ++it, s *= 0.5) {
        Allocation cand = base;
        cand.m = BlocklengthPair{mb, mr};
        const double total = sys.p_max_w * s;
        cand.pw.p1 = total * ratio / (1.0 + ratio);
        cand.pw.p2 = total / (1.0 + ratio);
        cand.pw.pu = 0.9 * (sys.e_tot - mb * total) / mr;
        if (!(cand.pw.pu > 0.0)) continue;
        std::string fail = start_check(cand, pb);
        if (fail.empty()) {
          out.ok = true;
          out.alloc = cand;
          return out;
        }
        if (first_failure.empty()) first_failure = std::move(fail);
      }
    }
  }
  out.failure = first_failure.empty() ? "no candidate allocation constructed"
                                      : first_failure;
  return out;
}

AoReport solve(const Problem& pb, const StageToggles& toggles) {
  AoReport rep;
  InitResult init = initialize(pb);
  if (!init.ok) {
    rep.status = AoStatus::infeasible;
    rep.failure = init.failure;
    return rep;
  }

  Allocation a = init.alloc;
  LinkState link = link_for(pb, a.q);
  double cur_log = power::log_objective(a.pw, link, a.m, pb.params);
  rep.log_objective_history.push_back(cur_log);
  rep.objective_history.push_back(std::exp(cur_log));
  rep.status = AoStatus::iteration_limit;

  auto note_feasible = [&]() {
    if (!check_feasibility(a, pb).empty()) rep.feasible_after_each_stage = false;
  };

  const SolverParams& sp = pb.solver;
  const double log_drop_tol =
      -std::log1p(-std::min(sp.outer_tol, 0.999999));
  int stall_count = 0;

  for (int outer = 1; outer <= sp.outer_max_iter; ++outer) {
    const double log_before = cur_log;

    if (toggles.power) {
      try {
        power::StageResult r =
            power::solve_power_stage(power::anchor_state(a.pw, link), link,
                                     a.m, pb.params, sp.sca_tol, sp.sca_max_iter);
        rep.power_traces.push_back(r.trace);
        if (r.status == sca::StageStatus::converged ||
            r.status == sca::StageStatus::iteration_limit) {
          const PowerTriple cand = powers_of(r.state);
          const double cand_log =
              power::log_objective(cand, link, a.m, pb.params);
          Allocation cand_a = a;
          cand_a.pw = cand;
          if (cand_log <= cur_log && check_feasibility(cand_a, pb).empty()) {
            a.pw = cand;
            cur_log = cand_log;
          }
        }
      } catch (const sca::RegionViolation&) {
      } catch (const std::invalid_argument&) {
      }
      note_feasible();
    }

    if (toggles.blocklength) {
      std::optional<blocklength::SearchResult> sr;
      try {
        sr = blocklength::search(link, a.pw, pb.params);
      } catch (const blocklength::BlocklengthError&) {
        // One-shot rescue: scale the powers toward p_max within the energy
        // budget and retry; an empty rectangle means the SNRs are too small.
        const double used = a.m.m_bcast * (a.pw.p1 + a.pw.p2) +
                            a.pw.pu * a.m.m_relay;
        const double scale =
            std::min({1.2, pb.params.p_max_w / (a.pw.p1 + a.pw.p2),
                      used > 0.0 ? pb.params.e_tot / used : 1.0}) *
            (1.0 - 1e-12);
        if (scale > 1.0) {
          const PowerTriple scaled{a.pw.p1 * scale, a.pw.p2 * scale,
                                   a.pw.pu * scale};
          try {
            blocklength::SearchResult rescued =
                blocklength::search(link, scaled, pb.params);
            Allocation cand_a = a;
            cand_a.pw = scaled;
            cand_a.m = rescued.m;
            if (rescued.log_objective <= cur_log &&
                check_feasibility(cand_a, pb).empty()) {
              a.pw = scaled;
              sr = rescued;
            }
          } catch (const blocklength::BlocklengthError&) {
          }
        }
      }
      if (sr) {
        Allocation cand_a = a;
        cand_a.m = sr->m;
        if (sr->log_objective <= cur_log && check_feasibility(cand_a, pb).empty()) {
          a.m = sr->m;
          cur_log = sr->log_objective;
        }
        rep.block_history.push_back(
            BlockChoice{outer, a.m.m_bcast, a.m.m_relay, std::exp(cur_log)});
      }
      note_feasible();
    }

    if (toggles.location) {
      try {
        location::StageResult r = location::solve_location_stage(
            location::anchor_state(a.q.x(), a.q.y(), pb.geom, pb.params),
            a.pw, a.m, pb.params, pb.geom, link, sp.sca_tol, sp.sca_max_iter);
        rep.location_traces.push_back(r.trace);
        if (r.status == sca::StageStatus::converged ||
            r.status == sca::StageStatus::iteration_limit) {
          const double cand_log =
              location::log_objective(r.state.qx, r.state.qy, a.pw, a.m,
                                      pb.params, pb.geom, link);
          Allocation cand_a = a;
          cand_a.q =
              Eigen::Vector3d{r.state.qx, r.state.qy, pb.params.uav_height};
          if (cand_log <= cur_log && check_feasibility(cand_a, pb).empty()) {
            a.q = cand_a.q;
            link = link_for(pb, a.q);
            cur_log = cand_log;
          }
        }
      } catch (const sca::RegionViolation&) {
      } catch (const std::invalid_argument&) {
      }
      note_feasible();
    }

    rep.outer_iterations = outer;
    rep.log_objective_history.push_back(cur_log);
    rep.objective_history.push_back(std::exp(cur_log));

    const double drop = log_before - cur_log;
    const double lin_drop = std::exp(log_before) - std::exp(cur_log);
    if (drop <= 0.0) {
      if (++stall_count >= 2) {
        rep.status = AoStatus::converged_stall;
        break;
      }
    } else {
      stall_count = 0;
      if (drop <= log_drop_tol || lin_drop <= sca::kDropFloor) {
        rep.status = AoStatus::converged;
        break;
      }
    }
  }

  rep.alloc = a;
  rep.link = link;
  rep.log_objective = cur_log;
  rep.breakdown = full_breakdown(link, a.pw, a.m, pb.params.payload_bits);
  return rep;
}

AoReport solve(const Scenario& sc) { return solve(make_problem(sc), StageToggles{}); }

}  // namespace urelay::ao
