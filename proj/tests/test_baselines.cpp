#include "urelay/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "urelay/fbl.hpp"
#include "urelay/scenario.hpp"

using namespace urelay;

namespace {

// Independent orthogonal-scheme optimum: for each split, bisect the smallest
// UAV-slot power meeting the cap, hand the energy remainder to the device
// slot (per-slot cap respected), and keep the best device error.
double oma_oracle_log_eps1(const ao::Problem& pb) {
  const SystemParams& sys = pb.params;
  Eigen::Vector3d q{std::clamp(pb.geom.uav.x(), sys.x_min, sys.x_max),
                    std::clamp(pb.geom.uav.y(), sys.y_min, sys.y_max),
                    sys.uav_height};
  const LinkState link = ao::link_for(pb, q);
  const double gb = link.gain_br_sq / link.noise_bs_w;
  const double gd = link.gain_bd_sq / link.noise_bs_w;
  const double log_cap = std::log(sys.eps_uav_max);

  double best = 1e300;
  for (int m2 = 1; m2 < sys.m_total; ++m2) {
    double lo = std::exp2(sys.payload_bits / m2) - 1.0;
    double hi = 2.0 * lo + 1.0;
    while (fbl::log_dep(hi, m2, sys.payload_bits) > log_cap && hi < 1e30) {
      hi *= 2.0;
    }
    for (int i = 0; i < 120; ++i) {
      const double mid = 0.5 * (lo + hi);
      if (fbl::log_dep(mid, m2, sys.payload_bits) > log_cap) lo = mid;
      else hi = mid;
    }
    const double p2 = hi / gb;
    if (p2 > sys.p_max_w) continue;
    const double left = sys.e_tot - m2 * p2;
    if (left <= 0.0) continue;
    for (int m1 = 1; m1 + m2 <= sys.m_total; ++m1) {
      const double p1 = std::min(sys.p_max_w, left / m1);
      best = std::min(best, fbl::log_dep(p1 * gd, m1, sys.payload_bits));
    }
  }
  return best;
}

}  // namespace

TEST_CASE("fixed location reproduces the joint result at the joint optimum") {
  const Scenario sc = default_scenario();
  const ao::Problem pb = ao::make_problem(sc);
  const ao::AoReport joint = ao::solve(pb);
  REQUIRE((joint.status == ao::AoStatus::converged ||
           joint.status == ao::AoStatus::converged_stall));

  const ao::AoReport pinned = baselines::solve_fixed_location(pb, joint.alloc.q);
  CHECK(pinned.alloc.q == joint.alloc.q);
  CHECK(std::abs(pinned.breakdown.eps_obj - joint.breakdown.eps_obj) <= 1e-9);
  CHECK(joint.breakdown.eps_obj <=
        pinned.breakdown.eps_obj * (1.0 + 1e-6) + 1e-12);
}

TEST_CASE("collapsed joint box equals the pinned-location baseline") {
  const Scenario sc = default_scenario();
  ao::Problem collapsed = ao::make_problem(sc);
  collapsed.params.x_min = collapsed.params.x_max = 75.0;
  collapsed.params.y_min = collapsed.params.y_max = 75.0;
  collapsed.geom.uav << 75, 75, 80;
  const ao::AoReport a = ao::solve(collapsed);

  const ao::Problem pb = ao::make_problem(sc);
  const ao::AoReport b =
      baselines::solve_fixed_location(pb, Eigen::Vector3d(75, 75, 80));

  CHECK(a.alloc.q == b.alloc.q);
  CHECK(std::abs(a.breakdown.eps_obj - b.breakdown.eps_obj) <=
        1e-9 + 1e-6 * b.breakdown.eps_obj);
}

TEST_CASE("fixed power keeps the initial powers") {
  const ao::Problem pb = ao::make_problem(default_scenario());
  const ao::InitResult init = ao::initialize(pb);
  REQUIRE(init.ok);
  const ao::AoReport rep = baselines::solve_fixed_power(pb);
  CHECK(rep.alloc.pw.p1 == init.alloc.pw.p1);
  CHECK(rep.alloc.pw.p2 == init.alloc.pw.p2);
  CHECK(rep.alloc.pw.pu == init.alloc.pw.pu);
  CHECK(rep.feasible_after_each_stage);
  CHECK(ao::check_feasibility(rep.alloc, pb).empty());
}

TEST_CASE("baseline dominance on the default scenario") {
  const Scenario sc = default_scenario();
  const ao::Problem pb = ao::make_problem(sc);
  const ao::AoReport joint = ao::solve(pb);
  const ao::AoReport fix_q = baselines::solve_fixed_location(pb);
  const ao::AoReport fix_p = baselines::solve_fixed_power(pb);
  const ao::AoReport oma = baselines::solve_oma(pb);
  CHECK(joint.breakdown.eps_obj <= fix_q.breakdown.eps_obj + 1e-12);
  CHECK(joint.breakdown.eps_obj <= fix_p.breakdown.eps_obj + 1e-12);
  CHECK(joint.breakdown.eps_obj <= oma.breakdown.eps_obj + 1e-12);
}

TEST_CASE("oma matches the closed-form enumeration oracle") {
  Scenario sc = default_scenario();
  const ao::Problem pb = ao::make_problem(sc);
  const ao::AoReport rep = baselines::solve_oma(pb);
  REQUIRE(rep.status == ao::AoStatus::converged);
  CHECK(rep.breakdown.eps12 == 0.0);
  CHECK(rep.breakdown.eps3 == 0.0);
  CHECK(rep.breakdown.eps_obj == rep.breakdown.eps1);
  CHECK(rep.alloc.pw.pu == 0.0);
  CHECK(rep.breakdown.eps_bar_uav <= pb.params.eps_uav_max * (1.0 + 1e-9));
  CHECK(rep.alloc.m.m_bcast + rep.alloc.m.m_relay <= pb.params.m_total);
  CHECK(rep.alloc.m.m_bcast * rep.alloc.pw.p1 +
            rep.alloc.m.m_relay * rep.alloc.pw.p2 <=
        pb.params.e_tot * (1.0 + 1e-12));

  const double want = oma_oracle_log_eps1(pb);
  CHECK(std::abs(rep.log_objective - want) <= 1e-6 * std::abs(want));
}

TEST_CASE("oma with symmetric links agrees with a power-grid scan") {
  Scenario sc = default_scenario();
  // Direct gain equal to the relay gain at the hover point: both slots see
  // the same channel quality.
  sc.direct.gain_sq = 5.665722379603399e-10;
  const ao::Problem pb = ao::make_problem(sc);
  const ao::AoReport rep = baselines::solve_oma(pb);
  REQUIRE(rep.status == ao::AoStatus::converged);

  const double want = oma_oracle_log_eps1(pb);
  CHECK(std::abs(rep.log_objective - want) <= 1e-6 * std::abs(want));

  // Grid over the returned pair: no feasible grid point beats the solver by
  // more than the grid tolerance.
  const LinkState link = rep.link;
  const double gb = link.gain_br_sq / link.noise_bs_w;
  const double gd = link.gain_bd_sq / link.noise_bs_w;
  const int m1 = rep.alloc.m.m_bcast, m2 = rep.alloc.m.m_relay;
  double grid_best = 1e300;
  for (int i = 1; i <= 100; ++i) {
    for (int j = 1; j <= 100; ++j) {
      const double p1 = pb.params.p_max_w * i / 100.0;
      const double p2 = pb.params.p_max_w * j / 100.0;
      if (m1 * p1 + m2 * p2 > pb.params.e_tot) continue;
      if (fbl::dep(p2 * gb, m2, pb.params.payload_bits) >
          pb.params.eps_uav_max)
        continue;
      grid_best = std::min(
          grid_best, fbl::log_dep(p1 * gd, m1, pb.params.payload_bits));
    }
  }
  REQUIRE(grid_best < 1e300);
  CHECK(rep.log_objective <= grid_best + 1e-9);
}

TEST_CASE("oma error vanishes monotonically in the budget") {
  Scenario sc = default_scenario();
  sc.sys.e_tot = 1e9;
  // Log domain: the raw error underflows long before the budget runs out.
  double prev = 1.0;
  for (int m : {100, 150, 200}) {
    sc.sys.m_total = m;
    const ao::AoReport rep = baselines::solve_oma(ao::make_problem(sc));
    REQUIRE(rep.status == ao::AoStatus::converged);
    CHECK(rep.log_objective < prev);
    prev = rep.log_objective;
  }
  CHECK(prev < std::log(1e-10));
}
