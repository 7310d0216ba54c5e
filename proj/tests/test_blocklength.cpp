#include "urelay/blocklength_stage.hpp"

#include <stdexcept>

#include "doctest.h"
#include "oracle_helpers.hpp"
#include "urelay/ao.hpp"

using namespace urelay;

namespace {
LinkState unit_link() { return {1.0, 1.0, 1.0, 1.0, 1.0}; }

SystemParams loose_params(int m_total, double d_bits) {
  SystemParams p;
  p.m_total = m_total;
  p.payload_bits = d_bits;
  p.eps_uav_max = 0.49;
  p.e_tot = 1e5;
  p.p_max_w = 1e3;
  p.noise_bs_w = 1.0;
  p.noise_dev_w = 1.0;
  return p;
}
}  // namespace

TEST_CASE("compute_bounds strict-floor arithmetic") {
  const LinkState ls = unit_link();
  SystemParams p = loose_params(100, 100.0);

  // gamma_2 = 3: capacity 2 bits, so 100/2 = 50 forces m2 > 50.
  blocklength::Bounds b = blocklength::compute_bounds(ls, {1.0, 3.0, 3.0}, p);
  CHECK(b.m2_lb == 51);
  CHECK(b.m3_lb == 51);
  CHECK(b.m2_ub == 49);
  CHECK_FALSE(b.nonempty());

  b = blocklength::compute_bounds(ls, {1.0, 7.0, 7.0}, p);
  CHECK(b.m2_lb == 34);
  CHECK(b.m3_lb == 34);
  CHECK(b.m2_ub == 66);
  CHECK(b.nonempty());

  CHECK_THROWS_AS(blocklength::compute_bounds(ls, {1.0, 0.0, 3.0}, p),
                  std::domain_error);
  CHECK_THROWS_AS(blocklength::compute_bounds(ls, {1.0, 3.0, 0.0}, p),
                  std::domain_error);
}

TEST_CASE("energy_feasible_m") {
  SystemParams p;
  p.e_tot = 10.0;
  CHECK(blocklength::energy_feasible_m({0.0, 0.0, 0.0}, {50, 50}, p));
  CHECK(blocklength::energy_feasible_m({0.06, 0.04, 0.1}, {50, 50}, p));
  CHECK_FALSE(blocklength::energy_feasible_m({0.0, 0.0, 0.5}, {50, 50}, p));
}

TEST_CASE("singleton search region returns its only point") {
  const LinkState ls = unit_link();
  SystemParams p = loose_params(102, 100.0);
  const PowerTriple pw{16.0, 3.0, 3.0};
  const blocklength::Bounds b = blocklength::compute_bounds(ls, pw, p);
  REQUIRE(b.m2_lb == 51);
  REQUIRE(b.m2_ub == 51);
  const blocklength::SearchResult r = blocklength::search(ls, pw, p);
  CHECK(r.m.m_bcast == 51);
  CHECK(r.m.m_relay == 51);
}

TEST_CASE("search matches the unrestricted brute force") {
  const LinkState ls = unit_link();
  SystemParams p = loose_params(20, 8.0);
  p.eps_uav_max = 0.3;
  const PowerTriple pw{6.0, 2.0, 3.0};
  const blocklength::SearchResult r = blocklength::search(ls, pw, p);
  const oracle::BrutePair want = oracle::brute_force_blocklength(ls, pw, p);
  REQUIRE(want.found);
  CHECK(r.m.m_bcast == want.m2);
  CHECK(r.m.m_relay == want.m3);
  CHECK(r.breakdown.eps_obj == doctest::Approx(want.objective).epsilon(1e-12));
}

TEST_CASE("a larger budget never hurts") {
  const Scenario sc = default_scenario();
  const ao::Problem pb = ao::make_problem(sc);
  const ao::InitResult init = ao::initialize(pb);
  REQUIRE(init.ok);
  const LinkState link = ao::link_for(pb, init.alloc.q);

  SystemParams p100 = pb.params;
  p100.m_total = 100;
  SystemParams p120 = pb.params;
  p120.m_total = 120;
  const auto r100 = blocklength::search(link, init.alloc.pw, p100);
  const auto r120 = blocklength::search(link, init.alloc.pw, p120);
  CHECK(r120.breakdown.eps_obj <= r100.breakdown.eps_obj * (1.0 + 1e-12));
}

TEST_CASE("infeasible searches name the binding constraint") {
  const LinkState ls = unit_link();

  SystemParams p = loose_params(100, 100.0);
  CHECK_THROWS_AS(blocklength::search(ls, {16.0, 3.0, 3.0}, p),
                  blocklength::BlocklengthError);
  try {
    blocklength::search(ls, {16.0, 3.0, 3.0}, p);
  } catch (const blocklength::BlocklengthError& e) {
    CHECK(e.binding() == "bounds");
  }

  p = loose_params(110, 100.0);
  p.e_tot = 1.0;
  try {
    blocklength::search(ls, {16.0, 3.0, 3.0}, p);
    FAIL("expected an energy-bound failure");
  } catch (const blocklength::BlocklengthError& e) {
    CHECK(e.binding() == "energy");
  }

  p = loose_params(110, 100.0);
  p.eps_uav_max = 1e-12;
  try {
    blocklength::search(ls, {16.0, 3.0, 3.0}, p);
    FAIL("expected a cap-bound failure");
  } catch (const blocklength::BlocklengthError& e) {
    CHECK(e.binding() == "eps_uav_max");
  }
}

TEST_CASE("ties prefer the smaller phase-1 length") {
  const LinkState ls = unit_link();
  SystemParams p = loose_params(20, 8.0);
  p.eps_uav_max = 0.3;
  const PowerTriple pw{6.0, 2.0, 3.0};
  const blocklength::SearchResult r = blocklength::search(ls, pw, p);
  // A second pass over the lattice: nothing feasible beats the winner, and
  // anything equal sits at a lexicographically larger pair.
  for (const auto& row : blocklength::lattice(ls, pw, p)) {
    if (!row.feasible) continue;
    CHECK(row.objective >= r.breakdown.eps_obj * (1.0 - 1e-12));
    if (row.objective == r.breakdown.eps_obj) {
      CHECK(row.m_bcast * 1000 + row.m_relay >=
            r.m.m_bcast * 1000 + r.m.m_relay);
    }
  }
}

TEST_CASE("lattice rows agree with the search winner") {
  const LinkState ls = unit_link();
  SystemParams p = loose_params(20, 8.0);
  p.eps_uav_max = 0.3;
  const PowerTriple pw{6.0, 2.0, 3.0};
  const auto rows = blocklength::lattice(ls, pw, p);
  REQUIRE(!rows.empty());
  double best = 1e300;
  for (const auto& row : rows) {
    if (row.feasible) best = std::min(best, row.objective);
  }
  const blocklength::SearchResult r = blocklength::search(ls, pw, p);
  CHECK(best == doctest::Approx(r.breakdown.eps_obj).epsilon(1e-15));
}
