#include "urelay/location_stage.hpp"

#include <cmath>
#include <random>

#include "doctest.h"
#include "oracle_helpers.hpp"
#include "urelay/ao.hpp"
#include "urelay/fbl.hpp"

using namespace urelay;

namespace {

// Short-range instance with unit-scale gains: all swept positions keep the
// relay SINRs inside the convex-model region.
struct LineInstance {
  SystemParams params;
  Geometry geom;
  LinkState base_link{0.0, 0.0, 0.05, 1.0, 1.0};
  PowerTriple pw{900.0, 290.0, 600.0};
  BlocklengthPair m{60, 40};

  LineInstance() {
    params.beta0_sq = 1.0;
    params.noise_bs_w = 1.0;
    params.noise_dev_w = 1.0;
    params.payload_bits = 100.0;
    params.eps_uav_max = 0.2;
    params.uav_height = 2.0;
    params.x_min = 1.0;
    params.x_max = 9.0;
    params.y_min = -1e-6;
    params.y_max = 1e-6;
    geom.controller << 0, 0, 0;
    geom.device << 10, 0, 0;
    geom.uav << 5, 0, 2;
  }

  bool in_region(double qx, double qy) const {
    const LinkState ls = location::link_at(qx, qy, geom, params, base_link);
    const double d = params.payload_bits;
    const double g2 = snr_uav(ls, pw.p2);
    const double gt = sinr_uav_s1(ls, pw.p1, pw.p2);
    const double g3 = snr_device_p2(ls, pw.pu);
    if (!fbl::convexity_region_ok(g2, m.m_bcast, d)) return false;
    if (!fbl::convexity_region_ok(gt, m.m_bcast, d)) return false;
    if (!fbl::convexity_region_ok(g3, m.m_relay, d)) return false;
    const double e2 = fbl::dep(g2, m.m_bcast, d);
    const double e12 = fbl::dep(gt, m.m_bcast, d);
    const double e2f = eps2_fail(ls, pw, m.m_bcast, d);
    return effective_eps_uav(e2, e2f, e12) <= params.eps_uav_max;
  }
};

}  // namespace

TEST_CASE("linearize_distance") {
  const location::DistanceLinearization lin =
      location::linearize_distance(3.0, 4.0, 1.0, 1.0, 2.0);
  CHECK(lin.anchor_sq == doctest::Approx(4.0 + 9.0 + 4.0));
  CHECK(lin.value(3.0, 4.0) == doctest::Approx(lin.anchor_sq).epsilon(1e-15));

  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-20.0, 20.0);
  for (int i = 0; i < 50; ++i) {
    const double qx = u(rng), qy = u(rng);
    const double truth =
        (qx - 1.0) * (qx - 1.0) + (qy - 1.0) * (qy - 1.0) + 4.0;
    CHECK(lin.value(qx, qy) <= truth + 1e-12);
  }

  // Anchor directly above the endpoint: only the height term survives.
  const location::DistanceLinearization above =
      location::linearize_distance(1.0, 1.0, 1.0, 1.0, 5.0);
  CHECK(above.anchor_sq == doctest::Approx(25.0));
  CHECK(above.grad_x == 0.0);
  CHECK(above.grad_y == 0.0);
}

TEST_CASE("sinr partials in the squared-distance slacks") {
  CHECK(location::dgamma2_dsbr(1.0, 1.0, 1.0, 2.0) == doctest::Approx(-0.25));

  const double p1 = 3.0, p2 = 1.5, b0 = 2.0, noise = 0.7;
  for (double s : {5.0, 20.0, 80.0}) {
    const double h = 1e-5 * s;
    const double fd2 = oracle::central_diff(
        [&](double x) { return p2 * b0 / (noise * x); }, s, h);
    CHECK(location::dgamma2_dsbr(p2, b0, noise, s) ==
          doctest::Approx(fd2).epsilon(1e-6));

    const double fd3 = oracle::central_diff(
        [&](double x) { return p1 * b0 / (noise * x); }, s, h);
    CHECK(location::dgamma3_dsrd(p1, b0, noise, s) ==
          doctest::Approx(fd3).epsilon(1e-6));

    const double fdt = oracle::central_diff(
        [&](double x) { return p1 * b0 / (p2 * b0 + noise * x); }, s, h);
    CHECK(location::dgamma_tilde_dsbr(p1, p2, b0, noise, s) ==
          doctest::Approx(fdt).epsilon(1e-6));

    const double fdp = oracle::central_diff(
        [&](double x) { return p2 * b0 / (p1 * b0 + noise * x); }, s, h);
    CHECK(location::dgamma_prime_dsbr(p1, p2, b0, noise, s) ==
          doctest::Approx(fdp).epsilon(1e-6));
  }

  // With no interferer the pre-SIC partial reduces to the clean-SNR form.
  CHECK(location::dgamma_tilde_dsbr(1.0, 0.0, 1.0, 1.0, 2.0) ==
        doctest::Approx(location::dgamma2_dsbr(1.0, 1.0, 1.0, 2.0))
            .epsilon(1e-14));
}

TEST_CASE("anchor_state ties the slacks to the geometry") {
  const LineInstance inst;
  const location::LocationScaState s =
      location::anchor_state(4.0, 0.0, inst.geom, inst.params);
  CHECK(s.s_br == doctest::Approx(16.0 + 4.0));
  CHECK(s.s_rd == doctest::Approx(36.0 + 4.0));
}

TEST_CASE("location surrogates are exact at the anchor") {
  const LineInstance inst;
  const location::LocationScaState prev =
      location::anchor_state(5.0, 0.0, inst.geom, inst.params);
  const location::LocationSurrogates sur = location::location_gradients(
      prev, inst.pw, inst.m, inst.params, inst.base_link);

  location::Vector2 v(prev.s_br, prev.s_rd);
  const double d = inst.params.payload_bits;
  const double g2 = inst.pw.p2 * inst.params.beta0_sq /
                    (inst.params.noise_bs_w * prev.s_br);
  const double gt = inst.pw.p1 * inst.params.beta0_sq /
                    (inst.pw.p2 * inst.params.beta0_sq +
                     inst.params.noise_bs_w * prev.s_br);
  const double g3 = inst.pw.pu * inst.params.beta0_sq /
                    (inst.params.noise_dev_w * prev.s_rd);
  CHECK(sur.eps2.value(v) ==
        doctest::Approx(fbl::dep(g2, inst.m.m_bcast, d)).epsilon(1e-15));
  CHECK(sur.eps12.value(v) ==
        doctest::Approx(fbl::dep(gt, inst.m.m_bcast, d)).epsilon(1e-15));
  CHECK(sur.eps3.value(v) ==
        doctest::Approx(fbl::dep(g3, inst.m.m_relay, d)).epsilon(1e-15));
  CHECK(sur.sic_fail_branch);
  CHECK(sur.eps2_fail.value(v) == doctest::Approx(1.0));

  // Under-estimator property over nearby in-region slack values.
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> scale(0.9, 1.1);
  int accepted = 0;
  while (accepted < 50) {
    location::Vector2 w(prev.s_br * scale(rng), prev.s_rd * scale(rng));
    const double w_g2 = inst.pw.p2 * inst.params.beta0_sq /
                        (inst.params.noise_bs_w * w(0));
    const double w_gt = inst.pw.p1 * inst.params.beta0_sq /
                        (inst.pw.p2 * inst.params.beta0_sq +
                         inst.params.noise_bs_w * w(0));
    const double w_g3 = inst.pw.pu * inst.params.beta0_sq /
                        (inst.params.noise_dev_w * w(1));
    if (!fbl::convexity_region_ok(w_g2, inst.m.m_bcast, d)) continue;
    if (!fbl::convexity_region_ok(w_gt, inst.m.m_bcast, d)) continue;
    if (!fbl::convexity_region_ok(w_g3, inst.m.m_relay, d)) continue;
    ++accepted;
    CHECK(sur.eps2.value(w) <= fbl::dep(w_g2, inst.m.m_bcast, d) + 1e-12);
    CHECK(sur.eps12.value(w) <= fbl::dep(w_gt, inst.m.m_bcast, d) + 1e-12);
    CHECK(sur.eps3.value(w) <= fbl::dep(w_g3, inst.m.m_relay, d) + 1e-12);
  }
}

TEST_CASE("stage output matches a fine line search") {
  const LineInstance inst;
  const location::LocationScaState start =
      location::anchor_state(5.0, 0.0, inst.geom, inst.params);
  const location::StageResult res = location::solve_location_stage(
      start, inst.pw, inst.m, inst.params, inst.geom, inst.base_link, 1e-8,
      60);
  REQUIRE(!res.trace.empty());
  for (std::size_t i = 1; i < res.trace.size(); ++i) {
    CHECK(res.trace[i].objective_true <=
          res.trace[i - 1].objective_true + 1e-12);
  }

  double best = 1e300, best_x = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double qx =
        inst.params.x_min + (inst.params.x_max - inst.params.x_min) * i / 1000.0;
    if (!inst.in_region(qx, 0.0)) continue;
    const double obj = std::exp(location::log_objective(
        qx, 0.0, inst.pw, inst.m, inst.params, inst.geom, inst.base_link));
    if (obj < best) {
      best = obj;
      best_x = qx;
    }
  }
  REQUIRE(best < 1e300);
  // One refinement pass around the winning cell.
  const double w = (inst.params.x_max - inst.params.x_min) / 1000.0;
  for (int i = 0; i <= 200; ++i) {
    const double qx = std::clamp(best_x - w + 2.0 * w * i / 200.0,
                                 inst.params.x_min, inst.params.x_max);
    if (!inst.in_region(qx, 0.0)) continue;
    best = std::min(best, std::exp(location::log_objective(
                              qx, 0.0, inst.pw, inst.m, inst.params, inst.geom,
                              inst.base_link)));
  }

  const double got = std::exp(location::log_objective(
      res.state.qx, res.state.qy, inst.pw, inst.m, inst.params, inst.geom,
      inst.base_link));
  CHECK(got <= best * (1.0 + 1e-3));
  CHECK(best <= got * (1.0 + 1e-3));

  // Slacks are tight at convergence.
  const double sbr_true = (Eigen::Vector3d(res.state.qx, res.state.qy,
                                           inst.params.uav_height) -
                           inst.geom.controller)
                              .squaredNorm();
  CHECK(res.state.s_br == doctest::Approx(sbr_true).epsilon(1e-9));
}

TEST_CASE("diagonal symmetry is a fixed point of the stage") {
  const Scenario sc = default_scenario();
  const ao::Problem pb = ao::make_problem(sc);
  const ao::InitResult init = ao::initialize(pb);
  REQUIRE(init.ok);
  const LinkState base = ao::link_for(pb, init.alloc.q);

  const location::LocationScaState start =
      location::anchor_state(75.0, 75.0, pb.geom, pb.params);
  const location::StageResult res = location::solve_location_stage(
      start, init.alloc.pw, init.alloc.m, pb.params, pb.geom, base, 1e-6, 30);
  // Swapping x and y maps the scenario onto itself, so the optimizer has no
  // reason to leave the diagonal.
  CHECK(res.state.qx == doctest::Approx(res.state.qy).epsilon(1e-6));
}

TEST_CASE("default scenario location run converges with a monotone trace") {
  const Scenario sc = default_scenario();
  const ao::Problem pb = ao::make_problem(sc);
  const ao::InitResult init = ao::initialize(pb);
  REQUIRE(init.ok);
  const LinkState base = ao::link_for(pb, init.alloc.q);
  const location::StageResult res = location::solve_location_stage(
      location::anchor_state(init.alloc.q.x(), init.alloc.q.y(), pb.geom,
                             pb.params),
      init.alloc.pw, init.alloc.m, pb.params, pb.geom, base, 1e-6, 30);
  CHECK(res.status == sca::StageStatus::converged);
  CHECK(res.trace.size() <= 30);
  for (std::size_t i = 1; i < res.trace.size(); ++i) {
    CHECK(res.trace[i].objective_true <=
          res.trace[i - 1].objective_true + 1e-12);
  }
  for (const auto& row : res.trace) {
    CHECK(row.qx >= pb.params.x_min - 1e-9);
    CHECK(row.qx <= pb.params.x_max + 1e-9);
    CHECK(row.qy >= pb.params.y_min - 1e-9);
    CHECK(row.qy <= pb.params.y_max + 1e-9);
  }
}

TEST_CASE("link_at recomputes relay gains and keeps the direct link") {
  const LineInstance inst;
  const LinkState ls =
      location::link_at(3.0, 0.0, inst.geom, inst.params, inst.base_link);
  CHECK(ls.gain_br_sq == doctest::Approx(1.0 / 13.0).epsilon(1e-12));
  CHECK(ls.gain_rd_sq == doctest::Approx(1.0 / 53.0).epsilon(1e-12));
  CHECK(ls.gain_bd_sq == inst.base_link.gain_bd_sq);
  CHECK(ls.noise_bs_w == inst.base_link.noise_bs_w);
  CHECK(ls.noise_dev_w == inst.base_link.noise_dev_w);
}
