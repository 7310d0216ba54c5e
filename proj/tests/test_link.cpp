#include "urelay/link.hpp"

#include <stdexcept>

#include "doctest.h"

using namespace urelay;

namespace {
LinkState manual(double h_br, double h_rd, double h_bd, double noise_bs,
                 double noise_dev) {
  return {h_br, h_rd, h_bd, noise_bs, noise_dev};
}
}  // namespace

TEST_CASE("link_state distances and gains") {
  SystemParams sys;
  sys.beta0_sq = 1e-5;
  Geometry geom;
  geom.controller << 0, 0, 0;
  geom.device << 200, 0, 0;
  geom.uav << 0, 0, 80;
  const LinkState ls = link_state(sys, geom, 1e-13);
  CHECK(ls.gain_br_sq == doctest::Approx(1e-5 / 6400.0).epsilon(1e-14));
  CHECK(ls.gain_br_sq == doctest::Approx(1.5625e-9).epsilon(1e-14));
  CHECK(ls.gain_bd_sq == 1e-13);
  CHECK(ls.noise_bs_w == sys.noise_bs_w);

  geom.uav << 30, 30, 80;
  const LinkState ls2 = link_state(sys, geom, 1e-13);
  CHECK(ls2.gain_rd_sq == doctest::Approx(1e-5 / 36200.0).epsilon(1e-14));
}

TEST_CASE("link_state rejects degenerate geometry") {
  SystemParams sys;
  Geometry geom;
  geom.uav = geom.controller;
  CHECK_THROWS_AS(link_state(sys, geom, 1e-13), std::invalid_argument);
  geom = Geometry{};
  CHECK_THROWS_AS(link_state(sys, geom, 0.0), std::invalid_argument);
}

TEST_CASE("sinr_device_p1") {
  const LinkState ls = manual(1.0, 1.0, 1.0, 1.0, 1.0);
  CHECK(sinr_device_p1(ls, 0.0, 1.0) == 0.0);
  CHECK(sinr_device_p1(ls, 3.0, 1.0) == doctest::Approx(1.5));
  const LinkState ls2 = manual(1.0, 1.0, 1.0, 2.0, 1.0);
  CHECK(sinr_device_p1(ls2, 2.0, 0.0) == doctest::Approx(1.0));
}

TEST_CASE("snr_uav") {
  const LinkState ls = manual(0.5, 1.0, 1.0, 2.0, 1.0);
  CHECK(snr_uav(ls, 0.0) == 0.0);
  CHECK(snr_uav(ls, 4.0) == doctest::Approx(1.0));
  CHECK(snr_uav(ls, 8.0) == doctest::Approx(2.0 * snr_uav(ls, 4.0)));
}

TEST_CASE("sinr_uav_s1") {
  const LinkState ls = manual(1.0, 1.0, 1.0, 1.0, 1.0);
  CHECK(sinr_uav_s1(ls, 3.0, 1.0) == doctest::Approx(1.5));
  CHECK(sinr_uav_s1(ls, 3.0, 0.0) == doctest::Approx(3.0));
  const LinkState huge = manual(1e12, 1.0, 1.0, 1.0, 1.0);
  CHECK(sinr_uav_s1(huge, 2.0, 2.0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("sinr_uav_failed_sic") {
  const LinkState ls = manual(1.0, 1.0, 1.0, 1.0, 1.0);
  CHECK(sinr_uav_failed_sic(ls, 1.0, 3.0) == doctest::Approx(1.5));
  CHECK(sinr_uav_failed_sic(ls, 0.0, 4.0) == doctest::Approx(snr_uav(ls, 4.0)));
  const LinkState huge = manual(1e12, 1.0, 1.0, 1.0, 1.0);
  CHECK(sinr_uav_failed_sic(huge, 2.0, 2.0) ==
        doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("snr_device_p2") {
  const LinkState ls = manual(1.0, 0.1, 1.0, 1.0, 1.0);
  CHECK(snr_device_p2(ls, 0.0) == 0.0);
  CHECK(snr_device_p2(ls, 10.0) == doctest::Approx(1.0));

  SystemParams sys;
  sys.beta0_sq = 1e-5;
  Geometry geom;
  geom.device << 100, 0, 0;
  geom.uav << 40, 0, 30;
  const double s_rd = (geom.uav - geom.device).squaredNorm();
  const LinkState a = link_state(sys, geom, 1e-13);
  geom.uav << 100 - std::sqrt(s_rd / 2.0 - 900.0), 0, 30;
  const LinkState b = link_state(sys, geom, 1e-13);
  CHECK(snr_device_p2(b, 1.0) ==
        doctest::Approx(2.0 * snr_device_p2(a, 1.0)).epsilon(1e-9));
}

TEST_CASE("sic_order_ok") {
  CHECK(sic_order_ok(manual(1e-9, 1.0, 1e-12, 1.0, 1.0)));
  CHECK(sic_order_ok(manual(1e-9, 1.0, 1e-9, 1.0, 1.0)));
  CHECK_FALSE(sic_order_ok(manual(1e-12, 1.0, 1e-9, 1.0, 1.0)));
}

TEST_CASE("interference-limited sinr bounds") {
  const LinkState ls = manual(2.5, 1.0, 1.0, 0.3, 1.0);
  for (double p1 : {0.5, 2.0}) {
    for (double p2 : {0.4, 1.7}) {
      CHECK(sinr_uav_s1(ls, p1, p2) <= p1 / p2);
      CHECK(sinr_uav_failed_sic(ls, p1, p2) <= p2 / p1);
    }
  }
}

TEST_CASE("moving toward the device trades the two relay gains") {
  SystemParams sys;
  Geometry geom;
  double prev_br = 1e300, prev_rd = 0.0;
  for (double t = 0.1; t <= 0.9; t += 0.1) {
    geom.uav = geom.controller + t * (geom.device - geom.controller);
    geom.uav.z() = 80.0;
    const LinkState ls = link_state(sys, geom, 1e-13);
    CHECK(ls.gain_br_sq < prev_br);
    CHECK(ls.gain_rd_sq > prev_rd);
    prev_br = ls.gain_br_sq;
    prev_rd = ls.gain_rd_sq;
  }
}
