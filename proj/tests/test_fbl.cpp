#include "urelay/fbl.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "oracle_helpers.hpp"

using namespace urelay;

namespace {
constexpr double kA2 = 2.0813689810056078;  // (log2 e)^2

double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}
}  // namespace

TEST_CASE("q_func basic values") {
  CHECK(fbl::q_func(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(fbl::q_func(1.959964) ==
        doctest::Approx(0.024999999096442404).epsilon(1e-12));
  CHECK(fbl::q_func(3.7) ==
        doctest::Approx(1.0779973347738834e-4).epsilon(1e-12));
  CHECK(fbl::q_func(8.0) ==
        doctest::Approx(6.2209605742717841e-16).epsilon(1e-12));
}

TEST_CASE("q_func deep tail stays positive") {
  const double q40 = fbl::q_func(40.0);
  CHECK(q40 > 0.0);
  CHECK(q40 < 1e-300);
  CHECK(std::isfinite(fbl::q_func(1e6)));
  CHECK(fbl::q_func(1e6) > 0.0);
}

TEST_CASE("q_func matches long-double erfc across the working range") {
  for (int i = 0; i <= 900; ++i) {
    const double x = -8.0 + i * (45.0 - -8.0) / 900.0;
    const long double ref = oracle::q_ref(x);
    if (ref >= 1e-300L) {
      CHECK(rel_err(fbl::q_func(x), static_cast<double>(ref)) < 1e-11);
    } else {
      const double lref = static_cast<double>(logl(ref));
      CHECK(rel_err(fbl::log_q_func(x), lref) < 1e-11);
    }
  }
}

TEST_CASE("q_func symmetry") {
  for (int i = 0; i <= 160; ++i) {
    const double x = -8.0 + 0.1 * i;
    CHECK(fbl::q_func(x) + fbl::q_func(-x) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("log_q_func deep tail") {
  CHECK(fbl::log_q_func(40.0) ==
        doctest::Approx(static_cast<double>(logl(oracle::q_ref(40.0L))))
            .epsilon(1e-12));
  CHECK(std::exp(fbl::log_q_func(3.0)) ==
        doctest::Approx(fbl::q_func(3.0)).epsilon(1e-12));
}

TEST_CASE("q_inv values and round trips") {
  CHECK(fbl::q_inv(0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(fbl::q_inv(1e-5) ==
        doctest::Approx(4.2648907939228246).epsilon(1e-9));
  CHECK(fbl::q_inv(fbl::q_func(3.7)) == doctest::Approx(3.7).epsilon(1e-9));
  for (double p : {0.9, 0.5, 0.1, 1e-3, 1e-8, 1e-13}) {
    CHECK(rel_err(fbl::q_func(fbl::q_inv(p)), p) < 1e-9);
  }
  CHECK_THROWS_AS(fbl::q_inv(0.0), std::domain_error);
  CHECK_THROWS_AS(fbl::q_inv(1.0), std::domain_error);
  CHECK_THROWS_AS(fbl::q_inv(-0.5), std::domain_error);
}

TEST_CASE("dispersion") {
  CHECK(fbl::dispersion(0.0) == 0.0);
  CHECK(fbl::dispersion(1e12) == doctest::Approx(kA2).epsilon(1e-10));
  CHECK(fbl::dispersion(3.0) ==
        doctest::Approx(1.9512834196927573).epsilon(1e-14));
  CHECK(fbl::dispersion(3.0) == doctest::Approx(kA2 * 15.0 / 16.0));
  CHECK_THROWS_AS(fbl::dispersion(-0.1), std::domain_error);
  double prev = -1.0;
  for (double g = 0.0; g <= 50.0; g += 0.5) {
    const double v = fbl::dispersion(g);
    CHECK(v > prev);
    CHECK(v < kA2);
    prev = v;
  }
}

TEST_CASE("fbl_rate") {
  CHECK(fbl::fbl_rate(3.0, 1e9, 1e-5) ==
        doctest::Approx(2.0).epsilon(1e-3));
  CHECK(fbl::fbl_rate(3.0, 100.0, 0.5) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(fbl::fbl_rate(3.0, 100.0, 1e-5) ==
        doctest::Approx(1.4042444562454684).epsilon(1e-12));
}

TEST_CASE("f_arg values and monotonicity") {
  CHECK(fbl::f_arg(3.0, 100.0, 200.0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(fbl::f_arg(3.0, 100.0, 100.0) ==
        doctest::Approx(7.1587932980781163).epsilon(1e-13));
  CHECK_THROWS_AS(fbl::f_arg(0.0, 100.0, 100.0), std::domain_error);
  CHECK_THROWS_AS(fbl::f_arg(1.0, 0.5, 100.0), std::domain_error);
  double prev = -1e300;
  for (double g = 1.0; g <= 100.0; g += 0.5) {
    const double f = fbl::f_arg(g, 100.0, 100.0);
    CHECK(f > prev);
    prev = f;
  }
}

TEST_CASE("dep values") {
  CHECK(fbl::dep(3.0, 100.0, 200.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(fbl::dep(3.0, 100.0, 100.0) ==
        doctest::Approx(4.0695148989333556e-13).epsilon(1e-11));
  CHECK(fbl::dep(1.0, 10.0, 100.0) > 0.5);
}

TEST_CASE("dep decreasing in gamma and m inside the convex region") {
  const double d = 100.0;
  for (double m : {80.0, 100.0, 150.0}) {
    double prev = 2.0;
    for (double g = 3.0; g <= 30.0; g += 1.0) {
      REQUIRE(fbl::convexity_region_ok(g, m, d));
      const double e = fbl::dep(g, m, d);
      CHECK(e < prev);
      prev = e;
    }
  }
  for (double g : {3.0, 6.0, 12.0}) {
    double prev = 2.0;
    for (double m = 80.0; m <= 200.0; m += 10.0) {
      const double e = fbl::dep(g, m, d);
      CHECK(e < prev);
      prev = e;
    }
  }
}

TEST_CASE("dep second difference in m is nonnegative inside the region") {
  const double d = 100.0;
  for (double g : {3.0, 5.0, 10.0}) {
    for (int m = 80; m <= 160; ++m) {
      REQUIRE(fbl::convexity_region_ok(g, m, d));
      const double second = fbl::dep(g, m + 1, d) - 2.0 * fbl::dep(g, m, d) +
                            fbl::dep(g, m - 1, d);
      CHECK(second >= -1e-12);
    }
  }
}

TEST_CASE("df_dgamma matches central differences") {
  for (double g : {1.0, 3.0, 10.0}) {
    for (double m : {50.0, 100.0}) {
      const double d = 100.0;
      const double h = 1e-6 * (1.0 + g);
      const double fd = oracle::central_diff(
          [&](double x) { return fbl::f_arg(x, m, d); }, g, h);
      CHECK(rel_err(fbl::df_dgamma(g, m, d), fd) < 1e-5);
    }
  }
}

TEST_CASE("df_dgamma positive above capacity and reduced at the boundary") {
  for (double g = 1.0; g <= 100.0; g += 1.0) {
    if (std::log2(1.0 + g) >= 1.0) {
      CHECK(fbl::df_dgamma(g, 100.0, 100.0) > 0.0);
    }
  }
  // Capacity-matched point: the bracket term collapses to 1, leaving
  // sqrt(m / vhat) / (1 + gamma).
  CHECK(fbl::df_dgamma(3.0, 100.0, 200.0) ==
        doctest::Approx(2.5819888974716113).epsilon(1e-13));
  CHECK_THROWS_AS(fbl::df_dgamma(0.0, 100.0, 100.0), std::domain_error);
}

TEST_CASE("ddep_dgamma is the chain rule through the Gaussian density") {
  for (double g : {1.5, 3.0, 8.0}) {
    const double want = -fbl::gauss_pdf(fbl::f_arg(g, 100.0, 100.0)) *
                        fbl::df_dgamma(g, 100.0, 100.0);
    CHECK(fbl::ddep_dgamma(g, 100.0, 100.0) ==
          doctest::Approx(want).epsilon(1e-14));
    CHECK(fbl::ddep_dgamma(g, 100.0, 100.0) < 0.0);
  }
}

TEST_CASE("convexity region") {
  CHECK(fbl::convexity_region_ok(3.0, 100.0, 100.0));
  CHECK_FALSE(fbl::convexity_region_ok(0.5, 100.0, 100.0));
  CHECK_FALSE(fbl::convexity_region_ok(3.0, 10.0, 100.0));

  const auto bad_gamma = fbl::convexity_region_check(0.5, 100.0, 100.0);
  CHECK_FALSE(bad_gamma.ok);
  CHECK(bad_gamma.failed_condition != nullptr);
  const auto good = fbl::convexity_region_check(3.0, 100.0, 100.0);
  CHECK(good.ok);
  CHECK(good.failed_condition == nullptr);
}

TEST_CASE("region thresholds at unit coding rate") {
  // max{1/(5 ln2 (D/m)), 8/(45 (D/m)^2 ln^2 2)} at D/m = 1.
  const double ln2 = std::log(2.0);
  CHECK(1.0 / (5.0 * ln2) ==
        doctest::Approx(0.2885390081777927).epsilon(1e-14));
  CHECK(8.0 / (45.0 * ln2 * ln2) ==
        doctest::Approx(0.3700211521787747).epsilon(1e-14));
}

TEST_CASE("region_gamma_min is the boundary of the region") {
  for (double m : {100.0, 150.0}) {
    const double d = 100.0;
    const double gmin = fbl::region_gamma_min(m, d);
    CHECK(fbl::convexity_region_ok(gmin, m, d));
    CHECK_FALSE(fbl::convexity_region_ok(gmin * 0.999, m, d));
  }
}

TEST_CASE("log_dep tracks dep") {
  CHECK(std::exp(fbl::log_dep(3.0, 100.0, 100.0)) ==
        doctest::Approx(4.0695148989333556e-13).epsilon(1e-11));
  CHECK(std::exp(fbl::log_dep(2.0, 100.0, 100.0)) ==
        doctest::Approx(fbl::dep(2.0, 100.0, 100.0)).epsilon(1e-12));
}

TEST_CASE("df_dgamma random in-region grid against finite differences") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ug(1.0, 40.0);
  std::uniform_real_distribution<double> um(60.0, 300.0);
  int accepted = 0;
  while (accepted < 100) {
    const double g = ug(rng);
    const double m = um(rng);
    const double d = 100.0;
    if (!fbl::convexity_region_ok(g, m, d)) continue;
    ++accepted;
    const double h = 1e-6 * (1.0 + g);
    const double fd = oracle::central_diff(
        [&](double x) { return fbl::f_arg(x, m, d); }, g, h);
    CHECK(rel_err(fbl::df_dgamma(g, m, d), fd) < 1e-4);
  }
}
