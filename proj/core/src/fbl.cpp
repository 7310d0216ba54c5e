#include "urelay/fbl.hpp"

#include <cfloat>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace urelay::fbl {

namespace {

constexpr double kLn2 = 0.69314718055994530942;
constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5*ln(2*pi)
constexpr double kTailSwitch = 8.0;

// log Q(x) for x >= kTailSwitch via the Laplace continued fraction
// Q(x) = phi(x) / (x + 1/(x + 2/(x + 3/(...)))), evaluated backward.
double log_q_tail(double x) {
  double t = 0.0;
  for (int k = 120; k >= 1; --k) t = static_cast<double>(k) / (x + t);
  return -0.5 * x * x - kHalfLog2Pi - std::log(x + t);
}

}  // namespace

double q_func(double x) {
  if (std::isnan(x)) throw std::domain_error("q_func: NaN argument");
  if (x < 0.0) return 1.0 - q_func(-x);
  if (x <= kTailSwitch) return 0.5 * std::erfc(x * M_SQRT1_2);
  if (x == std::numeric_limits<double>::infinity()) return DBL_TRUE_MIN;
  double q = std::exp(log_q_tail(x));
  return q > 0.0 ? q : DBL_TRUE_MIN;
}

double log_q_func(double x) {
  if (std::isnan(x)) throw std::domain_error("log_q_func: NaN argument");
  if (x >= kTailSwitch) {
    if (x == std::numeric_limits<double>::infinity())
      return -std::numeric_limits<double>::infinity();
    return log_q_tail(x);
  }
  return std::log(q_func(x));
}

double gauss_pdf(double x) { return std::exp(-0.5 * x * x - kHalfLog2Pi); }

double q_inv(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("q_inv: p outside (0,1)");
  if (p == 0.5) return 0.0;
  if (p > 0.5) return -q_inv(1.0 - p);
  const double target = std::log(p);
  double lo = 0.0, hi = 45.0;
  for (int i = 0; i < 120 && hi - lo > 1e-14 * (1.0 + lo); ++i) {
    const double mid = 0.5 * (lo + hi);
    (log_q_func(mid) > target ? lo : hi) = mid;
  }
  double x = 0.5 * (lo + hi);
  // Newton polish on log Q; d(log Q)/dx = -phi(x)/Q(x).
  for (int i = 0; i < 3; ++i) {
    const double lq = log_q_func(x);
    const double dlq = -std::exp(-0.5 * x * x - kHalfLog2Pi - lq);
    const double step = (lq - target) / dlq;
    if (!std::isfinite(step)) break;
    x -= step;
    if (std::abs(step) <= 1e-13 * (1.0 + std::abs(x))) break;
  }
  return x;
}

double dispersion(double gamma) {
  if (gamma < 0.0) throw std::domain_error("dispersion: negative SINR");
  const double u = 1.0 + gamma;
  const double a = 1.0 / kLn2;
  return a * a * gamma * (gamma + 2.0) / (u * u);
}

double fbl_rate(double gamma, double m, double eps) {
  if (m < 1.0) throw std::domain_error("fbl_rate: m < 1");
  return std::log2(1.0 + gamma) - q_inv(eps) * std::sqrt(dispersion(gamma) / m);
}

double f_arg(double gamma, double m, double d_bits) {
  if (gamma <= 0.0) throw std::domain_error("f_arg: SINR must be positive");
  if (m < 1.0) throw std::domain_error("f_arg: m < 1");
  const double u = 1.0 + gamma;
  const double vhat = gamma * (gamma + 2.0) / (u * u);  // 1-(1+gamma)^-2
  return std::sqrt(m / vhat) * (std::log1p(gamma) - d_bits * kLn2 / m);
}

double dep(double gamma, double m, double d_bits) {
  return q_func(f_arg(gamma, m, d_bits));
}

double df_dgamma(double gamma, double m, double d_bits) {
  if (gamma <= 0.0) throw std::domain_error("df_dgamma: SINR must be positive");
  const double u = 1.0 + gamma;
  const double usq_vhat = gamma * (gamma + 2.0);  // u^2 - 1
  const double vhat = usq_vhat / (u * u);
  const double bracket = 1.0 - (std::log1p(gamma) - d_bits * kLn2 / m) / usq_vhat;
  return std::sqrt(m / vhat) / u * bracket;
}

double ddep_dgamma(double gamma, double m, double d_bits) {
  return -gauss_pdf(f_arg(gamma, m, d_bits)) * df_dgamma(gamma, m, d_bits);
}

RegionCheck convexity_region_check(double gamma, double m, double d_bits) {
  if (gamma < 1.0) return {false, "gamma >= 1"};
  const double rate = d_bits / m;
  if (std::log2(1.0 + gamma) < rate) return {false, "capacity >= coding rate"};
  const double th1 = 1.0 / (5.0 * kLn2 * rate);
  const double th2 = 8.0 / (45.0 * rate * rate * kLn2 * kLn2);
  if (gamma < std::max(th1, th2)) return {false, "gamma >= rate threshold"};
  if (dep(gamma, m, d_bits) > 0.1) return {false, "dep <= 0.1"};
  return {true, nullptr};
}

bool convexity_region_ok(double gamma, double m, double d_bits) {
  return convexity_region_check(gamma, m, d_bits).ok;
}

double region_gamma_min(double m, double d_bits) {
  if (m < 1.0) throw std::domain_error("region_gamma_min: m < 1");
  if (d_bits <= 0.0) throw std::domain_error("region_gamma_min: d_bits <= 0");
  const double rate = d_bits / m;
  const double th1 = 1.0 / (5.0 * kLn2 * rate);
  const double th2 = 8.0 / (45.0 * rate * rate * kLn2 * kLn2);
  // Smallest gamma with dep <= 0.1: solve f_arg(gamma) = q_inv(0.1);
  // f_arg is increasing in gamma and zero at capacity.
  const double target = q_inv(0.1);
  double lo = std::exp2(rate) - 1.0;
  double hi = std::max(2.0 * lo, 2.0);
  for (int i = 0; i < 200 && f_arg(hi, m, d_bits) < target; ++i) hi *= 2.0;
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f_arg(mid, m, d_bits) < target ? lo : hi) = mid;
  }
  return std::max({1.0, th1, th2, hi});
}

double log_dep(double gamma, double m, double d_bits) {
  return log_q_func(f_arg(gamma, m, d_bits));
}

}  // namespace urelay::fbl
