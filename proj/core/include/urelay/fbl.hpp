#pragma once

// Finite-blocklength coding numerics: Gaussian tail probability, channel
// dispersion, the normal-approximation rate, and the decoding-error
// probability (DEP) of transmitting d_bits over m channel uses at SINR gamma.

namespace urelay::fbl {

// Q(x) = P(N(0,1) > x), evaluated via erfc for |x| <= 8 and via a
// continued-fraction tail in log space beyond that. Never underflows to
// zero for finite x: the deep tail is floored at the smallest positive
// double. Monotone decreasing, Q(0) = 1/2.
double q_func(double x);

// log Q(x), accurate for the deep tail (x up to ~40 and beyond) where
// q_func itself would lose range.
double log_q_func(double x);

// Inverse of q_func on (0,1): bracketed bisection in log space plus a
// Newton polish. q_func(q_inv(p)) = p to ~1e-12 relative.
double q_inv(double p);

// Gaussian density phi(x) = exp(-x^2/2)/sqrt(2*pi).
double gauss_pdf(double x);

// Channel dispersion V(gamma) = (log2 e)^2 * (1 - (1+gamma)^-2).
double dispersion(double gamma);

// Normal-approximation achievable rate in bits per channel use:
// log2(1+gamma) - q_inv(eps) * sqrt(V(gamma)/m).
double fbl_rate(double gamma, double m, double eps);

// Argument of the Q-function in the DEP approximation:
// f = ln2 * sqrt(m / (1-(1+gamma)^-2)) * (log2(1+gamma) - d_bits/m).
double f_arg(double gamma, double m, double d_bits);

// DEP of one decoding step: Q(f_arg(gamma, m, d_bits)).
double dep(double gamma, double m, double d_bits);

// Closed-form derivative of f_arg with respect to gamma. With u = 1+gamma:
// df/dgamma = sqrt(m) / (u * sqrt(1-u^-2)) * (1 - (ln u - d_bits*ln2/m) / (u^2-1)).
// Positive whenever gamma > 0.
double df_dgamma(double gamma, double m, double d_bits);

// Derivative of dep with respect to gamma: -gauss_pdf(f_arg) * df_dgamma.
double ddep_dgamma(double gamma, double m, double d_bits);

// Convexity region for the DEP at an operating point: the conditions under
// which dep is jointly convex in blocklength and transmit power. All of:
//   dep <= 0.1,  gamma >= 1,  log2(1+gamma) >= d_bits/m,
//   gamma >= max{ 1/(5*ln2*(d/m)), 8/(45*(d/m)^2*ln2^2) }.
struct RegionCheck {
  bool ok;
  const char* failed_condition;  // nullptr when ok
};
RegionCheck convexity_region_check(double gamma, double m, double d_bits);
bool convexity_region_ok(double gamma, double m, double d_bits);

// Smallest SINR at which all convexity-region conditions hold for the given
// blocklength and payload (found by bisection on the dep <= 0.1 condition).
double region_gamma_min(double m, double d_bits);

// log of dep(gamma, m, d_bits), stable for deep-tail values.
double log_dep(double gamma, double m, double d_bits);

}  // namespace urelay::fbl
