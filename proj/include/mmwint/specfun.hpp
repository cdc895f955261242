#pragma once

// Special functions used by the analytic engine. Everything here is a pure
// function of its arguments and safe to call concurrently.

namespace mmwint::specfun {

// ln Γ(x) for x > 0 (Lanczos, g = 7, with reflection below 1/2).
double log_gamma(double x);

// Regularized upper incomplete gamma Q(m, m·x): the CCDF at x of a unit-mean
// Gamma(shape m, rate m) variable, i.e. of the squared Nakagami-m fading gain.
double gamma_reg_upper(double m, double x);

// Inverse of gamma_reg_upper in x: returns x ≥ 0 with gamma_reg_upper(m, x) = p.
double gamma_reg_upper_inv(double m, double p);

// Kummer's confluent hypergeometric function ₁F₁(a; b; z).
double hyp1f1(double a, double b, double z);

// Gaussian tail Q(x) = ½·erfc(x/√2).
double q_function(double x);

} // namespace mmwint::specfun
