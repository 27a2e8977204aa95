#pragma once

namespace skgc {

// All functions throw std::domain_error for x <= 0 (or non-finite input).

double log_gamma(double x);

/// Digamma psi(x) = d/dx log Gamma(x). Upward recurrence to x >= 6, then the
/// asymptotic Bernoulli series; absolute error below 1e-13 on (0, inf).
double digamma(double x);

/// Trigamma psi'(x), same scheme as digamma.
double trigamma(double x);

/// log B(a, b) = log Gamma(a) + log Gamma(b) - log Gamma(a + b).
double log_beta_fn(double a, double b);

}  // namespace skgc
