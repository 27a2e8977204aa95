#include <boost/math/constants/constants.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>
#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "skgc/special_functions.hpp"

using namespace skgc;

namespace {

constexpr double kEuler = 0.57721566490153286061;

// B(a, b) by direct integration of u^(a-1) (1-u)^(b-1).
double beta_by_quadrature(double a, double b) {
  boost::math::quadrature::tanh_sinh<double> integrator;
  // xc is the signed distance to the nearer endpoint, which keeps 1 - u exact near 1.
  return integrator.integrate(
      [&](double u, double xc) {
        const double v = xc > 0.0 ? xc : 1.0 - u;
        return std::pow(u, a - 1.0) * std::pow(v, b - 1.0);
      },
      0.0, 1.0);
}

}  // namespace

TEST_CASE("log_beta_fn known values") {
  CHECK(log_beta_fn(1.0, 1.0) == doctest::Approx(0.0));
  CHECK(log_beta_fn(2.0, 1.0) == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
  CHECK(log_beta_fn(0.5, 0.5) == doctest::Approx(std::log(M_PI)).epsilon(1e-12));
  CHECK(std::exp(log_beta_fn(2.0, 1.0)) == doctest::Approx(beta_by_quadrature(2.0, 1.0)).epsilon(1e-10));
  CHECK(std::exp(log_beta_fn(0.5, 0.5)) == doctest::Approx(beta_by_quadrature(0.5, 0.5)).epsilon(1e-9));
}

TEST_CASE("log_beta_fn agrees with quadrature across scales") {
  for (double a : {0.7, 1.5, 3.0, 8.0})
    for (double b : {0.6, 1.0, 2.5, 6.0}) {
      INFO(a << " " << b);
      CHECK(log_beta_fn(a, b) == doctest::Approx(std::log(beta_by_quadrature(a, b))).epsilon(1e-9));
    }
  // Far from 1 the quadrature loses precision; compare against lgamma sums instead.
  for (double a : {1e-3, 0.01, 50.0, 1e3})
    for (double b : {1e-3, 2.0, 1e3}) {
      const double ref = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
      CHECK(std::abs(log_beta_fn(a, b) - ref) <= 1e-10 * std::max(1.0, std::abs(ref)));
    }
}

TEST_CASE("digamma constants and recurrence") {
  CHECK(digamma(1.0) == doctest::Approx(-kEuler).epsilon(1e-12));
  CHECK(digamma(2.0) == doctest::Approx(1.0 - kEuler).epsilon(1e-12));
  CHECK(digamma(0.5) == doctest::Approx(-kEuler - 2.0 * std::log(2.0)).epsilon(1e-12));
  for (double x = 0.1; x <= 100.0; x *= 1.37) {
    INFO(x);
    CHECK(std::abs(digamma(x + 1.0) - digamma(x) - 1.0 / x) < 1e-9);
  }
}

TEST_CASE("digamma matches a high-order finite difference of log_gamma") {
  for (double x : {0.3, 1.0, 2.0, 4.7, 12.0, 60.0}) {
    const double h = 1e-3 * std::max(1.0, x);
    // Five-point stencil, truncation error O(h^4).
    const double fd = (-std::lgamma(x + 2 * h) + 8 * std::lgamma(x + h) - 8 * std::lgamma(x - h) +
                       std::lgamma(x - 2 * h)) /
                      (12 * h);
    INFO(x);
    CHECK(digamma(x) == doctest::Approx(fd).epsilon(1e-8));
  }
}

TEST_CASE("digamma and trigamma agree with an independent library") {
  for (double x = 1e-3; x < 1e4; x *= 1.91) {
    INFO(x);
    CHECK(std::abs(digamma(x) - boost::math::digamma(x)) <= 1e-10 * std::max(1.0, std::abs(boost::math::digamma(x))));
    CHECK(trigamma(x) == doctest::Approx(boost::math::trigamma(x)).epsilon(1e-10));
  }
  CHECK(trigamma(1.0) == doctest::Approx(M_PI * M_PI / 6.0).epsilon(1e-12));
}

TEST_CASE("domain errors") {
  CHECK_THROWS_AS(digamma(0.0), std::domain_error);
  CHECK_THROWS_AS(digamma(-1.5), std::domain_error);
  CHECK_THROWS_AS(trigamma(0.0), std::domain_error);
  CHECK_THROWS_AS(log_gamma(-2.0), std::domain_error);
  CHECK_THROWS_AS(log_beta_fn(0.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(log_beta_fn(1.0, std::nan("")), std::domain_error);
}
