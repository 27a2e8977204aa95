#include "skgc/distributions.hpp"

#include <algorithm>
#include <boost/math/special_functions/beta.hpp>
#include <string>

#include "skgc/special_functions.hpp"

namespace skgc {

namespace {

bool positive_finite(double x) { return x > 0.0 && std::isfinite(x); }

[[noreturn]] void invalid(const std::string& what) { throw std::invalid_argument(what); }

}  // namespace

void validate(const BetaParams& p) {
  if (!positive_finite(p.a) || !positive_finite(p.b)) {
    invalid("BetaParams: a and b must be positive, got (" + std::to_string(p.a) + ", " +
            std::to_string(p.b) + ")");
  }
}

void validate(const ConcreteParams& p) {
  if (!(p.pi > 0.0 && p.pi < 1.0)) invalid("ConcreteParams: pi must lie in (0, 1)");
  if (!positive_finite(p.lambda)) invalid("ConcreteParams: lambda must be positive");
}

void validate(const GaussianParams& p) {
  if (!std::isfinite(p.mu)) invalid("GaussianParams: mu must be finite");
  if (!positive_finite(p.sigma)) invalid("GaussianParams: sigma must be positive");
}

double clamp_probability(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

double logit(double p) {
  p = clamp_probability(p);
  return std::log(p) - std::log1p(-p);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 30.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double softplus_inverse(double x) {
  if (!(x > 0.0)) invalid("softplus_inverse: argument must be positive");
  if (x > 30.0) return x + std::log(-std::expm1(-x));
  return std::log(std::expm1(x));
}

PathwiseSample sample_kumaraswamy(const BetaParams& q, double u) {
  validate(q);
  if (!(u > 0.0 && u < 1.0)) invalid("sample_kumaraswamy: u must lie in (0, 1)");
  const double log1m_u = std::log1p(-u);
  const double t = std::exp(log1m_u / q.b);  // (1 - u)^(1/b)
  const double s = -std::expm1(log1m_u / q.b);  // 1 - t
  const double v = std::exp(std::log(s) / q.a);
  PathwiseSample out;
  out.value = v;
  out.d_first = -v * std::log(s) / (q.a * q.a);
  out.d_second = v / (q.a * s) * t * log1m_u / (q.b * q.b);
  return out;
}

PathwiseSample sample_beta_implicit(const BetaParams& q, double u) {
  validate(q);
  if (!(u > 0.0 && u < 1.0)) invalid("sample_beta_implicit: u must lie in (0, 1)");
  namespace bm = boost::math;
  const double v = bm::ibeta_inv(q.a, q.b, u);
  const double pdf = bm::ibeta_derivative(q.a, q.b, v);
  PathwiseSample out;
  out.value = v;
  if (!(pdf > 0.0) || !std::isfinite(pdf)) return out;
  // dI/da and dI/db at fixed v by central differences of the regularized incomplete Beta.
  const double ha = 1e-6 * std::max(1.0, q.a);
  const double hb = 1e-6 * std::max(1.0, q.b);
  const double dI_da = (bm::ibeta(q.a + ha, q.b, v) - bm::ibeta(q.a - ha, q.b, v)) / (2.0 * ha);
  const double dI_db = (bm::ibeta(q.a, q.b + hb, v) - bm::ibeta(q.a, q.b - hb, v)) / (2.0 * hb);
  out.d_first = -dI_da / pdf;
  out.d_second = -dI_db / pdf;
  return out;
}

PathwiseSample sample_beta_reparam(const BetaParams& q, double u, BetaSampler sampler) {
  PathwiseSample s = sampler == BetaSampler::kumaraswamy ? sample_kumaraswamy(q, u)
                                                         : sample_beta_implicit(q, u);
  if (!(s.value > kProbClamp && s.value < 1.0 - kProbClamp)) {
    s.value = clamp_probability(s.value);
    s.d_first = 0.0;
    s.d_second = 0.0;
  }
  return s;
}

double kl_beta(const BetaParams& q, const BetaParams& p) {
  validate(q);
  validate(p);
  const double psi_sum = digamma(q.a + q.b);
  const double kl = log_beta_fn(p.a, p.b) - log_beta_fn(q.a, q.b) +
                    (q.a - p.a) * (digamma(q.a) - psi_sum) + (q.b - p.b) * (digamma(q.b) - psi_sum);
  return std::max(kl, 0.0);
}

BetaKlGradient kl_beta_gradient(const BetaParams& q, const BetaParams& p) {
  validate(q);
  validate(p);
  // d/da of -log B(a,b) cancels the (psi(a) - psi(a+b)) term from the product rule.
  const double tri_sum = trigamma(q.a + q.b);
  BetaKlGradient g;
  g.d_a = (q.a - p.a) * (trigamma(q.a) - tri_sum) - (q.b - p.b) * tri_sum;
  g.d_b = (q.b - p.b) * (trigamma(q.b) - tri_sum) - (q.a - p.a) * tri_sum;
  return g;
}

double concrete_log_density_ratio(double y, double log_ratio, double lambda) {
  if (!positive_finite(lambda)) invalid("concrete_log_density: lambda must be positive");
  const double t = -lambda * y + log_ratio;
  return std::log(lambda) + t - 2.0 * softplus(t);
}

double concrete_log_density(double y, const ConcreteParams& p) {
  validate(p);
  return concrete_log_density_ratio(y, logit(p.pi), p.lambda);
}

ConcreteSample sample_concrete(const ConcreteParams& p, double u) {
  validate(p);
  if (!(u > 0.0 && u < 1.0)) invalid("sample_concrete: u must lie in (0, 1)");
  const double pi = clamp_probability(p.pi);
  const double noise = std::log(u) - std::log1p(-u);
  ConcreteSample s;
  s.y = (logit(pi) + noise) / p.lambda;
  s.z = sigmoid(s.y);
  s.dy_dpi = (pi == p.pi) ? 1.0 / (p.lambda * pi * (1.0 - pi)) : 0.0;
  return s;
}

double kl_gaussian(const GaussianParams& q, const GaussianParams& p) {
  validate(q);
  validate(p);
  const double diff = q.mu - p.mu;
  const double kl = std::log(p.sigma / q.sigma) +
                    (q.sigma * q.sigma + diff * diff) / (2.0 * p.sigma * p.sigma) - 0.5;
  return std::max(kl, 0.0);
}

GaussianKlGradient kl_gaussian_gradient(const GaussianParams& q, const GaussianParams& p) {
  validate(q);
  validate(p);
  const double var_p = p.sigma * p.sigma;
  return {(q.mu - p.mu) / var_p, -1.0 / q.sigma + q.sigma / var_p};
}

PathwiseSample sample_gaussian_reparam(const GaussianParams& q, double eps) {
  validate(q);
  return {q.mu + q.sigma * eps, 1.0, eps};
}

}  // namespace skgc
