#pragma once

#include <cmath>
#include <stdexcept>

namespace skgc {

/// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before any logit or log.
inline constexpr double kProbClamp = 1e-6;

struct BetaParams {
  double a = 1.0;
  double b = 1.0;
};

/// Binary Concrete (relaxed Bernoulli) with success probability `pi` and temperature `lambda`.
struct ConcreteParams {
  double pi = 0.5;
  double lambda = 1.0;
};

struct GaussianParams {
  double mu = 0.0;
  double sigma = 1.0;
};

void validate(const BetaParams& p);
void validate(const ConcreteParams& p);
void validate(const GaussianParams& p);

double clamp_probability(double p);
double logit(double p);
double sigmoid(double x);
/// log(1 + exp(x)) without overflow.
double softplus(double x);
/// Inverse of softplus for x > 0.
double softplus_inverse(double x);

/// A reparameterized draw together with its derivatives w.r.t. the two
/// distribution parameters, in declaration order of the params struct.
struct PathwiseSample {
  double value = 0.0;
  double d_first = 0.0;
  double d_second = 0.0;
};

enum class BetaSampler { kumaraswamy, implicit_beta };

/// Kumaraswamy(a, b) inverse-CDF draw: v = (1 - (1 - u)^(1/b))^(1/a).
PathwiseSample sample_kumaraswamy(const BetaParams& q, double u);

/// Exact Beta(a, b) draw by inverting the regularized incomplete Beta function.
/// Gradients come from the implicit function theorem: dv/da = -(dI/da) / pdf(v).
PathwiseSample sample_beta_implicit(const BetaParams& q, double u);

/// Draw in (kProbClamp, 1 - kProbClamp); derivatives are zero when the clamp is active.
PathwiseSample sample_beta_reparam(const BetaParams& q, double u,
                                   BetaSampler sampler = BetaSampler::kumaraswamy);

struct BetaKlGradient {
  double d_a = 0.0;
  double d_b = 0.0;
};

double kl_beta(const BetaParams& q, const BetaParams& p);
/// Partial derivatives of kl_beta(q, p) w.r.t. q.a and q.b.
BetaKlGradient kl_beta_gradient(const BetaParams& q, const BetaParams& p);

/// Logistic log-density over the pre-sigmoid variable y, written in terms of the
/// log odds ratio: log(lambda) - lambda*y + log_ratio - 2 log(1 + exp(-lambda*y + log_ratio)).
double concrete_log_density_ratio(double y, double log_ratio, double lambda);

/// Density of y for ConcreteParams: the odds ratio is pi / (1 - pi), matching sample_concrete.
double concrete_log_density(double y, const ConcreteParams& p);

struct ConcreteSample {
  double y = 0.0;
  double z = 0.5;
  double dy_dpi = 0.0;
};

/// y = (logit(pi) + log u - log(1 - u)) / lambda, z = sigmoid(y).
ConcreteSample sample_concrete(const ConcreteParams& p, double u);

/// Monte Carlo KL[q || p] over y, y_i ~ q. `next_uniform` yields draws in (0, 1).
template <class UniformSource>
double kl_concrete_mc(const ConcreteParams& q, const ConcreteParams& p, int n_samples,
                      UniformSource&& next_uniform) {
  validate(q);
  validate(p);
  if (n_samples < 1) {
    throw std::invalid_argument("kl_concrete_mc: n_samples must be >= 1");
  }
  double total = 0.0;
  for (int i = 0; i < n_samples; ++i) {
    const double y = sample_concrete(q, next_uniform()).y;
    total += concrete_log_density(y, q) - concrete_log_density(y, p);
  }
  return total / n_samples;
}

double kl_gaussian(const GaussianParams& q, const GaussianParams& p);

struct GaussianKlGradient {
  double d_mu = 0.0;
  double d_sigma = 0.0;
};
GaussianKlGradient kl_gaussian_gradient(const GaussianParams& q, const GaussianParams& p);

/// mu + sigma * eps; d_first = d/dmu = 1, d_second = d/dsigma = eps.
PathwiseSample sample_gaussian_reparam(const GaussianParams& q, double eps);

}  // namespace skgc
