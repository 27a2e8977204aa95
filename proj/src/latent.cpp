#include "skgc/latent.hpp"

#include <cmath>
#include <stdexcept>

#include "skgc/distributions.hpp"

namespace skgc {

void TruncationConfig::validate() const {
  if (K < 1) throw std::invalid_argument("TruncationConfig: K must be >= 1");
  if (!(alpha_qry > 0.0) || !(alpha_ans > 0.0)) throw std::invalid_argument("TruncationConfig: alphas must be positive");
  if (!(sigma_prior > 0.0)) throw std::invalid_argument("TruncationConfig: sigma_prior must be positive");
}

Eigen::VectorXd stick_breaking(const Eigen::VectorXd& v) {
  Eigen::VectorXd pi(v.size());
  double acc = 1.0;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (!(v(k) > 0.0 && v(k) <= 1.0)) {
      throw std::invalid_argument("stick_breaking: element " + std::to_string(k) + " outside (0, 1]");
    }
    acc *= v(k);
    pi(k) = acc;
  }
  return pi;
}

LatentSample sample_prior_row(const TruncationConfig& cfg, Role role, const NoiseStream& noise,
                              std::uint64_t row) {
  cfg.validate();
  const double alpha = cfg.alpha(role == Role::query);
  const auto step = static_cast<std::uint64_t>(role);
  const auto K = static_cast<Eigen::Index>(cfg.K);
  LatentSample s;
  s.v.resize(K);
  s.z.resize(K);
  s.w.resize(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto col = static_cast<std::uint64_t>(k);
    // Beta(alpha, 1) has CDF v^alpha.
    s.v(k) = std::pow(noise.uniform(NoisePurpose::prior, step, row, 3 * col), 1.0 / alpha);
    if (s.v(k) <= 0.0) s.v(k) = kProbClamp;
  }
  s.pi = stick_breaking(s.v);
  for (Eigen::Index k = 0; k < K; ++k) {
    const auto col = static_cast<std::uint64_t>(k);
    s.z(k) = noise.uniform(NoisePurpose::prior, step, row, 3 * col + 1) < s.pi(k) ? 1.0 : 0.0;
    s.w(k) = cfg.sigma_prior * noise.normal(NoisePurpose::prior, step, row, 3 * col + 2);
  }
  return s;
}

double expected_active_communities(double alpha, int K) {
  const double r = alpha / (alpha + 1.0);
  double total = 0.0, term = 1.0;
  for (int k = 1; k <= K; ++k) {
    term *= r;
    total += term;
  }
  return total;
}

SparseFeature gate(const Eigen::VectorXd& z, const Eigen::VectorXd& w) {
  if (z.size() != w.size()) throw std::invalid_argument("gate: length mismatch");
  return {w.cwiseProduct(z)};
}

double osbm_link_prob(const Eigen::VectorXd& z_i, const Eigen::VectorXd& z_j, const Eigen::MatrixXd& W) {
  if (W.rows() != z_i.size() || W.cols() != z_j.size()) throw std::invalid_argument("osbm_link_prob: shape mismatch");
  return sigmoid(z_i.dot(W * z_j));
}

double mb_log_pmf(const Eigen::VectorXd& z, const Eigen::VectorXd& pi) {
  if (z.size() != pi.size()) throw std::invalid_argument("mb_log_pmf: length mismatch");
  double total = 0.0;
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    if (!(pi(k) > 0.0 && pi(k) < 1.0)) throw std::invalid_argument("mb_log_pmf: pi must lie in (0, 1)");
    total += z(k) * std::log(pi(k)) + (1.0 - z(k)) * std::log1p(-pi(k));
  }
  return total;
}

}  // namespace skgc
