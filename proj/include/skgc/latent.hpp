#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "skgc/noise.hpp"

namespace skgc {

/// One query or answer row of the latent model. pi_k = prod_{j<=k} v_j.
struct LatentSample {
  Eigen::VectorXd v;
  Eigen::VectorXd pi;
  Eigen::VectorXd z;
  Eigen::VectorXd w;
};

/// f = w (.) z
struct SparseFeature {
  Eigen::VectorXd f;
};

struct TruncationConfig {
  int K = 32;
  double alpha_qry = 100.0;
  double alpha_ans = 20.0;
  /// Prior std of the strengths w.
  double sigma_prior = 1.0;

  void validate() const;
  double alpha(bool query_role) const { return query_role ? alpha_qry : alpha_ans; }
};

enum class Role { query, answer };

/// Cumulative products; every v_j must lie in (0, 1].
Eigen::VectorXd stick_breaking(const Eigen::VectorXd& v);

/// Generative draw: v_k ~ Beta(alpha_role, 1), pi by stick breaking, hard
/// z_k ~ Bernoulli(pi_k), w_k ~ N(0, sigma_prior^2). Deterministic in (noise seed, role, row).
LatentSample sample_prior_row(const TruncationConfig& cfg, Role role, const NoiseStream& noise,
                              std::uint64_t row);

/// sum_{k=1..K} (alpha / (alpha + 1))^k, the expected number of active communities.
double expected_active_communities(double alpha, int K);

SparseFeature gate(const Eigen::VectorXd& z, const Eigen::VectorXd& w);

/// sigmoid(z_i^T W z_j)
double osbm_link_prob(const Eigen::VectorXd& z_i, const Eigen::VectorXd& z_j, const Eigen::MatrixXd& W);

/// log MB(z | pi) = sum_k z_k log pi_k + (1 - z_k) log(1 - pi_k)
double mb_log_pmf(const Eigen::VectorXd& z, const Eigen::VectorXd& pi);

}  // namespace skgc
