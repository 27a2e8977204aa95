#pragma once

#include <Eigen/Dense>
#include <string>

#include "skgc/autodiff.hpp"
#include "skgc/nn.hpp"

namespace skgc {

/// MLP from the K gated latent features to a D-dimensional representation.
class DecoderNet {
 public:
  DecoderNet(ParameterStore& store, const std::string& prefix, int K, int hidden, int D, Activation act,
             const NoiseStream& noise);

  ad::Var forward(ad::Tape& tape, const ad::Var& f) const;
  int K() const { return mlp_.in_dim(); }
  int D() const { return mlp_.out_dim(); }
  const Mlp& mlp() const { return mlp_; }

 private:
  Mlp mlp_;
};

Eigen::VectorXd decode(const DecoderNet& net, const Eigen::VectorXd& f);

struct SimilarityConfig {
  /// Additive margin, applied to positives only.
  double gamma = 0.02;
  double tau = 0.05;

  void validate() const;
};

/// (cos(g_q, g_a) - gamma [if positive]) / tau. Zero vectors are rejected.
double score(const Eigen::VectorXd& g_q, const Eigen::VectorXd& g_a, const SimilarityConfig& cfg, bool is_positive);

/// sigmoid(g_q . g_a)
double link_probability(const Eigen::VectorXd& g_q, const Eigen::VectorXd& g_a);

/// Batched scores: (cos(G_q, G_a) - gamma * positive) / tau.
ad::Var score_matrix(const ad::Var& g_q, const ad::Var& g_a, const Eigen::Array<bool, -1, -1>& positive,
                     const SimilarityConfig& cfg);

}  // namespace skgc
