#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "skgc/autodiff.hpp"
#include "skgc/decoder.hpp"
#include "skgc/distributions.hpp"
#include "skgc/encoder.hpp"
#include "skgc/kgstore.hpp"
#include "skgc/model.hpp"

namespace skgc {

struct ObjectiveConfig {
  /// Weight of the KL sum.
  double beta = 1e-4;
  /// Weight of the reconstruction term.
  double eta = 1e-2;
  double lambda_post = 1.0;
  double lambda_prior = 0.5;
  SimilarityConfig similarity;
  /// Add query anchors to the candidate pool as extra negatives.
  bool self_negatives = false;
  BetaSampler sampler = BetaSampler::kumaraswamy;

  void validate() const;
};

/// Distinct queries and candidate entities of a mini-batch with the
/// queries x entities positive / negative masks.
struct Batch {
  std::vector<Query> queries;
  std::vector<int> entities;
  Eigen::Array<bool, -1, -1> positive;
  Eigen::Array<bool, -1, -1> negative;
  std::size_t num_pairs = 0;
};

/// Candidates are the batch answers (plus anchors with self-negatives).
/// Negatives exclude anything `known` lists as an answer of the query.
Batch make_batch(const std::vector<QueryAnswer>& pairs, const FilterIndex& known, bool self_negatives = false);

struct KlTotals {
  ad::Var beta;
  ad::Var concrete;
  ad::Var gaussian;
};

/// KL inputs of one tower: posterior outputs, the training sample y, stick
/// parameters and the uniforms used to sample v ~ q(v).
struct KlInputs {
  PosteriorOutputs post;
  ad::Var y;
  ad::Var c;
  ad::Var d;
  Eigen::MatrixXd stick_noise;
  double alpha = 1.0;
};

struct KlConfig {
  HeadKind head = HeadKind::sparse;
  double lambda_post = 1.0;
  double lambda_prior = 0.5;
  double sigma_prior = 1.0;
  BetaSampler sampler = BetaSampler::kumaraswamy;
};

/// Sums over every row of every tower. The relaxed-Bernoulli KL is the
/// single-sample estimate log q(y) - log p(y | v) at the training sample y,
/// with prior probabilities prod_{j<=k} v_j.
KlTotals kl_terms(ad::Tape& tape, const std::vector<KlInputs>& towers, const KlConfig& cfg);

/// -sum_rows cos(e_row, g_row) over all (e, g) pairs.
ad::Var reconstruction_term(const std::vector<std::pair<ad::Var, ad::Var>>& towers);

/// Supervised contrastive loss summed over the batch queries; scores are queries x entities.
ad::Var completion_term(const Batch& batch, const ad::Var& scores);

struct ElboBreakdown {
  double kl_beta_total = 0.0;
  double kl_concrete_total = 0.0;
  double kl_gaussian_total = 0.0;
  double recon_total = 0.0;
  double comp_total = 0.0;
  double beta_weight = 0.0;
  double eta_weight = 0.0;
  double total = 0.0;
  ad::Var total_var;

  double kl_total() const { return kl_beta_total + kl_concrete_total + kl_gaussian_total; }
};

ElboBreakdown assemble(const KlTotals& kl, const ad::Var& recon, const ad::Var& comp, double beta, double eta);

/// Full training loss of a batch through the model.
ElboBreakdown batch_loss(ad::Tape& tape, const Model& model, const Batch& batch, const ObjectiveConfig& cfg,
                         const NoiseStream& noise, std::uint64_t step);

}  // namespace skgc
