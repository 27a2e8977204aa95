#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <unordered_map>
#include <vector>

#include "skgc/decoder.hpp"
#include "skgc/encoder.hpp"
#include "skgc/kgstore.hpp"
#include "skgc/latent.hpp"
#include "skgc/nn.hpp"

namespace skgc {

struct ModelConfig {
  FeatureEncoderSpec encoder;
  /// Hidden width of every MLP; 0 means a single linear layer.
  int hidden = 256;
  /// Representation dim D. The encoder embedding dim equals D so that e and g are comparable.
  int dim = 256;
  Activation activation = Activation::tanh;
  HeadKind head = HeadKind::sparse;
  TruncationConfig truncation;
  double dropout = 0.0;

  void validate() const;
};

enum class Mode { train, eval };

/// Per-row tensors of one tower for a forward pass.
struct RoleForward {
  ad::Var e;
  PosteriorOutputs post;
  /// Pre-sigmoid relaxed Bernoulli sample (sparse head, train mode).
  ad::Var y;
  ad::Var z;
  ad::Var w;
  ad::Var f;
  ad::Var g;
};

/// Noise used by a training forward pass. Rows of each tower are keyed by
/// stable ids so draws do not depend on batch composition.
struct SampleContext {
  const NoiseStream* noise = nullptr;
  std::uint64_t step = 0;
  double lambda_post = 1.0;
};

class Model {
 public:
  Model(const KnowledgeGraph& kg, const ModelConfig& cfg, std::uint64_t seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return cfg_; }
  const KnowledgeGraph& kg() const { return *kg_; }
  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }

  const FeatureEncoder& encoder(Role r) const { return r == Role::query ? query_encoder_ : answer_encoder_; }
  const PosteriorHead& head(Role r) const { return r == Role::query ? query_head_ : answer_head_; }
  const StickParamTable& sticks(Role r) const { return r == Role::query ? query_sticks_ : answer_sticks_; }
  const DecoderNet& decoder() const { return decoder_; }
  const TokenVocabulary& vocabulary() const { return vocab_; }

  /// Stick-table row of a training query.
  std::optional<int> query_row(const Query& q) const;
  int num_query_rows() const { return static_cast<int>(query_rows_.size()); }
  /// Stable noise key of a query.
  std::uint64_t query_key(const Query& q) const;

  RoleForward forward_queries(ad::Tape& tape, const std::vector<Query>& queries, Mode mode,
                              const SampleContext& ctx = {}) const;
  RoleForward forward_entities(ad::Tape& tape, const std::vector<int>& entities, Mode mode,
                               const SampleContext& ctx = {}) const;

  /// Eval-mode g for each query / entity (rows of the result).
  Eigen::MatrixXd query_representations(const std::vector<Query>& queries) const;
  Eigen::MatrixXd entity_representations(const std::vector<int>& entities) const;

  struct Latents {
    /// Eval-mode gated features f.
    Eigen::MatrixXd f;
    /// Soft memberships (pi for the sparse head, empty otherwise).
    Eigen::MatrixXd z;
  };
  Latents entity_latents(const std::vector<int>& entities) const;

 private:
  RoleForward forward_role(ad::Tape& tape, Role role, const std::vector<std::vector<int>>& rows,
                           const std::vector<std::uint64_t>& keys, Mode mode, const SampleContext& ctx) const;

  const KnowledgeGraph* kg_;
  ModelConfig cfg_;
  NoiseStream init_noise_;
  ParameterStore store_;
  TokenVocabulary vocab_;
  std::unordered_map<Query, int, QueryHash> query_rows_;
  FeatureEncoder query_encoder_;
  FeatureEncoder answer_encoder_;
  PosteriorHead query_head_;
  PosteriorHead answer_head_;
  StickParamTable query_sticks_;
  StickParamTable answer_sticks_;
  DecoderNet decoder_;
};

/// Distinct training queries (both orientations), sorted.
std::vector<Query> training_queries(const KnowledgeGraph& kg);

}  // namespace skgc
