#pragma once

#include <Eigen/Dense>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "skgc/autodiff.hpp"
#include "skgc/kgstore.hpp"
#include "skgc/latent.hpp"
#include "skgc/nn.hpp"

namespace skgc {

enum class FeatureKind { lookup, bag_of_tokens };
FeatureKind parse_feature_kind(const std::string& name);
std::string feature_kind_name(FeatureKind k);

inline constexpr std::string_view kUnknownToken = "[unk]";

/// Token -> id. Id 0 is [unk].
class TokenVocabulary {
 public:
  TokenVocabulary();
  /// Every token of every composed entity and query text of the graph.
  static TokenVocabulary build(const KnowledgeGraph& kg, const TextOptions& text = {});

  int add(const std::string& token);
  int id(std::string_view token) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct FeatureEncoderSpec {
  FeatureKind kind = FeatureKind::lookup;
  int embed_dim = 256;
  TextOptions text;

  void validate() const;
};

/// One tower's input encoder. Lookup mode: an answer is its entity row; a query
/// is the mean of its anchor-entity row and its relation row. Bag-of-tokens
/// mode: the mean of the token embeddings of the composed text.
class FeatureEncoder {
 public:
  FeatureEncoder(ParameterStore& store, const std::string& prefix, const FeatureEncoderSpec& spec,
                 const KnowledgeGraph& kg, const TokenVocabulary& vocab, Role role, const NoiseStream& noise);

  std::vector<int> item_rows(const Query& q) const;
  std::vector<int> item_rows(int entity) const;

  /// Mean-pooled embedding table rows, one output row per list.
  ad::Var encode(ad::Tape& tape, const std::vector<std::vector<int>>& rows) const;

  const FeatureEncoderSpec& spec() const { return spec_; }
  ad::Parameter& table() const { return *table_; }

 private:
  FeatureEncoderSpec spec_;
  const KnowledgeGraph* kg_;
  const TokenVocabulary* vocab_;
  Role role_;
  ad::Parameter* table_;
};

Eigen::VectorXd encode_features(const FeatureEncoder& enc, const Query& q);
Eigen::VectorXd encode_features(const FeatureEncoder& enc, int entity);

enum class HeadKind { sparse, gaussian_vae, pure_ae };
HeadKind parse_head_kind(const std::string& name);
std::string head_kind_name(HeadKind k);

/// Tape outputs of a posterior head; fields a head does not produce stay invalid.
/// pure_ae puts its deterministic feature in `mu`.
struct PosteriorOutputs {
  ad::Var pi;
  ad::Var mu;
  ad::Var sigma;
};

inline constexpr double kLogSigmaMin = -6.0;
inline constexpr double kLogSigmaMax = 2.0;

/// MLP from D_e to 3K (sparse: logit pi, mu, log sigma), 2K (gaussian_vae) or K (pure_ae).
class PosteriorHead {
 public:
  PosteriorHead(ParameterStore& store, const std::string& prefix, int in_dim, int hidden, int K,
                HeadKind kind, Activation act, const NoiseStream& noise);

  PosteriorOutputs forward(ad::Tape& tape, const ad::Var& e) const;
  HeadKind kind() const { return kind_; }
  int K() const { return K_; }
  const Mlp& mlp() const { return mlp_; }

 private:
  HeadKind kind_;
  int K_;
  Mlp mlp_;
};

struct PosteriorValues {
  Eigen::VectorXd pi;
  Eigen::VectorXd mu;
  Eigen::VectorXd sigma;
};

PosteriorValues posterior_params(const PosteriorHead& head, const Eigen::VectorXd& e);

struct StickRow {
  Eigen::VectorXd c;
  Eigen::VectorXd d;
};

/// Free per-row Beta parameters, stored raw and passed through softplus.
class StickParamTable {
 public:
  StickParamTable(ParameterStore& store, const std::string& prefix, int rows, int K, double alpha);

  int rows() const { return static_cast<int>(raw_c_->value.rows()); }
  int K() const { return static_cast<int>(raw_c_->value.cols()); }
  double alpha() const { return alpha_; }

  /// softplus of the gathered raw rows: (c, d), each ids.size() x K.
  std::pair<ad::Var, ad::Var> forward(ad::Tape& tape, const std::vector<int>& ids) const;

  ad::Parameter& raw_c() const { return *raw_c_; }
  ad::Parameter& raw_d() const { return *raw_d_; }

 private:
  ad::Parameter* raw_c_;
  ad::Parameter* raw_d_;
  double alpha_;
};

StickRow stick_params(const StickParamTable& table, int row);
/// (alpha, 1) for rows without a table entry.
StickRow prior_stick_params(const StickParamTable& table);

}  // namespace skgc
