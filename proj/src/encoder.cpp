#include "skgc/encoder.hpp"

#include <cmath>
#include <stdexcept>

#include "skgc/distributions.hpp"

namespace skgc {

FeatureKind parse_feature_kind(const std::string& name) {
  if (name == "lookup") return FeatureKind::lookup;
  if (name == "bag_of_tokens") return FeatureKind::bag_of_tokens;
  throw std::invalid_argument("unknown encoder kind: " + name);
}

std::string feature_kind_name(FeatureKind k) { return k == FeatureKind::lookup ? "lookup" : "bag_of_tokens"; }

TokenVocabulary::TokenVocabulary() { add(std::string(kUnknownToken)); }

int TokenVocabulary::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  const int id = size();
  index_.emplace(token, id);
  tokens_.push_back(token);
  return id;
}

int TokenVocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? 0 : it->second;
}

TokenVocabulary TokenVocabulary::build(const KnowledgeGraph& kg, const TextOptions& text) {
  TokenVocabulary v;
  v.add(std::string(kClsToken));
  v.add(std::string(kSepToken));
  v.add(std::string(kInverseToken));
  for (int e = 0; e < kg.num_entities(); ++e) {
    for (const auto& t : compose_entity_text(kg, e, text)) v.add(t);
  }
  for (int r = 0; r < kg.num_relations(); ++r) {
    for (const auto& t : compose_query_text(kg, Query{0, r}, text)) v.add(t);
  }
  return v;
}

void FeatureEncoderSpec::validate() const {
  if (embed_dim < 1) throw std::invalid_argument("FeatureEncoderSpec: embed_dim must be >= 1");
  if (kind == FeatureKind::bag_of_tokens && text.max_tokens < 1) {
    throw std::invalid_argument("FeatureEncoderSpec: max_tokens must be >= 1");
  }
}

FeatureEncoder::FeatureEncoder(ParameterStore& store, const std::string& prefix, const FeatureEncoderSpec& spec,
                               const KnowledgeGraph& kg, const TokenVocabulary& vocab, Role role, const NoiseStream& noise)
    : spec_(spec), kg_(&kg), vocab_(&vocab), role_(role) {
  spec_.validate();
  Eigen::Index rows = 0;
  if (spec_.kind == FeatureKind::lookup) {
    // Query tower: entities then relations.
    rows = kg.num_entities() + (role == Role::query ? kg.num_relations() : 0);
  } else {
    rows = vocab.size();
  }
  const std::string name = prefix + ".table";
  const double bound = 1.0 / std::sqrt(static_cast<double>(spec_.embed_dim));
  table_ = &store.add(name, uniform_init(rows, spec_.embed_dim, bound, noise, name_hash(name)));
}

std::vector<int> FeatureEncoder::item_rows(const Query& q) const {
  if (role_ != Role::query) throw std::logic_error("encode_features: answer tower cannot encode queries");
  if (spec_.kind == FeatureKind::lookup) {
    if (q.anchor < 0 || q.anchor >= kg_->num_entities()) {
      throw std::out_of_range("encode_features: unseen entity " + std::to_string(q.anchor));
    }
    if (q.relation < 0 || q.relation >= kg_->num_relations()) {
      throw std::out_of_range("encode_features: unseen relation " + std::to_string(q.relation));
    }
    return {q.anchor, kg_->num_entities() + q.relation};
  }
  std::vector<int> ids;
  for (const auto& t : compose_query_text(*kg_, q, spec_.text)) ids.push_back(vocab_->id(t));
  return ids;
}

std::vector<int> FeatureEncoder::item_rows(int entity) const {
  if (entity < 0 || entity >= kg_->num_entities()) {
    throw std::out_of_range("encode_features: unseen entity " + std::to_string(entity));
  }
  if (spec_.kind == FeatureKind::lookup) return {entity};
  std::vector<int> ids;
  for (const auto& t : compose_entity_text(*kg_, entity, spec_.text)) ids.push_back(vocab_->id(t));
  return ids;
}

ad::Var FeatureEncoder::encode(ad::Tape& tape, const std::vector<std::vector<int>>& rows) const {
  return ad::mean_pool(tape.parameter(*table_), rows);
}

namespace {
Eigen::VectorXd encode_one(const FeatureEncoder& enc, std::vector<int> rows) {
  ad::Tape tape(false);
  ad::Var e = enc.encode(tape, {std::move(rows)});
  return e.value().row(0).transpose();
}
}  // namespace

Eigen::VectorXd encode_features(const FeatureEncoder& enc, const Query& q) { return encode_one(enc, enc.item_rows(q)); }
Eigen::VectorXd encode_features(const FeatureEncoder& enc, int entity) {
  return encode_one(enc, enc.item_rows(entity));
}

HeadKind parse_head_kind(const std::string& name) {
  if (name == "sparse") return HeadKind::sparse;
  if (name == "gaussian_vae") return HeadKind::gaussian_vae;
  if (name == "pure_ae") return HeadKind::pure_ae;
  throw std::invalid_argument("unknown head: " + name);
}

std::string head_kind_name(HeadKind k) {
  switch (k) {
    case HeadKind::sparse: return "sparse";
    case HeadKind::gaussian_vae: return "gaussian_vae";
    case HeadKind::pure_ae: return "pure_ae";
  }
  return "?";
}

namespace {
int head_width(HeadKind kind, int K) {
  switch (kind) {
    case HeadKind::sparse: return 3 * K;
    case HeadKind::gaussian_vae: return 2 * K;
    case HeadKind::pure_ae: return K;
  }
  return K;
}

std::vector<int> head_dims(int in_dim, int hidden, int out) {
  if (hidden > 0) return {in_dim, hidden, out};
  return {in_dim, out};
}
}  // namespace

PosteriorHead::PosteriorHead(ParameterStore& store, const std::string& prefix, int in_dim, int hidden, int K,
                             HeadKind kind, Activation act, const NoiseStream& noise)
    : kind_(kind), K_(K), mlp_(store, prefix, head_dims(in_dim, hidden, head_width(kind, K)), act, noise) {
  if (K < 1) throw std::invalid_argument("PosteriorHead: K must be >= 1");
}

PosteriorOutputs PosteriorHead::forward(ad::Tape& tape, const ad::Var& e) const {
  if (e.cols() != mlp_.in_dim()) {
    throw std::invalid_argument("posterior_params: input has dim " + std::to_string(e.cols()) + ", expected " +
                                std::to_string(mlp_.in_dim()));
  }
  ad::Var raw = mlp_.forward(tape, e);
  PosteriorOutputs out;
  switch (kind_) {
    case HeadKind::sparse:
      out.pi = ad::clamp(ad::sigmoid(ad::slice_cols(raw, 0, K_)), kProbClamp, 1.0 - kProbClamp);
      out.mu = ad::slice_cols(raw, K_, K_);
      out.sigma = ad::exp(ad::clamp(ad::slice_cols(raw, 2 * K_, K_), kLogSigmaMin, kLogSigmaMax));
      break;
    case HeadKind::gaussian_vae:
      out.mu = ad::slice_cols(raw, 0, K_);
      out.sigma = ad::exp(ad::clamp(ad::slice_cols(raw, K_, K_), kLogSigmaMin, kLogSigmaMax));
      break;
    case HeadKind::pure_ae:
      out.mu = raw;
      break;
  }
  return out;
}

PosteriorValues posterior_params(const PosteriorHead& head, const Eigen::VectorXd& e) {
  ad::Tape tape(false);
  PosteriorOutputs out = head.forward(tape, tape.constant(e.transpose()));
  PosteriorValues v;
  if (out.pi.valid()) v.pi = out.pi.value().row(0).transpose();
  if (out.mu.valid()) v.mu = out.mu.value().row(0).transpose();
  if (out.sigma.valid()) v.sigma = out.sigma.value().row(0).transpose();
  return v;
}

StickParamTable::StickParamTable(ParameterStore& store, const std::string& prefix, int rows, int K, double alpha)
    : alpha_(alpha) {
  if (rows < 0 || K < 1) throw std::invalid_argument("StickParamTable: bad shape");
  if (!(alpha > 0.0)) throw std::invalid_argument("StickParamTable: alpha must be positive");
  raw_c_ = &store.add(prefix + ".raw_c", Eigen::MatrixXd::Constant(rows, K, softplus_inverse(alpha)));
  raw_d_ = &store.add(prefix + ".raw_d", Eigen::MatrixXd::Constant(rows, K, softplus_inverse(1.0)));
}

std::pair<ad::Var, ad::Var> StickParamTable::forward(ad::Tape& tape, const std::vector<int>& ids) const {
  for (int id : ids) {
    if (id < 0 || id >= rows()) throw std::out_of_range("missing stick params row " + std::to_string(id));
  }
  ad::Var c = ad::softplus(ad::gather_rows(tape.parameter(*raw_c_), ids));
  ad::Var d = ad::softplus(ad::gather_rows(tape.parameter(*raw_d_), ids));
  return {c, d};
}

StickRow stick_params(const StickParamTable& table, int row) {
  if (row < 0 || row >= table.rows()) throw std::out_of_range("stick_params: unknown row " + std::to_string(row));
  StickRow r;
  r.c = table.raw_c().value.row(row).transpose().unaryExpr([](double x) { return softplus(x); });
  r.d = table.raw_d().value.row(row).transpose().unaryExpr([](double x) { return softplus(x); });
  return r;
}

StickRow prior_stick_params(const StickParamTable& table) {
  return {Eigen::VectorXd::Constant(table.K(), table.alpha()), Eigen::VectorXd::Ones(table.K())};
}

}  // namespace skgc
