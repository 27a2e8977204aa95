#include "skgc/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace skgc {

void ModelConfig::validate() const {
  encoder.validate();
  truncation.validate();
  if (dim < 1) throw std::invalid_argument("model.dim must be >= 1");
  if (hidden < 0) throw std::invalid_argument("model.hidden must be >= 0");
  if (encoder.embed_dim != dim) throw std::invalid_argument("encoder embed_dim must equal model.dim");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("model.dropout must lie in [0, 1)");
}

std::vector<Query> training_queries(const KnowledgeGraph& kg) {
  std::vector<Query> qs;
  for (const auto& qa : augment_inverse(kg, Split::train)) qs.push_back(qa.query);
  std::sort(qs.begin(), qs.end());
  qs.erase(std::unique(qs.begin(), qs.end()), qs.end());
  return qs;
}

namespace {
const ModelConfig& validated(const ModelConfig& cfg) {
  cfg.validate();
  return cfg;
}
}  // namespace

Model::Model(const KnowledgeGraph& kg, const ModelConfig& cfg, std::uint64_t seed)
    : kg_(&kg),
      cfg_(validated(cfg)),
      init_noise_(seed),
      vocab_(cfg.encoder.kind == FeatureKind::bag_of_tokens ? TokenVocabulary::build(kg, cfg.encoder.text)
                                                             : TokenVocabulary()),
      query_encoder_(store_, "query.encoder", cfg.encoder, kg, vocab_, Role::query, init_noise_),
      answer_encoder_(store_, "answer.encoder", cfg.encoder, kg, vocab_, Role::answer, init_noise_),
      query_head_(store_, "query.head", cfg.dim, cfg.hidden, cfg.truncation.K, cfg.head, cfg.activation,
                  init_noise_),
      answer_head_(store_, "answer.head", cfg.dim, cfg.hidden, cfg.truncation.K, cfg.head, cfg.activation,
                   init_noise_),
      query_sticks_(store_, "query.sticks", cfg.head == HeadKind::sparse ? static_cast<int>(training_queries(kg).size()) : 0,
                    cfg.truncation.K, cfg.truncation.alpha_qry),
      answer_sticks_(store_, "answer.sticks", cfg.head == HeadKind::sparse ? kg.num_entities() : 0,
                     cfg.truncation.K, cfg.truncation.alpha_ans),
      decoder_(store_, "decoder", cfg.truncation.K, cfg.hidden, cfg.dim, cfg.activation, init_noise_) {
  const auto qs = training_queries(kg);
  for (std::size_t i = 0; i < qs.size(); ++i) query_rows_.emplace(qs[i], static_cast<int>(i));
}

std::optional<int> Model::query_row(const Query& q) const {
  auto it = query_rows_.find(q);
  if (it == query_rows_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t Model::query_key(const Query& q) const {
  return static_cast<std::uint64_t>(q.anchor) * static_cast<std::uint64_t>(kg_->num_relations()) +
         static_cast<std::uint64_t>(q.relation);
}

RoleForward Model::forward_queries(ad::Tape& tape, const std::vector<Query>& queries, Mode mode,
                                   const SampleContext& ctx) const {
  std::vector<std::vector<int>> rows;
  std::vector<std::uint64_t> keys;
  rows.reserve(queries.size());
  for (const auto& q : queries) {
    rows.push_back(query_encoder_.item_rows(q));
    keys.push_back(query_key(q));
  }
  return forward_role(tape, Role::query, rows, keys, mode, ctx);
}

RoleForward Model::forward_entities(ad::Tape& tape, const std::vector<int>& entities, Mode mode,
                                    const SampleContext& ctx) const {
  std::vector<std::vector<int>> rows;
  std::vector<std::uint64_t> keys;
  rows.reserve(entities.size());
  for (int e : entities) {
    rows.push_back(answer_encoder_.item_rows(e));
    keys.push_back(static_cast<std::uint64_t>(e));
  }
  return forward_role(tape, Role::answer, rows, keys, mode, ctx);
}

RoleForward Model::forward_role(ad::Tape& tape, Role role, const std::vector<std::vector<int>>& rows,
                                const std::vector<std::uint64_t>& keys, Mode mode,
                                const SampleContext& ctx) const {
  const bool train = mode == Mode::train;
  if (train && !ctx.noise) throw std::invalid_argument("forward: train mode needs a noise stream");
  const auto n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index K = cfg_.truncation.K;
  const std::uint64_t step_key = ctx.step * 2 + static_cast<std::uint64_t>(role);
  auto noise_matrix = [&](NoisePurpose purpose, Eigen::Index cols, bool normal) {
    Eigen::MatrixXd m(n, cols);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index k = 0; k < cols; ++k) {
        const auto col = static_cast<std::uint64_t>(k);
        m(i, k) = normal ? ctx.noise->normal(purpose, step_key, keys[i], col)
                         : ctx.noise->uniform(purpose, step_key, keys[i], col);
      }
    }
    return m;
  };

  RoleForward out;
  out.e = encoder(role).encode(tape, rows);
  tape.tag(out.e, ad::BufferKind::representation);
  ad::Var e = out.e;
  if (train && cfg_.dropout > 0.0) {
    Eigen::MatrixXd u = noise_matrix(NoisePurpose::dropout, cfg_.dim, false);
    Eigen::MatrixXd mask = (u.array() >= cfg_.dropout).cast<double>() / (1.0 - cfg_.dropout);
    e = ad::mul(e, tape.constant(std::move(mask)));
  }
  out.post = head(role).forward(tape, e);
  switch (cfg_.head) {
    case HeadKind::sparse:
      tape.tag(out.post.pi, ad::BufferKind::latent);
      tape.tag(out.post.mu, ad::BufferKind::latent);
      tape.tag(out.post.sigma, ad::BufferKind::latent);
      if (train) {
        Eigen::MatrixXd u = noise_matrix(NoisePurpose::concrete_sample, K, false);
        Eigen::MatrixXd logistic = u.array().log() - (1.0 - u.array()).log();
        out.y = ad::scale(ad::add(ad::logit(out.post.pi), tape.constant(std::move(logistic))), 1.0 / ctx.lambda_post);
        out.z = ad::sigmoid(out.y);
        Eigen::MatrixXd eps = noise_matrix(NoisePurpose::gaussian_sample, K, true);
        out.w = ad::add(out.post.mu, ad::mul(out.post.sigma, tape.constant(std::move(eps))));
        tape.tag(out.y, ad::BufferKind::latent);
        tape.tag(out.z, ad::BufferKind::latent);
        tape.tag(out.w, ad::BufferKind::latent);
      } else {
        out.z = out.post.pi;
        out.w = out.post.mu;
      }
      out.f = ad::mul(out.w, out.z);
      break;
    case HeadKind::gaussian_vae:
      tape.tag(out.post.mu, ad::BufferKind::latent);
      tape.tag(out.post.sigma, ad::BufferKind::latent);
      if (train) {
        Eigen::MatrixXd eps = noise_matrix(NoisePurpose::gaussian_sample, K, true);
        out.f = ad::add(out.post.mu, ad::mul(out.post.sigma, tape.constant(std::move(eps))));
      } else {
        out.f = out.post.mu;
      }
      out.w = out.f;
      break;
    case HeadKind::pure_ae:
      out.f = out.post.mu;
      out.w = out.f;
      break;
  }
  tape.tag(out.f, ad::BufferKind::latent);
  out.g = decoder_.forward(tape, out.f);
  tape.tag(out.g, ad::BufferKind::representation);
  return out;
}

namespace {
constexpr std::size_t kInferenceChunk = 512;

template <class Item, class Fn>
Eigen::MatrixXd chunked(const std::vector<Item>& items, Eigen::Index cols, Fn fn) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(items.size()), cols);
  for (std::size_t start = 0; start < items.size(); start += kInferenceChunk) {
    const std::size_t end = std::min(items.size(), start + kInferenceChunk);
    std::vector<Item> part(items.begin() + static_cast<std::ptrdiff_t>(start),
                           items.begin() + static_cast<std::ptrdiff_t>(end));
    out.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(end - start)) = fn(part);
  }
  return out;
}
}  // namespace

Eigen::MatrixXd Model::query_representations(const std::vector<Query>& queries) const {
  return chunked(queries, cfg_.dim, [&](const std::vector<Query>& part) {
    ad::Tape tape(false);
    return Eigen::MatrixXd(forward_queries(tape, part, Mode::eval).g.value());
  });
}

Eigen::MatrixXd Model::entity_representations(const std::vector<int>& entities) const {
  return chunked(entities, cfg_.dim, [&](const std::vector<int>& part) {
    ad::Tape tape(false);
    return Eigen::MatrixXd(forward_entities(tape, part, Mode::eval).g.value());
  });
}

Model::Latents Model::entity_latents(const std::vector<int>& entities) const {
  Latents out;
  const Eigen::Index K = cfg_.truncation.K;
  out.f = chunked(entities, K, [&](const std::vector<int>& part) {
    ad::Tape tape(false);
    return Eigen::MatrixXd(forward_entities(tape, part, Mode::eval).f.value());
  });
  if (cfg_.head == HeadKind::sparse) {
    out.z = chunked(entities, K, [&](const std::vector<int>& part) {
      ad::Tape tape(false);
      return Eigen::MatrixXd(forward_entities(tape, part, Mode::eval).post.pi.value());
    });
  }
  return out;
}

}  // namespace skgc
