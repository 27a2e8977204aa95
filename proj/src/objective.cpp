#include "skgc/objective.hpp"

#include <stdexcept>
#include <tuple>
#include <unordered_map>

namespace skgc {

void ObjectiveConfig::validate() const {
  if (!(beta >= 0.0)) throw std::invalid_argument("objective.beta must be >= 0");
  if (!(eta >= 0.0)) throw std::invalid_argument("objective.eta must be >= 0");
  if (!(lambda_post > 0.0) || !(lambda_prior > 0.0)) {
    throw std::invalid_argument("objective temperatures must be positive");
  }
  similarity.validate();
}

Batch make_batch(const std::vector<QueryAnswer>& pairs, const FilterIndex& known, bool self_negatives) {
  Batch b;
  b.num_pairs = pairs.size();
  std::unordered_map<Query, int, QueryHash> qidx;
  std::unordered_map<int, int> eidx;
  auto add_entity = [&](int e) {
    if (eidx.emplace(e, static_cast<int>(b.entities.size())).second) b.entities.push_back(e);
  };
  for (const auto& qa : pairs) {
    if (qidx.emplace(qa.query, static_cast<int>(b.queries.size())).second) b.queries.push_back(qa.query);
    add_entity(qa.answer);
  }
  if (self_negatives) {
    for (const auto& q : b.queries) add_entity(q.anchor);
  }
  const auto nq = static_cast<Eigen::Index>(b.queries.size());
  const auto ne = static_cast<Eigen::Index>(b.entities.size());
  b.positive = Eigen::Array<bool, -1, -1>::Constant(nq, ne, false);
  for (const auto& qa : pairs) b.positive(qidx[qa.query], eidx[qa.answer]) = true;
  b.negative = Eigen::Array<bool, -1, -1>::Constant(nq, ne, false);
  for (Eigen::Index i = 0; i < nq; ++i) {
    for (Eigen::Index j = 0; j < ne; ++j) {
      const int e = b.entities[static_cast<std::size_t>(j)];
      b.negative(i, j) = !b.positive(i, j) && !known.contains(b.queries[static_cast<std::size_t>(i)], e);
    }
  }
  return b;
}

KlTotals kl_terms(ad::Tape& tape, const std::vector<KlInputs>& towers, const KlConfig& cfg) {
  auto zero = [&] { return tape.constant(Eigen::MatrixXd::Zero(1, 1)); };
  KlTotals out{zero(), zero(), zero()};
  for (const auto& t : towers) {
    if (cfg.head == HeadKind::sparse) {
      if (!t.c.valid() || !t.d.valid()) throw std::invalid_argument("kl_terms: missing stick params");
      out.beta = ad::add(out.beta, ad::sum(ad::kl_beta(t.c, t.d, t.alpha, 1.0)));
      ad::Var v = ad::beta_sample(t.c, t.d, t.stick_noise, cfg.sampler);
      tape.tag(v, ad::BufferKind::latent);
      ad::Var pi_prior = ad::clamp(ad::cumprod_cols(v), kProbClamp, 1.0 - kProbClamp);
      ad::Var log_q = ad::concrete_log_density(t.y, ad::logit(t.post.pi), cfg.lambda_post);
      ad::Var log_p = ad::concrete_log_density(t.y, ad::logit(pi_prior), cfg.lambda_prior);
      out.concrete = ad::add(out.concrete, ad::sum(ad::sub(log_q, log_p)));
    }
    if (cfg.head != HeadKind::pure_ae) {
      out.gaussian = ad::add(out.gaussian, ad::sum(ad::kl_gaussian(t.post.mu, t.post.sigma, cfg.sigma_prior)));
    }
  }
  return out;
}

ad::Var reconstruction_term(const std::vector<std::pair<ad::Var, ad::Var>>& towers) {
  if (towers.empty()) throw std::invalid_argument("reconstruction_term: no rows");
  ad::Tape& tape = *towers.front().first.tape();
  ad::Var total = tape.constant(Eigen::MatrixXd::Zero(1, 1));
  for (const auto& [e, g] : towers) total = ad::sub(total, ad::sum(ad::cosine_rows(e, g)));
  return total;
}

ad::Var completion_term(const Batch& batch, const ad::Var& scores) {
  return ad::supervised_contrastive(scores, batch.positive, batch.negative);
}

ElboBreakdown assemble(const KlTotals& kl, const ad::Var& recon, const ad::Var& comp, double beta, double eta) {
  if (!(beta >= 0.0) || !(eta >= 0.0)) throw std::invalid_argument("assemble: weights must be >= 0");
  ElboBreakdown b;
  b.kl_beta_total = kl.beta.scalar();
  b.kl_concrete_total = kl.concrete.scalar();
  b.kl_gaussian_total = kl.gaussian.scalar();
  b.recon_total = recon.scalar();
  b.comp_total = comp.scalar();
  b.beta_weight = beta;
  b.eta_weight = eta;
  ad::Var kl_sum = ad::add(ad::add(kl.beta, kl.concrete), kl.gaussian);
  b.total_var = ad::add(ad::add(ad::scale(kl_sum, beta), ad::scale(recon, eta)), comp);
  b.total = b.total_var.scalar();
  return b;
}

ElboBreakdown batch_loss(ad::Tape& tape, const Model& model, const Batch& batch, const ObjectiveConfig& cfg,
                         const NoiseStream& noise, std::uint64_t step) {
  cfg.validate();
  const ModelConfig& mc = model.config();
  SampleContext ctx{&noise, step, cfg.lambda_post};
  RoleForward q = model.forward_queries(tape, batch.queries, Mode::train, ctx);
  RoleForward a = model.forward_entities(tape, batch.entities, Mode::train, ctx);

  std::vector<KlInputs> towers(2);
  towers[0].post = q.post;
  towers[0].y = q.y;
  towers[1].post = a.post;
  towers[1].y = a.y;
  if (mc.head == HeadKind::sparse) {
    const Eigen::Index K = mc.truncation.K;
    auto stick_noise = [&](Role role, const std::vector<std::uint64_t>& keys) {
      const std::uint64_t step_key = step * 2 + static_cast<std::uint64_t>(role);
      Eigen::MatrixXd u(static_cast<Eigen::Index>(keys.size()), K);
      for (Eigen::Index i = 0; i < u.rows(); ++i) {
        for (Eigen::Index k = 0; k < K; ++k) {
          u(i, k) = noise.uniform(NoisePurpose::beta_sample, step_key, keys[static_cast<std::size_t>(i)],
                                  static_cast<std::uint64_t>(k));
        }
      }
      return u;
    };
    std::vector<int> qrows;
    std::vector<std::uint64_t> qkeys;
    for (const auto& query : batch.queries) {
      auto row = model.query_row(query);
      if (!row) {
        throw std::out_of_range("kl_terms: missing stick params row for query (" + std::to_string(query.anchor) + ", " +
                                std::to_string(query.relation) + ")");
      }
      qrows.push_back(*row);
      qkeys.push_back(model.query_key(query));
    }
    std::vector<std::uint64_t> ekeys(batch.entities.begin(), batch.entities.end());
    std::tie(towers[0].c, towers[0].d) = model.sticks(Role::query).forward(tape, qrows);
    std::tie(towers[1].c, towers[1].d) = model.sticks(Role::answer).forward(tape, batch.entities);
    for (int i = 0; i < 2; ++i) {
      tape.tag(towers[i].c, ad::BufferKind::latent);
      tape.tag(towers[i].d, ad::BufferKind::latent);
    }
    towers[0].stick_noise = stick_noise(Role::query, qkeys);
    towers[1].stick_noise = stick_noise(Role::answer, ekeys);
    towers[0].alpha = mc.truncation.alpha_qry;
    towers[1].alpha = mc.truncation.alpha_ans;
  }
  KlConfig klc{mc.head, cfg.lambda_post, cfg.lambda_prior, mc.truncation.sigma_prior, cfg.sampler};
  KlTotals kl = kl_terms(tape, towers, klc);
  ad::Var recon = reconstruction_term({{q.e, q.g}, {a.e, a.g}});
  ad::Var scores = score_matrix(q.g, a.g, batch.positive, cfg.similarity);
  ad::Var comp = completion_term(batch, scores);
  return assemble(kl, recon, comp, cfg.beta, cfg.eta);
}

}  // namespace skgc
