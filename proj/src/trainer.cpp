#include "skgc/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "json.hpp"

namespace skgc {

namespace fs = std::filesystem;

const std::vector<ConfigKey>& config_schema() {
  static const std::vector<ConfigKey> schema = {
      {"data.path", "", "dataset directory (train.txt, valid.txt, test.txt or a manifest.txt)"},
      {"data.descriptions", "true", "load entity2text / relation2text when present"},
      {"data.strict", "false", "reject valid/test entities or relations absent from train"},
      {"model.encoder", "lookup", "lookup | bag_of_tokens"},
      {"model.dim", "256", "embedding and representation width D"},
      {"model.hidden", "256", "hidden width of every MLP (0 = linear)"},
      {"model.activation", "tanh", "tanh | relu"},
      {"model.head", "sparse", "sparse | gaussian_vae | pure_ae"},
      {"model.K", "32", "truncation level"},
      {"model.alpha_qry", "100", "stick-breaking concentration for query rows"},
      {"model.alpha_ans", "20", "stick-breaking concentration for answer rows"},
      {"model.sigma_prior", "1", "prior std of the strengths w"},
      {"model.dropout", "0", "dropout on encoder features during training"},
      {"model.max_tokens", "64", "token limit for bag_of_tokens inputs"},
      {"objective.beta", "1e-4", "KL weight"},
      {"objective.eta", "1e-2", "reconstruction weight"},
      {"objective.lambda_post", "1", "posterior relaxation temperature"},
      {"objective.lambda_prior", "0.5", "prior relaxation temperature"},
      {"objective.gamma", "0.02", "additive margin on positive scores"},
      {"objective.tau", "0.05", "contrastive temperature"},
      {"objective.self_negatives", "false", "add query anchors as negatives"},
      {"objective.beta_sampler", "kumaraswamy", "kumaraswamy | implicit_beta"},
      {"train.lr", "1e-3", "learning rate"},
      {"train.epochs", "25", "number of epochs"},
      {"train.batch_size", "256", "training pairs per step"},
      {"train.seed", "1", "seed of every random draw"},
      {"train.adam_beta1", "0.9", "first moment decay"},
      {"train.adam_beta2", "0.999", "second moment decay"},
      {"train.adam_eps", "1e-8", "denominator epsilon"},
      {"train.grad_clip", "none", "max global gradient norm, or none"},
      {"train.eval_every", "1", "validate every n epochs (0 = never)"},
      {"train.valid_limit", "0", "validation triples per evaluation (0 = all)"},
      {"train.threads", "0", "evaluation threads (0 = SKGC_THREADS or all cores)"},
  };
  return schema;
}

namespace {
std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}
std::string fmt(bool v) { return v ? "true" : "false"; }
template <class I>
std::string fmt_int(I v) {
  return std::to_string(v);
}

BetaSampler parse_sampler(const std::string& s) {
  if (s == "kumaraswamy") return BetaSampler::kumaraswamy;
  if (s == "implicit_beta") return BetaSampler::implicit_beta;
  throw ConfigError("unknown beta sampler: " + s);
}
std::string sampler_name(BetaSampler s) { return s == BetaSampler::kumaraswamy ? "kumaraswamy" : "implicit_beta"; }
}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("invalid config: " + m); };
  if (!(learning_rate > 0.0)) fail("train.lr must be positive");
  if (epochs < 1) fail("train.epochs must be >= 1");
  if (batch_size < 1) fail("train.batch_size must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) fail("train.adam_beta1 must lie in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) fail("train.adam_beta2 must lie in [0, 1)");
  if (!(adam_eps > 0.0)) fail("train.adam_eps must be positive");
  if (grad_clip && !(*grad_clip > 0.0)) fail("train.grad_clip must be positive (use none to disable)");
  if (eval_every < 0) fail("train.eval_every must be >= 0");
  if (threads < 0) fail("train.threads must be >= 0");
  try {
    model.validate();
    objective.validate();
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }
}

Config TrainConfig::to_config() const {
  Config c;
  c.set("data.path", data_path);
  c.set("data.descriptions", fmt(descriptions));
  c.set("data.strict", fmt(strict));
  c.set("model.encoder", feature_kind_name(model.encoder.kind));
  c.set("model.dim", fmt_int(model.dim));
  c.set("model.hidden", fmt_int(model.hidden));
  c.set("model.activation", activation_name(model.activation));
  c.set("model.head", head_kind_name(model.head));
  c.set("model.K", fmt_int(model.truncation.K));
  c.set("model.alpha_qry", fmt(model.truncation.alpha_qry));
  c.set("model.alpha_ans", fmt(model.truncation.alpha_ans));
  c.set("model.sigma_prior", fmt(model.truncation.sigma_prior));
  c.set("model.dropout", fmt(model.dropout));
  c.set("model.max_tokens", fmt_int(model.encoder.text.max_tokens));
  c.set("objective.beta", fmt(objective.beta));
  c.set("objective.eta", fmt(objective.eta));
  c.set("objective.lambda_post", fmt(objective.lambda_post));
  c.set("objective.lambda_prior", fmt(objective.lambda_prior));
  c.set("objective.gamma", fmt(objective.similarity.gamma));
  c.set("objective.tau", fmt(objective.similarity.tau));
  c.set("objective.self_negatives", fmt(objective.self_negatives));
  c.set("objective.beta_sampler", sampler_name(objective.sampler));
  c.set("train.lr", fmt(learning_rate));
  c.set("train.epochs", fmt_int(epochs));
  c.set("train.batch_size", fmt_int(batch_size));
  c.set("train.seed", fmt_int(seed));
  c.set("train.adam_beta1", fmt(adam_beta1));
  c.set("train.adam_beta2", fmt(adam_beta2));
  c.set("train.adam_eps", fmt(adam_eps));
  c.set("train.grad_clip", grad_clip ? fmt(*grad_clip) : "none");
  c.set("train.eval_every", fmt_int(eval_every));
  c.set("train.valid_limit", fmt_int(valid_limit));
  c.set("train.threads", fmt_int(threads));
  return c;
}

TrainConfig TrainConfig::from_config(const Config& input) {
  std::set<std::string> known;
  Config c;
  for (const auto& k : config_schema()) {
    known.insert(k.key);
    c.set(k.key, k.default_value);
  }
  for (const auto& [k, v] : input.values()) {
    if (!known.count(k)) throw ConfigError("unknown config key: " + k);
    c.set(k, v);
  }
  TrainConfig t;
  try {
    t.data_path = c.get_string("data.path");
    t.descriptions = c.get_bool("data.descriptions");
    t.strict = c.get_bool("data.strict");
    t.model.encoder.kind = parse_feature_kind(c.get_string("model.encoder"));
    t.model.dim = static_cast<int>(c.get_int("model.dim"));
    t.model.encoder.embed_dim = t.model.dim;
    t.model.hidden = static_cast<int>(c.get_int("model.hidden"));
    t.model.activation = parse_activation(c.get_string("model.activation"));
    t.model.head = parse_head_kind(c.get_string("model.head"));
    t.model.truncation.K = static_cast<int>(c.get_int("model.K"));
    t.model.truncation.alpha_qry = c.get_double("model.alpha_qry");
    t.model.truncation.alpha_ans = c.get_double("model.alpha_ans");
    t.model.truncation.sigma_prior = c.get_double("model.sigma_prior");
    t.model.dropout = c.get_double("model.dropout");
    const long long max_tokens = c.get_int("model.max_tokens");
    if (max_tokens < 1) throw ConfigError("invalid config: model.max_tokens must be >= 1");
    t.model.encoder.text.max_tokens = static_cast<std::size_t>(max_tokens);
    t.objective.beta = c.get_double("objective.beta");
    t.objective.eta = c.get_double("objective.eta");
    t.objective.lambda_post = c.get_double("objective.lambda_post");
    t.objective.lambda_prior = c.get_double("objective.lambda_prior");
    t.objective.similarity.gamma = c.get_double("objective.gamma");
    t.objective.similarity.tau = c.get_double("objective.tau");
    t.objective.self_negatives = c.get_bool("objective.self_negatives");
    t.objective.sampler = parse_sampler(c.get_string("objective.beta_sampler"));
    t.learning_rate = c.get_double("train.lr");
    t.epochs = static_cast<int>(c.get_int("train.epochs"));
    t.batch_size = static_cast<int>(c.get_int("train.batch_size"));
    const long long seed = c.get_int("train.seed");
    if (seed < 0) throw ConfigError("invalid config: train.seed must be >= 0");
    t.seed = static_cast<std::uint64_t>(seed);
    t.adam_beta1 = c.get_double("train.adam_beta1");
    t.adam_beta2 = c.get_double("train.adam_beta2");
    t.adam_eps = c.get_double("train.adam_eps");
    const std::string clip = c.get_string("train.grad_clip");
    if (clip != "none" && !clip.empty()) t.grad_clip = c.get_double("train.grad_clip");
    t.eval_every = static_cast<int>(c.get_int("train.eval_every"));
    const long long limit = c.get_int("train.valid_limit");
    if (limit < 0) throw ConfigError("invalid config: train.valid_limit must be >= 0");
    t.valid_limit = static_cast<std::size_t>(limit);
    t.threads = static_cast<int>(c.get_int("train.threads"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  t.validate();
  return t;
}

void check_finite_gradients(const ParameterStore& store) {
  for (const ad::Parameter* p : store.all()) {
    if (!p->grad.allFinite()) throw NonFiniteError("non-finite gradient in parameter block " + p->name);
  }
}

ElboBreakdown gradients(Model& model, const Batch& batch, const ObjectiveConfig& cfg, const NoiseStream& noise,
                        std::uint64_t step) {
  model.params().zero_grad();
  ad::Tape tape;
  ElboBreakdown loss = batch_loss(tape, model, batch, cfg, noise, step);
  if (!std::isfinite(loss.total)) throw NonFiniteError("non-finite loss at step " + std::to_string(step));
  tape.backward(loss.total_var);
  check_finite_gradients(model.params());
  return loss;
}

std::unique_ptr<Model> make_model(const KnowledgeGraph& kg, const TrainConfig& cfg) {
  return std::make_unique<Model>(kg, cfg.model, cfg.seed);
}

double validation_completion_loss(const Model& model, const KnowledgeGraph& kg, Split split,
                                  const ObjectiveConfig& cfg, int batch_size, std::size_t limit) {
  std::vector<QueryAnswer> pairs = augment_inverse(kg, split);
  if (limit > 0 && pairs.size() > 2 * limit) pairs.resize(2 * limit);
  if (pairs.empty()) throw std::invalid_argument("validation_completion_loss: empty split");
  const FilterIndex known(kg);
  double total = 0.0;
  std::size_t queries = 0;
  for (std::size_t start = 0; start < pairs.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(pairs.size(), start + static_cast<std::size_t>(batch_size));
    std::vector<QueryAnswer> part(pairs.begin() + static_cast<std::ptrdiff_t>(start),
                                  pairs.begin() + static_cast<std::ptrdiff_t>(end));
    Batch b = make_batch(part, known, false);
    ad::Tape tape(false);
    RoleForward q = model.forward_queries(tape, b.queries, Mode::eval);
    RoleForward a = model.forward_entities(tape, b.entities, Mode::eval);
    total += completion_term(b, score_matrix(q.g, a.g, b.positive, cfg.similarity)).scalar();
    queries += b.queries.size();
  }
  return total / static_cast<double>(queries);
}

std::string checkpoint_info(const TrainConfig& cfg, int epoch, double valid_mrr) {
  nlohmann::ordered_json j;
  j["format"] = "skgc";
  j["epoch"] = epoch;
  j["valid_mrr"] = valid_mrr;
  j["head"] = head_kind_name(cfg.model.head);
  return j.dump();
}

void save_model(const fs::path& path, const Model& model, const TrainConfig& cfg, int epoch, double valid_mrr) {
  write_checkpoint(path, snapshot(model.params(), cfg.to_config().serialize(), checkpoint_info(cfg, epoch, valid_mrr)));
}

LoadedModel load_model(const fs::path& checkpoint, const std::string& data_override) {
  CheckpointData data = read_checkpoint(checkpoint);
  LoadedModel out;
  out.config = TrainConfig::from_config(Config::parse(data.config_text, checkpoint.string()));
  if (!data_override.empty()) out.config.data_path = data_override;
  if (out.config.data_path.empty()) throw ConfigError("checkpoint config has no data.path");
  LoadOptions lo;
  lo.with_descriptions = out.config.descriptions;
  lo.strict = out.config.strict;
  out.kg = std::make_unique<KnowledgeGraph>(load_dataset(out.config.data_path, lo));
  out.model = make_model(*out.kg, out.config);
  restore(data, out.model->params());
  return out;
}

namespace {
void accumulate(ElboBreakdown& acc, const ElboBreakdown& x) {
  acc.kl_beta_total += x.kl_beta_total;
  acc.kl_concrete_total += x.kl_concrete_total;
  acc.kl_gaussian_total += x.kl_gaussian_total;
  acc.recon_total += x.recon_total;
  acc.comp_total += x.comp_total;
  acc.total += x.total;
  acc.beta_weight = x.beta_weight;
  acc.eta_weight = x.eta_weight;
}

void divide(ElboBreakdown& acc, double n) {
  acc.kl_beta_total /= n;
  acc.kl_concrete_total /= n;
  acc.kl_gaussian_total /= n;
  acc.recon_total /= n;
  acc.comp_total /= n;
  acc.total /= n;
}

nlohmann::ordered_json breakdown_json(const ElboBreakdown& b) {
  nlohmann::ordered_json j;
  j["kl_beta_total"] = b.kl_beta_total;
  j["kl_concrete_total"] = b.kl_concrete_total;
  j["kl_gaussian_total"] = b.kl_gaussian_total;
  j["recon_total"] = b.recon_total;
  j["comp_total"] = b.comp_total;
  j["beta_weight"] = b.beta_weight;
  j["eta_weight"] = b.eta_weight;
  j["total"] = b.total;
  return j;
}
}  // namespace

TrainResult train(const KnowledgeGraph& kg, const TrainConfig& cfg, Model& model, const TrainOptions& options) {
  cfg.validate();
  if (&model.kg() != &kg) throw std::invalid_argument("train: model was built for a different graph");
  const NoiseStream noise(cfg.seed);
  const std::vector<QueryAnswer> pairs = augment_inverse(kg, Split::train);
  const FilterIndex known(kg, {Split::train});
  const FilterIndex full(kg);
  const bool can_validate = cfg.eval_every > 0 && !kg.split(Split::valid).empty();

  std::ofstream log;
  if (!options.run_dir.empty()) {
    fs::create_directories(options.run_dir / "checkpoints");
    fs::create_directories(options.run_dir / "logs");
    fs::create_directories(options.run_dir / "reports");
    cfg.to_config().save(options.run_dir / "config.resolved.cfg");
    log.open(options.run_dir / "logs" / "metrics.jsonl", std::ios::trunc);
    if (!log) throw std::runtime_error("cannot write " + (options.run_dir / "logs" / "metrics.jsonl").string());
  }

  Adam adam({cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps});
  TrainResult result;
  CheckpointData best;
  std::uint64_t step = 0;
  std::vector<std::size_t> order(pairs.size());
  const auto bs = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(noise.derive_seed(NoisePurpose::shuffle, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    EpochRecord rec;
    rec.epoch = epoch;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      std::vector<QueryAnswer> part;
      part.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) part.push_back(pairs[order[i]]);
      const Batch batch = make_batch(part, known, cfg.objective.self_negatives);
      const ElboBreakdown loss = gradients(model, batch, cfg.objective, noise, step);
      if (cfg.grad_clip) clip_gradients(model.params(), *cfg.grad_clip);
      adam.step(model.params());
      accumulate(rec.train, loss);
      ++rec.steps;
      if (log.is_open()) {
        nlohmann::ordered_json j;
        j["type"] = "step";
        j["epoch"] = epoch;
        j["step"] = step;
        j["pairs"] = part.size();
        j.update(breakdown_json(loss));
        log << j.dump() << '\n';
      }
      ++step;
    }
    divide(rec.train, static_cast<double>(std::max<std::size_t>(rec.steps, 1)));

    if (can_validate && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs)) {
      rec.validated = true;
      rec.valid_comp = validation_completion_loss(model, kg, Split::valid, cfg.objective, cfg.batch_size,
                                                  cfg.valid_limit);
      EvalOptions eo;
      eo.threads = cfg.threads;
      eo.max_triples = cfg.valid_limit;
      rec.valid = evaluate(model, kg, Split::valid, full, eo).average;
      if (rec.valid.mrr > result.best_valid_mrr) {
        result.best_valid_mrr = rec.valid.mrr;
        result.best_epoch = epoch;
        best = snapshot(model.params(), cfg.to_config().serialize(), checkpoint_info(cfg, epoch, rec.valid.mrr));
        if (!options.run_dir.empty()) write_checkpoint(options.run_dir / "checkpoints" / "best.ckpt", best);
      }
    }
    if (log.is_open()) {
      nlohmann::ordered_json j;
      j["type"] = "epoch";
      j["epoch"] = epoch;
      j["steps"] = rec.steps;
      j["train"] = breakdown_json(rec.train);
      if (rec.validated) {
        j["valid_comp"] = rec.valid_comp;
        j["valid_mrr"] = rec.valid.mrr;
        j["valid_hit@1"] = rec.valid.hit1;
        j["valid_hit@3"] = rec.valid.hit3;
        j["valid_hit@10"] = rec.valid.hit10;
      }
      log << j.dump() << '\n';
      log.flush();
    }
    result.history.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
  }
  result.total_steps = step;

  if (!options.run_dir.empty()) {
    save_model(options.run_dir / "checkpoints" / "last.ckpt", model, cfg, cfg.epochs,
               result.history.back().validated ? result.history.back().valid.mrr : -1.0);
    if (result.best_epoch == 0) {
      fs::copy_file(options.run_dir / "checkpoints" / "last.ckpt", options.run_dir / "checkpoints" / "best.ckpt",
                    fs::copy_options::overwrite_existing);
    }
  }
  if (options.restore_best && result.best_epoch > 0) restore(best, model.params());
  return result;
}

TrainResult ablation_train(const KnowledgeGraph& kg, TrainConfig cfg, HeadKind head, std::unique_ptr<Model>& model,
                           const TrainOptions& options) {
  cfg.model.head = head;
  model = make_model(kg, cfg);
  return train(kg, cfg, *model, options);
}

}  // namespace skgc
