#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "gradcheck.hpp"
#include "skgc/trainer.hpp"
#include "toy.hpp"

using namespace skgc;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("skgc_trainer_" + name);
  fs::remove_all(dir);
  return dir;
}

ElboBreakdown initial_loss(HeadKind head) {
  const auto kg = testutil::toy_kg();
  const auto cfg = testutil::toy_config(head);
  auto model = make_model(kg, cfg);
  const Batch b = make_batch(augment_inverse(kg, Split::train), FilterIndex(kg, {Split::train}));
  return gradients(*model, b, cfg.objective, NoiseStream(cfg.seed), 0);
}

}  // namespace

TEST_CASE("full-model gradients match finite differences on a toy graph") {
  const auto kg = testutil::toy_kg();
  for (HeadKind head : {HeadKind::sparse, HeadKind::gaussian_vae, HeadKind::pure_ae}) {
    auto cfg = testutil::toy_config(head);
    auto model = make_model(kg, cfg);
    const Batch b = make_batch(augment_inverse(kg, Split::train), FilterIndex(kg, {Split::train}));
    const NoiseStream noise(cfg.seed);
    const auto r = testutil::check_gradients(model->params().all(), [&](ad::Tape& t) {
      return batch_loss(t, *model, b, cfg.objective, noise, 5).total_var;
    });
    INFO(head_kind_name(head) << ": " << r.worst);
    CHECK(r.max_rel_error < 1e-3);
  }
}

TEST_CASE("ablation heads zero out the KL families they lack") {
  const auto pure = initial_loss(HeadKind::pure_ae);
  CHECK(pure.kl_beta_total == 0.0);
  CHECK(pure.kl_concrete_total == 0.0);
  CHECK(pure.kl_gaussian_total == 0.0);
  const auto gauss = initial_loss(HeadKind::gaussian_vae);
  CHECK(gauss.kl_beta_total == 0.0);
  CHECK(gauss.kl_concrete_total == 0.0);
  CHECK(gauss.kl_gaussian_total > 0.0);
  const auto sparse = initial_loss(HeadKind::sparse);
  // Sticks start exactly at the prior, so their KL is zero until the first update.
  CHECK(sparse.kl_beta_total == doctest::Approx(0.0));
  CHECK(sparse.kl_concrete_total != 0.0);
  CHECK(sparse.kl_gaussian_total > 0.0);

  // After one update every family of the sparse head is active.
  const auto kg = testutil::toy_kg();
  auto cfg = testutil::toy_config();
  cfg.epochs = 1;
  cfg.eval_every = 0;
  std::unique_ptr<Model> model;
  ablation_train(kg, cfg, HeadKind::sparse, model);
  const Batch b = make_batch(augment_inverse(kg, Split::train), FilterIndex(kg, {Split::train}));
  ad::Tape t;
  const auto after = batch_loss(t, *model, b, cfg.objective, NoiseStream(cfg.seed), 1);
  CHECK(after.kl_beta_total > 0.0);
  CHECK(after.kl_concrete_total != 0.0);
  CHECK(after.kl_gaussian_total > 0.0);
  CHECK(model->config().head == HeadKind::sparse);
  ablation_train(kg, cfg, HeadKind::pure_ae, model);
  CHECK(model->config().head == HeadKind::pure_ae);
}

TEST_CASE("training is deterministic for a fixed seed") {
  const auto kg = testutil::ten_triple_kg();
  const auto cfg = testutil::toy_config();
  const fs::path d1 = scratch("det1"), d2 = scratch("det2");
  {
    auto m = make_model(kg, cfg);
    train(kg, cfg, *m, {d1});
  }
  {
    auto m = make_model(kg, cfg);
    train(kg, cfg, *m, {d2});
  }
  const std::string log1 = slurp(d1 / "logs/metrics.jsonl");
  CHECK_FALSE(log1.empty());
  CHECK(log1 == slurp(d2 / "logs/metrics.jsonl"));
  CHECK(slurp(d1 / "checkpoints/last.ckpt") == slurp(d2 / "checkpoints/last.ckpt"));
  CHECK(fs::exists(d1 / "checkpoints/best.ckpt"));
  CHECK(fs::exists(d1 / "config.resolved.cfg"));

  // A different seed gives a different trajectory.
  auto other = cfg;
  other.seed = 8;
  const fs::path d3 = scratch("det3");
  auto m = make_model(kg, other);
  train(kg, other, *m, {d3});
  CHECK(slurp(d3 / "logs/metrics.jsonl") != log1);
}

TEST_CASE("training history and best-epoch restore") {
  const auto kg = testutil::ten_triple_kg();
  auto cfg = testutil::toy_config();
  cfg.epochs = 4;
  auto model = make_model(kg, cfg);
  int calls = 0;
  TrainOptions opts;
  opts.on_epoch = [&](const EpochRecord&) { ++calls; };
  const auto res = train(kg, cfg, *model, opts);
  CHECK(calls == 4);
  REQUIRE(res.history.size() == 4);
  CHECK(res.total_steps == 4 * ((2 * 10 + 3) / 4));
  CHECK(res.best_epoch >= 1);
  for (const auto& r : res.history) {
    CHECK(r.validated);
    CHECK(std::isfinite(r.train.total));
    CHECK(r.valid.hit1 <= r.valid.hit3);
    CHECK(r.valid.hit3 <= r.valid.hit10);
  }
  // The restored model reproduces the best validation MRR.
  const auto again = evaluate(*model, kg, Split::valid, FilterIndex(kg));
  CHECK(again.average.mrr == doctest::Approx(res.best_valid_mrr));
}

TEST_CASE("optimizer and clipping") {
  ParameterStore store;
  auto& p = store.add("p", Eigen::MatrixXd::Random(3, 2));
  const Eigen::MatrixXd before = p.value;
  Adam adam({0.1});
  store.zero_grad();
  adam.step(store);
  adam.step(store);
  CHECK(p.value == before);

  Adam fresh({0.1});
  p.grad.setConstant(1.0);
  fresh.step(store);
  // First real Adam step moves every coordinate by about lr against the gradient.
  CHECK((before - p.value).isApprox(Eigen::MatrixXd::Constant(3, 2, 0.1), 1e-6));

  p.grad.setConstant(3.0);
  const double norm = clip_gradients(store, 1.0);
  CHECK(norm == doctest::Approx(std::sqrt(6.0 * 9.0)));
  CHECK(p.grad.norm() == doctest::Approx(1.0));
  p.grad(0, 0) = std::nan("");
  CHECK_THROWS_WITH_AS(check_finite_gradients(store), doctest::Contains("parameter block p"), NonFiniteError);
}

TEST_CASE("config validation") {
  auto cfg = testutil::toy_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.grad_clip = 0.0;
  CHECK_THROWS(cfg.validate());
  cfg.grad_clip = 5.0;
  CHECK_NOTHROW(cfg.validate());
  Config c = cfg.to_config();
  c.set("train.grad_clip", "0");
  CHECK_THROWS(TrainConfig::from_config(c));
  c.set("train.grad_clip", "none");
  CHECK_FALSE(TrainConfig::from_config(c).grad_clip.has_value());

  auto bad = testutil::toy_config();
  bad.learning_rate = -1.0;
  CHECK_THROWS(bad.validate());
  bad = testutil::toy_config();
  bad.batch_size = 0;
  CHECK_THROWS(bad.validate());
  bad = testutil::toy_config();
  bad.model.truncation.K = 0;
  CHECK_THROWS(bad.validate());

  // Round trip through the key/value form.
  cfg = testutil::toy_config(HeadKind::gaussian_vae);
  cfg.objective.self_negatives = true;
  cfg.objective.sampler = BetaSampler::implicit_beta;
  const TrainConfig back = TrainConfig::from_config(cfg.to_config());
  CHECK(back.to_config().serialize() == cfg.to_config().serialize());
  CHECK(back.model.head == HeadKind::gaussian_vae);
  CHECK(back.objective.self_negatives);
  CHECK(back.model.truncation.K == 4);

  Config unknown;
  unknown.set("model.nonsense", "1");
  CHECK_THROWS_AS(TrainConfig::from_config(unknown), ConfigError);
  CHECK(config_schema().size() > 20);
}
