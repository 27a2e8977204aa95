#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"
#include "skgc/objective.hpp"
#include "toy.hpp"

using namespace skgc;
using Eigen::MatrixXd;
using Mask = Eigen::Array<bool, -1, -1>;

namespace {

Batch mask_batch(const Mask& pos, const Mask& neg) {
  Batch b;
  b.positive = pos;
  b.negative = neg;
  return b;
}

double comp_of(const Batch& b, const MatrixXd& s) {
  ad::Tape t;
  return completion_term(b, t.constant(s)).scalar();
}

}  // namespace

TEST_CASE("completion term examples") {
  Mask pos = Mask::Constant(1, 4, false), neg = Mask::Constant(1, 4, true);
  pos(0, 0) = true;
  neg(0, 0) = false;
  CHECK(comp_of(mask_batch(pos, neg), MatrixXd::Zero(1, 4)) == doctest::Approx(std::log(4.0)));
  MatrixXd s = MatrixXd::Zero(1, 4);
  s(0, 0) = 50.0;
  const double sat = comp_of(mask_batch(pos, neg), s);
  CHECK(sat >= 0.0);
  CHECK(sat < 1e-20);

  // Two positives, two negatives, all scores equal: each positive competes with the negatives only.
  Mask p2 = Mask::Constant(1, 4, false), n2 = Mask::Constant(1, 4, false);
  p2(0, 0) = p2(0, 1) = true;
  n2(0, 2) = n2(0, 3) = true;
  CHECK(comp_of(mask_batch(p2, n2), MatrixXd::Zero(1, 4)) == doctest::Approx(std::log(3.0)));

  // Single positive and equal scores: ln(1 + |N|); never negative.
  for (int n = 0; n < 6; ++n) {
    Mask p = Mask::Constant(1, n + 1, false), q = Mask::Constant(1, n + 1, true);
    p(0, 0) = true;
    q(0, 0) = false;
    CHECK(comp_of(mask_batch(p, q), MatrixXd::Constant(1, n + 1, 0.7)) == doctest::Approx(std::log1p(n)));
  }
  // Huge scores stay finite.
  CHECK(std::isfinite(comp_of(mask_batch(pos, neg), MatrixXd::Constant(1, 4, 1e4))));
  CHECK_THROWS_AS(comp_of(mask_batch(Mask::Constant(1, 4, false), neg), MatrixXd::Zero(1, 4)), std::invalid_argument);
}

TEST_CASE("reconstruction term") {
  ad::Tape t;
  const MatrixXd e = MatrixXd::Random(3, 4);
  CHECK(reconstruction_term({{t.constant(e), t.constant(e)}}).scalar() == doctest::Approx(-3.0));
  MatrixXd a(2, 2), b(2, 2);
  a << 1, 0, 0, 2;
  b << 0, 5, -3, 0;
  CHECK(reconstruction_term({{t.constant(a), t.constant(b)}}).scalar() == doctest::Approx(0.0));
  CHECK(reconstruction_term({{t.constant(e.topRows(1)), t.constant(-e.topRows(1))}}).scalar() == doctest::Approx(1.0));
  // Sums across towers.
  CHECK(reconstruction_term({{t.constant(e), t.constant(e)}, {t.constant(a), t.constant(b)}}).scalar() ==
        doctest::Approx(-3.0));
  CHECK_THROWS_AS(reconstruction_term({{t.constant(MatrixXd::Zero(1, 2)), t.constant(MatrixXd::Ones(1, 2))}}),
                  std::domain_error);
}

TEST_CASE("assemble") {
  ad::Tape t;
  auto s = [&](double x) { return t.constant(MatrixXd::Constant(1, 1, x)); };
  KlTotals kl{s(60.0), s(30.0), s(10.0)};
  CHECK(assemble(kl, s(-5.0), s(2.0), 0.0, 0.0).total == 2.0);
  const auto b = assemble(kl, s(-5.0), s(2.0), 1e-3, 1.0);
  CHECK(b.total == doctest::Approx(-2.9));
  CHECK(b.kl_total() == 100.0);
  CHECK(b.total == doctest::Approx(b.beta_weight * b.kl_total() + b.eta_weight * b.recon_total + b.comp_total));
  // Linear in (beta, eta).
  const double t1 = assemble(kl, s(-5.0), s(2.0), 0.2, 0.3).total;
  const double t2 = assemble(kl, s(-5.0), s(2.0), 0.4, 0.6).total;
  const double t0 = assemble(kl, s(-5.0), s(2.0), 0.0, 0.0).total;
  CHECK(t2 - t0 == doctest::Approx(2.0 * (t1 - t0)));
  CHECK_THROWS_AS(assemble(kl, s(0), s(0), -1.0, 0.0), std::invalid_argument);
}

TEST_CASE("make_batch deduplicates and filters negatives") {
  const auto kg = KnowledgeGraph::from_triples({{"a", "r", "b"}, {"a", "r", "c"}, {"d", "r", "c"}}, {}, {});
  const FilterIndex known(kg, {Split::train});
  const std::vector<QueryAnswer> pairs{{{0, 0}, 1}, {{0, 0}, 2}, {{3, 0}, 2}, {{0, 0}, 1}};
  const Batch b = make_batch(pairs, known);
  CHECK(b.queries == std::vector<Query>{{0, 0}, {3, 0}});
  CHECK(b.entities == std::vector<int>{1, 2});
  CHECK(b.num_pairs == 4);
  CHECK(b.positive(0, 0));
  CHECK(b.positive(0, 1));
  CHECK(b.positive(1, 1));
  CHECK_FALSE(b.positive(1, 0));
  CHECK(b.negative(1, 0));
  CHECK_FALSE(b.negative(0, 0));
  CHECK_FALSE(b.negative(0, 1));
  // Every positive is a candidate and never a negative.
  CHECK((b.positive && b.negative).count() == 0);

  // A known answer outside the batch's own pairs is not a negative either.
  const Batch one = make_batch({{{3, 0}, 2}, {{0, 0}, 1}}, known);
  CHECK(one.entities == std::vector<int>{2, 1});
  CHECK_FALSE(one.negative(1, 0));  // (a, r) -> c is known

  const Batch self = make_batch({{{0, 0}, 1}}, known, true);
  CHECK(self.entities == std::vector<int>{1, 0});
  CHECK(self.negative(0, 1));
}

TEST_CASE("KL totals") {
  SUBCASE("gaussian composition") {
    ad::Tape t;
    KlInputs in;
    in.post.mu = t.constant(MatrixXd::Ones(1, 1));
    in.post.sigma = t.constant(MatrixXd::Ones(1, 1));
    const auto kl = kl_terms(t, {in}, KlConfig{HeadKind::gaussian_vae, 1.0, 0.5, 1.0, BetaSampler::kumaraswamy});
    CHECK(kl.gaussian.scalar() == doctest::Approx(0.5));
    CHECK(kl.beta.scalar() == 0.0);
    CHECK(kl.concrete.scalar() == 0.0);
    const auto none = kl_terms(t, {in}, KlConfig{HeadKind::pure_ae, 1.0, 0.5, 1.0, BetaSampler::kumaraswamy});
    CHECK(none.gaussian.scalar() == 0.0);
  }
  SUBCASE("posterior equal to prior gives zero with zero gradients") {
    const int rows = 3, K = 5;
    const double alpha = 4.0, sigma_prior = 1.5, lambda = 0.8;
    const MatrixXd u = (MatrixXd::Random(rows, K).array() * 0.45 + 0.5).matrix();
    // pi_post equal to the stick-breaking prior of the same v draw.
    MatrixXd pi(rows, K);
    for (int i = 0; i < rows; ++i) {
      double acc = 1.0;
      for (int k = 0; k < K; ++k) {
        acc *= sample_beta_reparam({alpha, 1.0}, u(i, k)).value;
        pi(i, k) = acc;
      }
    }
    ad::Parameter c("c", MatrixXd::Constant(rows, K, alpha)), d("d", MatrixXd::Ones(rows, K));
    ad::Parameter p("pi", pi), mu("mu", MatrixXd::Zero(rows, K)), sg("sigma", MatrixXd::Constant(rows, K, sigma_prior));
    ad::Tape t;
    KlInputs in;
    in.post.pi = t.parameter(p);
    in.post.mu = t.parameter(mu);
    in.post.sigma = t.parameter(sg);
    in.y = t.constant(MatrixXd::Random(rows, K));
    in.c = t.parameter(c);
    in.d = t.parameter(d);
    in.stick_noise = u;
    in.alpha = alpha;
    const auto kl = kl_terms(t, {in}, KlConfig{HeadKind::sparse, lambda, lambda, sigma_prior, BetaSampler::kumaraswamy});
    CHECK(std::abs(kl.beta.scalar()) < 1e-12);
    CHECK(std::abs(kl.gaussian.scalar()) < 1e-12);
    CHECK(std::abs(kl.concrete.scalar()) < 1e-9);
    t.backward(ad::add(kl.beta, kl.gaussian));
    CHECK(mu.grad.isZero(1e-12));
    CHECK(sg.grad.isZero(1e-12));
    CHECK(c.grad.isZero(1e-9));
    CHECK(d.grad.isZero(1e-9));
  }
  SUBCASE("missing stick parameters") {
    ad::Tape t;
    KlInputs in;
    in.post.pi = t.constant(MatrixXd::Constant(1, 1, 0.5));
    CHECK_THROWS_AS(kl_terms(t, {in}, KlConfig{}), std::invalid_argument);
  }
}

TEST_CASE("batch loss through the model") {
  const auto kg = testutil::toy_kg();
  const auto cfg = testutil::toy_config();
  auto model = make_model(kg, cfg);
  const FilterIndex known(kg, {Split::train});
  const auto pairs = augment_inverse(kg, Split::train);
  const NoiseStream noise(cfg.seed);

  const Batch b = make_batch(pairs, known);
  std::vector<QueryAnswer> doubled = pairs;
  doubled.insert(doubled.end(), pairs.begin(), pairs.end());
  const Batch b2 = make_batch(doubled, known);

  ad::Tape t1, t2, t3;
  const auto l1 = batch_loss(t1, *model, b, cfg.objective, noise, 3);
  const auto l2 = batch_loss(t2, *model, b2, cfg.objective, noise, 3);
  const auto l3 = batch_loss(t3, *model, b, cfg.objective, noise, 3);
  // Repeating the triples changes nothing after deduplication.
  CHECK(l2.kl_beta_total == l1.kl_beta_total);
  CHECK(l2.kl_concrete_total == l1.kl_concrete_total);
  CHECK(l2.kl_gaussian_total == l1.kl_gaussian_total);
  CHECK(l2.total == l1.total);
  // Deterministic for a fixed seed and step.
  CHECK(l3.total == l1.total);
  CHECK(std::isfinite(l1.total));
  CHECK(l1.total == doctest::Approx(l1.beta_weight * l1.kl_total() + l1.eta_weight * l1.recon_total + l1.comp_total));
  CHECK(l1.comp_total >= 0.0);

  // A query without a stick row is rejected.
  Batch bad = b;
  bad.queries[0] = Query{4, 0};
  ad::Tape t4;
  CHECK_THROWS_WITH_AS(batch_loss(t4, *model, bad, cfg.objective, noise, 3), doctest::Contains("missing stick params row"),
                       std::out_of_range);
}
