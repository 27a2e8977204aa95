#include <filesystem>
#include <random>
#include <set>

#include "doctest.h"
#include "skgc/evaluator.hpp"
#include "skgc/trainer.hpp"
#include "toy.hpp"

using namespace skgc;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

// Rank by sorting the surviving candidates, gold placed after every tie.
int sorted_rank(int gold, const VectorXd& s, const std::set<int>& filtered) {
  std::vector<std::pair<double, int>> pool;
  for (int e = 0; e < s.size(); ++e)
    if (e == gold || !filtered.count(e)) pool.push_back({s(e), e == gold ? 1 : 0});
  // Descending score; on ties the gold (flag 1) goes last.
  std::sort(pool.begin(), pool.end(), [](auto a, auto b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (pool[i].second == 1) return static_cast<int>(i) + 1;
  return -1;
}

fs::path umls_dir() { return fs::path(SKGC_SOURCE_DIR) / "data/umls"; }

}  // namespace

TEST_CASE("rank_query examples") {
  VectorXd s(5);
  s << 0.9, 0.1, 0.2, 0.3, 0.4;
  CHECK(rank_query(0, s, {}) == 1);
  VectorXd t(3);
  t << 0.9, 0.95, 0.99;
  CHECK(rank_query(0, t, {2}) == 2);
  CHECK(rank_query(0, t, {0, 2}) == 2);
  VectorXd tie(3);
  tie << 0.5, 0.5, 0.1;
  CHECK(rank_query(0, tie, {}) == 2);
  CHECK_THROWS_AS(rank_query(5, s, {}), std::out_of_range);
  s(0) = std::nan("");
  CHECK_THROWS_AS(rank_query(0, s, {}), std::domain_error);
}

TEST_CASE("rank_query agrees with a sort-based oracle") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> level(0, 4), pick(0, 7), coin(0, 2);
  for (int trial = 0; trial < 2000; ++trial) {
    VectorXd s(8);
    for (int e = 0; e < 8; ++e) s(e) = 0.25 * level(rng);  // coarse levels force ties
    const int gold = pick(rng);
    std::set<int> filtered;
    for (int e = 0; e < 8; ++e)
      if (coin(rng) == 0) filtered.insert(e);
    const std::vector<int> f(filtered.begin(), filtered.end());
    CHECK(rank_query(gold, s, f) == sorted_rank(gold, s, filtered));
  }
}

TEST_CASE("ranking properties") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 200; ++trial) {
    VectorXd s(10);
    for (int e = 0; e < 10; ++e) s(e) = n(rng);
    const std::vector<int> filtered{3, 7};
    const int r = rank_query(0, s, filtered);
    // A filtered entity's score never matters.
    VectorXd s2 = s;
    s2(3) = 1e9;
    s2(7) = -1e9;
    CHECK(rank_query(0, s2, filtered) == r);
    // Raising the gold never hurts.
    VectorXd s3 = s;
    s3(0) += std::abs(n(rng));
    CHECK(rank_query(0, s3, filtered) <= r);
    // Strictly increasing transforms leave ranks alone.
    CHECK(rank_query(0, VectorXd((s.array() * 0.01).exp()), filtered) == r);
    CHECK(rank_query(0, VectorXd(s.array() / 0.05 - 0.3), filtered) == r);
  }
}

TEST_CASE("aggregate") {
  const Metrics m = metrics_of({1, 2, 4});
  CHECK(m.mrr == doctest::Approx(1.75 / 3.0));
  CHECK(m.hit1 == doctest::Approx(1.0 / 3.0));
  CHECK(m.hit3 == doctest::Approx(2.0 / 3.0));
  CHECK(m.hit10 == doctest::Approx(1.0));
  const Metrics one = metrics_of({1, 1, 1});
  CHECK(one.mrr == 1.0);
  CHECK(one.hit1 == 1.0);
  CHECK(one.hit10 == 1.0);
  // Forward MRR 0.6 and backward 0.4 average to 0.5.
  const auto rep = aggregate({1, 5, 1, 5, 1, 5, 1, 5, 1, 5}, {5, 5, 5, 1, 1});
  CHECK(rep.forward.mrr == doctest::Approx(0.6));
  CHECK(rep.backward.mrr == doctest::Approx(0.52));
  const auto rep2 = aggregate({1, 1, 1, 1, 1, 5, 5, 5, 5, 5}, {2, 2, 2, 2, 2, 2, 2, 2, 2, 2});
  CHECK(rep2.average.mrr == doctest::Approx(0.5 * (0.6 + 0.5)));
  CHECK_THROWS_AS(metrics_of({}), std::invalid_argument);
  CHECK_THROWS_AS(aggregate({}, {1}), std::invalid_argument);
  CHECK_THROWS_AS(metrics_of({0}), std::invalid_argument);
}

TEST_CASE("oracle scorers on UMLS") {
  const auto kg = load_dataset(umls_dir());
  const FilterIndex filter(kg);
  // Perfect scorer: 1 for every known answer of the query.
  Scorer perfect = [&](const std::vector<Query>& qs, Eigen::MatrixXd& s) {
    s.setZero(static_cast<Eigen::Index>(qs.size()), kg.num_entities());
    for (std::size_t i = 0; i < qs.size(); ++i)
      for (int a : filter.answers(qs[i])) s(static_cast<Eigen::Index>(i), a) = 1.0;
  };
  const auto best = evaluate_scorer(kg, Split::test, filter, perfect);
  CHECK(best.average.mrr == 1.0);
  CHECK(best.average.hit1 == 1.0);
  CHECK(best.ranks.size() == 2 * kg.split(Split::test).size());

  // Independent uniform scores: E[1/rank] = H_n / n with n surviving candidates.
  double expected = 0.0;
  std::size_t count = 0;
  for (const Triple& t : kg.split(Split::test)) {
    for (bool back : {false, true}) {
      const Query q = back ? Query{t.tail, kg.inverse(t.relation)} : Query{t.head, t.relation};
      const int n = kg.num_entities() - static_cast<int>(filter.answers(q).size()) + 1;
      double h = 0.0;
      for (int k = 1; k <= n; ++k) h += 1.0 / k;
      expected += h / n;
      ++count;
    }
  }
  expected /= count;
  double mean = 0.0;
  const int reps = 5;
  for (int rep = 0; rep < reps; ++rep) {
    const NoiseStream noise(100 + rep);
    Scorer uniform = [&](const std::vector<Query>& qs, Eigen::MatrixXd& s) {
      s.resize(static_cast<Eigen::Index>(qs.size()), kg.num_entities());
      for (std::size_t i = 0; i < qs.size(); ++i)
        for (int e = 0; e < kg.num_entities(); ++e)
          s(static_cast<Eigen::Index>(i), e) = noise.uniform(NoisePurpose::evaluation, qs[i].anchor * 1000 + qs[i].relation, 0, e);
    };
    mean += evaluate_scorer(kg, Split::test, filter, uniform).average.mrr / reps;
  }
  INFO("uniform MRR " << mean << " expected " << expected);
  CHECK(std::abs(mean - expected) < 0.005);
  // Without filtering this would be H_135 / 135; filtering removes candidates and lifts it.
  double h135 = 0.0;
  for (int k = 1; k <= 135; ++k) h135 += 1.0 / k;
  CHECK(h135 / 135 == doctest::Approx(0.0406).epsilon(0.01));
  CHECK(expected > h135 / 135);
  CHECK(expected == doctest::Approx(0.0588).epsilon(0.01));
}

TEST_CASE("untrained model is near the random baseline and evaluation is deterministic") {
  const auto kg = load_dataset(umls_dir());
  auto cfg = testutil::toy_config();
  cfg.model.dim = cfg.model.encoder.embed_dim = 32;
  cfg.model.truncation.K = 8;
  auto model = make_model(kg, cfg);
  const FilterIndex filter(kg);
  EvalOptions one;
  one.threads = 1;
  EvalOptions many;
  many.threads = 3;
  const auto a = evaluate(*model, kg, Split::test, filter, one);
  const auto b = evaluate(*model, kg, Split::test, filter, many);
  INFO("untrained MRR " << a.average.mrr);
  // Filtered random baseline on this split is 0.0588 (see the oracle test above).
  CHECK(std::abs(a.average.mrr - 0.0588) < 0.015);
  CHECK(report_json(a) == report_json(b));
  CHECK(report_text(a) == report_text(b));
  CHECK(a.average.hit1 <= a.average.hit3);
  CHECK(a.average.hit3 <= a.average.hit10);
  CHECK(a.average.mrr >= a.average.hit1);

  EvalOptions lim;
  lim.max_triples = 10;
  CHECK(evaluate(*model, kg, Split::test, filter, lim).ranks.size() == 20);

  const fs::path p = fs::temp_directory_path() / "skgc_ranks.tsv";
  write_ranks_tsv(a, kg, p);
  const auto back = read_ranks_tsv(p, kg);
  REQUIRE(back.size() == a.ranks.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].triple == a.ranks[i].triple);
    CHECK(back[i].backward == a.ranks[i].backward);
    CHECK(back[i].rank == a.ranks[i].rank);
  }
}

TEST_CASE("empty split is an error") {
  const auto kg = KnowledgeGraph::from_triples({{"a", "r", "b"}}, {}, {});
  Scorer zero = [&](const std::vector<Query>& qs, Eigen::MatrixXd& s) { s.setZero(static_cast<Eigen::Index>(qs.size()), 2); };
  CHECK_THROWS(evaluate_scorer(kg, Split::test, FilterIndex(kg), zero));
}

TEST_CASE("thread resolution") {
  CHECK(resolve_threads(3) == 3);
  CHECK(resolve_threads(0) >= 1);
}
