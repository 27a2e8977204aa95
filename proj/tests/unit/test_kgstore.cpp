#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "skgc/kgstore.hpp"

using namespace skgc;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("skgc_kgstore_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

KnowledgeGraph small_graph() {
  return KnowledgeGraph::from_triples({{"a", "r", "b"}, {"a", "r", "c"}, {"b", "s", "c"}},
                                      {{"c", "r", "a"}}, {{"b", "r", "d"}});
}

}  // namespace

TEST_CASE("UMLS loads with the shipped counts") {
  const auto kg = load_dataset(fs::path(SKGC_SOURCE_DIR) / "data/umls");
  CHECK(kg.num_entities() == 135);
  CHECK(kg.num_base_relations() == 46);
  CHECK(kg.num_relations() == 92);
  CHECK(kg.split(Split::train).size() == 5216);
  CHECK(kg.split(Split::valid).size() == 652);
  CHECK(kg.split(Split::test).size() == 661);
  CHECK(augment_inverse(kg, Split::train).size() == 2 * 5216);

  // Splits are disjoint as triple sets.
  std::set<Triple> seen;
  std::size_t total = 0;
  for (Split s : {Split::train, Split::valid, Split::test}) {
    seen.insert(kg.split(s).begin(), kg.split(s).end());
    total += kg.split(s).size();
  }
  CHECK(seen.size() == total);

  // Every triple of every split is in the filter index in both orientations.
  const auto index = build_filter_index(kg);
  for (Split s : {Split::train, Split::valid, Split::test})
    for (const Triple& t : kg.split(s)) {
      CHECK(index.contains({t.head, t.relation}, t.tail));
      CHECK(index.contains({t.tail, kg.inverse(t.relation)}, t.head));
    }
}

TEST_CASE("vocabulary is built in first-appearance order with inverses appended") {
  const auto kg = small_graph();
  CHECK(kg.entities() == std::vector<std::string>{"a", "b", "c", "d"});
  CHECK(kg.base_relations() == std::vector<std::string>{"r", "s"});
  CHECK(kg.inverse(0) == 2);
  CHECK(kg.inverse(3) == 1);
  CHECK(kg.is_inverse(2));
  CHECK(kg.base_relation(3) == 1);
  CHECK(kg.relation_name(2) == "r^-1");
  CHECK_THROWS_AS(kg.inverse(4), std::out_of_range);
  // Unseen test entity is admitted by default and rejected in strict mode.
  CHECK(kg.find_entity("d").has_value());
  CHECK_THROWS_AS(KnowledgeGraph::from_triples({{"a", "r", "b"}}, {}, {{"b", "r", "d"}}, true), DatasetError);
  CHECK_THROWS_AS(KnowledgeGraph::from_triples({{"a", "r", "b"}}, {}, {{"a", "q", "b"}}, true), DatasetError);
}

TEST_CASE("augment_inverse") {
  const auto one = KnowledgeGraph::from_triples({{"a", "r", "b"}}, {}, {});
  const auto pairs = augment_inverse(one, Split::train);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].query == Query{0, 0});
  CHECK(pairs[0].answer == 1);
  CHECK(pairs[1].query == Query{1, 1});
  CHECK(pairs[1].answer == 0);

  const auto loop = KnowledgeGraph::from_triples({{"a", "r", "a"}}, {}, {});
  const auto lp = augment_inverse(loop, Split::train);
  REQUIRE(lp.size() == 2);
  CHECK(lp[0].query.anchor == 0);
  CHECK(lp[0].answer == 0);
  CHECK(lp[1].query.anchor == 0);
  CHECK(lp[1].answer == 0);
  CHECK(lp[0].query != lp[1].query);

  const auto kg = small_graph();
  for (Split s : {Split::train, Split::valid, Split::test}) CHECK(augment_inverse(kg, s).size() == 2 * kg.split(s).size());
}

TEST_CASE("filter index") {
  const auto kg = KnowledgeGraph::from_triples({{"a", "r", "b"}, {"a", "r", "c"}}, {}, {});
  const auto index = build_filter_index(kg);
  CHECK(index.answers({0, 0}) == std::vector<int>{1, 2});
  CHECK(index.answers({1, kg.inverse(0)}) == std::vector<int>{0});
  CHECK(index.answers({2, 0}).empty());
  CHECK(index.answers({99, 0}).empty());
  CHECK_FALSE(index.contains({0, 0}, 0));
}

TEST_CASE("dataset files: round trip and errors") {
  const auto dir = scratch_dir("roundtrip");
  auto kg = small_graph();
  kg.set_entity_text(0, "Alpha entity");
  kg.set_relation_text(1, "Some Relation");
  save_dataset(kg, dir);
  const auto back = load_dataset(dir);
  CHECK(back.entities() == kg.entities());
  CHECK(back.base_relations() == kg.base_relations());
  for (Split s : {Split::train, Split::valid, Split::test}) CHECK(back.split(s) == kg.split(s));
  REQUIRE(back.entity_text(0) != nullptr);
  CHECK(*back.entity_text(0) == "Alpha entity");
  CHECK(*back.relation_text(1) == "Some Relation");
  CHECK_FALSE(load_dataset(dir, {.with_descriptions = false}).has_descriptions());

  const auto bad = scratch_dir("bad");
  write_file(bad / "train.txt", "a\tr\tb\n");
  write_file(bad / "valid.txt", "");
  CHECK_THROWS_WITH_AS(load_dataset(bad), doctest::Contains("missing split file"), DatasetError);
  write_file(bad / "test.txt", "a\tr\n");
  CHECK_THROWS_WITH_AS(load_dataset(bad), doctest::Contains("malformed line"), DatasetError);
  write_file(bad / "test.txt", "");
  write_file(bad / "train.txt", "");
  CHECK_THROWS_WITH_AS(load_dataset(bad), doctest::Contains("empty split"), DatasetError);
  CHECK_THROWS_AS(load_dataset(bad / "nope"), DatasetError);
}

TEST_CASE("find_dataset") {
  const fs::path root(SKGC_SOURCE_DIR);
  CHECK(find_dataset("umls", root).has_value());
  CHECK(find_dataset((root / "data/umls").string()).has_value());
  CHECK_FALSE(find_dataset("no_such_dataset", root).has_value());
}

TEST_CASE("text composition") {
  auto kg = KnowledgeGraph::from_triples({{"PJ_Harvey", "genre", "e42"}}, {}, {});
  kg.set_entity_text(0, "PJ Harvey  Polly Jean Harvey MBE is an English musician");
  kg.set_relation_text(0, "Music Genre");
  const TextOptions plain{64, false};
  const auto toks = compose_entity_text(kg, 0, plain);
  REQUIRE(toks.size() >= 4);
  CHECK(std::vector<std::string>(toks.begin(), toks.begin() + 4) ==
        std::vector<std::string>{"pj", "harvey", "polly", "jean"});
  CHECK(compose_entity_text(kg, 1, plain) == std::vector<std::string>{"e42"});
  CHECK(compose_entity_text(kg, 0, {2, false}).size() == 2);
  CHECK(compose_entity_text(kg, 1) == std::vector<std::string>{"[cls]", "e42", "[sep]"});

  const auto q = compose_query_text(kg, {1, kg.inverse(0)});
  CHECK(q == std::vector<std::string>{"[cls]", "e42", "[sep]", "[inverse]", "music", "genre", "[sep]"});
  CHECK(compose_query_text(kg, {1, 0}, {3, true}).size() == 3);
  // Deterministic.
  CHECK(compose_query_text(kg, {0, 0}) == compose_query_text(kg, {0, 0}));
  CHECK(tokenize("  Hello\tWORLD \n x ") == std::vector<std::string>{"hello", "world", "x"});
}
