#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace skgc {

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Triple {
  int head = 0;
  int relation = 0;
  int tail = 0;
  auto operator<=>(const Triple&) const = default;
};

/// (anchor, relation, ?). Backward queries use an inverse relation id.
struct Query {
  int anchor = 0;
  int relation = 0;
  auto operator<=>(const Query&) const = default;
};

struct QueryHash {
  std::size_t operator()(const Query& q) const noexcept {
    return std::hash<std::uint64_t>{}((static_cast<std::uint64_t>(q.anchor) << 32) ^
                                      static_cast<std::uint32_t>(q.relation));
  }
};

enum class Split { train, valid, test };
std::string_view split_name(Split s);
Split parse_split(std::string_view name);

struct StringTriple {
  std::string head;
  std::string relation;
  std::string tail;
};

/// Entity/relation vocabularies, the three splits as id triples, and optional
/// text. Relation ids [0, B) are base relations; B + k is the inverse of k.
class KnowledgeGraph {
 public:
  struct Builder;

  /// Builds from in-memory string triples (vocabulary in first-appearance order).
  static KnowledgeGraph from_triples(const std::vector<StringTriple>& train,
                                     const std::vector<StringTriple>& valid,
                                     const std::vector<StringTriple>& test, bool strict = false);

  int num_entities() const { return static_cast<int>(entities_.size()); }
  int num_base_relations() const { return static_cast<int>(relations_.size()); }
  int num_relations() const { return 2 * num_base_relations(); }

  const std::vector<std::string>& entities() const { return entities_; }
  const std::vector<std::string>& base_relations() const { return relations_; }
  const std::string& entity_name(int e) const { return entities_.at(e); }
  std::string relation_name(int r) const;

  std::optional<int> find_entity(std::string_view name) const;
  std::optional<int> find_relation(std::string_view name) const;

  int inverse(int relation) const;
  bool is_inverse(int relation) const { return relation >= num_base_relations(); }
  int base_relation(int relation) const {
    return is_inverse(relation) ? relation - num_base_relations() : relation;
  }

  const std::vector<Triple>& split(Split s) const;

  const std::string* entity_text(int e) const;
  const std::string* relation_text(int base_relation) const;
  bool has_descriptions() const { return !entity_text_.empty() || !relation_text_.empty(); }

  void set_entity_text(int e, std::string text) { entity_text_[e] = std::move(text); }
  void set_relation_text(int r, std::string text) { relation_text_[r] = std::move(text); }

 private:
  std::vector<std::string> entities_;
  std::vector<std::string> relations_;
  std::unordered_map<std::string, int> entity_index_;
  std::unordered_map<std::string, int> relation_index_;
  std::vector<Triple> train_, valid_, test_;
  std::unordered_map<int, std::string> entity_text_;
  std::unordered_map<int, std::string> relation_text_;

  friend struct Builder;
};

struct LoadOptions {
  bool with_descriptions = true;
  /// Reject valid/test entities or relations that never occur in train.
  bool strict = false;
};

/// Reads `manifest.txt` (key = value lines naming train/valid/test and optional
/// entity_text/relation_text files) or falls back to train.txt, valid.txt,
/// test.txt, entity2text.txt, relation2text.txt.
KnowledgeGraph load_dataset(const std::filesystem::path& dir, const LoadOptions& options = {});

/// Writes TSV splits, text files and a manifest; load_dataset reproduces the graph.
void save_dataset(const KnowledgeGraph& kg, const std::filesystem::path& dir);

struct QueryAnswer {
  Query query;
  int answer = 0;
};

/// ((h, r) -> t) and ((t, r^-1) -> h) for every triple of the split, in file order.
std::vector<QueryAnswer> augment_inverse(const KnowledgeGraph& kg, Split split);

/// Query -> sorted answer ids over every split, both orientations.
class FilterIndex {
 public:
  FilterIndex() = default;
  explicit FilterIndex(const KnowledgeGraph& kg, std::initializer_list<Split> splits = {
                                                     Split::train, Split::valid, Split::test});

  const std::vector<int>& answers(const Query& q) const;
  bool contains(const Query& q, int entity) const;
  std::size_t num_queries() const { return index_.size(); }

 private:
  std::unordered_map<Query, std::vector<int>, QueryHash> index_;
};

FilterIndex build_filter_index(const KnowledgeGraph& kg);

struct TextOptions {
  std::size_t max_tokens = 64;
  /// Wrap sequences in [cls] ... [sep] markers.
  bool markers = true;
};

inline constexpr std::string_view kClsToken = "[cls]";
inline constexpr std::string_view kSepToken = "[sep]";
inline constexpr std::string_view kInverseToken = "[inverse]";

/// Lowercased whitespace split.
std::vector<std::string> tokenize(std::string_view text);

/// [cls] M(anchor) [sep] M(relation) [sep]; inverse relations get an [inverse] prefix.
std::vector<std::string> compose_query_text(const KnowledgeGraph& kg, const Query& q,
                                            const TextOptions& options = {});
/// [cls] M(entity) [sep]. Missing text falls back to the raw id string.
std::vector<std::string> compose_entity_text(const KnowledgeGraph& kg, int entity,
                                             const TextOptions& options = {});

}  // namespace skgc

namespace skgc {

/// Resolves a dataset given as a directory path or a bare name. Tries the
/// path itself, then $SKGC_DATA_DIR/<name>, then <root>/data/<name>.
std::optional<std::filesystem::path> find_dataset(const std::string& name_or_path,
                                                  const std::filesystem::path& root = {});

}  // namespace skgc
