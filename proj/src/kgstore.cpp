#include "skgc/kgstore.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace skgc {

namespace fs = std::filesystem;

std::string_view split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::valid: return "valid";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "valid" || name == "validation" || name == "dev") return Split::valid;
  if (name == "test") return Split::test;
  throw std::invalid_argument("unknown split '" + std::string(name) + "'");
}

struct KnowledgeGraph::Builder {
  KnowledgeGraph kg;
  bool strict = false;

  static int intern(std::vector<std::string>& names, std::unordered_map<std::string, int>& index,
                    const std::string& name) {
    auto [it, inserted] = index.emplace(name, static_cast<int>(names.size()));
    if (inserted) names.push_back(name);
    return it->second;
  }

  void add_relations(const std::vector<StringTriple>& triples, Split s) {
    for (const auto& t : triples) {
      if (strict && s != Split::train && !kg.relation_index_.count(t.relation)) {
        throw DatasetError("strict mode: relation '" + t.relation + "' in " +
                           std::string(split_name(s)) + " never occurs in train");
      }
      intern(kg.relations_, kg.relation_index_, t.relation);
    }
  }

  void add_triples(const std::vector<StringTriple>& triples, Split s, std::vector<Triple>& out) {
    out.reserve(triples.size());
    for (const auto& t : triples) {
      if (strict && s != Split::train) {
        for (const std::string* e : {&t.head, &t.tail}) {
          if (!kg.entity_index_.count(*e)) {
            throw DatasetError("strict mode: entity '" + *e + "' in " + std::string(split_name(s)) +
                               " never occurs in train");
          }
        }
      }
      const int h = intern(kg.entities_, kg.entity_index_, t.head);
      const int tl = intern(kg.entities_, kg.entity_index_, t.tail);
      out.push_back({h, kg.relation_index_.at(t.relation), tl});
    }
  }

  KnowledgeGraph build(const std::vector<StringTriple>& train, const std::vector<StringTriple>& valid,
                       const std::vector<StringTriple>& test) {
    if (train.empty()) throw DatasetError("empty split: train");
    add_relations(train, Split::train);
    add_relations(valid, Split::valid);
    add_relations(test, Split::test);
    add_triples(train, Split::train, kg.train_);
    add_triples(valid, Split::valid, kg.valid_);
    add_triples(test, Split::test, kg.test_);
    return std::move(kg);
  }
};

KnowledgeGraph KnowledgeGraph::from_triples(const std::vector<StringTriple>& train,
                                            const std::vector<StringTriple>& valid,
                                            const std::vector<StringTriple>& test, bool strict) {
  Builder b;
  b.strict = strict;
  return b.build(train, valid, test);
}

std::string KnowledgeGraph::relation_name(int r) const {
  if (r < 0 || r >= num_relations()) throw std::out_of_range("relation id out of range");
  if (is_inverse(r)) return relations_[r - num_base_relations()] + "^-1";
  return relations_[r];
}

std::optional<int> KnowledgeGraph::find_entity(std::string_view name) const {
  auto it = entity_index_.find(std::string(name));
  if (it == entity_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> KnowledgeGraph::find_relation(std::string_view name) const {
  auto it = relation_index_.find(std::string(name));
  if (it == relation_index_.end()) return std::nullopt;
  return it->second;
}

int KnowledgeGraph::inverse(int relation) const {
  if (relation < 0 || relation >= num_relations()) throw std::out_of_range("relation id out of range");
  return is_inverse(relation) ? relation - num_base_relations() : relation + num_base_relations();
}

const std::vector<Triple>& KnowledgeGraph::split(Split s) const {
  switch (s) {
    case Split::train: return train_;
    case Split::valid: return valid_;
    case Split::test: return test_;
  }
  return train_;
}

const std::string* KnowledgeGraph::entity_text(int e) const {
  auto it = entity_text_.find(e);
  return it == entity_text_.end() ? nullptr : &it->second;
}

const std::string* KnowledgeGraph::relation_text(int base_relation) const {
  auto it = relation_text_.find(base_relation);
  return it == relation_text_.end() ? nullptr : &it->second;
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return out;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::vector<StringTriple> read_triples(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DatasetError("missing split file: " + file.string());
  std::vector<StringTriple> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (trim(line).empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 3) {
      throw DatasetError("malformed line " + file.string() + ":" + std::to_string(lineno) + ": expected 3 tab-separated fields, got " +
                         std::to_string(fields.size()));
    }
    out.push_back({trim(fields[0]), trim(fields[1]), trim(fields[2])});
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> read_texts(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DatasetError("missing description file: " + file.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (trim(line).empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DatasetError("malformed line " + file.string() + ":" + std::to_string(lineno) + ": expected id<TAB>text");
    }
    out.emplace_back(trim(line.substr(0, tab)), trim(line.substr(tab + 1)));
  }
  return out;
}

std::map<std::string, std::string> read_manifest(const fs::path& dir) {
  std::map<std::string, std::string> m = {
      {"train", "train.txt"}, {"valid", "valid.txt"}, {"test", "test.txt"}};
  const fs::path manifest = dir / "manifest.txt";
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    std::string line;
    while (std::getline(in, line)) {
      strip_cr(line);
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      const std::size_t eq = t.find('=');
      if (eq == std::string::npos) throw DatasetError("malformed manifest line: " + t);
      m[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
  } else {
    if (fs::exists(dir / "entity2text.txt")) m["entity_text"] = "entity2text.txt";
    if (fs::exists(dir / "relation2text.txt")) m["relation_text"] = "relation2text.txt";
  }
  return m;
}

}  // namespace

KnowledgeGraph load_dataset(const fs::path& dir, const LoadOptions& options) {
  if (!fs::is_directory(dir)) throw DatasetError("dataset directory not found: " + dir.string());
  const auto manifest = read_manifest(dir);
  auto train = read_triples(dir / manifest.at("train"));
  auto valid = read_triples(dir / manifest.at("valid"));
  auto test = read_triples(dir / manifest.at("test"));
  KnowledgeGraph kg = KnowledgeGraph::from_triples(train, valid, test, options.strict);
  if (options.with_descriptions) {
    if (auto it = manifest.find("entity_text"); it != manifest.end()) {
      for (auto& [id, text] : read_texts(dir / it->second)) {
        if (auto e = kg.find_entity(id)) kg.set_entity_text(*e, std::move(text));
      }
    }
    if (auto it = manifest.find("relation_text"); it != manifest.end()) {
      for (auto& [id, text] : read_texts(dir / it->second)) {
        if (auto r = kg.find_relation(id)) kg.set_relation_text(*r, std::move(text));
      }
    }
  }
  return kg;
}

void save_dataset(const KnowledgeGraph& kg, const fs::path& dir) {
  fs::create_directories(dir);
  auto write_split = [&](Split s) {
    const fs::path file = dir / (std::string(split_name(s)) + ".txt");
    std::ofstream out(file);
    if (!out) throw DatasetError("cannot write " + file.string());
    for (const Triple& t : kg.split(s)) {
      out << kg.entity_name(t.head) << '\t' << kg.base_relations()[t.relation] << '\t'
          << kg.entity_name(t.tail) << '\n';
    }
  };
  write_split(Split::train);
  write_split(Split::valid);
  write_split(Split::test);
  std::ofstream manifest(dir / "manifest.txt");
  manifest << "train = train.txt\nvalid = valid.txt\ntest = test.txt\n";
  if (kg.has_descriptions()) {
    std::ofstream et(dir / "entity2text.txt");
    for (int e = 0; e < kg.num_entities(); ++e)
      if (const std::string* s = kg.entity_text(e)) et << kg.entity_name(e) << '\t' << *s << '\n';
    std::ofstream rt(dir / "relation2text.txt");
    for (int r = 0; r < kg.num_base_relations(); ++r)
      if (const std::string* s = kg.relation_text(r)) rt << kg.base_relations()[r] << '\t' << *s << '\n';
    manifest << "entity_text = entity2text.txt\nrelation_text = relation2text.txt\n";
  }
}

std::vector<QueryAnswer> augment_inverse(const KnowledgeGraph& kg, Split split) {
  const auto& triples = kg.split(split);
  std::vector<QueryAnswer> out;
  out.reserve(2 * triples.size());
  for (const Triple& t : triples) {
    out.push_back({{t.head, t.relation}, t.tail});
    out.push_back({{t.tail, kg.inverse(t.relation)}, t.head});
  }
  return out;
}

FilterIndex::FilterIndex(const KnowledgeGraph& kg, std::initializer_list<Split> splits) {
  for (Split s : splits) {
    for (const Triple& t : kg.split(s)) {
      index_[{t.head, t.relation}].push_back(t.tail);
      index_[{t.tail, kg.inverse(t.relation)}].push_back(t.head);
    }
  }
  for (auto& [q, answers] : index_) {
    std::sort(answers.begin(), answers.end());
    answers.erase(std::unique(answers.begin(), answers.end()), answers.end());
  }
}

const std::vector<int>& FilterIndex::answers(const Query& q) const {
  static const std::vector<int> kEmpty;
  auto it = index_.find(q);
  return it == index_.end() ? kEmpty : it->second;
}

bool FilterIndex::contains(const Query& q, int entity) const {
  const auto& a = answers(q);
  return std::binary_search(a.begin(), a.end(), entity);
}

FilterIndex build_filter_index(const KnowledgeGraph& kg) { return FilterIndex(kg); }

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

namespace {

void append_entity_tokens(const KnowledgeGraph& kg, int e, std::vector<std::string>& out) {
  if (const std::string* text = kg.entity_text(e); text && !text->empty()) {
    for (auto& tok : tokenize(*text)) out.push_back(std::move(tok));
  } else {
    for (auto& tok : tokenize(kg.entity_name(e))) out.push_back(std::move(tok));
  }
}

void append_relation_tokens(const KnowledgeGraph& kg, int r, std::vector<std::string>& out) {
  if (kg.is_inverse(r)) out.emplace_back(kInverseToken);
  const int base = kg.base_relation(r);
  if (const std::string* text = kg.relation_text(base); text && !text->empty()) {
    for (auto& tok : tokenize(*text)) out.push_back(std::move(tok));
  } else {
    for (auto& tok : tokenize(kg.base_relations()[base])) out.push_back(std::move(tok));
  }
}

void truncate(std::vector<std::string>& tokens, std::size_t max_tokens) {
  if (tokens.size() > max_tokens) tokens.resize(max_tokens);
}

}  // namespace

std::vector<std::string> compose_query_text(const KnowledgeGraph& kg, const Query& q,
                                            const TextOptions& options) {
  std::vector<std::string> out;
  if (options.markers) out.emplace_back(kClsToken);
  append_entity_tokens(kg, q.anchor, out);
  if (options.markers) out.emplace_back(kSepToken);
  append_relation_tokens(kg, q.relation, out);
  if (options.markers) out.emplace_back(kSepToken);
  truncate(out, options.max_tokens);
  return out;
}

std::vector<std::string> compose_entity_text(const KnowledgeGraph& kg, int entity,
                                             const TextOptions& options) {
  std::vector<std::string> out;
  if (options.markers) out.emplace_back(kClsToken);
  append_entity_tokens(kg, entity, out);
  if (options.markers) out.emplace_back(kSepToken);
  truncate(out, options.max_tokens);
  return out;
}

}  // namespace skgc

namespace skgc {

std::optional<std::filesystem::path> find_dataset(const std::string& name_or_path, const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  if (name_or_path.empty()) return std::nullopt;
  auto usable = [](const fs::path& p) {
    std::error_code ec;
    return fs::is_directory(p, ec) && (fs::exists(p / "train.txt", ec) || fs::exists(p / "manifest.txt", ec));
  };
  const fs::path direct(name_or_path);
  if (usable(direct)) return direct;
  const fs::path name = direct.filename();
  if (const char* env = std::getenv("SKGC_DATA_DIR")) {
    if (usable(fs::path(env) / name)) return fs::path(env) / name;
  }
  if (!root.empty()) {
    if (usable(root / direct)) return root / direct;
    if (usable(root / "data" / name)) return root / "data" / name;
  }
  return std::nullopt;
}

}  // namespace skgc
