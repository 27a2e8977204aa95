#include "skgc/evaluator.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <mutex>
#include <thread>

#include "json.hpp"

namespace skgc {

int rank_query(int gold, const Eigen::Ref<const Eigen::VectorXd>& scores, const std::vector<int>& filtered) {
  if (gold < 0 || gold >= scores.size()) throw std::out_of_range("rank_query: gold missing from scores");
  const double s = scores(gold);
  if (!std::isfinite(s)) throw std::domain_error("rank_query: non-finite gold score");
  int rank = 1;
  for (Eigen::Index e = 0; e < scores.size(); ++e) {
    if (e != gold && scores(e) >= s) ++rank;
  }
  // filtered is sorted and may contain gold; drop filtered entities that were counted.
  for (int e : filtered) {
    if (e != gold && e >= 0 && e < scores.size() && scores(e) >= s) --rank;
  }
  return rank;
}

Metrics metrics_of(const std::vector<int>& ranks) {
  if (ranks.empty()) throw std::invalid_argument("aggregate: empty rank list");
  Metrics m;
  for (int r : ranks) {
    if (r < 1) throw std::invalid_argument("aggregate: ranks must be >= 1");
    m.mrr += 1.0 / r;
    m.hit1 += r <= 1;
    m.hit3 += r <= 3;
    m.hit10 += r <= 10;
  }
  const double n = static_cast<double>(ranks.size());
  m.mrr /= n;
  m.hit1 /= n;
  m.hit3 /= n;
  m.hit10 /= n;
  m.count = ranks.size();
  return m;
}

RankingReport aggregate(const std::vector<int>& ranks_forward, const std::vector<int>& ranks_backward) {
  RankingReport r;
  r.forward = metrics_of(ranks_forward);
  r.backward = metrics_of(ranks_backward);
  r.average.mrr = 0.5 * (r.forward.mrr + r.backward.mrr);
  r.average.hit1 = 0.5 * (r.forward.hit1 + r.backward.hit1);
  r.average.hit3 = 0.5 * (r.forward.hit3 + r.backward.hit3);
  r.average.hit10 = 0.5 * (r.forward.hit10 + r.backward.hit10);
  r.average.count = r.forward.count + r.backward.count;
  return r;
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("SKGC_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

RankingReport evaluate_scorer(const KnowledgeGraph& kg, Split split, const FilterIndex& filter, const Scorer& scorer,
                              const EvalOptions& options) {
  std::vector<Triple> triples = kg.split(split);
  if (options.max_triples > 0 && triples.size() > options.max_triples) triples.resize(options.max_triples);
  if (triples.empty()) throw std::invalid_argument("evaluate: split " + std::string(split_name(split)) + " is empty");

  const std::size_t n = triples.size();
  // Item 2i is the forward query of triple i, 2i + 1 the backward one.
  std::vector<Query> queries(2 * n);
  std::vector<int> golds(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const Triple& t = triples[i];
    queries[2 * i] = {t.head, t.relation};
    golds[2 * i] = t.tail;
    queries[2 * i + 1] = {t.tail, kg.inverse(t.relation)};
    golds[2 * i + 1] = t.head;
  }
  std::vector<int> ranks(2 * n, 0);
  constexpr std::size_t kBlock = 256;
  const std::size_t blocks = (queries.size() + kBlock - 1) / kBlock;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    try {
      Eigen::MatrixXd scores;
      for (std::size_t b = next++; b < blocks; b = next++) {
        const std::size_t start = b * kBlock;
        const std::size_t end = std::min(queries.size(), start + kBlock);
        std::vector<Query> part(queries.begin() + static_cast<std::ptrdiff_t>(start),
                                queries.begin() + static_cast<std::ptrdiff_t>(end));
        scorer(part, scores);
        if (scores.rows() != static_cast<Eigen::Index>(part.size()) || scores.cols() != kg.num_entities()) {
          throw std::logic_error("evaluate: scorer returned wrong shape");
        }
        for (std::size_t i = start; i < end; ++i) {
          const Eigen::VectorXd row = scores.row(static_cast<Eigen::Index>(i - start)).transpose();
          ranks[i] = rank_query(golds[i], row, filter.answers(queries[i]));
        }
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = blocks;
    }
  };
  const int threads = std::min<int>(resolve_threads(options.threads), static_cast<int>(blocks));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<int> fwd(n), bwd(n);
  for (std::size_t i = 0; i < n; ++i) {
    fwd[i] = ranks[2 * i];
    bwd[i] = ranks[2 * i + 1];
  }
  RankingReport report = aggregate(fwd, bwd);
  report.split = std::string(split_name(split));
  report.ranks.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    report.ranks.push_back({triples[i], false, fwd[i]});
    report.ranks.push_back({triples[i], true, bwd[i]});
  }
  return report;
}

namespace {
Eigen::MatrixXd normalized_rows(Eigen::MatrixXd m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double norm = m.row(i).norm();
    if (norm == 0.0) throw std::domain_error("degenerate representation");
    m.row(i) /= norm;
  }
  return m;
}
}  // namespace

RankingReport evaluate(const Model& model, const KnowledgeGraph& kg, Split split, const FilterIndex& filter,
                       const EvalOptions& options) {
  if (model.kg().num_entities() != kg.num_entities() || model.kg().num_relations() != kg.num_relations()) {
    throw std::invalid_argument("evaluate: checkpoint/config mismatch with dataset vocabulary");
  }
  std::vector<int> all(static_cast<std::size_t>(kg.num_entities()));
  for (int e = 0; e < kg.num_entities(); ++e) all[static_cast<std::size_t>(e)] = e;
  const Eigen::MatrixXd candidates = normalized_rows(model.entity_representations(all));
  Scorer scorer = [&](const std::vector<Query>& qs, Eigen::MatrixXd& scores) {
    scores.noalias() = normalized_rows(model.query_representations(qs)) * candidates.transpose();
  };
  return evaluate_scorer(kg, split, filter, scorer, options);
}

namespace {
nlohmann::ordered_json metrics_json(const Metrics& m) {
  nlohmann::ordered_json j;
  j["mrr"] = m.mrr;
  j["hit@1"] = m.hit1;
  j["hit@3"] = m.hit3;
  j["hit@10"] = m.hit10;
  j["count"] = m.count;
  return j;
}
}  // namespace

std::string report_json(const RankingReport& report) {
  nlohmann::ordered_json j;
  j["split"] = report.split;
  j["forward"] = metrics_json(report.forward);
  j["backward"] = metrics_json(report.backward);
  j["average"] = metrics_json(report.average);
  return j.dump(2);
}

std::string report_text(const RankingReport& report) {
  std::ostringstream out;
  char line[160];
  out << "split: " << report.split << "\n";
  std::snprintf(line, sizeof(line), "%-10s %8s %8s %8s %8s %8s\n", "direction", "MRR", "Hit@1", "Hit@3", "Hit@10",
                "count");
  out << line;
  auto row = [&](const char* name, const Metrics& m) {
    std::snprintf(line, sizeof(line), "%-10s %8.4f %8.4f %8.4f %8.4f %8zu\n", name, m.mrr, m.hit1, m.hit3, m.hit10,
                  m.count);
    out << line;
  };
  row("forward", report.forward);
  row("backward", report.backward);
  row("average", report.average);
  return out.str();
}

void write_ranks_tsv(const RankingReport& report, const KnowledgeGraph& kg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write ranks file " + path.string());
  out << "head\trelation\ttail\tdirection\trank\n";
  for (const auto& r : report.ranks) {
    out << kg.entity_name(r.triple.head) << '\t' << kg.relation_name(r.triple.relation) << '\t'
        << kg.entity_name(r.triple.tail) << '\t' << (r.backward ? "backward" : "forward") << '\t' << r.rank << '\n';
  }
  if (!out) throw std::runtime_error("failed writing ranks file " + path.string());
}

std::vector<RankRecord> read_ranks_tsv(const std::filesystem::path& path, const KnowledgeGraph& kg) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing ranks file " + path.string());
  std::vector<RankRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || (lineno == 1 && line.rfind("head\t", 0) == 0)) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      f.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (f.size() != 5) throw std::runtime_error("malformed ranks line " + where);
    auto h = kg.find_entity(f[0]);
    auto r = kg.find_relation(f[1]);
    auto t = kg.find_entity(f[2]);
    if (!h || !t || !r) throw std::runtime_error("unknown entity or relation at " + where);
    RankRecord rec;
    rec.triple = {*h, *r, *t};
    if (f[3] != "forward" && f[3] != "backward") throw std::runtime_error("bad direction at " + where);
    rec.backward = f[3] == "backward";
    rec.rank = std::stoi(f[4]);
    out.push_back(rec);
  }
  return out;
}

}  // namespace skgc
