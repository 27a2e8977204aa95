#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "skgc/kgstore.hpp"
#include "skgc/model.hpp"

namespace skgc {

struct Metrics {
  double mrr = 0.0;
  double hit1 = 0.0;
  double hit3 = 0.0;
  double hit10 = 0.0;
  std::size_t count = 0;
};

struct RankRecord {
  Triple triple;
  /// false: (h, r, ?) with gold t; true: (t, r^-1, ?) with gold h.
  bool backward = false;
  int rank = 0;
};

struct RankingReport {
  std::string split;
  Metrics forward;
  Metrics backward;
  /// Unweighted mean of the two directions.
  Metrics average;
  std::vector<RankRecord> ranks;
};

/// 1 + #{e != gold, e not in filtered : scores[e] >= scores[gold]}.
int rank_query(int gold, const Eigen::Ref<const Eigen::VectorXd>& scores, const std::vector<int>& filtered);

Metrics metrics_of(const std::vector<int>& ranks);
RankingReport aggregate(const std::vector<int>& ranks_forward, const std::vector<int>& ranks_backward);

struct EvalOptions {
  /// Worker threads; 0 picks SKGC_THREADS or the hardware concurrency.
  int threads = 0;
  /// Evaluate only the first n triples of the split (0 = all).
  std::size_t max_triples = 0;
};

int resolve_threads(int requested);

/// Fills `scores` (queries x entities) for a block of queries.
using Scorer = std::function<void(const std::vector<Query>& queries, Eigen::MatrixXd& scores)>;

/// Filtered ranking of both directions of every triple of the split.
RankingReport evaluate_scorer(const KnowledgeGraph& kg, Split split, const FilterIndex& filter, const Scorer& scorer,
                              const EvalOptions& options = {});

/// Eval-mode model: entity representations are computed once, queries are
/// scored by cosine similarity against all of them.
RankingReport evaluate(const Model& model, const KnowledgeGraph& kg, Split split, const FilterIndex& filter,
                       const EvalOptions& options = {});

std::string report_json(const RankingReport& report);
std::string report_text(const RankingReport& report);
/// head relation tail direction rank (names, tab separated, with header).
void write_ranks_tsv(const RankingReport& report, const KnowledgeGraph& kg, const std::filesystem::path& path);
std::vector<RankRecord> read_ranks_tsv(const std::filesystem::path& path, const KnowledgeGraph& kg);

}  // namespace skgc
