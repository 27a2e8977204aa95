#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "skgc/evaluator.hpp"
#include "skgc/kgstore.hpp"

namespace skgc {

/// Undirected simple graph (no self loops, no parallel edges).
struct Graph {
  int num_nodes = 0;
  std::size_t num_edges = 0;
  /// Sorted neighbour lists.
  std::vector<std::vector<int>> adj;
};

Graph graph_from_edges(int num_nodes, const std::vector<std::pair<int, int>>& edges);
/// Entities as nodes; one edge per connected (head, tail) pair of the train split.
Graph train_graph(const KnowledgeGraph& kg);

/// Mean over rows of #{k : Z(row, k) > threshold}.
double activated_communities(const Eigen::MatrixXd& z, double threshold = 0.5);

struct CommunityAssignment {
  /// Community of each node, numbered 0.. in order of first appearance.
  std::vector<int> labels;
  int num_communities = 0;
  int rounds = 0;
};

/// Asynchronous label propagation: each round visits nodes in a seeded random
/// order and moves each to its most frequent neighbour label (ties to the
/// lowest label). Stops when a round changes nothing or after max_rounds.
CommunityAssignment label_propagation(const Graph& g, std::uint64_t seed, int max_rounds = 100);

/// sum_c [ L_c / m - gamma (d_c / 2m)^2 ]
double modularity(const Graph& g, const std::vector<int>& labels, double gamma = 1.0);

/// Shortest-path lengths from head to tail; -1 when unreachable.
std::vector<int> geodesic_distances(const Graph& g, const std::vector<Triple>& triples);

/// "0".."5", "5+" for longer paths, "inf" when unreachable.
std::string distance_bucket(int distance);

struct GeodesicBucket {
  std::string name;
  std::vector<std::size_t> triples;
  /// Over both directions of the bucket's triples (empty when no ranks given).
  Metrics metrics;
};

struct GeodesicBreakdown {
  std::vector<int> distances;
  std::vector<GeodesicBucket> buckets;
};

/// Buckets the triples by train-graph distance and attaches Hit@k from the
/// rank records (matched by triple).
GeodesicBreakdown geodesic_breakdown(const KnowledgeGraph& kg, const std::vector<Triple>& triples,
                                     const std::vector<RankRecord>& ranks);
GeodesicBreakdown geodesic_breakdown(const Graph& g, const std::vector<Triple>& triples,
                                     const std::vector<RankRecord>& ranks);

struct CommunityMember {
  int entity = 0;
  double value = 0.0;
  std::string label;
};

struct LatentExport {
  /// order[i] is the original column shown at position i.
  std::vector<int> order;
  std::vector<double> strengths;
  Eigen::MatrixXd sorted;
  std::vector<std::vector<CommunityMember>> communities;
};

/// Columns sorted by sum |f| (descending, stable); top_n entities by f for the first `communities` columns.
LatentExport export_latent_structure(const Eigen::MatrixXd& f, const KnowledgeGraph* kg, int top_n,
                                     int communities, std::size_t description_chars = 60);

void write_matrix_csv(const Eigen::MatrixXd& m, const std::filesystem::path& path);
std::string communities_table(const LatentExport& ex);
std::string geodesic_table(const GeodesicBreakdown& b);

}  // namespace skgc
