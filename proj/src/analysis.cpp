#include "skgc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <queue>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "skgc/noise.hpp"

namespace skgc {

Graph graph_from_edges(int num_nodes, const std::vector<std::pair<int, int>>& edges) {
  if (num_nodes < 0) throw std::invalid_argument("graph: negative node count");
  Graph g;
  g.num_nodes = num_nodes;
  g.adj.assign(static_cast<std::size_t>(num_nodes), {});
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || a >= num_nodes || b >= num_nodes) throw std::out_of_range("graph: node out of range");
    if (a == b) continue;
    g.adj[static_cast<std::size_t>(a)].push_back(b);
    g.adj[static_cast<std::size_t>(b)].push_back(a);
  }
  std::size_t twice = 0;
  for (auto& nb : g.adj) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    twice += nb.size();
  }
  g.num_edges = twice / 2;
  return g;
}

Graph train_graph(const KnowledgeGraph& kg) {
  std::vector<std::pair<int, int>> edges;
  for (const auto& t : kg.split(Split::train)) edges.emplace_back(t.head, t.tail);
  return graph_from_edges(kg.num_entities(), edges);
}

double activated_communities(const Eigen::MatrixXd& z, double threshold) {
  if (z.rows() == 0 || z.cols() == 0) throw std::invalid_argument("activated_communities: empty matrix");
  return static_cast<double>((z.array() > threshold).count()) / static_cast<double>(z.rows());
}

CommunityAssignment label_propagation(const Graph& g, std::uint64_t seed, int max_rounds) {
  std::vector<int> labels(static_cast<std::size_t>(g.num_nodes));
  std::iota(labels.begin(), labels.end(), 0);
  std::vector<int> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  const NoiseStream noise(seed);
  std::unordered_map<int, int> counts;
  CommunityAssignment out;
  for (int round = 1; round <= max_rounds; ++round) {
    out.rounds = round;
    std::mt19937_64 rng(noise.derive_seed(NoisePurpose::label_propagation, static_cast<std::uint64_t>(round)));
    std::shuffle(order.begin(), order.end(), rng);
    bool changed = false;
    for (int v : order) {
      const auto& nb = g.adj[static_cast<std::size_t>(v)];
      if (nb.empty()) continue;
      counts.clear();
      for (int u : nb) ++counts[labels[static_cast<std::size_t>(u)]];
      int best = -1, best_count = 0;
      for (const auto& [label, c] : counts) {
        if (c > best_count || (c == best_count && label < best)) {
          best = label;
          best_count = c;
        }
      }
      if (best != labels[static_cast<std::size_t>(v)]) {
        labels[static_cast<std::size_t>(v)] = best;
        changed = true;
      }
    }
    if (!changed) break;
  }
  std::unordered_map<int, int> renumber;
  out.labels.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto it = renumber.emplace(labels[i], static_cast<int>(renumber.size())).first;
    out.labels[i] = it->second;
  }
  out.num_communities = static_cast<int>(renumber.size());
  return out;
}

double modularity(const Graph& g, const std::vector<int>& labels, double gamma) {
  if (g.num_edges == 0) throw std::invalid_argument("modularity: graph has no edges");
  if (labels.size() != static_cast<std::size_t>(g.num_nodes)) throw std::invalid_argument("modularity: label count");
  std::unordered_map<int, double> inside, degree;
  for (int v = 0; v < g.num_nodes; ++v) {
    const int c = labels[static_cast<std::size_t>(v)];
    const auto& nb = g.adj[static_cast<std::size_t>(v)];
    degree[c] += static_cast<double>(nb.size());
    for (int u : nb) {
      if (labels[static_cast<std::size_t>(u)] == c) inside[c] += 0.5;
    }
  }
  const double m = static_cast<double>(g.num_edges);
  double q = 0.0;
  for (const auto& [c, d] : degree) {
    const double share = d / (2.0 * m);
    q += inside[c] / m - gamma * share * share;
  }
  return q;
}

std::vector<int> geodesic_distances(const Graph& g, const std::vector<Triple>& triples) {
  // One BFS per distinct head.
  std::map<int, std::vector<std::size_t>> by_head;
  for (std::size_t i = 0; i < triples.size(); ++i) by_head[triples[i].head].push_back(i);
  std::vector<int> out(triples.size(), -1);
  std::vector<int> dist(static_cast<std::size_t>(g.num_nodes), -1);
  std::vector<int> touched;
  for (const auto& [head, idx] : by_head) {
    if (head < 0 || head >= g.num_nodes) throw std::out_of_range("geodesic: head outside graph");
    std::queue<int> q;
    dist[static_cast<std::size_t>(head)] = 0;
    touched.push_back(head);
    q.push(head);
    while (!q.empty()) {
      const int v = q.front();
      q.pop();
      for (int u : g.adj[static_cast<std::size_t>(v)]) {
        if (dist[static_cast<std::size_t>(u)] < 0) {
          dist[static_cast<std::size_t>(u)] = dist[static_cast<std::size_t>(v)] + 1;
          touched.push_back(u);
          q.push(u);
        }
      }
    }
    for (std::size_t i : idx) {
      const int t = triples[i].tail;
      if (t < 0 || t >= g.num_nodes) throw std::out_of_range("geodesic: tail outside graph");
      out[i] = dist[static_cast<std::size_t>(t)];
    }
    for (int v : touched) dist[static_cast<std::size_t>(v)] = -1;
    touched.clear();
  }
  return out;
}

std::string distance_bucket(int distance) {
  if (distance < 0) return "inf";
  if (distance > 5) return "5+";
  return std::to_string(distance);
}

GeodesicBreakdown geodesic_breakdown(const Graph& g, const std::vector<Triple>& triples,
                                     const std::vector<RankRecord>& ranks) {
  GeodesicBreakdown out;
  out.distances = geodesic_distances(g, triples);
  static const std::vector<std::string> names = {"0", "1", "2", "3", "4", "5", "5+", "inf"};
  std::map<std::string, std::size_t> slot;
  for (const auto& n : names) {
    slot[n] = out.buckets.size();
    out.buckets.push_back({n, {}, {}});
  }
  std::map<Triple, std::vector<int>> rank_of;
  for (const auto& r : ranks) rank_of[r.triple].push_back(r.rank);
  std::vector<std::vector<int>> bucket_ranks(names.size());
  for (std::size_t i = 0; i < triples.size(); ++i) {
    const std::size_t b = slot[distance_bucket(out.distances[i])];
    out.buckets[b].triples.push_back(i);
    auto it = rank_of.find(triples[i]);
    if (it != rank_of.end()) bucket_ranks[b].insert(bucket_ranks[b].end(), it->second.begin(), it->second.end());
  }
  for (std::size_t b = 0; b < names.size(); ++b) {
    if (!bucket_ranks[b].empty()) out.buckets[b].metrics = metrics_of(bucket_ranks[b]);
  }
  // Bucket "0" only exists for self-loop triples.
  if (out.buckets.front().triples.empty()) out.buckets.erase(out.buckets.begin());
  return out;
}

GeodesicBreakdown geodesic_breakdown(const KnowledgeGraph& kg, const std::vector<Triple>& triples,
                                     const std::vector<RankRecord>& ranks) {
  return geodesic_breakdown(train_graph(kg), triples, ranks);
}

LatentExport export_latent_structure(const Eigen::MatrixXd& f, const KnowledgeGraph* kg, int top_n, int communities,
                                     std::size_t description_chars) {
  if (top_n < 0 || communities < 0) throw std::invalid_argument("export_latent_structure: negative count");
  LatentExport ex;
  const auto K = static_cast<int>(f.cols());
  std::vector<double> sums(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) sums[static_cast<std::size_t>(k)] = f.col(k).cwiseAbs().sum();
  ex.order.resize(static_cast<std::size_t>(K));
  std::iota(ex.order.begin(), ex.order.end(), 0);
  std::stable_sort(ex.order.begin(), ex.order.end(),
                   [&](int a, int b) { return sums[static_cast<std::size_t>(a)] > sums[static_cast<std::size_t>(b)]; });
  ex.sorted.resize(f.rows(), f.cols());
  for (int i = 0; i < K; ++i) {
    const int c = ex.order[static_cast<std::size_t>(i)];
    ex.sorted.col(i) = f.col(c);
    ex.strengths.push_back(sums[static_cast<std::size_t>(c)]);
  }
  const int shown = std::min(communities, K);
  for (int i = 0; i < shown; ++i) {
    std::vector<int> rows(static_cast<std::size_t>(f.rows()));
    std::iota(rows.begin(), rows.end(), 0);
    const auto col = ex.sorted.col(i);
    std::stable_sort(rows.begin(), rows.end(), [&](int a, int b) { return col(a) > col(b); });
    std::vector<CommunityMember> members;
    for (int j = 0; j < std::min<int>(top_n, static_cast<int>(rows.size())); ++j) {
      CommunityMember m;
      m.entity = rows[static_cast<std::size_t>(j)];
      m.value = col(m.entity);
      if (kg) {
        const std::string* text = kg->entity_text(m.entity);
        m.label = text ? text->substr(0, description_chars) : kg->entity_name(m.entity);
      } else {
        m.label = std::to_string(m.entity);
      }
      members.push_back(std::move(m));
    }
    ex.communities.push_back(std::move(members));
  }
  return ex;
}

void write_matrix_csv(const Eigen::MatrixXd& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  char buf[32];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.6g", m(i, j));
      out << (j ? "," : "") << buf;
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string communities_table(const LatentExport& ex) {
  std::ostringstream out;
  char line[256];
  for (std::size_t i = 0; i < ex.communities.size(); ++i) {
    std::snprintf(line, sizeof(line), "community %zu (column %d, strength %.4f)\n", i, ex.order[i], ex.strengths[i]);
    out << line;
    for (const auto& m : ex.communities[i]) {
      std::snprintf(line, sizeof(line), "  %8.4f  %s\n", m.value, m.label.c_str());
      out << line;
    }
  }
  return out.str();
}

std::string geodesic_table(const GeodesicBreakdown& b) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-8s %8s %8s %8s %8s %8s\n", "distance", "triples", "MRR", "Hit@1", "Hit@3",
                "Hit@10");
  out << line;
  for (const auto& bucket : b.buckets) {
    std::snprintf(line, sizeof(line), "%-8s %8zu %8.4f %8.4f %8.4f %8.4f\n", bucket.name.c_str(),
                  bucket.triples.size(), bucket.metrics.mrr, bucket.metrics.hit1, bucket.metrics.hit3,
                  bucket.metrics.hit10);
    out << line;
  }
  return out.str();
}

}  // namespace skgc
