#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace cascade {

struct Edge {
  int src = 0;
  int dst = 0;
  bool operator==(const Edge&) const = default;
  auto operator<=>(const Edge&) const = default;
};

// Directed G(n, p) instance together with its query root.
struct Graph {
  int n = 0;
  double p = 0.0;
  std::uint64_t seed = 0;
  int root = 0;
  std::vector<Edge> edges;  // sorted by (src, dst), no self loops

  int num_edges() const { return static_cast<int>(edges.size()); }
};

// Cumulative BFS levels from the root: levels[c] = V_c (sorted), and
// frontier[c] = indices of edges leaving V_c into V_{c+1} \ V_c.
struct ReachabilityProfile {
  int depth = 0;
  std::vector<std::vector<int>> levels;     // size depth + 1
  std::vector<std::vector<int>> frontier;   // size depth
  std::vector<int> hop;                     // BFS distance, -1 if > depth

  int k(int c) const { return static_cast<int>(levels.at(c).size()); }
  int m_new(int c) const { return k(c + 1) - k(c); }
};

struct RegimeReport {
  double n = 0, p = 0, depth = 0, epsilon = 0, band_t = 0;
  bool tree_ok = false;
  bool sparsity_ok = false;
  std::vector<std::pair<double, double>> concentration_band;  // per c = 0..D
};

struct ConcentrationResult {
  double empirical_tail = 0.0;
  double bound = 0.0;
  bool pass = false;
};

Graph sample_er(int n, double p, std::uint64_t seed);

ReachabilityProfile bfs_profile(const Graph& g, int depth);

RegimeReport check_regime(double n, double p, int depth, double epsilon,
                          double band_t = 0.5);

ConcentrationResult concentration_check(int samples, int n, double p, int c,
                                        double t, std::uint64_t seed);

// Relabels node v as perm[v]; edges are re-sorted.
Graph permute_graph(const Graph& g, const std::vector<int>& perm);

nlohmann::json graph_to_json(const Graph& g);
Graph graph_from_json(const nlohmann::json& j);

}  // namespace cascade
