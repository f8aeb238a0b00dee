#include "cascade/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "cascade/error.hpp"
#include "cascade/rng.hpp"

namespace cascade {

Graph sample_er(int n, double p, std::uint64_t seed) {
  if (n < 1) throw ConfigError("sample_er: n must be >= 1");
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("sample_er: p must lie in [0, 1]");
  Rng rng(seed);
  Graph g;
  g.n = n;
  g.p = p;
  g.seed = seed;
  g.root = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(n)));
  if (n == 1 || p == 0.0) return g;

  // Ordered pairs (u, v), u != v, enumerated as u * (n - 1) + j where
  // v = j < u ? j : j + 1. Walking this in order keeps edges sorted.
  const std::uint64_t total = static_cast<std::uint64_t>(n) * (n - 1);
  auto emit = [&](std::uint64_t idx) {
    const int u = static_cast<int>(idx / (n - 1));
    const int j = static_cast<int>(idx % (n - 1));
    g.edges.push_back({u, j < u ? j : j + 1});
  };
  if (p == 1.0) {
    for (std::uint64_t i = 0; i < total; ++i) emit(i);
    return g;
  }
  const double log_q = std::log1p(-p);
  std::uint64_t idx = 0;
  while (true) {
    const double skip = std::floor(std::log(uniform_open0(rng)) / log_q);
    if (skip >= static_cast<double>(total - idx)) break;
    idx += static_cast<std::uint64_t>(skip);
    emit(idx);
    ++idx;
    if (idx >= total) break;
  }
  return g;
}

ReachabilityProfile bfs_profile(const Graph& g, int depth) {
  if (depth < 0) throw ConfigError("bfs_profile: depth must be >= 0");
  if (g.root < 0 || g.root >= g.n) throw InputError("bfs_profile: root out of range");
  std::vector<std::vector<int>> adj(g.n);
  for (const auto& e : g.edges) {
    if (e.src < 0 || e.src >= g.n || e.dst < 0 || e.dst >= g.n)
      throw InputError("bfs_profile: edge endpoint out of range");
    adj[e.src].push_back(e.dst);
  }
  ReachabilityProfile prof;
  prof.depth = depth;
  prof.hop.assign(g.n, -1);
  prof.hop[g.root] = 0;
  std::deque<int> queue{g.root};
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop_front();
    if (prof.hop[v] == depth) continue;
    for (int w : adj[v]) {
      if (prof.hop[w] < 0) {
        prof.hop[w] = prof.hop[v] + 1;
        queue.push_back(w);
      }
    }
  }
  prof.levels.resize(depth + 1);
  for (int c = 0; c <= depth; ++c)
    for (int v = 0; v < g.n; ++v)
      if (prof.hop[v] >= 0 && prof.hop[v] <= c) prof.levels[c].push_back(v);
  prof.frontier.resize(depth);
  for (int i = 0; i < g.num_edges(); ++i) {
    const auto& e = g.edges[i];
    const int hs = prof.hop[e.src];
    const int ht = prof.hop[e.dst];
    if (hs < 0 || ht < 1 || hs >= ht) continue;
    prof.frontier[ht - 1].push_back(i);
  }
  return prof;
}

RegimeReport check_regime(double n, double p, int depth, double epsilon, double band_t) {
  if (n < 1 || !(p >= 0 && p <= 1) || depth < 0 || !(epsilon > 0 && epsilon < 1))
    throw ConfigError("check_regime: invalid arguments");
  RegimeReport r;
  r.n = n;
  r.p = p;
  r.depth = depth;
  r.epsilon = epsilon;
  r.band_t = band_t;
  const double np = n * p;
  r.tree_ok = std::pow(np, depth) <= std::pow(n, 1.0 - epsilon);
  r.sparsity_ok = np > 1.0 && np <= std::sqrt(n);
  for (int c = 0; c <= depth; ++c) {
    const double mean = std::pow(np, c);
    r.concentration_band.emplace_back((1 - band_t) * mean, (1 + band_t) * mean);
  }
  return r;
}

ConcentrationResult concentration_check(int samples, int n, double p, int c, double t,
                                        std::uint64_t seed) {
  if (samples < 1 || c < 0 || t <= 0) throw ConfigError("concentration_check: invalid arguments");
  const double mean = std::pow(n * p, c);
  int outside = 0;
  for (int s = 0; s < samples; ++s) {
    const Graph g = sample_er(n, p, derive_seed({seed, static_cast<std::uint64_t>(s)}));
    const double k = bfs_profile(g, c).k(c);
    if (std::abs(k - mean) > t * mean) ++outside;
  }
  ConcentrationResult res;
  res.empirical_tail = static_cast<double>(outside) / samples;
  res.bound = 2.0 * std::exp(-t * t * mean / 3.0);
  res.pass = res.empirical_tail <= res.bound;
  return res;
}

Graph permute_graph(const Graph& g, const std::vector<int>& perm) {
  if (static_cast<int>(perm.size()) != g.n) throw InputError("permute_graph: size mismatch");
  Graph out = g;
  out.root = perm[g.root];
  for (auto& e : out.edges) e = {perm[e.src], perm[e.dst]};
  std::sort(out.edges.begin(), out.edges.end());
  return out;
}

nlohmann::json graph_to_json(const Graph& g) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : g.edges) edges.push_back({e.src, e.dst});
  return {{"n", g.n}, {"p", g.p}, {"seed", g.seed}, {"root", g.root}, {"edges", edges}};
}

Graph graph_from_json(const nlohmann::json& j) {
  Graph g;
  try {
    g.n = j.at("n").get<int>();
    g.p = j.at("p").get<double>();
    g.seed = j.at("seed").get<std::uint64_t>();
    g.root = j.at("root").get<int>();
    for (const auto& e : j.at("edges")) g.edges.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
  } catch (const nlohmann::json::exception& ex) {
    throw InputError(std::string("graph_from_json: ") + ex.what());
  }
  if (g.root < 0 || g.root >= g.n) throw InputError("graph_from_json: root out of range");
  for (const auto& e : g.edges)
    if (e.src == e.dst || e.src < 0 || e.dst < 0 || e.src >= g.n || e.dst >= g.n)
      throw InputError("graph_from_json: invalid edge");
  if (!std::is_sorted(g.edges.begin(), g.edges.end()))
    std::sort(g.edges.begin(), g.edges.end());
  return g;
}

}  // namespace cascade
