#include "cascade/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cascade/error.hpp"
#include "cascade/grad.hpp"
#include "cascade/harness.hpp"
#include "cascade/rng.hpp"

namespace cascade {

std::vector<std::vector<int>> reachability_oracle(const Graph& g, int depth) {
  const int n = g.n;
  Eigen::MatrixXi adj = Eigen::MatrixXi::Zero(n, n);
  for (const auto& e : g.edges) adj(e.src, e.dst) = 1;
  // reach = (I + A)^c as a boolean matrix, row root
  Eigen::MatrixXi step = adj + Eigen::MatrixXi::Identity(n, n);
  Eigen::MatrixXi reach = Eigen::MatrixXi::Identity(n, n);
  std::vector<std::vector<int>> levels;
  for (int c = 0; c <= depth; ++c) {
    std::vector<int> lv;
    for (int v = 0; v < n; ++v)
      if (reach(g.root, v)) lv.push_back(v);
    levels.push_back(lv);
    reach = (reach * step).unaryExpr([](int x) { return x > 0 ? 1 : 0; });
  }
  return levels;
}

bool profile_matches_oracle(const Graph& g, int depth) {
  const auto prof = bfs_profile(g, depth);
  const auto levels = reachability_oracle(g, depth);
  if (prof.levels != levels) return false;
  for (int c = 0; c < depth; ++c) {
    std::vector<int> want;
    std::vector<char> in_c(g.n, 0), in_next(g.n, 0);
    for (int v : levels[c]) in_c[v] = 1;
    for (int v : levels[c + 1]) in_next[v] = 1;
    for (int i = 0; i < g.num_edges(); ++i)
      if (in_c[g.edges[i].src] && in_next[g.edges[i].dst] && !in_c[g.edges[i].dst]) want.push_back(i);
    if (prof.frontier[c] != want) return false;
  }
  return true;
}

CheckResult check_bfs_oracle() {
  CheckResult r{"bfs_oracle_equivalence", true, ""};
  long graphs = 0;
  // every digraph on n <= 4 vertices, every root
  for (int n = 1; n <= 4; ++n) {
    const int pairs = n * (n - 1);
    for (long mask = 0; mask < (1L << pairs); ++mask) {
      Graph g;
      g.n = n;
      int bit = 0;
      for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v)
          if (u != v) {
            if (mask >> bit & 1) g.edges.push_back({u, v});
            ++bit;
          }
      for (int root = 0; root < n; ++root) {
        g.root = root;
        ++graphs;
        if (!profile_matches_oracle(g, n)) r.passed = false;
      }
    }
  }
  // n = 5 .. 8 over many seeds and densities, then larger instances
  for (int n = 5; n <= 8; ++n)
    for (double p : {0.1, 0.3, 0.6})
      for (std::uint64_t seed = 0; seed < 250; ++seed, ++graphs)
        if (!profile_matches_oracle(sample_er(n, p, derive_seed({7, std::uint64_t(n), seed})), 4))
          r.passed = false;
  for (std::uint64_t seed = 0; seed < 1000; ++seed, ++graphs)
    if (!profile_matches_oracle(sample_er(30, 0.1, derive_seed({8, seed})), 4)) r.passed = false;
  r.detail = std::to_string(graphs) + " graphs";
  return r;
}

CheckResult check_permutation_equivariance() {
  CheckResult r{"permutation_equivariance", true, ""};
  double worst = 0.0;
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    const int n = 12, D = 3;
    const Embedding emb = make_embedding(n, n, EmbeddingMode::Orthogonal);
    ModelParams params = init_params({n, 16, D}, trial % 2 ? ParamMode::Matrix : ParamMode::Reduced,
                                     {}, derive_seed({9, trial}));
    for (auto& l : params.weights.layers) {
      l.gamma = 3.0;
      l.alpha = 1.5;
      if (l.wqk.size()) l.wqk *= 200.0;
    }
    Sample s;
    for (std::uint64_t a = 0;; ++a) {
      try {
        s = make_sample(sample_er(n, 0.25, derive_seed({10, trial, a})), emb, D);
        break;
      } catch (const DegenerateFrontierError&) {
      }
    }
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_seed({11, trial}));
    for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[uniform_index(rng, i + 1)]);
    // relabel vertices and move their embedding vectors with them
    Embedding emb2 = emb;
    for (int v = 0; v < n; ++v) emb2.U.col(perm[v]) = emb.U.col(v);
    const Sample s2 = make_sample(permute_graph(s.graph, perm), emb2, D);
    for (int c = 0; c < D; ++c) {
      std::vector<int> mapped;
      for (int v : s.profile.levels[c]) mapped.push_back(perm[v]);
      std::sort(mapped.begin(), mapped.end());
      if (mapped != s2.profile.levels[c]) r.passed = false;
    }
    const auto t1 = forward(params, emb, s);
    const auto t2 = forward(params, emb2, s2);
    for (int c = 0; c < D; ++c) worst = std::max(worst, (t1.z[c] - t2.z[c]).cwiseAbs().maxCoeff());
    for (LossKind k : {LossKind::Superposition, LossKind::Node, LossKind::EndToEnd})
      worst = std::max(worst, std::abs(evaluate_loss(k, t1, emb, s).value - evaluate_loss(k, t2, emb2, s2).value));
  }
  if (!(worst <= 1e-10)) r.passed = false;
  std::ostringstream os;
  os << "max deviation " << worst;
  r.detail = os.str();
  return r;
}

CheckResult check_softmax_saturation() {
  CheckResult r{"softmax_saturation_bound", true, ""};
  int checked = 0;
  Rng rng(12);
  for (int trial = 0; trial < 2000; ++trial) {
    const int K = 2 + static_cast<int>(uniform_index(rng, 40));
    const int S = 1 + static_cast<int>(uniform_index(rng, K - 1));
    const double gap = uniform(rng, 0.0, 20.0);
    Eigen::VectorXd a(K);
    for (int i = 0; i < K; ++i) a[i] = i < S ? gap + uniform(rng, 0, 3) : -uniform(rng, 0, 3);
    const double delta = a.head(S).minCoeff() - a.tail(K - S).maxCoeff();
    Eigen::VectorXd sm = (a.array() - a.maxCoeff()).exp();
    sm /= sm.sum();
    const double leak = sm.tail(K - S).sum();
    const double bound = (K - S) * std::exp(-delta) / S;
    if (leak > bound * (1 + 1e-12)) r.passed = false;
    for (int i = 0; i < S; ++i)
      for (int k = S; k < K; ++k)
        if (sm[i] * sm[k] > std::exp(-delta) / S * (1 + 1e-12)) r.passed = false;
    ++checked;
  }
  r.detail = std::to_string(checked) + " random logit vectors";
  return r;
}

CheckResult check_frontier_concentration() {
  CheckResult r{"frontier_concentration", true, ""};
  const auto res = concentration_check(5000, 200, 4.0 / 200, 2, 0.5, 13);
  r.passed = res.pass;
  std::ostringstream os;
  os << "tail " << res.empirical_tail << " <= bound " << res.bound;
  r.detail = os.str();
  return r;
}

CheckResult check_determinism() {
  CheckResult r{"determinism", true, ""};
  for (std::uint64_t seed : {0ULL, 1ULL, 42ULL})
    if (graph_to_json(sample_er(50, 0.04, seed)).dump() != graph_to_json(sample_er(50, 0.04, seed)).dump())
      r.passed = false;
  TrainConfig c;
  c.n = 12;
  c.p = 2.0 / 12;
  c.D = 3;
  c.d = 16;
  c.d_mlp = 16;
  c.epochs = 2;
  c.steps_per_epoch = 5;
  c.batch = 8;
  c.eval_every = 1;
  c.eval_batch = 32;
  const auto a = train(c), b = train(c);
  const bool same_csv = to_csv(a.table()) == to_csv(b.table());
  const bool same_ckpt = checkpoint_to_json(a.params, a.embedding).dump() ==
                         checkpoint_to_json(b.params, b.embedding).dump();
  r.passed = r.passed && same_csv && same_ckpt;
  r.detail = std::string("csv ") + (same_csv ? "identical" : "differs") + ", checkpoint " +
             (same_ckpt ? "identical" : "differs");
  return r;
}

std::vector<CheckResult> property_suite() {
  return {check_bfs_oracle(), check_permutation_equivariance(), check_softmax_saturation(),
          check_frontier_concentration(), check_determinism()};
}

}  // namespace cascade
