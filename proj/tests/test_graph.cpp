#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "cascade/error.hpp"
#include "cascade/graph.hpp"
#include "cascade/rng.hpp"
#include "cascade/verify.hpp"

using namespace cascade;

namespace {

Graph hand_graph() {
  Graph g;
  g.n = 4;
  g.root = 0;
  g.edges = {{0, 1}, {0, 2}, {1, 3}};
  return g;
}

}  // namespace

TEST(SampleEr, NearOneProbabilityGivesBothEdges) {
  const Graph g = sample_er(2, 1 - 1e-15, 3);
  ASSERT_EQ(g.num_edges(), 2);
  EXPECT_EQ(g.edges[0], (Edge{0, 1}));
  EXPECT_EQ(g.edges[1], (Edge{1, 0}));
}

TEST(SampleEr, ZeroProbabilityIsEmpty) { EXPECT_TRUE(sample_er(5, 0.0, 7).edges.empty()); }

TEST(SampleEr, MeanOutDegreeMatchesBinomial) {
  const int n = 50, samples = 10000;
  const double p = 0.04;
  double total = 0;
  for (int s = 0; s < samples; ++s) total += sample_er(n, p, derive_seed({42, std::uint64_t(s)})).num_edges();
  const double mean_deg = total / (double(samples) * n);
  // out-degree of one node ~ Binomial(n - 1, p); averaged over n nodes and samples
  const double sigma = std::sqrt((n - 1) * p * (1 - p) / (double(samples) * n));
  EXPECT_NEAR(mean_deg, (n - 1) * p, 2 * sigma);
}

TEST(SampleEr, EdgesSortedNoSelfLoopsAndDeterministic) {
  const Graph a = sample_er(40, 0.1, 9), b = sample_er(40, 0.1, 9);
  EXPECT_EQ(a.edges, b.edges);
  EXPECT_EQ(a.root, b.root);
  for (size_t i = 0; i < a.edges.size(); ++i) {
    EXPECT_NE(a.edges[i].src, a.edges[i].dst);
    if (i) EXPECT_LT(a.edges[i - 1], a.edges[i]);
  }
  EXPECT_NE(sample_er(40, 0.1, 10).edges, a.edges);
}

TEST(SampleEr, RejectsBadArguments) {
  EXPECT_THROW(sample_er(0, 0.1, 1), ConfigError);
  EXPECT_THROW(sample_er(5, 1.5, 1), ConfigError);
  EXPECT_THROW(sample_er(5, -0.1, 1), ConfigError);
}

TEST(BfsProfile, HandTracedExample) {
  const auto prof = bfs_profile(hand_graph(), 2);
  EXPECT_EQ(prof.k(0), 1);
  EXPECT_EQ(prof.k(1), 3);
  EXPECT_EQ(prof.k(2), 4);
  EXPECT_EQ(prof.m_new(0), 2);
  EXPECT_EQ(prof.m_new(1), 1);
  EXPECT_EQ(prof.frontier[0], (std::vector<int>{0, 1}));
  EXPECT_EQ(prof.frontier[1], (std::vector<int>{2}));
}

TEST(BfsProfile, EmptyGraphStaysAtRoot) {
  Graph g;
  g.n = 5;
  const auto prof = bfs_profile(g, 3);
  for (int c = 0; c <= 3; ++c) EXPECT_EQ(prof.k(c), 1);
  for (int c = 0; c < 3; ++c) EXPECT_EQ(prof.m_new(c), 0);
}

TEST(BfsProfile, MatchesMatrixPowerOracle) {
  for (std::uint64_t s = 0; s < 200; ++s)
    EXPECT_TRUE(profile_matches_oracle(sample_er(30, 0.1, derive_seed({5, s})), 4)) << s;
}

TEST(BfsProfile, TelescopingAndNesting) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto prof = bfs_profile(sample_er(40, 0.06, s), 4);
    int sum = 0;
    for (int c = 0; c < 4; ++c) {
      sum += prof.m_new(c);
      EXPECT_GE(prof.k(c + 1), prof.k(c));
      EXPECT_TRUE(std::includes(prof.levels[c + 1].begin(), prof.levels[c + 1].end(), prof.levels[c].begin(),
                                prof.levels[c].end()));
    }
    EXPECT_EQ(sum, prof.k(4) - 1);
  }
}

TEST(CheckRegime, ArithmeticExamples) {
  EXPECT_TRUE(check_regime(50, 0.04, 3, 0.3).tree_ok);
  EXPECT_FALSE(check_regime(50, 0.2, 3, 0.3).tree_ok);
  EXPECT_TRUE(check_regime(1e4, 2e-4, 4, 0.1).tree_ok);
}

TEST(Concentration, TrivialLevelZeroAndBoundValue) {
  EXPECT_TRUE(concentration_check(1, 50, 0.04, 0, 1 - 1e-9, 1).pass);
  // (np)^c = 16 at t = 0.5
  const auto r = concentration_check(10, 16, 1.0 / 16 * 4, 2, 0.5, 1);
  EXPECT_NEAR(r.bound, 2 * std::exp(-16.0 / 12), 1e-12);
}

TEST(Concentration, MonteCarloWithinBound) {
  const auto r = concentration_check(5000, 200, 4.0 / 200, 2, 0.5, 3);
  EXPECT_TRUE(r.pass);
  EXPECT_LE(r.empirical_tail, r.bound);
}

TEST(PermuteGraph, PreservesProfileSizes) {
  const Graph g = sample_er(20, 0.15, 4);
  std::vector<int> perm(20);
  for (int v = 0; v < 20; ++v) perm[v] = (v * 7 + 3) % 20;
  const Graph h = permute_graph(g, perm);
  EXPECT_EQ(h.root, perm[g.root]);
  const auto a = bfs_profile(g, 3), b = bfs_profile(h, 3);
  for (int c = 0; c <= 3; ++c) EXPECT_EQ(a.k(c), b.k(c));
}

TEST(GraphJson, RoundTrip) {
  const Graph g = sample_er(25, 0.1, 11);
  const Graph h = graph_from_json(graph_to_json(g));
  EXPECT_EQ(g.edges, h.edges);
  EXPECT_EQ(g.root, h.root);
  EXPECT_EQ(g.n, h.n);
  EXPECT_EQ(g.seed, h.seed);
}
