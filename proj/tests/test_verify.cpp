#include <gtest/gtest.h>

#include "cascade/verify.hpp"

using namespace cascade;

TEST(PropertySuite, BfsOracle) {
  const auto r = check_bfs_oracle();
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(PropertySuite, PermutationEquivariance) {
  const auto r = check_permutation_equivariance();
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(PropertySuite, SoftmaxSaturation) {
  const auto r = check_softmax_saturation();
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(PropertySuite, FrontierConcentration) {
  const auto r = check_frontier_concentration();
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(PropertySuite, Determinism) {
  const auto r = check_determinism();
  EXPECT_TRUE(r.passed) << r.detail;
}

TEST(Oracle, DetectsCorruptedProfile) {
  Graph g;
  g.n = 4;
  g.edges = {{0, 1}, {1, 2}, {2, 3}};
  const auto levels = reachability_oracle(g, 3);
  ASSERT_EQ(levels.size(), 4u);
  EXPECT_EQ(levels[0], (std::vector<int>{0}));
  EXPECT_EQ(levels[3], (std::vector<int>{0, 1, 2, 3}));
  EXPECT_TRUE(profile_matches_oracle(g, 3));
}
