#include <cmath>

#include <gtest/gtest.h>

#include "cascade/embedding.hpp"
#include "cascade/error.hpp"

using namespace cascade;

namespace {

// root 0 reaches {0, 1, 2, 3} after one hop; 4 and 5 are unreachable
ReachabilityProfile star_profile() {
  Graph g;
  g.n = 6;
  g.edges = {{0, 1}, {0, 2}, {0, 3}, {4, 5}};
  return bfs_profile(g, 2);
}

}  // namespace

TEST(MakeEmbedding, OrthogonalIsExactBasis) {
  const auto e = make_embedding(3, 4, EmbeddingMode::Orthogonal);
  EXPECT_EQ(e.rho_bar, 0.0);
  const auto big = make_embedding(50, 64, EmbeddingMode::Orthogonal);
  EXPECT_TRUE((big.U.transpose() * big.U).isIdentity(0.0));
}

TEST(MakeEmbedding, RandomSphereUnitColumnsSmallOverlap) {
  const auto e = make_embedding(50, 64, EmbeddingMode::RandomSphere, 1);
  for (int v = 0; v < 50; ++v) EXPECT_NEAR(e.U.col(v).norm(), 1.0, 1e-12);
  EXPECT_GT(e.rho_bar, 0.0);
  EXPECT_LT(e.rho_bar, 0.6);
  const auto again = make_embedding(50, 64, EmbeddingMode::RandomSphere, 1);
  EXPECT_EQ(e.U, again.U);
}

TEST(MakeEmbedding, OrthogonalNeedsWidth) {
  EXPECT_THROW(make_embedding(10, 5, EmbeddingMode::Orthogonal), ConfigError);
}

TEST(IdealState, RootAndUniformWeights) {
  const auto e = make_embedding(6, 6, EmbeddingMode::Orthogonal);
  const auto prof = star_profile();
  EXPECT_TRUE(ideal_state(e, prof, 0).isApprox(e.U.col(0)));
  const Eigen::VectorXd z = ideal_state(e, prof, 1);
  const Eigen::VectorXd w = e.U.transpose() * z;
  for (int v = 0; v < 6; ++v) EXPECT_NEAR(w[v], v < 4 ? 0.5 : 0.0, 1e-15);
  EXPECT_NEAR(z.norm(), 1.0, 1e-15);
}

TEST(FrontierState, CoversOnlyNewNodes) {
  const auto e = make_embedding(6, 6, EmbeddingMode::Orthogonal);
  const Eigen::VectorXd f = frontier_state(e, star_profile(), 0);
  const Eigen::VectorXd w = e.U.transpose() * f;
  for (int v = 0; v < 6; ++v) EXPECT_NEAR(w[v], (v >= 1 && v <= 3) ? 1 / std::sqrt(3.0) : 0.0, 1e-15);
}

TEST(ClassifySuperposition, IndicatorViolatesN1AndN2) {
  const auto e = make_embedding(6, 6, EmbeddingMode::Orthogonal);
  const auto r = classify_superposition(e.U.col(2), e, star_profile(), 1);
  EXPECT_TRUE(r.n1_violated);
  EXPECT_TRUE(r.n2_violated);
  EXPECT_FALSE(r.is_superposition());
}

TEST(ClassifySuperposition, IdealIsSuperpositionForAnyTol) {
  const auto e = make_embedding(6, 6, EmbeddingMode::Orthogonal);
  const auto prof = star_profile();
  for (double tol : {1e-6, 0.01, 0.1, 0.3})
    EXPECT_TRUE(classify_superposition(ideal_state(e, prof, 1), e, prof, 1, tol).is_superposition()) << tol;
}

TEST(ClassifySuperposition, LeakOutsideReachableViolatesN3) {
  const auto e = make_embedding(6, 6, EmbeddingMode::Orthogonal);
  const auto prof = star_profile();
  Eigen::VectorXd z = ideal_state(e, prof, 1) + 0.5 * e.U.col(5);
  z.normalize();
  const auto r = classify_superposition(z, e, prof, 1, 0.1);
  EXPECT_TRUE(r.n3_violated);
}

TEST(EmbeddingRecipe, RoundTrip) {
  const auto e = make_embedding(20, 24, EmbeddingMode::RandomSphere, 77);
  const auto f = embedding_from_recipe(embedding_recipe(e));
  EXPECT_EQ(e.U, f.U);
  EXPECT_EQ(f.mode, EmbeddingMode::RandomSphere);
}
