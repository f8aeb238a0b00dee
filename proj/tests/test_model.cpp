#include <cmath>

#include <gtest/gtest.h>

#include "cascade/error.hpp"
#include "cascade/losses.hpp"
#include "cascade/model.hpp"
#include "cascade/theory.hpp"

using namespace cascade;

namespace {

// Tree from root 0: 0 -> {1, 2}, 1 -> {3, 4}, 2 -> 5; 6 -> 7 is unreachable.
Graph tree_graph() {
  Graph g;
  g.n = 8;
  g.edges = {{0, 1}, {0, 2}, {1, 3}, {1, 4}, {2, 5}, {6, 7}};
  return g;
}

ModelParams plain_params(int d, int depth, double gamma, double alpha, ArchFlags flags = {}) {
  ModelParams p = init_params({d, 4, depth}, ParamMode::Reduced, flags, 1);
  for (auto& l : p.weights.layers) {
    l.gamma = gamma;
    l.alpha = alpha;
    l.w1.setZero();
    l.b1.setZero();
    l.w2.setZero();
    l.b2.setZero();
  }
  return p;
}


// Levels are cumulative, so from z_c^* the edges leaving older members of
// V_c tie with the frontier for c >= 1. Querying with the newest nodes
// instead (z_new of the previous step) isolates the frontier on a tree.
Eigen::VectorXd frontier_query(const Sample& s, const Embedding& emb, int c) {
  return c == 0 ? s.targets[0] : Eigen::VectorXd(frontier_state(emb, s.profile, c - 1));
}

}  // namespace

TEST(Forward, IdentityCascade) {
  const auto emb = make_embedding(8, 8, EmbeddingMode::Orthogonal);
  const Sample s = make_sample(tree_graph(), emb, 3);
  const auto tr = forward(plain_params(8, 3, 0.0, 0.0), emb, s);
  for (int c = 0; c + 1 < 3; ++c) EXPECT_TRUE(tr.z[c + 1].isApprox(tr.z[c], 1e-15));
  EXPECT_TRUE(tr.z[0].isApprox(emb.U.col(0)));
}

TEST(Forward, SaturatedAttentionIsUniformOnFrontier) {
  const auto emb = make_embedding(8, 8, EmbeddingMode::Orthogonal);
  const Sample s = make_sample(tree_graph(), emb, 3);
  const auto params = plain_params(8, 3, 1e3, 1.0);
  for (int c = 0; c < 2; ++c) {
    LayerTrace lt;
    layer_step(params, c, emb, s.graph, s.profile, frontier_query(s, emb, c), &lt);
    EXPECT_NEAR(lt.selectivity, 1.0, 1e-6);
    const double m = s.profile.frontier[c].size();
    for (int i : s.profile.frontier[c]) EXPECT_NEAR(lt.attn[i], 1.0 / m, 1e-6);
  }
}

TEST(Forward, IdealQueryTiesOlderEdgesBeyondFirstLayer) {
  const auto emb = make_embedding(8, 8, EmbeddingMode::Orthogonal);
  const Sample s = make_sample(tree_graph(), emb, 3);
  LayerTrace lt;
  layer_step(plain_params(8, 3, 1e3, 1.0), 1, emb, s.graph, s.profile, s.targets[1], &lt);
  // 3 frontier edges out of 5 edges leaving V_1
  EXPECT_NEAR(lt.selectivity, 3.0 / 5.0, 1e-9);
}

TEST(Forward, NoResidualHitsCeilingExactly) {
  const auto emb = make_embedding(8, 8, EmbeddingMode::Orthogonal);
  const Sample s = make_sample(tree_graph(), emb, 3);
  const auto params = plain_params(8, 3, 1e3, 1.0, {true, false});
  for (int c = 0; c < 2; ++c) {
    const Eigen::VectorXd z = layer_step(params, c, emb, s.graph, s.profile, frontier_query(s, emb, c));
    const double ceiling = residual_ceiling(s.profile.m_new(c), s.profile.k(c + 1));
    EXPECT_NEAR(cosine(z, s.targets[c + 1]), ceiling, 1e-9);
  }
}

TEST(Forward, NoResidualFirstLayerOnRandomGraphs) {
  const auto emb = make_embedding(30, 30, EmbeddingMode::Orthogonal);
  const auto params = plain_params(30, 2, 1e3, 1.0, {true, false});
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Sample s;
    try {
      s = make_sample(sample_er(30, 0.1, seed), emb, 2);
    } catch (const DegenerateFrontierError&) {
      continue;
    }
    const Eigen::VectorXd z = layer_step(params, 0, emb, s.graph, s.profile, s.targets[0]);
    EXPECT_NEAR(cosine(z, s.targets[1]), residual_ceiling(s.profile.m_new(0), s.profile.k(1)), 1e-9);
  }
}

TEST(Forward, SaturatedResidualStepMatchesClosedForm) {
  const auto emb = make_embedding(8, 8, EmbeddingMode::Orthogonal);
  const Sample s = make_sample(tree_graph(), emb, 3);
  for (double alpha : {0.3, 1.0, 2.0, 5.0}) {
    const auto params = plain_params(8, 3, 1e3, alpha);
    const Eigen::VectorXd z = layer_step(params, 0, emb, s.graph, s.profile, s.targets[0]);
    EXPECT_LT((z - ideal_on_manifold_step(emb, s.profile, 0, alpha)).norm(), 1e-6);
  }
}

TEST(Forward, TraceInvariants) {
  const auto emb = make_embedding(30, 32, EmbeddingMode::Orthogonal);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Sample s;
    try {
      s = make_sample(sample_er(30, 0.1, seed), emb, 3);
    } catch (const DegenerateFrontierError&) {
      continue;
    }
    auto params = init_params({32, 16, 3}, seed % 2 ? ParamMode::Matrix : ParamMode::Reduced, {}, seed);
    const auto tr = forward(params, emb, s);
    for (int c = 1; c < 3; ++c) EXPECT_NEAR(tr.z[c].norm(), 1.0, 1e-12);
    for (const auto& lt : tr.layers) {
      EXPECT_NEAR(lt.attn.sum(), 1.0, 1e-12);
      EXPECT_GE(lt.attn.minCoeff(), 0.0);
      EXPECT_LE(lt.attn.maxCoeff(), 1.0);
      EXPECT_GE(lt.selectivity, 0.0);
      EXPECT_LE(lt.selectivity, 1.0);
    }
  }
}

TEST(Forward, ZeroStateRaisesDegenerateError) {
  const auto emb = make_embedding(8, 8, EmbeddingMode::Orthogonal);
  const Sample s = make_sample(tree_graph(), emb, 3);
  EXPECT_THROW(forward(plain_params(8, 3, 1.0, 0.0, {true, false}), emb, s), DegenerateStateError);
}

TEST(IdealStep, Examples) {
  const auto emb = make_embedding(8, 8, EmbeddingMode::Orthogonal);
  const Sample s = make_sample(tree_graph(), emb, 3);
  const auto& prof = s.profile;
  const Eigen::VectorXd z0 = ideal_on_manifold_step(emb, prof, 0, 0.0);
  EXPECT_TRUE(z0.isApprox(s.targets[0]));
  EXPECT_NEAR(cosine(z0, s.targets[1]), std::sqrt(double(prof.k(0)) / prof.k(1)), 1e-15);
  for (int c = 0; c < 2; ++c) {
    const double a_star = alpha_star(prof.k(c), prof.m_new(c));
    EXPECT_NEAR(cosine(ideal_on_manifold_step(emb, prof, c, a_star), s.targets[c + 1]), 1.0, 1e-12);
  }
  // k_0 = 1, m_f = 2, k_1 = 3
  EXPECT_NEAR(cosine(ideal_on_manifold_step(emb, prof, 0, 2.0), s.targets[1]), 1.0, 1e-12);
}

TEST(IdealStep, EmptyFrontierThrows) {
  Graph g;
  g.n = 3;
  const auto emb = make_embedding(3, 3, EmbeddingMode::Orthogonal);
  EXPECT_THROW(ideal_on_manifold_step(emb, bfs_profile(g, 2), 0, 1.0), DegenerateFrontierError);
  EXPECT_THROW(make_sample(g, emb, 3), DegenerateFrontierError);
}

TEST(InitParams, ScalesAndShapes) {
  const auto p = init_params({64, 256, 3}, ParamMode::Matrix, {}, 5);
  ASSERT_EQ(p.weights.layers.size(), 2u);
  for (const auto& l : p.weights.layers) {
    EXPECT_GE(l.alpha, 0.01);
    EXPECT_LE(l.alpha, 0.1);
    EXPECT_EQ(l.wqk.rows(), 64);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(l.wqk);
    EXPECT_LE(svd.singularValues()[0], 1e-2);
    EXPECT_EQ(l.w1.rows(), 256);
    EXPECT_TRUE((l.b1.array() < 0).all());
  }
  const auto r = init_params({64, 256, 3}, ParamMode::Reduced, {}, 5);
  for (const auto& l : r.weights.layers) {
    EXPECT_GE(l.gamma, 0.01);
    EXPECT_LE(l.gamma, 0.1);
    EXPECT_EQ(l.wqk.size(), 0);
  }
}

TEST(ParamSet, FlattenAssignRoundTrip) {
  auto p = init_params({8, 5, 3}, ParamMode::Matrix, {}, 2);
  const auto flat = p.weights.flatten();
  EXPECT_EQ(flat.size(), p.weights.size());
  auto q = p.weights.zeros_like();
  q.assign(flat);
  EXPECT_EQ(q.flatten(), flat);
  std::size_t total = 0;
  for (const auto& b : p.weights.blocks()) total += b.values.size();
  EXPECT_EQ(total, flat.size());
}

TEST(Checkpoint, JsonRoundTripIsExact) {
  const auto emb = make_embedding(10, 12, EmbeddingMode::RandomSphere, 3);
  const auto p = init_params({12, 7, 3}, ParamMode::Matrix, {false, true}, 9);
  Embedding emb2;
  const auto q = checkpoint_from_json(checkpoint_to_json(p, emb), &emb2);
  EXPECT_EQ(p.weights.flatten(), q.weights.flatten());
  EXPECT_EQ(q.flags.layer_norm, false);
  EXPECT_EQ(q.mode, ParamMode::Matrix);
  EXPECT_EQ(emb.U, emb2.U);
}

TEST(Validate, RejectsNonFinite) {
  const auto emb = make_embedding(8, 8, EmbeddingMode::Orthogonal);
  auto p = plain_params(8, 3, 1.0, 1.0);
  EXPECT_NO_THROW(validate(p, emb));
  p.weights.layers[0].alpha = NAN;
  EXPECT_THROW(validate(p, emb), Error);
}
