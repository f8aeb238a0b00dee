#include <cmath>

#include <gtest/gtest.h>

#include "cascade/error.hpp"
#include "cascade/losses.hpp"
#include "cascade/rng.hpp"
#include "cascade/theory.hpp"

using namespace cascade;

TEST(CosSingleStep, PeakAndNoUpdate) {
  EXPECT_NEAR(cos_single_step(4, 10, alpha_star(4, 6)), 1.0, 1e-15);
  EXPECT_NEAR(cos_single_step(4, 10, 0.0), std::sqrt(0.4), 1e-15);
  EXPECT_NEAR(cos_single_step(1, 3, 2.0), 1.0, 1e-15);
}

TEST(CosSingleStep, GridArgmax) {
  double best = -2, arg = -1;
  for (int i = 0; i <= 100000; ++i) {
    const double a = i * 1e-4;
    const double v = cos_single_step(1, 3, a);
    if (v > best) best = v, arg = a;
  }
  EXPECT_NEAR(arg, 2.0, 1e-3);
}

TEST(CosSingleStep, CurvatureAtPeak) {
  for (auto [k, k1] : {std::pair{1.0, 3.0}, {4.0, 10.0}, {9.0, 40.0}}) {
    const double as = alpha_star(k, k1 - k), h = 1e-3;
    const double fd =
        (cos_single_step(k, k1, as + h) - 2 * cos_single_step(k, k1, as) + cos_single_step(k, k1, as - h)) / (h * h);
    EXPECT_NEAR(fd, cos_curvature_at_star(k, k1), 1e-5);
  }
}

TEST(CosSingleStep, UnimodalProperty) {
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    const double k = uniform(rng, 1, 50), m = uniform(rng, 1, 200), as = alpha_star(k, m);
    const double lo = uniform(rng, 0, as), hi = uniform(rng, as, 3 * as);
    EXPECT_LT(cos_single_step(k, k + m, lo * 0.999), cos_single_step(k, k + m, lo) + 1e-15);
    EXPECT_LT(cos_single_step(k, k + m, hi * 1.001), cos_single_step(k, k + m, hi) + 1e-15);
    EXPECT_LE(cos_single_step(k, k + m, lo), 1.0 + 1e-15);
  }
}

TEST(Mobius, IndependentOfBOnManifold) {
  EXPECT_NEAR(alpha_eff_mobius(123.0, 0.0, 0.3, 4, 6), 3.0, 1e-15);
  EXPECT_NEAR(alpha_eff_mobius(-5.0, 0.0, -1.7, 4, 6), 3.0, 1e-15);
}

TEST(Mobius, RoundedTrainedScalars) {
  const double a = 0.785, b1p = -0.274, eta = -1.274;
  const double A = 1 + eta * a, B = eta * b1p;
  EXPECT_NEAR(A, -9.0e-5, 1e-6);
  EXPECT_NEAR(B, 0.349, 1e-3);
  // rounding the reported scalars to three digits leaves |A| ~ 1e-4, which
  // moves alpha_eff off m_f / sqrt(k_c) by about 1.3e-3
  const double ae = alpha_eff_mobius(8.7, A, B, 2, 2);
  EXPECT_NEAR(ae, std::sqrt(2.0), 1.5e-3);
  EXPECT_NEAR(alpha_eff_mobius(8.7, 1e-9, B, 2, 2), std::sqrt(2.0), 1e-7);
}

TEST(Mobius, SingularDenominatorThrows) {
  EXPECT_THROW(alpha_eff_mobius(1.0, 2.0, -1.0, 4, 6), SingularMobiusError);
}

TEST(PhaseAForm, Examples) {
  EXPECT_NEAR(alpha_eff_phaseA(1.7, 1, 0, 4), 1.7, 1e-15);
  EXPECT_NEAR(alpha_eff_phaseA(1.7, 0, 0.4, 4), 0.0, 1e-15);
  EXPECT_NEAR(alpha_eff_phaseA(2, 1, 1, 4), 2.0 / 3, 1e-15);
}

TEST(GammaStar, PlugIn) {
  EXPECT_NEAR(gamma_star(64, 4, 100, 0.01), 32 * std::log(1e4), 1e-10);
  EXPECT_NEAR(gamma_star(64, 4, 100, 0.01), 294.73, 0.01);
  EXPECT_NEAR(gamma_star(1, 1, std::exp(1.0), std::exp(-1.0)), 4.0, 1e-12);
  EXPECT_TRUE(gamma_ladder(64, {1, 3, 9, 27}, 100, 0.01).strictly_increasing);
  EXPECT_FALSE(gamma_ladder(64, {1, 3, 3}, 100, 0.01).strictly_increasing);
}

TEST(E2eDecay, PlugIn) {
  for (double np : {1.5, 2.0, 7.0}) EXPECT_NEAR(e2e_decay_factor(np, 3, 1), 1.0, 1e-15);
  EXPECT_NEAR(e2e_decay_factor(4, 4, 0), 0.25, 1e-15);
  EXPECT_NEAR(e2e_decay_factor(2, 5, 0), std::pow(2.0, -1.5), 1e-15);
}

TEST(ResidualCeiling, PlugIn) {
  EXPECT_NEAR(residual_ceiling(1, 2), std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(residual_ceiling(3, 4), std::sqrt(0.75), 1e-15);
  // population ladder at np = 2 and large depth: m_f / k_{c+1} -> 1 - 1/np
  double k = 1;
  for (int c = 0; c < 30; ++c) k += std::pow(2.0, c + 1);
  EXPECT_NEAR(residual_ceiling(std::pow(2.0, 30), k), std::sqrt(0.5), 1e-6);
}

TEST(DiagCertificates, CenteredIdentity) {
  const int n = 50;
  const Eigen::MatrixXd W = 2.5 * (Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / n));
  const auto d = diag_certificates(W);
  EXPECT_NEAR(d.entrywise_ratio, n - 1, 1e-9);
  EXPECT_NEAR(d.mu_over_gamma, -1.0 / n, 1e-12);
  EXPECT_FALSE(d.ratio_infinite);
}

TEST(DiagCertificates, DegenerateCases) {
  const auto id = diag_certificates(Eigen::MatrixXd::Identity(6, 6));
  EXPECT_TRUE(id.ratio_infinite);
  const auto j = diag_certificates(Eigen::MatrixXd::Ones(6, 6));
  EXPECT_NEAR(j.entrywise_ratio, 1.0, 1e-15);
  EXPECT_NEAR(j.gamma_fit, 0.0, 1e-15);
  EXPECT_NEAR(j.mu_fit, 1.0, 1e-15);
  EXPECT_TRUE(j.gamma_degenerate);
}

TEST(DiagAdvantage, SmallCaseFiniteAndGrowsWithN) {
  const double r2 = diag_advantage_at_zero(2, 0.5, 200, 1);
  EXPECT_TRUE(std::isfinite(r2));
  EXPECT_GT(r2, 0.0);
  const double r15 = diag_advantage_at_zero(15, 2.0 / 15, 1000, 2);
  const double r30 = diag_advantage_at_zero(30, 2.0 / 30, 1000, 2);
  EXPECT_GT(r30, r15);
}

TEST(TauStar, Examples) {
  EXPECT_NEAR(tau_star_bound(0.0, 0.5, 0.05, 0.1, 2, 1, 1), 2.0, 1e-12);
  EXPECT_NEAR(tau_star_bound(0.0, 0.5, 0.05, 0.1, 2, 1, 2), 1.0, 1e-12);
  EXPECT_EQ(tau_star_bound(5.0, 0.5, 0.05, 0.1, 2, 1, 1), 0.0);
}

TEST(PhaseBoundary, Examples) {
  for (double np : {2.0, 4.0, 9.0})
    for (int D : {3, 4, 6}) EXPECT_NEAR(r_min(np, D, D - 1), std::sqrt(np), 1e-12);
  const auto r = phase_classify(0.01, 100, 0.04, 3, 1, 8, 1.0);
  EXPECT_NEAR(r.r_min, 1.0, 1e-15);
  EXPECT_NEAR(r.beta_I, std::log(32.0), 1e-12);
  EXPECT_NEAR(r.threshold_I, 1.0 / 32, 1e-12);
  EXPECT_EQ(r.phase, Phase::I);
  EXPECT_EQ(phase_classify(0.99, 100, 0.04, 3, 1, 8, 1.0).phase, Phase::III);
  EXPECT_EQ(phase_classify(0.1, 100, 0.04, 3, 1, 8, 1.0).phase, Phase::II);
}

namespace {

struct MobiusFixture {
  Embedding emb = make_embedding(8, 8, EmbeddingMode::Orthogonal);
  ReachabilityProfile prof;
  MobiusFixture() {
    Graph g;
    g.n = 8;
    g.edges = {{0, 1}, {0, 2}, {1, 3}, {1, 4}, {2, 5}, {6, 7}};
    prof = bfs_profile(g, 2);
  }
  ModelParams params(int d_mlp) const {
    auto p = init_params({8, d_mlp, 3}, ParamMode::Reduced, {}, 3);
    for (auto& l : p.weights.layers) {
      l.alpha = 1.3;
      l.w1.setZero();
      l.b1.setZero();
      l.w2.setZero();
      l.b2.setZero();
    }
    return p;
  }
};

}  // namespace

TEST(ExtractMobius, ZeroMlp) {
  MobiusFixture f;
  const auto m = extract_mobius(f.params(12), f.emb, f.prof, 1);
  EXPECT_NEAR(m.a, 0.0, 1e-12);
  EXPECT_NEAR(m.b1p, 0.0, 1e-12);
  EXPECT_NEAR(m.eta, 0.0, 1e-12);
  EXPECT_NEAR(m.A, 1.0, 1e-12);
  EXPECT_NEAR(m.B, 0.0, 1e-12);
  EXPECT_NEAR(m.alpha_eff_empirical, 1.3, 1e-12);
}

TEST(ExtractMobius, RecoversEquivariantMlp) {
  MobiusFixture f;
  const double a = 0.5, b1p = -0.2, eta = 1.0;
  auto p = f.params(12);
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(12, 8);
  P.topRows(8).setIdentity();
  for (auto& l : p.weights.layers) {
    l.w1 = a * P;
    l.b1.setConstant(b1p);
    l.w2 = eta * P.transpose();
  }
  for (int c = 0; c < 2; ++c) {
    const auto m = extract_mobius(p, f.emb, f.prof, c);
    EXPECT_NEAR(m.a, a, 1e-6);
    EXPECT_NEAR(m.b1p, b1p, 1e-6);
    EXPECT_NEAR(m.eta, eta, 1e-6);
    EXPECT_NEAR(m.A, 1 + eta * a, 1e-6);
    EXPECT_NEAR(m.B, eta * b1p, 1e-6);
  }
}

TEST(IdealParams, ReachesIdealStatesOnTreeGraphs) {
  const int n = 200, D = 4;
  const auto emb = make_embedding(n, n, EmbeddingMode::Orthogonal);
  IdealSpec spec;
  spec.np = 4;
  spec.edges = n * 4.0;
  spec.clamp_frac = 0.5;
  const auto p = ideal_params({n, n, D}, spec);
  double worst = 1;
  int used = 0;
  for (std::uint64_t s = 0; used < 32; ++s) {
    Sample smp;
    try {
      smp = make_sample(sample_er(n, 4.0 / n, derive_seed({4, s})), emb, D);
    } catch (const DegenerateFrontierError&) {
      continue;
    }
    ++used;
    const auto tr = forward(p, emb, smp);
    for (int c = 1; c < D; ++c) worst = std::min(worst, cosine(tr.z[c], smp.targets[c]));
  }
  EXPECT_GT(worst, 0.99);
}
