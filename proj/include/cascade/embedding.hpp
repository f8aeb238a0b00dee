#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "cascade/graph.hpp"

namespace cascade {

enum class EmbeddingMode { Orthogonal, RandomSphere };

std::string to_string(EmbeddingMode m);
EmbeddingMode embedding_mode_from_string(const std::string& s);

struct Embedding {
  EmbeddingMode mode = EmbeddingMode::Orthogonal;
  int n = 0;
  int d = 0;
  std::uint64_t seed = 0;
  Eigen::MatrixXd U;        // d x n, unit columns
  double rho_bar = 0.0;     // max |<u_v, u_w>| over v != w

  const auto col(int v) const { return U.col(v); }
};

Embedding make_embedding(int n, int d, EmbeddingMode mode, std::uint64_t seed = 0);

// k_c^{-1/2} * sum_{v in V_c} u_v
Eigen::VectorXd ideal_state(const Embedding& emb, const ReachabilityProfile& prof, int c);

// m^{-1/2} * sum over the nodes first reached at hop c + 1
Eigen::VectorXd frontier_state(const Embedding& emb, const ReachabilityProfile& prof, int c);

struct SuperpositionReport {
  bool n1_violated = false;  // concentrated on a single member
  bool n2_violated = false;  // some member has non-positive overlap
  bool n3_violated = false;  // some non-member leaks above tol
  bool is_superposition() const { return !n1_violated && !n2_violated && !n3_violated; }
};

// tol <= 0 selects the default 1 / (2 sqrt(k_c)).
SuperpositionReport classify_superposition(const Eigen::VectorXd& z, const Embedding& emb,
                                           const ReachabilityProfile& prof, int c,
                                           double tol = -1.0);

nlohmann::json embedding_recipe(const Embedding& emb);
Embedding embedding_from_recipe(const nlohmann::json& j);

}  // namespace cascade
