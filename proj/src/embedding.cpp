#include "cascade/embedding.hpp"

#include <algorithm>
#include <cmath>

#include "cascade/error.hpp"
#include "cascade/rng.hpp"

namespace cascade {

std::string to_string(EmbeddingMode m) {
  return m == EmbeddingMode::Orthogonal ? "orthogonal" : "random_sphere";
}

EmbeddingMode embedding_mode_from_string(const std::string& s) {
  if (s == "orthogonal") return EmbeddingMode::Orthogonal;
  if (s == "random_sphere") return EmbeddingMode::RandomSphere;
  throw ConfigError("unknown embedding mode: " + s);
}

Embedding make_embedding(int n, int d, EmbeddingMode mode, std::uint64_t seed) {
  if (n < 1 || d < 1) throw ConfigError("make_embedding: n and d must be positive");
  Embedding emb;
  emb.mode = mode;
  emb.n = n;
  emb.d = d;
  emb.seed = seed;
  if (mode == EmbeddingMode::Orthogonal) {
    if (d < n) throw ConfigError("make_embedding: orthogonal mode needs d >= n");
    emb.U = Eigen::MatrixXd::Identity(d, n);
    return emb;
  }
  Rng rng(seed);
  emb.U.resize(d, n);
  for (int v = 0; v < n; ++v) {
    for (int i = 0; i < d; ++i) emb.U(i, v) = normal(rng);
    emb.U.col(v).normalize();
  }
  if (n > 1) {
    const Eigen::MatrixXd gram = emb.U.transpose() * emb.U;
    for (int v = 0; v < n; ++v)
      for (int w = 0; w < n; ++w)
        if (v != w) emb.rho_bar = std::max(emb.rho_bar, std::abs(gram(v, w)));
  }
  return emb;
}

Eigen::VectorXd ideal_state(const Embedding& emb, const ReachabilityProfile& prof, int c) {
  const auto& level = prof.levels.at(c);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(emb.d);
  for (int v : level) z += emb.U.col(v);
  return z / std::sqrt(static_cast<double>(level.size()));
}

Eigen::VectorXd frontier_state(const Embedding& emb, const ReachabilityProfile& prof, int c) {
  const auto& inner = prof.levels.at(c);
  const auto& outer = prof.levels.at(c + 1);
  const int m = static_cast<int>(outer.size() - inner.size());
  if (m == 0) throw DegenerateFrontierError("frontier_state: empty frontier");
  Eigen::VectorXd z = Eigen::VectorXd::Zero(emb.d);
  for (int v : outer)
    if (prof.hop[v] == c + 1) z += emb.U.col(v);
  return z / std::sqrt(static_cast<double>(m));
}

SuperpositionReport classify_superposition(const Eigen::VectorXd& z, const Embedding& emb,
                                           const ReachabilityProfile& prof, int c, double tol) {
  if (z.size() != emb.d) throw InputError("classify_superposition: dimension mismatch");
  const auto& level = prof.levels.at(c);
  if (tol <= 0) tol = 0.5 / std::sqrt(static_cast<double>(level.size()));
  const Eigen::VectorXd o = emb.U.transpose() * z;
  std::vector<char> member(emb.n, 0);
  for (int v : level) member[v] = 1;

  SuperpositionReport r;
  int best = 0;
  for (int v = 1; v < emb.n; ++v)
    if (o[v] > o[best]) best = v;
  if (member[best] && o[best] >= 1.0 - tol) {
    bool rest_small = true;
    for (int w = 0; w < emb.n; ++w)
      if (w != best && (o[w] > tol || o[w] >= o[best])) rest_small = false;
    r.n1_violated = rest_small;
  }
  for (int v : level)
    if (o[v] <= 0) r.n2_violated = true;
  for (int v = 0; v < emb.n; ++v)
    if (!member[v] && std::abs(o[v]) > tol) r.n3_violated = true;
  return r;
}

nlohmann::json embedding_recipe(const Embedding& emb) {
  return {{"mode", to_string(emb.mode)}, {"n", emb.n}, {"d", emb.d}, {"seed", emb.seed}};
}

Embedding embedding_from_recipe(const nlohmann::json& j) {
  try {
    return make_embedding(j.at("n").get<int>(), j.at("d").get<int>(),
                          embedding_mode_from_string(j.at("mode").get<std::string>()),
                          j.at("seed").get<std::uint64_t>());
  } catch (const nlohmann::json::exception& ex) {
    throw InputError(std::string("embedding_from_recipe: ") + ex.what());
  }
}

}  // namespace cascade
