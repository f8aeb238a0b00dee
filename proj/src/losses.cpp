#include "cascade/losses.hpp"

#include <cmath>

#include "cascade/error.hpp"

namespace cascade {

std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::Superposition: return "intermediate_superposition";
    case LossKind::Node: return "intermediate_node";
    case LossKind::EndToEnd: return "e2e";
  }
  return "?";
}

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "intermediate_superposition" || s == "sup") return LossKind::Superposition;
  if (s == "intermediate_node" || s == "node") return LossKind::Node;
  if (s == "e2e") return LossKind::EndToEnd;
  throw ConfigError("unknown loss mode: " + s);
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw DegenerateStateError("cosine of a zero vector");
  return a.dot(b) / (na * nb);
}

double cosine_loss(const Eigen::VectorXd& z, const Eigen::VectorXd& target, Eigen::VectorXd* grad) {
  const double nz = z.norm(), nt = target.norm();
  if (nz == 0.0 || nt == 0.0) throw DegenerateStateError("cosine loss of a zero vector");
  const double cs = z.dot(target) / (nz * nt);
  if (grad) *grad = -(target / (nz * nt) - cs * z / (nz * nz));
  return 1.0 - cs;
}

double node_loss(const Eigen::VectorXd& z, const Embedding& emb, const std::vector<int>& level,
                 Eigen::VectorXd* grad) {
  Eigen::VectorXd logits = emb.U.transpose() * z;
  const double mx = logits.maxCoeff();
  Eigen::VectorXd prob = (logits.array() - mx).exp();
  const double sum = prob.sum();
  prob /= sum;
  const double log_z = mx + std::log(sum);
  const double w = 1.0 / static_cast<double>(level.size());
  double ce = 0.0;
  for (int v : level) ce -= w * (logits[v] - log_z);
  if (grad) {
    Eigen::VectorXd delta = prob;
    for (int v : level) delta[v] -= w;
    *grad = emb.U * delta;
  }
  return ce;
}

LossValue evaluate_loss(LossKind kind, const ForwardTrace& tr, const Embedding& emb,
                        const Sample& s, const std::vector<double>& level_weights) {
  const int last = static_cast<int>(tr.z.size()) - 1;
  LossValue out;
  out.grad_z.assign(tr.z.size(), Eigen::VectorXd::Zero(emb.d));
  auto weight = [&](int c) {
    if (level_weights.empty()) return 1.0;
    if (static_cast<int>(level_weights.size()) <= c) throw ConfigError("level weights too short");
    return level_weights[c];
  };
  const int first = kind == LossKind::EndToEnd ? last : 1;
  for (int c = first; c <= last; ++c) {
    const double w = weight(c);
    if (w == 0.0) continue;
    Eigen::VectorXd g;
    const double v = kind == LossKind::Node ? node_loss(tr.z[c], emb, s.profile.levels[c], &g)
                                            : cosine_loss(tr.z[c], s.targets[c], &g);
    out.value += w * v;
    out.grad_z[c] = w * g;
  }
  return out;
}

}  // namespace cascade
