#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cascade/embedding.hpp"
#include "cascade/model.hpp"

namespace cascade {

enum class LossKind { Superposition, Node, EndToEnd };

std::string to_string(LossKind k);  // CLI spelling, e.g. "intermediate_superposition"
LossKind loss_kind_from_string(const std::string& s);

struct LossValue {
  double value = 0.0;
  std::vector<Eigen::VectorXd> grad_z;  // dL/dz_c for c = 0 .. D-1 (entry 0 is zero)
};

// level_weights[c] scales the level-c term (c = 1 .. D-1); empty means all 1.
// The end-to-end loss only has the c = D-1 term.
LossValue evaluate_loss(LossKind kind, const ForwardTrace& tr, const Embedding& emb,
                        const Sample& s, const std::vector<double>& level_weights = {});

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// 1 - cos(z, target) and its gradient with respect to z.
double cosine_loss(const Eigen::VectorXd& z, const Eigen::VectorXd& target, Eigen::VectorXd* grad);

// Cross entropy between softmax(U^T z) and the uniform distribution on V_c.
double node_loss(const Eigen::VectorXd& z, const Embedding& emb, const std::vector<int>& level,
                 Eigen::VectorXd* grad);

}  // namespace cascade
