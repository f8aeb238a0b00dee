#pragma once

#include <functional>
#include <span>
#include <vector>

#include "cascade/losses.hpp"
#include "cascade/model.hpp"

namespace cascade {

struct GradResult {
  double loss = 0.0;
  ParamSet grad;
};

// Reverse pass through a recorded forward trace given dL/dz_c.
ParamSet backward(const ModelParams& params, const Embedding& emb, const Sample& s,
                  const ForwardTrace& tr, const std::vector<Eigen::VectorXd>& grad_z);

GradResult loss_and_grad(const ModelParams& params, const Embedding& emb, const Sample& s,
                         LossKind kind, const std::vector<double>& level_weights = {});

// Mean over the batch, summed in index order.
GradResult batch_loss_and_grad(const ModelParams& params, const Embedding& emb,
                               std::span<const Sample> batch, LossKind kind,
                               const std::vector<double>& level_weights = {});

double model_loss(const ModelParams& params, const Embedding& emb, const Sample& s, LossKind kind,
                  const std::vector<double>& level_weights = {});

// Central differences over every parameter coordinate.
ParamSet finite_diff(const ModelParams& params,
                     const std::function<double(const ModelParams&)>& loss, double h = 1e-6);

// ||a - b|| / max(||a||, ||b||, floor), over the whole parameter vector.
double relative_error(const ParamSet& a, const ParamSet& b, double floor = 1e-12);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}
  // Throws TrainingError on a non-finite gradient.
  void step(std::span<double> params, std::span<const double> grads);
  long steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

void adam_step(Adam& opt, ModelParams& params, const ParamSet& grad);
void gd_step(ModelParams& params, const ParamSet& grad, double lr);

// |mean d/dgamma_c L_e2e| / |mean d/dgamma_c l_{c+1}| over the batch
// (reduced mode). Throws UndefinedRatioError when the denominator is zero.
double grad_gamma_ratio(const ModelParams& params, const Embedding& emb,
                        std::span<const Sample> batch, int c);

}  // namespace cascade
