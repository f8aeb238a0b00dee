#pragma once

#include <span>
#include <vector>

#include "cascade/losses.hpp"
#include "cascade/model.hpp"

namespace cascade {

struct AbcReport {
  LossKind kind = LossKind::Superposition;
  double kappa_A = 0.0;          // |dL/dgamma_0| with gamma_0 = 0, rest unchanged
  double kappa_A_sup = 0.0;      // same under the superposition loss, for the relative cutoff
  std::vector<double> R;         // per layer c: |dL/dgamma_c| / |d l_{c+1}/dgamma_c|
  std::vector<bool> excluded;    // direct gradient below 1e-12
  std::vector<double> fisher;    // per layer c: batch mean d^2 L / d alpha_eff,c^2
  std::vector<double> grad_sq;   // per layer c: batch mean (dL / d alpha_eff,c)^2
  bool condition_A = false;
  bool condition_B = false;
  bool condition_C = false;
};

// Curvature and slope along the effective mixing of layer c are measured by
// adding <x, z_c^*> * delta * m^{-1/2} z_new^* to the pre-norm state of that
// layer (x = pre + MLP(pre)) and differencing the loss; delta = fd_step.
AbcReport measure_abc(LossKind kind, const ModelParams& params, const Embedding& emb,
                      std::span<const Sample> batch, double fd_step = 1e-3);

// Loss of one instance with the effective mixing of layer c shifted by delta.
double loss_with_alpha_eff_shift(LossKind kind, const ModelParams& params, const Embedding& emb,
                                 const Sample& s, int c, double delta);

}  // namespace cascade
