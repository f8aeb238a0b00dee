#include "cascade/abc.hpp"

#include <cmath>

#include "cascade/error.hpp"
#include "cascade/grad.hpp"

namespace cascade {

double loss_with_alpha_eff_shift(LossKind kind, const ModelParams& params, const Embedding& emb,
                                 const Sample& s, int c, double delta) {
  const int layers = params.dims.num_layers();
  ForwardTrace tr;
  tr.layers.resize(layers);
  tr.z.push_back(emb.U.col(s.graph.root));
  for (int l = 0; l < layers; ++l) {
    Eigen::VectorXd z = layer_step(params, l, emb, s.graph, s.profile, tr.z[l], &tr.layers[l]);
    if (l == c) {
      const auto& t = tr.layers[l];
      Eigen::VectorXd x = t.pre + t.mlp_out;
      const Eigen::VectorXd z_new = frontier_state(emb, s.profile, l);
      x += x.dot(s.targets[l]) * delta / std::sqrt(double(s.profile.m_new(l))) * z_new;
      if (params.flags.layer_norm) {
        const double nx = x.norm();
        if (!(nx >= 1e-30)) throw DegenerateStateError("alpha_eff shift produced a zero state");
        x /= nx;
      }
      z = x;
    }
    tr.z.push_back(std::move(z));
  }
  return evaluate_loss(kind, tr, emb, s).value;
}

AbcReport measure_abc(LossKind kind, const ModelParams& params, const Embedding& emb,
                      std::span<const Sample> batch, double fd_step) {
  if (params.mode != ParamMode::Reduced) throw ConfigError("measure_abc needs reduced mode");
  if (batch.empty()) throw ConfigError("measure_abc: empty batch");
  const int layers = params.dims.num_layers();
  AbcReport r;
  r.kind = kind;

  ModelParams cold = params;
  cold.weights.layers[0].gamma = 0.0;
  r.kappa_A = std::abs(batch_loss_and_grad(cold, emb, batch, kind).grad.layers[0].gamma);
  r.kappa_A_sup =
      std::abs(batch_loss_and_grad(cold, emb, batch, LossKind::Superposition).grad.layers[0].gamma);

  const auto full = batch_loss_and_grad(params, emb, batch, kind);
  for (int c = 0; c < layers; ++c) {
    std::vector<double> w(params.dims.depth, 0.0);
    w[c + 1] = 1.0;
    const auto direct = batch_loss_and_grad(params, emb, batch, LossKind::Superposition, w);
    const double den = std::abs(direct.grad.layers[c].gamma);
    const bool excl = !(den >= 1e-12);
    r.excluded.push_back(excl);
    r.R.push_back(excl ? NAN : std::abs(full.grad.layers[c].gamma) / den);

    double curv = 0.0, g2 = 0.0;
    const double h = fd_step;
    for (const auto& s : batch) {
      const double f0 = loss_with_alpha_eff_shift(kind, params, emb, s, c, 0.0);
      const double fp = loss_with_alpha_eff_shift(kind, params, emb, s, c, h);
      const double fm = loss_with_alpha_eff_shift(kind, params, emb, s, c, -h);
      curv += (fp - 2.0 * f0 + fm) / (h * h);
      const double g = (fp - fm) / (2.0 * h);
      g2 += g * g;
    }
    r.fisher.push_back(curv / batch.size());
    r.grad_sq.push_back(g2 / batch.size());
  }

  r.condition_A = r.kappa_A >= 1e-3 * r.kappa_A_sup;
  r.condition_B = true;
  for (int c = 0; c < layers; ++c)
    if (!r.excluded[c] && !(r.R[c] >= 0.5)) r.condition_B = false;
  r.condition_C = true;
  for (int c = 0; c + 1 < layers; ++c)
    if (!(r.fisher[c] > 1e-8)) r.condition_C = false;
  return r;
}

}  // namespace cascade
