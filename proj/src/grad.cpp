#include "cascade/grad.hpp"

#include <cmath>

#include "cascade/error.hpp"

namespace cascade {

ParamSet backward(const ModelParams& params, const Embedding& emb, const Sample& s,
                  const ForwardTrace& tr, const std::vector<Eigen::VectorXd>& grad_z) {
  const int layers = params.dims.num_layers();
  const double inv_sqrt_d = 1.0 / std::sqrt(double(params.dims.d));
  const auto& edges = s.graph.edges;
  ParamSet grad = params.weights.zeros_like();

  Eigen::VectorXd g = grad_z.at(layers);
  for (int c = layers - 1; c >= 0; --c) {
    const auto& lp = params.weights.layers[c];
    const auto& t = tr.layers[c];
    auto& gl = grad.layers[c];
    const Eigen::VectorXd& z_out = tr.z[c + 1];
    const Eigen::VectorXd& z_in = tr.z[c];

    Eigen::VectorXd gx = params.flags.layer_norm ? Eigen::VectorXd((g - z_out * z_out.dot(g)) / t.x_norm)
                                                 : g;
    // MLP with skip: x = pre + W2 relu(W1 pre + b1) + b2
    gl.b2 += gx;
    const Eigen::VectorXd hidden = t.hidden_pre.cwiseMax(0.0);
    gl.w2.noalias() += gx * hidden.transpose();
    Eigen::VectorXd gh = lp.w2.transpose() * gx;
    for (int i = 0; i < gh.size(); ++i)
      if (!(t.hidden_pre[i] > 0.0)) gh[i] = 0.0;
    gl.b1 += gh;
    gl.w1.noalias() += gh * t.pre.transpose();
    Eigen::VectorXd gpre = gx;
    gpre.noalias() += lp.w1.transpose() * gh;

    // pre = [z] + alpha * attn_out
    gl.alpha += gpre.dot(t.attn_out);
    Eigen::VectorXd g_in = Eigen::VectorXd::Zero(z_in.size());
    if (params.flags.residual) g_in = gpre;

    const int m = static_cast<int>(edges.size());
    if (m > 0) {
      const Eigen::VectorXd g_node = emb.U.transpose() * (lp.alpha * gpre);
      double mean = 0.0;
      for (int i = 0; i < m; ++i) mean += t.attn[i] * g_node[edges[i].dst];
      Eigen::VectorXd g_src = Eigen::VectorXd::Zero(emb.n);
      double g_scale = 0.0;  // d/dscale of sum_i l_i, l_i = scale * node_score[src]
      for (int i = 0; i < m; ++i) {
        const double gli = t.attn[i] * (g_node[edges[i].dst] - mean);
        g_src[edges[i].src] += gli;
        g_scale += gli * t.node_score[edges[i].src];
      }
      const Eigen::VectorXd us_g = emb.U * g_src;
      if (params.mode == ParamMode::Reduced) {
        gl.gamma += inv_sqrt_d * g_scale;
        g_in += (lp.gamma * inv_sqrt_d) * us_g;
      } else {
        gl.wqk.noalias() += inv_sqrt_d * z_in * us_g.transpose();
        g_in.noalias() += inv_sqrt_d * (lp.wqk * us_g);
      }
    }
    g = g_in + grad_z.at(c);
  }
  return grad;
}

GradResult loss_and_grad(const ModelParams& params, const Embedding& emb, const Sample& s,
                         LossKind kind, const std::vector<double>& level_weights) {
  const ForwardTrace tr = forward(params, emb, s);
  const LossValue lv = evaluate_loss(kind, tr, emb, s, level_weights);
  return {lv.value, backward(params, emb, s, tr, lv.grad_z)};
}

GradResult batch_loss_and_grad(const ModelParams& params, const Embedding& emb,
                               std::span<const Sample> batch, LossKind kind,
                               const std::vector<double>& level_weights) {
  if (batch.empty()) throw ConfigError("batch_loss_and_grad: empty batch");
  GradResult out{0.0, params.weights.zeros_like()};
  for (const auto& s : batch) {
    GradResult r = loss_and_grad(params, emb, s, kind, level_weights);
    out.loss += r.loss;
    out.grad.add_scaled(r.grad, 1.0);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.loss *= inv;
  out.grad.scale(inv);
  return out;
}

double model_loss(const ModelParams& params, const Embedding& emb, const Sample& s, LossKind kind,
                  const std::vector<double>& level_weights) {
  return evaluate_loss(kind, forward(params, emb, s), emb, s, level_weights).value;
}

ParamSet finite_diff(const ModelParams& params,
                     const std::function<double(const ModelParams&)>& loss, double h) {
  ModelParams work = params;
  ParamSet out = params.weights.zeros_like();
  auto wb = work.weights.blocks();
  auto ob = out.blocks();
  for (std::size_t b = 0; b < wb.size(); ++b) {
    for (std::size_t i = 0; i < wb[b].values.size(); ++i) {
      double& x = wb[b].values[i];
      const double x0 = x;
      x = x0 + h;
      const double fp = loss(work);
      x = x0 - h;
      const double fm = loss(work);
      x = x0;
      ob[b].values[i] = (fp - fm) / (2.0 * h);
    }
  }
  return out;
}

double relative_error(const ParamSet& a, const ParamSet& b, double floor) {
  const auto fa = a.flatten();
  const auto fb = b.flatten();
  if (fa.size() != fb.size()) throw InputError("relative_error: shape mismatch");
  double diff = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    diff += (fa[i] - fb[i]) * (fa[i] - fb[i]);
    na += fa[i] * fa[i];
    nb += fb[i] * fb[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), floor});
}

void Adam::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != grads.size()) throw InputError("Adam::step: size mismatch");
  for (double g : grads)
    if (!std::isfinite(g)) throw TrainingError("non-finite gradient");
  if (m_.empty()) {
    m_.assign(params.size(), 0.0);
    v_.assign(params.size(), 0.0);
  } else if (m_.size() != params.size()) {
    throw InputError("Adam::step: parameter count changed");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i] * grads[i];
    params[i] -= cfg_.lr * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + cfg_.eps);
  }
}

void adam_step(Adam& opt, ModelParams& params, const ParamSet& grad) {
  auto flat = params.weights.flatten();
  const auto g = grad.flatten();
  opt.step(flat, g);
  params.weights.assign(flat);
}

void gd_step(ModelParams& params, const ParamSet& grad, double lr) {
  if (!grad.all_finite()) throw TrainingError("non-finite gradient");
  params.weights.add_scaled(grad, -lr);
}

double grad_gamma_ratio(const ModelParams& params, const Embedding& emb,
                        std::span<const Sample> batch, int c) {
  if (params.mode != ParamMode::Reduced) throw ConfigError("grad_gamma_ratio needs reduced mode");
  const int layers = params.dims.num_layers();
  if (c < 0 || c >= layers) throw ConfigError("grad_gamma_ratio: layer out of range");
  std::vector<double> local(params.dims.depth, 0.0);
  local[c + 1] = 1.0;
  const auto e2e = batch_loss_and_grad(params, emb, batch, LossKind::EndToEnd);
  const auto own = batch_loss_and_grad(params, emb, batch, LossKind::Superposition, local);
  const double num = std::abs(e2e.grad.layers[c].gamma);
  const double den = std::abs(own.grad.layers[c].gamma);
  if (!(den >= 1e-12)) throw UndefinedRatioError("grad_gamma_ratio: local gradient below 1e-12");
  return num / den;
}

}  // namespace cascade
