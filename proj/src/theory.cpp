#include "cascade/theory.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "cascade/error.hpp"
#include "cascade/grad.hpp"
#include "cascade/rng.hpp"

namespace cascade {

double cos_single_step(double k_c, double k_next, double a) {
  const double m = k_next - k_c;
  if (!(k_c >= 1 && m > 0)) throw ConfigError("cos_single_step: need k_c >= 1 and k_next > k_c");
  return (std::sqrt(k_c) + a) / (std::sqrt(k_next) * std::sqrt(1.0 + a * a / m));
}

double alpha_star(double k_c, double m_f) { return m_f / std::sqrt(k_c); }

double cos_curvature_at_star(double k_c, double k_next) {
  return -k_c * k_c / ((k_next - k_c) * k_next * k_next);
}

double alpha_eff_mobius(double alpha, double A, double B, double k_c, double m_f) {
  const double den = A + std::sqrt(k_c) * B;
  if (den == 0.0) throw SingularMobiusError("alpha_eff_mobius: A + sqrt(k) B = 0");
  return (alpha * A + m_f * B) / den;
}

double alpha_eff_phaseA(double alpha, double A, double B, double k_c) {
  const double den = A + std::sqrt(k_c) * B;
  if (den == 0.0) throw SingularMobiusError("alpha_eff_phaseA: A + sqrt(k) B = 0");
  return alpha * A / den;
}

double gamma_star(double d, double k_c, double m, double delta) {
  if (!(m >= 1) || !(delta > 0 && delta < 1 + 1e-15)) throw ConfigError("gamma_star: need m >= 1, delta in (0,1)");
  return 2.0 * std::sqrt(d) * std::sqrt(k_c) * std::log(m / delta);
}

LadderReport gamma_ladder(double d, const std::vector<double>& k, double m, double delta) {
  LadderReport r;
  for (double kc : k) r.gamma.push_back(gamma_star(d, kc, m, delta));
  r.strictly_increasing = true;
  for (std::size_t i = 1; i < r.gamma.size(); ++i)
    if (!(r.gamma[i] > r.gamma[i - 1])) r.strictly_increasing = false;
  return r;
}

double e2e_decay_factor(double np, int depth, int c) {
  if (!(np > 1)) throw ConfigError("e2e_decay_factor: need np > 1");
  return std::pow(np, -(depth - c - 2) / 2.0);
}

double residual_ceiling(double m_f, double k_next) {
  if (!(m_f >= 1 && m_f < k_next)) throw ConfigError("residual_ceiling: need 1 <= m_f < k_next");
  return std::sqrt(m_f / k_next);
}

DiagCertificates diag_certificates(const Eigen::MatrixXd& W) {
  if (W.rows() != W.cols() || W.rows() < 2) throw InputError("diag_certificates: need square n >= 2");
  const int n = static_cast<int>(W.rows());
  double sd = 0, so = 0, qd = 0, qo = 0, md = 0, mo = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double w = W(i, j);
      if (i == j) {
        sd += std::abs(w);
        qd += w * w;
        md += w;
      } else {
        so += std::abs(w);
        qo += w * w;
        mo += w;
      }
    }
  const double nd = n, no = double(n) * (n - 1);
  DiagCertificates r;
  if (so == 0.0) {
    r.ratio_infinite = true;
    r.entrywise_ratio = r.frobenius_ratio = INFINITY;
  } else {
    r.entrywise_ratio = (sd / nd) / (so / no);
    r.frobenius_ratio = std::sqrt(qd / nd) / std::sqrt(qo / no);
  }
  // least squares onto span{I, J}: off-diagonal entries fix mu, diagonal
  // entries fix gamma + mu
  r.mu_fit = mo / no;
  r.gamma_fit = md / nd - r.mu_fit;
  const double scale = std::sqrt((qd + qo) / (nd + no));
  if (std::abs(r.gamma_fit) <= 1e-12 * std::max(scale, 1e-300)) {
    r.gamma_degenerate = true;
    r.mu_over_gamma = NAN;
  } else {
    r.mu_over_gamma = r.mu_fit / r.gamma_fit;
  }
  return r;
}

double diag_advantage_at_zero(int n, double p, int samples, std::uint64_t seed) {
  if (n < 2 || samples < 1) throw ConfigError("diag_advantage_at_zero: need n >= 2, samples >= 1");
  const Embedding emb = make_embedding(n, n, EmbeddingMode::Orthogonal);
  ModelParams params;
  params.dims = {n, 1, 2};
  params.mode = ParamMode::Matrix;
  params.weights.mode = ParamMode::Matrix;
  LayerParams lp;
  lp.alpha = 1.0;
  lp.wqk = Eigen::MatrixXd::Zero(n, n);
  lp.w1 = Eigen::MatrixXd::Zero(1, n);
  lp.b1 = Eigen::VectorXd::Zero(1);
  lp.w2 = Eigen::MatrixXd::Zero(n, 1);
  lp.b2 = Eigen::VectorXd::Zero(n);
  params.weights.layers.push_back(lp);

  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(n, n);
  int used = 0;
  for (std::uint64_t attempt = 0; used < samples; ++attempt) {
    if (attempt > 1000ULL * static_cast<std::uint64_t>(samples))
      throw ConfigError("diag_advantage_at_zero: frontier almost always empty");
    Graph g = sample_er(n, p, derive_seed({seed, attempt}));
    Sample s;
    try {
      s = make_sample(std::move(g), emb, 2);
    } catch (const DegenerateFrontierError&) {
      continue;
    }
    mean += loss_and_grad(params, emb, s, LossKind::Superposition).grad.layers[0].wqk;
    ++used;
  }
  mean /= samples;
  const Eigen::MatrixXd pulled = emb.U.transpose() * mean * emb.U;
  double sd = 0, so = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) (i == j ? sd : so) += std::abs(pulled(i, j));
  sd /= n;
  so /= double(n) * (n - 1);
  return so > 0 ? sd / so : INFINITY;
}

double tau_star_bound(double alpha0, double A0, double B0, double b1p0, double m_f_max,
                      double M_inf, double c0) {
  if (!(c0 > 0)) throw ConfigError("tau_star_bound: c0 must be positive");
  if (!(std::abs(A0) < 1)) throw ConfigError("tau_star_bound: need |A0| < 1");
  if (b1p0 == 0.0 || B0 == 0.0) throw ConfigError("tau_star_bound: b1' and B must be nonzero");
  const double a_star = m_f_max * M_inf / ((1.0 - std::abs(A0)) * std::abs(b1p0) / std::abs(B0));
  return std::max(0.0, (a_star - alpha0) / c0);
}

double r_min(double np, int depth, int c) { return std::pow(np, -(depth - 2 - c) / 2.0); }

PhaseReport phase_classify(double loss_level, double n, double p, int depth, int c, double k_D1,
                           double c0) {
  if (c < 1 || c > depth - 1) throw ConfigError("phase_classify: need 1 <= c <= D-1");
  if (!(c0 > 0)) throw ConfigError("phase_classify: c0 must be positive");
  const double np = n * p;
  PhaseReport r;
  r.r_min = r_min(np, depth, c);
  const double r_last = r_min(np, depth, depth - 1);
  r.beta_I = std::log(2.0 * k_D1 * r_last);
  r.beta_III = std::log(2.0 * r_last);
  r.threshold_I = std::exp(-r.beta_I / r.r_min) / c0;
  r.threshold_III = std::exp(-r.beta_III / r.r_min) / c0;
  if (loss_level <= r.threshold_I)
    r.phase = Phase::I;
  else if (loss_level >= r.threshold_III)
    r.phase = Phase::III;
  else
    r.phase = Phase::II;
  return r;
}

namespace {

struct LineFit {
  double slope = 0, intercept = 0, sse = 0, cond = 1;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const double nn = x.size();
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / nn;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / nn;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxx > 0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    f.sse += r * r;
  }
  // condition number of the design [1 x]^T [1 x]
  Eigen::Matrix2d g;
  double sx = 0, sx2 = 0;
  for (double v : x) {
    sx += v;
    sx2 += v * v;
  }
  g << nn, sx, sx, sx2;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(g);
  const double lo = es.eigenvalues()(0), hi = es.eigenvalues()(1);
  f.cond = lo > 0 ? hi / lo : INFINITY;
  return f;
}

}  // namespace

MobiusCoords extract_mobius(const ModelParams& params, const Embedding& emb,
                            const ReachabilityProfile& prof, int c, std::uint64_t probe_seed) {
  const auto& lp = params.weights.layers.at(c);
  MobiusCoords out;

  // (i) empirical effective mixing on the ideal input
  {
    const Eigen::VectorXd z_old = ideal_state(emb, prof, c);
    const Eigen::VectorXd z_new = frontier_state(emb, prof, c);
    const double m_f = prof.m_new(c);
    Eigen::VectorXd pre = lp.alpha / std::sqrt(m_f) * z_new;
    if (params.flags.residual) pre += z_old;
    const Eigen::VectorXd h = mlp_apply(lp, pre);
    out.g_old = z_old.dot(h);
    out.g_new = z_new.dot(h);
    const double den = (params.flags.residual ? 1.0 : 0.0) + out.g_old;
    out.alpha_eff_empirical = den != 0.0 ? (lp.alpha + std::sqrt(m_f) * out.g_new) / den : NAN;
  }

  // (ii) probe fit of h_v(s) = <u_v, MLP(s u_v)>
  static constexpr std::array<double, 8> grid{-2, -1, -0.5, -0.1, 0.1, 0.5, 1, 2};
  const int probes = std::min(8, emb.n);
  Rng rng(probe_seed);
  std::vector<int> nodes(emb.n);
  std::iota(nodes.begin(), nodes.end(), 0);
  for (int i = 0; i < probes; ++i)
    std::swap(nodes[i], nodes[i + uniform_index(rng, emb.n - i)]);
  std::vector<double> xs(grid.begin(), grid.end()), ys(grid.size(), 0.0);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    for (int i = 0; i < probes; ++i) {
      const Eigen::VectorXd u = emb.U.col(nodes[i]);
      ys[k] += u.dot(mlp_apply(lp, grid[k] * u));
    }
    ys[k] /= probes;
  }

  // hinge: baseline on the inactive side, a line on the active side
  const double ybar = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
  double best_sse = 0;
  for (double y : ys) best_sse += (y - ybar) * (y - ybar);
  double slope = 0, jump = 0, base = ybar, best_cond = 1;
  bool any_hinge = false;
  const int ng = static_cast<int>(grid.size());
  for (int side = 0; side < 2; ++side) {
    for (int j = 1; j < ng - 1; ++j) {
      // side 0: indices >= j active; side 1: indices < ng - j active
      std::vector<double> ax, ay, iy;
      for (int k = 0; k < ng; ++k) {
        const bool active = side == 0 ? k >= j : k < ng - j;
        if (active) {
          ax.push_back(xs[k]);
          ay.push_back(ys[k]);
        } else {
          iy.push_back(ys[k]);
        }
      }
      if (ax.size() < 2 || iy.empty()) continue;
      const double c0 = std::accumulate(iy.begin(), iy.end(), 0.0) / iy.size();
      double sse = 0;
      for (double y : iy) sse += (y - c0) * (y - c0);
      const LineFit lf = fit_line(ax, ay);
      sse += lf.sse;
      if (sse < best_sse - 1e-14) {
        best_sse = sse;
        slope = lf.slope;
        jump = lf.intercept - c0;
        base = c0;
        best_cond = lf.cond;
        any_hinge = true;
      }
    }
  }
  out.fit_residual = std::sqrt(best_sse / ys.size());
  out.degenerate = best_cond > 1e8;
  out.A = 1.0 + slope;
  out.B = jump;
  out.b1p = lp.b1.mean();
  out.eta = (any_hinge && std::abs(out.b1p) > 1e-14) ? out.B / out.b1p : 0.0;
  out.a = std::abs(out.eta) > 1e-14 ? slope / out.eta : 0.0;
  out.zeta = out.b1p > 0 ? base / out.b1p : 0.0;
  if (!any_hinge) out.A = 1.0, out.B = 0.0;
  return out;
}

ModelParams ideal_params(const ModelDims& dims, const IdealSpec& spec) {
  if (dims.d_mlp < dims.d) throw ConfigError("ideal_params: need d_mlp >= d");
  ModelParams p;
  p.dims = dims;
  p.mode = ParamMode::Reduced;
  p.weights.mode = ParamMode::Reduced;
  double k = 1.0;  // expected cumulative level size in the tree regime
  for (int c = 0; c < dims.num_layers(); ++c) {
    const double m_f = std::pow(spec.np, c + 1);
    LayerParams lp;
    lp.gamma = spec.gamma_scale * gamma_star(dims.d, k, spec.edges, spec.delta);
    lp.alpha = 3.0 * alpha_star(k, m_f);
    const double B = spec.clamp_frac / std::sqrt(k);
    const double eta = -1.0 / spec.a;
    lp.w1 = Eigen::MatrixXd::Zero(dims.d_mlp, dims.d);
    lp.w1.topRows(dims.d).diagonal().setConstant(spec.a);
    lp.b1 = Eigen::VectorXd::Constant(dims.d_mlp, B / eta);
    lp.w2 = Eigen::MatrixXd::Zero(dims.d, dims.d_mlp);
    lp.w2.leftCols(dims.d).diagonal().setConstant(eta);
    lp.b2 = Eigen::VectorXd::Zero(dims.d);
    p.weights.layers.push_back(std::move(lp));
    k += m_f;
  }
  return p;
}

}  // namespace cascade
