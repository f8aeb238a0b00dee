#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "cascade/embedding.hpp"
#include "cascade/model.hpp"

namespace cascade {

// Cosine between z_{c+1}^* and the layer output when z_c = z_c^* and the
// effective mixing is alpha; m_f = k_next - k_c.
double cos_single_step(double k_c, double k_next, double alpha_eff);
double alpha_star(double k_c, double m_f);
double cos_curvature_at_star(double k_c, double k_next);  // -k_c^2 / (m_f k_{c+1}^2)

double alpha_eff_mobius(double alpha, double A, double B, double k_c, double m_f);
double alpha_eff_phaseA(double alpha, double A, double B, double k_c);

double gamma_star(double d, double k_c, double m, double delta);

struct LadderReport {
  std::vector<double> gamma;
  bool strictly_increasing = false;
};
LadderReport gamma_ladder(double d, const std::vector<double>& k, double m, double delta);

double e2e_decay_factor(double np, int depth, int c);
double residual_ceiling(double m_f, double k_next);

struct DiagCertificates {
  double entrywise_ratio = 0.0;     // mean |diag| / mean |offdiag|
  double frobenius_ratio = 0.0;     // per-entry RMS diag / RMS offdiag
  double gamma_fit = 0.0;           // W ~ gamma I + mu J
  double mu_fit = 0.0;
  double mu_over_gamma = 0.0;
  bool ratio_infinite = false;      // off-diagonal identically zero
  bool gamma_degenerate = false;    // |gamma_fit| too small for mu/gamma
};
DiagCertificates diag_certificates(const Eigen::MatrixXd& W);

// Mean |diag| / mean |offdiag| of the population gradient of the first
// layer loss with respect to W_QK at W_QK = 0 (orthogonal embeddings,
// alpha = 1, zero MLP).
double diag_advantage_at_zero(int n, double p, int samples, std::uint64_t seed);

double tau_star_bound(double alpha0, double A0, double B0, double b1p0, double m_f_max,
                      double M_inf, double c0);

enum class Phase { I, II, III };

struct PhaseReport {
  double r_min = 0.0;
  double beta_I = 0.0;
  double beta_III = 0.0;
  double threshold_I = 0.0;
  double threshold_III = 0.0;
  Phase phase = Phase::II;
};
double r_min(double np, int depth, int c);
PhaseReport phase_classify(double loss_level, double n, double p, int depth, int c, double k_D1,
                           double c0 = 1.0);

struct MobiusCoords {
  double a = 0.0, b1p = 0.0, eta = 0.0, zeta = 0.0;
  double A = 1.0, B = 0.0;
  double fit_residual = 0.0;
  bool degenerate = false;
  double alpha_eff_empirical = 0.0;
  double g_old = 0.0, g_new = 0.0;
};

// Probe-based Moebius scalars of layer c plus the empirical effective mixing
// on the instance described by (emb, profile).
MobiusCoords extract_mobius(const ModelParams& params, const Embedding& emb,
                            const ReachabilityProfile& prof, int c, std::uint64_t probe_seed = 0);

// Reduced-mode parameters sitting on the A = 0 optimum with a gamma ladder.
// Per-layer MLP is the coordinatewise clamp min(x, B_c), B_c = clamp_frac /
// sqrt(k_c) with population k_c = (np)^c.
struct IdealSpec {
  double np = 2.0;
  double edges = 100.0;      // m in the gamma ladder
  double delta = 0.01;
  double gamma_scale = 1.0;  // multiplies gamma_star
  double clamp_frac = 0.9;
  double a = 1.0;            // MLP slope; eta = -1/a
};
ModelParams ideal_params(const ModelDims& dims, const IdealSpec& spec);

}  // namespace cascade
