#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cascade/error.hpp"

namespace cascade {

struct ReducedState {
  double alpha = 0.0;
  double a = 0.0;
  double b1p = 0.0;
  double eta = 0.0;
  double tau = 0.0;

  double A() const { return 1.0 + eta * a; }
  double B() const { return eta * b1p; }
  double t() const { return A() / B(); }
};

// Integration blew up; carries the last finite state.
struct InstabilityError : Error {
  InstabilityError(const std::string& what, ReducedState last) : Error(what), last_valid(last) {}
  ReducedState last_valid;
};

// D steps: k has D + 1 entries, m_f[c] = k[c + 1] - k[c].
struct Ladder {
  std::vector<double> k;
  std::vector<double> m_f;

  int steps() const { return static_cast<int>(m_f.size()); }
  double alpha_star(int c) const;
  double max_alpha_star() const;
};

// Validates k_{c+1} = k_c + m_f and pairwise distinct alpha*.
Ladder make_ladder(const std::vector<double>& k);
// k_c = (np)^c for c = 0 .. D.
Ladder population_ladder(double np, int depth);

// Sum over steps of 1 - cos_c(alpha_eff,c); phase_a selects the degenerate
// form with the m_f B numerator suppressed.
double reduced_loss(const ReducedState& s, const Ladder& L, bool phase_a = false);

struct ReducedGrad {
  double alpha = 0, a = 0, b1p = 0, eta = 0;
};
ReducedGrad reduced_grad(const ReducedState& s, const Ladder& L, bool phase_a = false);

// Loss as a function of t = A / B at fixed alpha.
double reduced_loss_t(double alpha, double t, const Ladder& L);

struct DerivativeT {
  double value = 0.0;
  bool in_domain = false;  // t > 0 and alpha > max alpha*
};
DerivativeT dL_dt(const ReducedState& s, const Ladder& L);

struct FlowOptions {
  double dtau = 1e-3;
  double horizon = 10.0;
  int sample_every = 100;  // integrator steps between samples
  int max_halvings = 20;
};

struct Trajectory {
  std::vector<ReducedState> states;
  std::vector<double> loss;
  double nu = 0.0;        // decay rate of log|t|, last half of the samples above 1e-10
  double r2 = 0.0;
  double dtau_used = 0.0;
  // phaseA_flow only
  double activation_time = -1.0;
  double c0_fit = 0.0;    // min d(alpha)/d(tau) during phase A
  double M_inf = 0.0;     // sup |b1'| during phase A
  bool alpha_monotone = true;
};

Trajectory integrate_flow(const ReducedState& s0, const Ladder& L, const FlowOptions& opt = {});
Trajectory phaseA_flow(const ReducedState& s0, const Ladder& L, const FlowOptions& opt = {});

bool new_channel_active(const ReducedState& s, const Ladder& L);

std::string trajectory_csv(const Trajectory& tr, const Ladder& L);

struct ReducedOptResult {
  ReducedState state;
  double loss = 0.0;
  int steps = 0;  // Adam steps taken before the gradient fell below grad_tol
  std::vector<double> loss_history;
};

// Adam on (alpha, a, b1', eta) from a seeded random start on the trained
// branch (b1' < 0, A > 0, B > 0, alpha above every alpha*). Stops early once
// every gradient component is below grad_tol.
ReducedOptResult optimize_reduced(const Ladder& L, std::uint64_t seed, int steps = 10000,
                                  double lr = 1e-3, double grad_tol = 1e-13);

}  // namespace cascade
