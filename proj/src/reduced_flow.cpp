#include "cascade/reduced_flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "cascade/grad.hpp"
#include "cascade/rng.hpp"

namespace cascade {

double Ladder::alpha_star(int c) const { return m_f.at(c) / std::sqrt(k.at(c)); }

double Ladder::max_alpha_star() const {
  double mx = -INFINITY;
  for (int c = 0; c < steps(); ++c) mx = std::max(mx, alpha_star(c));
  return mx;
}

Ladder make_ladder(const std::vector<double>& k) {
  if (k.size() < 2) throw ConfigError("make_ladder: need at least one step");
  Ladder L;
  L.k = k;
  for (std::size_t c = 0; c + 1 < k.size(); ++c) {
    if (!(k[c] >= 1) || !(k[c + 1] > k[c])) throw ConfigError("make_ladder: k must increase from >= 1");
    L.m_f.push_back(k[c + 1] - k[c]);
  }
  for (int i = 0; i < L.steps(); ++i)
    for (int j = i + 1; j < L.steps(); ++j)
      if (L.alpha_star(i) == L.alpha_star(j)) throw ConfigError("make_ladder: alpha* values must be distinct");
  return L;
}

Ladder population_ladder(double np, int depth) {
  std::vector<double> k;
  for (int c = 0; c <= depth; ++c) k.push_back(std::pow(np, c));
  return make_ladder(k);
}

namespace {

struct StepTerms {
  double x, dx_dalpha, dx_dA, dx_dB;
};

StepTerms step_terms(double alpha, double A, double B, double k, double m, bool phase_a) {
  const double sk = std::sqrt(k);
  const double den = A + sk * B;
  const double den2 = den * den;
  if (phase_a) return {alpha * A / den, A / den, alpha * sk * B / den2, -alpha * sk * A / den2};
  return {(alpha * A + m * B) / den, A / den, B * (alpha * sk - m) / den2, A * (m - alpha * sk) / den2};
}

double cos_of(double x, double k, double k1) {
  const double m = k1 - k;
  return (std::sqrt(k) + x) / (std::sqrt(k1) * std::sqrt(1.0 + x * x / m));
}

double cos_prime(double x, double k, double k1) {
  const double m = k1 - k;
  return std::sqrt(k) * (m / std::sqrt(k) - x) / (m * std::sqrt(k1) * std::pow(1.0 + x * x / m, 1.5));
}

}  // namespace

double reduced_loss(const ReducedState& s, const Ladder& L, bool phase_a) {
  double loss = 0.0;
  for (int c = 0; c < L.steps(); ++c) {
    const auto st = step_terms(s.alpha, s.A(), s.B(), L.k[c], L.m_f[c], phase_a);
    loss += 1.0 - cos_of(st.x, L.k[c], L.k[c + 1]);
  }
  return loss;
}

ReducedGrad reduced_grad(const ReducedState& s, const Ladder& L, bool phase_a) {
  double g_alpha = 0, g_A = 0, g_B = 0;
  for (int c = 0; c < L.steps(); ++c) {
    const auto st = step_terms(s.alpha, s.A(), s.B(), L.k[c], L.m_f[c], phase_a);
    const double dl_dx = -cos_prime(st.x, L.k[c], L.k[c + 1]);
    g_alpha += dl_dx * st.dx_dalpha;
    g_A += dl_dx * st.dx_dA;
    g_B += dl_dx * st.dx_dB;
  }
  // A = 1 + eta a, B = eta b1'
  return {g_alpha, g_A * s.eta, g_B * s.eta, g_A * s.a + g_B * s.b1p};
}

double reduced_loss_t(double alpha, double t, const Ladder& L) {
  double loss = 0.0;
  for (int c = 0; c < L.steps(); ++c) {
    const double x = (alpha * t + L.m_f[c]) / (t + std::sqrt(L.k[c]));
    loss += 1.0 - cos_of(x, L.k[c], L.k[c + 1]);
  }
  return loss;
}

DerivativeT dL_dt(const ReducedState& s, const Ladder& L) {
  const double t = s.t();
  DerivativeT out;
  out.in_domain = t > 0 && s.alpha > L.max_alpha_star();
  for (int c = 0; c < L.steps(); ++c) {
    const double k = L.k[c], m = L.m_f[c], k1 = L.k[c + 1];
    const double as = L.alpha_star(c);
    const double x = (s.alpha * t + m) / (t + std::sqrt(k));
    const double st = t + std::sqrt(k);
    out.value += k * (s.alpha - as) * (x - as) /
                 (m * std::sqrt(k1) * std::pow(1.0 + x * x / m, 1.5) * st * st);
  }
  return out;
}

bool new_channel_active(const ReducedState& s, const Ladder& L) {
  for (int c = 0; c < L.steps(); ++c)
    if (!(s.a * s.alpha / L.m_f[c] + s.b1p > 0)) return false;
  return true;
}

namespace {

ReducedState add(const ReducedState& s, const ReducedGrad& g, double h) {
  ReducedState o = s;
  o.alpha -= h * g.alpha;
  o.a -= h * g.a;
  o.b1p -= h * g.b1p;
  o.eta -= h * g.eta;
  return o;
}

bool sane(const ReducedState& s) {
  for (double v : {s.alpha, s.a, s.b1p, s.eta})
    if (!std::isfinite(v) || std::abs(v) > 1e8) return false;
  return true;
}

// One classical RK4 step of d(theta)/d(tau) = -grad L.
ReducedState rk4(const ReducedState& s, const Ladder& L, double h, bool phase_a) {
  const auto k1 = reduced_grad(s, L, phase_a);
  const auto k2 = reduced_grad(add(s, k1, h / 2), L, phase_a);
  const auto k3 = reduced_grad(add(s, k2, h / 2), L, phase_a);
  const auto k4 = reduced_grad(add(s, k3, h), L, phase_a);
  ReducedGrad g{(k1.alpha + 2 * k2.alpha + 2 * k3.alpha + k4.alpha) / 6,
                (k1.a + 2 * k2.a + 2 * k3.a + k4.a) / 6,
                (k1.b1p + 2 * k2.b1p + 2 * k3.b1p + k4.b1p) / 6,
                (k1.eta + 2 * k2.eta + 2 * k3.eta + k4.eta) / 6};
  ReducedState o = add(s, g, h);
  o.tau = s.tau + h;
  return o;
}

// Fit log|t| against tau over the last half of the samples that sit above
// the round-off floor of t (about 1e-13 in double precision).
void fit_decay(Trajectory& tr) {
  constexpr double kFloor = 1e-10;
  std::size_t above = 0;
  while (above < tr.states.size() && std::abs(tr.states[above].t()) > kFloor) ++above;
  std::vector<double> x, y;
  for (std::size_t i = above / 2; i < above; ++i) {
    x.push_back(tr.states[i].tau);
    y.push_back(std::log(std::abs(tr.states[i].t())));
  }
  if (x.size() < 3) return;
  const double n = x.size();
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i] / n, my += y[i] / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0) return;
  tr.nu = -sxy / sxx;
  tr.r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
}

template <class StopFn>
Trajectory run(const ReducedState& s0, const Ladder& L, const FlowOptions& opt, bool phase_a,
               StopFn stop) {
  if (!sane(s0)) throw ConfigError("flow: initial state not finite");
  Trajectory tr;
  double h = opt.dtau;
  ReducedState s = s0;
  s.tau = 0.0;
  tr.states.push_back(s);
  tr.loss.push_back(reduced_loss(s, L, phase_a));
  int halvings = 0;
  double acc = 0.0;  // tau accumulated since the last sample
  while (s.tau < opt.horizon - 1e-12) {
    if (stop(s, tr)) {
      if (tr.states.back().tau != s.tau) {
        tr.states.push_back(s);
        tr.loss.push_back(reduced_loss(s, L, phase_a));
      }
      tr.dtau_used = h;
      return tr;
    }
    ReducedState next = rk4(s, L, std::min(h, opt.horizon - s.tau), phase_a);
    if (!sane(next) || !std::isfinite(reduced_loss(next, L, phase_a))) {
      if (++halvings > opt.max_halvings) throw InstabilityError("flow: integration blew up", s);
      h /= 2;
      continue;
    }
    acc += next.tau - s.tau;
    s = next;
    if (acc >= opt.sample_every * opt.dtau - 1e-12 || s.tau >= opt.horizon - 1e-12) {
      tr.states.push_back(s);
      tr.loss.push_back(reduced_loss(s, L, phase_a));
      acc = 0.0;
    }
  }
  stop(s, tr);
  tr.dtau_used = h;
  return tr;
}

}  // namespace

Trajectory integrate_flow(const ReducedState& s0, const Ladder& L, const FlowOptions& opt) {
  Trajectory tr = run(s0, L, opt, false, [](const ReducedState&, Trajectory&) { return false; });
  fit_decay(tr);
  return tr;
}

Trajectory phaseA_flow(const ReducedState& s0, const Ladder& L, const FlowOptions& opt) {
  double c0 = INFINITY, M = 0.0, prev_alpha = s0.alpha;
  bool monotone = true;
  double activation = -1.0;
  auto stop = [&](const ReducedState& s, Trajectory&) {
    if (new_channel_active(s, L)) {
      activation = s.tau;
      return true;
    }
    c0 = std::min(c0, -reduced_grad(s, L, true).alpha);
    M = std::max(M, std::abs(s.b1p));
    if (s.alpha < prev_alpha) monotone = false;
    prev_alpha = s.alpha;
    return false;
  };
  Trajectory tr = run(s0, L, opt, true, stop);
  tr.activation_time = activation;
  tr.c0_fit = std::isfinite(c0) ? c0 : 0.0;
  tr.M_inf = M;
  tr.alpha_monotone = monotone;
  return tr;
}

std::string trajectory_csv(const Trajectory& tr, const Ladder& L) {
  std::ostringstream os;
  os << "tau,alpha,a,b1p,eta,A,B,t,loss\n";
  char buf[512];
  for (std::size_t i = 0; i < tr.states.size(); ++i) {
    const auto& s = tr.states[i];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.tau,
                  s.alpha, s.a, s.b1p, s.eta, s.A(), s.B(), s.t(),
                  i < tr.loss.size() ? tr.loss[i] : reduced_loss(s, L));
    os << buf;
  }
  return os.str();
}

ReducedOptResult optimize_reduced(const Ladder& L, std::uint64_t seed, int steps, double lr,
                                  double grad_tol) {
  Rng rng(seed);
  ReducedState s;
  s.alpha = L.max_alpha_star() + uniform(rng, 0.5, 2.0);
  s.a = uniform(rng, 0.3, 1.0);
  s.eta = uniform(rng, -0.9, -0.1) / s.a;
  s.b1p = uniform(rng, -0.5, -0.1);
  Adam opt(AdamConfig{lr, 0.9, 0.999, 1e-8});
  ReducedOptResult res;
  res.steps = steps;
  for (int i = 0; i < steps; ++i) {
    const auto g = reduced_grad(s, L);
    // converged to round-off; past this point Adam's decaying second
    // moment turns the iteration into an over-stepped descent on noise
    if (std::max({std::abs(g.alpha), std::abs(g.a), std::abs(g.b1p), std::abs(g.eta)}) < grad_tol) {
      res.steps = i;
      break;
    }
    double theta[4] = {s.alpha, s.a, s.b1p, s.eta};
    const double grad[4] = {g.alpha, g.a, g.b1p, g.eta};
    opt.step(theta, grad);
    s.alpha = theta[0], s.a = theta[1], s.b1p = theta[2], s.eta = theta[3];
    res.loss_history.push_back(reduced_loss(s, L));
  }
  res.state = s;
  res.loss = reduced_loss(s, L);
  return res;
}

}  // namespace cascade
