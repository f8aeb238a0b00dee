#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cascade/error.hpp"
#include "cascade/harness.hpp"
#include "cascade/metrics_io.hpp"
#include "cascade/reduced_flow.hpp"
#include "cascade/theory.hpp"
#include "cascade/verify.hpp"

using namespace cascade;

namespace {

struct Flags {
  TrainConfig cfg;
  std::string mode = "intermediate_superposition";
  std::string param_mode = "reduced";
  std::string optimizer = "adam";
  std::string embedding;
  std::string out = "results";
  bool offline = false;
  bool no_residual = false;
  bool no_layernorm = false;
};

void add_train_flags(CLI::App* app, Flags& f) {
  app->add_option("--mode", f.mode, "intermediate_superposition | intermediate_node | e2e");
  app->add_option("--seed", f.cfg.seed);
  app->add_option("--n", f.cfg.n, "nodes");
  app->add_option("--D", f.cfg.D, "depth");
  app->add_option("--p", f.cfg.p, "edge probability");
  app->add_option("--d", f.cfg.d, "embedding width");
  app->add_option("--d_mlp", f.cfg.d_mlp);
  app->add_option("--lr", f.cfg.lr);
  app->add_option("--batch", f.cfg.batch);
  app->add_option("--epochs", f.cfg.epochs);
  app->add_option("--steps-per-epoch", f.cfg.steps_per_epoch);
  app->add_option("--eval-every", f.cfg.eval_every);
  app->add_option("--eval-batch", f.cfg.eval_batch);
  app->add_option("--epsilon", f.cfg.epsilon, "tree-regime slack");
  app->add_flag("--online,!--offline", f.cfg.online, "fresh graphs every step (default)");
  app->add_option("--pool", f.cfg.offline_pool, "training set size when offline");
  app->add_option("--param-mode", f.param_mode, "reduced | matrix");
  app->add_option("--optimizer", f.optimizer, "adam | gd");
  app->add_option("--embedding", f.embedding, "orthogonal | random_sphere");
  app->add_flag("--no-residual", f.no_residual);
  app->add_flag("--no-layernorm", f.no_layernorm);
  app->add_option("--out", f.out, "results root");
}

TrainConfig resolve(Flags& f, const std::string& command, bool per_mode = true) {
  TrainConfig c = f.cfg;
  c.mode = loss_kind_from_string(f.mode);
  if (f.param_mode == "reduced") c.param_mode = ParamMode::Reduced;
  else if (f.param_mode == "matrix") c.param_mode = ParamMode::Matrix;
  else throw ConfigError("unknown --param-mode " + f.param_mode);
  if (f.optimizer == "adam") c.optimizer = Optimizer::Adam;
  else if (f.optimizer == "gd") c.optimizer = Optimizer::GD;
  else throw ConfigError("unknown --optimizer " + f.optimizer);
  if (!f.embedding.empty()) c.embedding = embedding_mode_from_string(f.embedding);
  c.flags.residual = !f.no_residual;
  c.flags.layer_norm = !f.no_layernorm;
  c.out_dir = f.out + "/" + command + (per_mode ? "/" + f.mode : "");
  for (const auto& w : config_warnings(c)) std::fprintf(stderr, "warning: %s\n", w.c_str());
  return c;
}

void print_record(const MetricsRecord& r, int D) {
  std::printf("epoch %d  eval_loss %.6g  acc_set %.4f  acc_lexmin %.4f\n", r.epoch, r.eval_loss,
              r.acc_set, r.acc_lexmin);
  for (int c = 1; c < D; ++c)
    std::printf("  c=%d  cos %.4f  sel %.4f  theory_cos %.4f  ratio %.4f  alpha_eff %.4g  recall %.4f\n", c,
                r.cos[c], r.selectivity[c], r.theory_cos[c], r.ratio[c], r.alpha_eff[c], r.recall[c]);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cascade: BFS-cascade transformer lab"};
  app.require_subcommand(1);

  Flags tf;
  auto* train_cmd = app.add_subcommand("train", "train one model");
  add_train_flags(train_cmd, tf);

  Flags cf;
  auto* cmp_cmd = app.add_subcommand("compare-supervision", "train under all three losses");
  add_train_flags(cmp_cmd, cf);

  Flags af;
  auto* abl_cmd = app.add_subcommand("ablate", "LayerNorm x residual grid under the superposition loss");
  add_train_flags(abl_cmd, af);

  Flags df;
  df.param_mode = "matrix";
  auto* diag_cmd = app.add_subcommand("diagonalize", "matrix-mode run logging diag certificates");
  add_train_flags(diag_cmd, df);

  double np = 2.0;
  int depth = 3, steps = 10000;
  double rlr = 1e-3;
  std::uint64_t rseed = 0;
  std::string rout = "results";
  auto* ropt_cmd = app.add_subcommand("reduced-opt", "Adam on the reduced (alpha, a, b1', eta) loss");
  ropt_cmd->add_option("--np", np);
  ropt_cmd->add_option("--D", depth);
  ropt_cmd->add_option("--steps", steps);
  ropt_cmd->add_option("--lr", rlr);
  ropt_cmd->add_option("--seed", rseed);
  ropt_cmd->add_option("--out", rout);

  ReducedState s0{3.0, 0.5, -0.3, -1.0, 0.0};
  FlowOptions fo;
  bool phase_a = false;
  auto* flow_cmd = app.add_subcommand("flow", "integrate the reduced gradient flow");
  flow_cmd->add_option("--np", np);
  flow_cmd->add_option("--D", depth);
  flow_cmd->add_option("--alpha", s0.alpha);
  flow_cmd->add_option("--a", s0.a);
  flow_cmd->add_option("--b1p", s0.b1p);
  flow_cmd->add_option("--eta", s0.eta);
  flow_cmd->add_option("--dtau", fo.dtau);
  flow_cmd->add_option("--horizon", fo.horizon);
  flow_cmd->add_flag("--phase-a", phase_a, "degenerate phase-A dynamics up to activation");
  flow_cmd->add_option("--out", rout);

  auto* verify_cmd = app.add_subcommand("verify", "run the property suite");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) {
      const TrainConfig c = resolve(tf, "train");
      const TrainResult r = train(c);
      print_record(r.final(), c.D);
      std::printf("resampled %ld; outputs in %s\n", r.resampled, c.out_dir.c_str());
    } else if (cmp_cmd->parsed()) {
      const TrainConfig c = resolve(cf, "compare-supervision", false);
      const ComparisonTable t = run_supervision_comparison(c);
      MetricsTable out;
      out.columns = {"mode", "c", "cos", "theory_cos", "failed"};
      std::printf("%-28s", "mode");
      for (int k = 1; k < c.D; ++k) std::printf("  cos_%d   ", k);
      std::printf("\n");
      for (size_t m = 0; m < t.modes.size(); ++m) {
        std::printf("%-28s", to_string(t.modes[m]).c_str());
        for (int k = 1; k < c.D; ++k) {
          std::printf("  %.4f  ", t.cos[m][k]);
          out.rows.push_back({double(m), double(k), t.cos[m][k], t.theory_cos[m][k], double(t.failed[m])});
        }
        std::printf("%s\n", t.failed[m] ? "  FAILED" : "");
      }
      std::printf("ordering sup >= node >= e2e (c >= 2): %s\n", t.ordering_ok ? "yes" : "no");
      write_text(c.out_dir + "/comparison.csv", to_csv(out));
    } else if (abl_cmd->parsed()) {
      TrainConfig c = resolve(af, "ablate", false);
      const auto cells = run_ablation_grid(c);
      MetricsTable out;
      out.columns = {"layer_norm", "residual", "cos1", "sel1", "acc", "ceiling", "failed"};
      for (const auto& cell : cells) {
        std::printf("%-5s %-6s cos1 %.4f  S1 %.4f  acc %.4f  ceiling %.4f%s\n",
                    cell.layer_norm ? "LN" : "noLN", cell.residual ? "Res" : "noRes", cell.cos1, cell.sel1,
                    cell.acc, cell.ceiling, cell.failed ? "  FAILED" : "");
        out.rows.push_back({double(cell.layer_norm), double(cell.residual), cell.cos1, cell.sel1, cell.acc,
                            cell.ceiling, double(cell.failed)});
      }
      write_text(c.out_dir + "/ablation.csv", to_csv(out));
    } else if (diag_cmd->parsed()) {
      const TrainConfig c = resolve(df, "diagonalize");
      const DiagReport rep = run_diagonalization(c);
      MetricsTable out;
      out.columns = {"epoch", "entrywise_ratio", "mu_over_gamma"};
      for (size_t i = 0; i < rep.epochs.size(); ++i) {
        std::printf("epoch %4d  diag/off %.4f  mu/gamma %.6f\n", rep.epochs[i], rep.entrywise_ratio[i],
                    rep.mu_over_gamma[i]);
        out.rows.push_back({double(rep.epochs[i]), rep.entrywise_ratio[i], rep.mu_over_gamma[i]});
      }
      std::printf("anchors: n-1 = %d, -1/n = %.6f\n", c.n - 1, -1.0 / c.n);
      write_text(c.out_dir + "/diag.csv", to_csv(out));
    } else if (ropt_cmd->parsed()) {
      const Ladder L = population_ladder(np, depth);
      const ReducedOptResult r = optimize_reduced(L, rseed, steps, rlr);
      std::printf("alpha %.10g  a %.10g  b1p %.10g  eta %.10g\n", r.state.alpha, r.state.a, r.state.b1p,
                  r.state.eta);
      std::printf("|A| %.3e  B %.6g  loss %.3e  steps %d\n", std::abs(r.state.A()), r.state.B(), r.loss, r.steps);
      MetricsTable out;
      out.columns = {"step", "loss"};
      for (size_t i = 0; i < r.loss_history.size(); ++i) out.rows.push_back({double(i), r.loss_history[i]});
      write_text(rout + "/reduced-opt/seed" + std::to_string(rseed) + "/loss.csv", to_csv(out));
    } else if (flow_cmd->parsed()) {
      const Ladder L = population_ladder(np, depth);
      const Trajectory tr = phase_a ? phaseA_flow(s0, L, fo) : integrate_flow(s0, L, fo);
      const auto& last = tr.states.back();
      std::printf("tau %.4f  alpha %.6g  a %.6g  b1p %.6g  eta %.6g  t %.3e  loss %.3e\n", last.tau, last.alpha,
                  last.a, last.b1p, last.eta, last.t(), tr.loss.back());
      if (phase_a) {
        const double bound = tau_star_bound(s0.alpha, s0.A(), s0.B(), s0.b1p, L.m_f.back(), tr.M_inf, tr.c0_fit);
        std::printf("activation %.4f  tau* bound %.4f  c0 %.4g  M %.4g  alpha monotone %s\n",
                    tr.activation_time, bound, tr.c0_fit, tr.M_inf, tr.alpha_monotone ? "yes" : "no");
      } else {
        std::printf("decay rate nu %.4f  R^2 %.6f  dtau %.3g\n", tr.nu, tr.r2, tr.dtau_used);
      }
      write_text(rout + "/flow/" + (phase_a ? "phase_a" : "full") + "/trajectory.csv", trajectory_csv(tr, L));
    } else if (verify_cmd->parsed()) {
      bool all = true;
      for (const auto& r : property_suite()) {
        std::printf("%s %s: %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
        all = all && r.passed;
      }
      return all ? 0 : 1;
    }
  } catch (const InstabilityError& e) {
    std::fprintf(stderr, "error: %s (last tau %.4f)\n", e.what(), e.last_valid.tau);
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
