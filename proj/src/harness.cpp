#include "cascade/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "cascade/error.hpp"
#include "cascade/grad.hpp"
#include "cascade/graph.hpp"
#include "cascade/rng.hpp"
#include "cascade/theory.hpp"

namespace cascade {

namespace {

constexpr std::uint64_t kTrainStream = 1ULL << 40;
constexpr std::uint64_t kEvalStream = 2ULL << 40;
constexpr std::uint64_t kPoolStream = 3ULL << 40;

std::string optimizer_name(Optimizer o) { return o == Optimizer::Adam ? "adam" : "gd"; }

}  // namespace

EmbeddingMode TrainConfig::embedding_mode() const {
  if (embedding) return *embedding;
  return d >= n ? EmbeddingMode::Orthogonal : EmbeddingMode::RandomSphere;
}

nlohmann::json config_to_json(const TrainConfig& c) {
  return {{"n", c.n},
          {"p", c.p},
          {"D", c.D},
          {"d", c.d},
          {"d_mlp", c.d_mlp},
          {"lr", c.lr},
          {"batch", c.batch},
          {"epochs", c.epochs},
          {"steps_per_epoch", c.steps_per_epoch},
          {"seed", c.seed},
          {"mode", to_string(c.mode)},
          {"param_mode", to_string(c.param_mode)},
          {"use_layernorm", c.flags.layer_norm},
          {"use_residual", c.flags.residual},
          {"eval_every", c.eval_every},
          {"eval_batch", c.eval_batch},
          {"epsilon", c.epsilon},
          {"online", c.online},
          {"offline_pool", c.offline_pool},
          {"optimizer", optimizer_name(c.optimizer)},
          {"embedding", to_string(c.embedding_mode())}};
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.n = j.at("n");
    c.p = j.at("p");
    c.D = j.at("D");
    c.d = j.at("d");
    c.d_mlp = j.at("d_mlp");
    c.lr = j.at("lr");
    c.batch = j.at("batch");
    c.epochs = j.at("epochs");
    c.steps_per_epoch = j.at("steps_per_epoch");
    c.seed = j.at("seed");
    c.mode = loss_kind_from_string(j.at("mode"));
    c.param_mode = param_mode_from_string(j.at("param_mode"));
    c.flags.layer_norm = j.at("use_layernorm");
    c.flags.residual = j.at("use_residual");
    c.eval_every = j.at("eval_every");
    c.eval_batch = j.at("eval_batch");
    c.epsilon = j.at("epsilon");
    c.online = j.at("online");
    c.offline_pool = j.value("offline_pool", 4096);
    const std::string opt = j.value("optimizer", "adam");
    if (opt != "adam" && opt != "gd") throw ConfigError("unknown optimizer " + opt);
    c.optimizer = opt == "adam" ? Optimizer::Adam : Optimizer::GD;
    if (j.contains("embedding")) c.embedding = embedding_mode_from_string(j.at("embedding"));
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("config: ") + ex.what());
  }
  return c;
}

std::vector<std::string> config_warnings(const TrainConfig& c) {
  std::vector<std::string> w;
  const RegimeReport r = check_regime(c.n, c.p, c.D, c.epsilon);
  if (!r.tree_ok) w.push_back("(np)^D exceeds n^(1-epsilon): graph is not tree-like at this depth");
  if (!r.sparsity_ok) w.push_back("np outside (1, sqrt(n)]: not in the sparse supercritical regime");
  if (c.embedding_mode() == EmbeddingMode::RandomSphere)
    w.push_back("d < n: embeddings are random unit vectors, not orthogonal");
  return w;
}

static void validate_config(const TrainConfig& c) {
  if (c.n < 2 || c.D < 2 || c.d < 1 || c.d_mlp < 1 || c.batch < 1 || c.epochs < 0 ||
      c.steps_per_epoch < 1 || c.eval_every < 1 || c.eval_batch < 1 || !(c.lr > 0) ||
      !(c.p > 0 && c.p <= 1))
    throw ConfigError("invalid training configuration");
  if (c.embedding_mode() == EmbeddingMode::Orthogonal && c.d < c.n)
    throw ConfigError("orthogonal embeddings need d >= n");
}

Sample draw_sample(const TrainConfig& c, const Embedding& emb, std::uint64_t stream,
                   std::uint64_t index, long* resampled) {
  for (std::uint64_t attempt = 0; attempt < 100000; ++attempt) {
    Graph g = sample_er(c.n, c.p, derive_seed({c.seed, stream, index, attempt}));
    try {
      return make_sample(std::move(g), emb, c.D);
    } catch (const DegenerateFrontierError&) {
      if (resampled) ++*resampled;
    }
  }
  throw ConfigError("draw_sample: no instance with non-empty frontiers (p too small?)");
}

std::vector<std::string> metrics_columns(int D) {
  std::vector<std::string> cols{"epoch", "step", "train_loss", "eval_loss"};
  auto per_level = [&](const std::string& name) {
    for (int c = 1; c < D; ++c) cols.push_back(name + "_" + std::to_string(c));
  };
  per_level("cos");
  per_level("sel");
  per_level("theory_cos");
  per_level("ratio");
  per_level("theory_alpha_star");
  per_level("theory_ceiling");
  per_level("mobius_A");
  per_level("mobius_B");
  per_level("alpha_eff");
  per_level("recall");
  cols.push_back("acc_set");
  cols.push_back("acc_lexmin");
  per_level("diag_ratio");
  per_level("mu_over_gamma");
  cols.push_back("resampled");
  return cols;
}

std::vector<std::string> required_theory_columns(int D) {
  std::vector<std::string> out;
  for (const auto& c : metrics_columns(D))
    if (c.rfind("theory_", 0) == 0) out.push_back(c);
  return out;
}

std::vector<double> metrics_row(const MetricsRecord& r, int D) {
  std::vector<double> row{double(r.epoch), double(r.step), r.train_loss, r.eval_loss};
  auto per_level = [&](const std::vector<double>& v) {
    for (int c = 1; c < D; ++c) row.push_back(c < static_cast<int>(v.size()) ? v[c] : NAN);
  };
  per_level(r.cos);
  per_level(r.selectivity);
  per_level(r.theory_cos);
  per_level(r.ratio);
  per_level(r.theory_alpha_star);
  per_level(r.theory_ceiling);
  per_level(r.mobius_A);
  per_level(r.mobius_B);
  per_level(r.alpha_eff);
  per_level(r.recall);
  row.push_back(r.acc_set);
  row.push_back(r.acc_lexmin);
  per_level(r.diag_ratio);
  per_level(r.mu_over_gamma);
  row.push_back(double(r.resampled));
  return row;
}

MetricsRecord evaluate(const ModelParams& params, const Embedding& emb,
                       const std::vector<Sample>& batch, LossKind kind) {
  const int D = params.dims.depth;
  const double B = static_cast<double>(batch.size());
  MetricsRecord r;
  for (auto* v : {&r.cos, &r.selectivity, &r.theory_cos, &r.ratio, &r.theory_alpha_star,
                  &r.theory_ceiling, &r.mobius_A, &r.mobius_B, &r.alpha_eff, &r.recall,
                  &r.diag_ratio, &r.mu_over_gamma})
    v->assign(D, 0.0);

  for (const auto& s : batch) {
    const ForwardTrace tr = forward(params, emb, s);
    r.eval_loss += evaluate_loss(kind, tr, emb, s).value / B;
    r.cos[0] += cosine(tr.z[0], s.targets[0]) / B;
    for (int c = 1; c < D; ++c) {
      const int l = c - 1;
      const auto& lp = params.weights.layers[l];
      r.cos[c] += cosine(tr.z[c], s.targets[c]) / B;
      r.selectivity[c] += tr.layers[l].selectivity / B;
      const double k = s.profile.k(l), k1 = s.profile.k(l + 1), m = k1 - k;
      r.theory_alpha_star[c] += alpha_star(k, m) / B;
      r.theory_ceiling[c] += std::sqrt(m / k1) / B;

      // effective mixing of this layer on the ideal input of this instance
      const Eigen::VectorXd z_new = frontier_state(emb, s.profile, l);
      Eigen::VectorXd pre = lp.alpha / std::sqrt(m) * z_new;
      if (params.flags.residual) pre += s.targets[l];
      const Eigen::VectorXd h = mlp_apply(lp, pre);
      const double den = (params.flags.residual ? 1.0 : 0.0) + s.targets[l].dot(h);
      const double a_eff = (lp.alpha + std::sqrt(m) * z_new.dot(h)) / den;
      r.alpha_eff[c] += a_eff / B;
      r.theory_cos[c] += cos_single_step(k, k1, a_eff) / B;

      const Eigen::VectorXd score = emb.U.transpose() * tr.z[c];
      const int kc = s.profile.k(c);
      std::vector<int> order(emb.n);
      for (int v = 0; v < emb.n; ++v) order[v] = v;
      std::partial_sort(order.begin(), order.begin() + kc, order.end(),
                        [&](int a, int b) { return score[a] > score[b] || (score[a] == score[b] && a < b); });
      int hit = 0;
      for (int i = 0; i < kc; ++i)
        if (s.profile.hop[order[i]] >= 0 && s.profile.hop[order[i]] <= c) ++hit;
      r.recall[c] += double(hit) / kc / B;
    }
    const Eigen::VectorXd last = emb.U.transpose() * tr.z[D - 1];
    int best = 0;
    for (int v = 1; v < emb.n; ++v)
      if (last[v] > last[best]) best = v;
    const int h = s.profile.hop[best];
    if (h >= 0 && h <= D - 1) r.acc_set += 1.0 / B;
    int lexmin = -1;
    for (int v = 0; v < emb.n && lexmin < 0; ++v)
      if (s.profile.hop[v] == D - 1) lexmin = v;
    if (best == lexmin) r.acc_lexmin += 1.0 / B;
  }
  for (int c = 1; c < D; ++c) {
    r.ratio[c] = r.theory_cos[c] > 0 ? r.cos[c] / r.theory_cos[c] : NAN;
    const int l = c - 1;
    const MobiusCoords mc = extract_mobius(params, emb, batch.front().profile, l);
    r.mobius_A[c] = mc.A;
    r.mobius_B[c] = mc.B;
    if (params.mode == ParamMode::Matrix && emb.n >= 2) {
      const Eigen::MatrixXd pulled = emb.U.transpose() * params.weights.layers[l].wqk * emb.U;
      const DiagCertificates dc = diag_certificates(pulled);
      r.diag_ratio[c] = dc.entrywise_ratio;
      r.mu_over_gamma[c] = dc.mu_over_gamma;
    } else {
      r.diag_ratio[c] = r.mu_over_gamma[c] = NAN;
    }
  }
  return r;
}

MetricsTable TrainResult::table() const {
  MetricsTable t;
  t.columns = metrics_columns(config.D);
  for (const auto& r : log) t.rows.push_back(metrics_row(r, config.D));
  return t;
}

TrainResult train(const TrainConfig& cfg) {
  validate_config(cfg);
  TrainResult res;
  res.config = cfg;
  res.warnings = config_warnings(cfg);
  res.embedding = make_embedding(cfg.n, cfg.d, cfg.embedding_mode(), derive_seed({cfg.seed, 2}));
  const Embedding& emb = res.embedding;
  res.params = init_params({cfg.d, cfg.d_mlp, cfg.D}, cfg.param_mode, cfg.flags,
                           derive_seed({cfg.seed, 1}));
  ModelParams& params = res.params;
  validate(params, emb);
  Adam adam(AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});

  std::vector<Sample> pool;
  if (!cfg.online)
    for (int i = 0; i < cfg.offline_pool; ++i)
      pool.push_back(draw_sample(cfg, emb, kPoolStream, i, &res.resampled));

  auto eval_at = [&](int epoch, long step, double train_loss) {
    std::vector<Sample> batch;
    long skipped = 0;
    for (int i = 0; i < cfg.eval_batch; ++i)
      batch.push_back(draw_sample(cfg, emb, kEvalStream + epoch, i, &skipped));
    MetricsRecord r = evaluate(params, emb, batch, cfg.mode);
    r.epoch = epoch;
    r.step = step;
    r.train_loss = train_loss;
    r.resampled = res.resampled;
    res.log.push_back(std::move(r));
  };

  auto dump_and_abort = [&](long step, const std::string& why) {
    if (!cfg.out_dir.empty()) {
      nlohmann::json dump = checkpoint_to_json(params, emb);
      dump["step"] = step;
      dump["reason"] = why;
      dump["config"] = config_to_json(cfg);
      write_text(cfg.out_dir + "/failure_state.json", dump.dump(1));
    }
    throw TrainingError("training aborted at step " + std::to_string(step) + ": " + why);
  };

  eval_at(0, 0, NAN);
  long step = 0;
  std::vector<Sample> batch(cfg.batch);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (int it = 0; it < cfg.steps_per_epoch; ++it, ++step) {
      GradResult acc{0.0, params.weights.zeros_like()};
      for (int i = 0; i < cfg.batch; ++i) {
        for (std::uint64_t attempt = 0;; ++attempt) {
          const std::uint64_t idx = static_cast<std::uint64_t>(i) + attempt * cfg.batch;
          if (cfg.online)
            batch[i] = draw_sample(cfg, emb, kTrainStream + step, idx, &res.resampled);
          else
            batch[i] = pool[(static_cast<std::size_t>(step) * cfg.batch + idx) % pool.size()];
          try {
            GradResult g = loss_and_grad(params, emb, batch[i], cfg.mode);
            acc.loss += g.loss;
            acc.grad.add_scaled(g.grad, 1.0);
            break;
          } catch (const DegenerateStateError&) {
            ++res.resampled;
            if (attempt > 1000) dump_and_abort(step, "layer norm degenerate on every instance");
          }
        }
      }
      acc.loss /= cfg.batch;
      acc.grad.scale(1.0 / cfg.batch);
      if (!std::isfinite(acc.loss)) dump_and_abort(step, "non-finite loss");
      try {
        if (cfg.optimizer == Optimizer::Adam)
          adam_step(adam, params, acc.grad);
        else
          gd_step(params, acc.grad, cfg.lr);
      } catch (const TrainingError& e) {
        dump_and_abort(step, e.what());
      }
      epoch_loss += acc.loss;
    }
    if (epoch % cfg.eval_every == 0 || epoch == cfg.epochs)
      eval_at(epoch, step, epoch_loss / cfg.steps_per_epoch);
  }
  if (!cfg.out_dir.empty()) emit_metrics(res, cfg.out_dir);
  return res;
}

void emit_metrics(const TrainResult& r, const std::string& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json cfg = config_to_json(r.config);
  cfg["warnings"] = r.warnings;
  write_text(dir + "/config.json", cfg.dump(2) + "\n");
  write_text(dir + "/metrics.csv", to_csv(r.table()));
  write_text(dir + "/checkpoint.json", checkpoint_to_json(r.params, r.embedding).dump() + "\n");
}

ComparisonTable run_supervision_comparison(const TrainConfig& base) {
  ComparisonTable t;
  t.modes = {LossKind::Superposition, LossKind::Node, LossKind::EndToEnd};
  for (LossKind k : t.modes) {
    TrainConfig c = base;
    c.mode = k;
    if (!base.out_dir.empty()) c.out_dir = base.out_dir + "/" + to_string(k);
    try {
      const TrainResult r = train(c);
      t.cos.push_back(r.final().cos);
      t.theory_cos.push_back(r.final().theory_cos);
      t.failed.push_back(false);
    } catch (const Error&) {
      t.cos.push_back(std::vector<double>(base.D, NAN));
      t.theory_cos.push_back(std::vector<double>(base.D, NAN));
      t.failed.push_back(true);
    }
  }
  t.ordering_ok = !t.failed[0] && !t.failed[1] && !t.failed[2];
  for (int c = 2; c < base.D && t.ordering_ok; ++c)
    if (!(t.cos[0][c] >= t.cos[1][c] - 0.02 && t.cos[1][c] >= t.cos[2][c] - 0.02)) t.ordering_ok = false;
  return t;
}

std::vector<AblationCell> run_ablation_grid(const TrainConfig& base) {
  std::vector<AblationCell> cells;
  for (bool ln : {true, false})
    for (bool res : {true, false}) {
      TrainConfig c = base;
      c.mode = LossKind::Superposition;
      c.flags = {ln, res};
      if (!base.out_dir.empty())
        c.out_dir = base.out_dir + "/" + (ln ? "ln" : "noln") + "_" + (res ? "res" : "nores");
      AblationCell cell;
      cell.layer_norm = ln;
      cell.residual = res;
      try {
        const TrainResult r = train(c);
        cell.cos1 = r.final().cos[1];
        cell.sel1 = r.final().selectivity[1];
        cell.acc = r.final().acc_set;
        cell.ceiling = r.final().theory_ceiling[1];
      } catch (const Error&) {
        cell.failed = true;
      }
      cells.push_back(cell);
    }
  return cells;
}

DiagReport run_diagonalization(const TrainConfig& config) {
  if (config.param_mode != ParamMode::Matrix) throw ConfigError("run_diagonalization needs matrix mode");
  DiagReport rep;
  rep.run = train(config);
  for (const auto& r : rep.run.log) {
    rep.epochs.push_back(r.epoch);
    rep.entrywise_ratio.push_back(r.diag_ratio[1]);
    rep.mu_over_gamma.push_back(r.mu_over_gamma[1]);
  }
  return rep;
}

}  // namespace cascade
