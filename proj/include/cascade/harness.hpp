#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cascade/embedding.hpp"
#include "cascade/losses.hpp"
#include "cascade/metrics_io.hpp"
#include "cascade/model.hpp"

namespace cascade {

enum class Optimizer { Adam, GD };

struct TrainConfig {
  int n = 50;
  double p = 2.0 / 50;
  int D = 3;
  int d = 64;
  int d_mlp = 256;
  double lr = 1e-3;
  int batch = 64;
  int epochs = 100;
  int steps_per_epoch = 1000;
  std::uint64_t seed = 0;
  LossKind mode = LossKind::Superposition;
  ParamMode param_mode = ParamMode::Reduced;
  ArchFlags flags;
  int eval_every = 10;
  int eval_batch = 1024;
  double epsilon = 0.1;
  bool online = true;
  int offline_pool = 4096;  // instances in the fixed training set when !online
  Optimizer optimizer = Optimizer::Adam;
  std::optional<EmbeddingMode> embedding;  // default: orthogonal if d >= n
  std::string out_dir;                     // empty: nothing written

  EmbeddingMode embedding_mode() const;
};

nlohmann::json config_to_json(const TrainConfig& c);
TrainConfig config_from_json(const nlohmann::json& j);

// Non-fatal checks of the sparse, tree-like regime and width budget.
std::vector<std::string> config_warnings(const TrainConfig& c);

// Evaluation summary; per-level vectors are indexed by c = 1 .. D-1 so that
// layer c - 1 is the one producing z_c. Entry 0 is unused except cos[0].
struct MetricsRecord {
  int epoch = 0;
  long step = 0;
  double train_loss = NAN;
  double eval_loss = 0.0;
  std::vector<double> cos;
  std::vector<double> selectivity;
  std::vector<double> theory_cos;   // cos_single_step at the extracted alpha_eff
  std::vector<double> ratio;        // cos / theory_cos
  std::vector<double> theory_alpha_star;
  std::vector<double> theory_ceiling;  // residual ceiling sqrt(m_f / k_{c+1})
  std::vector<double> mobius_A, mobius_B, alpha_eff;
  std::vector<double> recall;       // top-k_c recall of V_c
  double acc_set = 0.0;             // argmax of U^T z_{D-1} inside V_{D-1}
  double acc_lexmin = 0.0;          // argmax equals the smallest newest node
  std::vector<double> diag_ratio;   // matrix mode, per layer
  std::vector<double> mu_over_gamma;
  long resampled = 0;               // degenerate instances skipped so far
};

std::vector<std::string> metrics_columns(int D);
std::vector<std::string> required_theory_columns(int D);
std::vector<double> metrics_row(const MetricsRecord& r, int D);

// Draws the i-th instance of a stream deterministically, resampling
// degenerate graphs; `resampled` counts the skips.
Sample draw_sample(const TrainConfig& c, const Embedding& emb, std::uint64_t stream,
                   std::uint64_t index, long* resampled = nullptr);

MetricsRecord evaluate(const ModelParams& params, const Embedding& emb,
                       const std::vector<Sample>& batch, LossKind kind);

struct TrainResult {
  TrainConfig config;
  ModelParams params;
  Embedding embedding;
  std::vector<MetricsRecord> log;
  long resampled = 0;
  std::vector<std::string> warnings;

  const MetricsRecord& final() const { return log.back(); }
  MetricsTable table() const;
};

TrainResult train(const TrainConfig& config);

void emit_metrics(const TrainResult& r, const std::string& dir);

struct ComparisonTable {
  std::vector<LossKind> modes;
  std::vector<std::vector<double>> cos;         // [mode][c]
  std::vector<std::vector<double>> theory_cos;  // [mode][c]
  std::vector<bool> failed;
  bool ordering_ok = false;  // sup >= node >= e2e - 0.02 at every c >= 2
};
ComparisonTable run_supervision_comparison(const TrainConfig& base);

struct AblationCell {
  bool layer_norm = true, residual = true;
  double cos1 = 0.0, sel1 = 0.0, acc = 0.0, ceiling = 0.0;
  bool failed = false;
};
std::vector<AblationCell> run_ablation_grid(const TrainConfig& base);

struct DiagReport {
  std::vector<int> epochs;
  std::vector<double> entrywise_ratio;
  std::vector<double> mu_over_gamma;
  TrainResult run;
};
DiagReport run_diagonalization(const TrainConfig& config);

}  // namespace cascade
