#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "cascade/embedding.hpp"
#include "cascade/graph.hpp"

namespace cascade {

enum class ParamMode { Reduced, Matrix };

std::string to_string(ParamMode m);
ParamMode param_mode_from_string(const std::string& s);

struct ModelDims {
  int d = 0;
  int d_mlp = 256;
  int depth = 3;  // D; the model has D - 1 layers producing z_1 .. z_{D-1}
  int num_layers() const { return depth - 1; }
};

struct ArchFlags {
  bool layer_norm = true;
  bool residual = true;
};

struct LayerParams {
  double gamma = 0.0;     // reduced mode only
  double alpha = 0.0;
  Eigen::MatrixXd wqk;    // matrix mode only, d x d
  Eigen::MatrixXd w1;     // d_mlp x d
  Eigen::VectorXd b1;     // d_mlp
  Eigen::MatrixXd w2;     // d x d_mlp
  Eigen::VectorXd b2;     // d
};

// A named view on one contiguous parameter block.
struct ParamBlock {
  std::string name;
  std::span<double> values;
};

struct ParamSet {
  ParamMode mode = ParamMode::Reduced;
  std::vector<LayerParams> layers;

  // Blocks in a fixed order: per layer gamma|wqk, alpha, w1, b1, w2, b2.
  // Matrices are exposed in Eigen's storage order (column major); the
  // checkpoint writer converts to row major.
  std::vector<ParamBlock> blocks();
  std::size_t size() const;
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
  ParamSet zeros_like() const;
  void add_scaled(const ParamSet& other, double scale);
  void scale(double s);
  bool all_finite() const;
};

struct ModelParams {
  ModelDims dims;
  ParamMode mode = ParamMode::Reduced;
  ArchFlags flags;
  ParamSet weights;
};

ModelParams init_params(const ModelDims& dims, ParamMode mode, const ArchFlags& flags,
                        std::uint64_t seed);

void validate(const ModelParams& params, const Embedding& emb);

// A graph instance with everything the losses need precomputed.
struct Sample {
  Graph graph;
  ReachabilityProfile profile;
  std::vector<Eigen::VectorXd> targets;  // z_c^* for c = 0 .. depth - 1
};

// Throws DegenerateFrontierError if some layer c <= depth - 2 has an empty
// frontier.
Sample make_sample(Graph g, const Embedding& emb, int depth);

struct LayerTrace {
  Eigen::VectorXd query;       // z (reduced) or W^T z (matrix)
  Eigen::VectorXd node_score;  // U^T query, one per node
  Eigen::VectorXd attn;        // softmax over all edges
  Eigen::VectorXd attn_out;    // sum_i a_i u_{t_i}
  Eigen::VectorXd pre;         // residual stream before the MLP
  Eigen::VectorXd hidden_pre;  // W1 pre + b1
  Eigen::VectorXd mlp_out;
  double x_norm = 1.0;         // norm before layer norm
  double selectivity = 0.0;    // attention mass on the frontier edges
};

struct ForwardTrace {
  std::vector<Eigen::VectorXd> z;   // z_0 .. z_{D-1}
  std::vector<LayerTrace> layers;   // layer c maps z_c to z_{c+1}
};

ForwardTrace forward(const ModelParams& params, const Embedding& emb, const Sample& s);

// One layer applied to an arbitrary residual state.
Eigen::VectorXd layer_step(const ModelParams& params, int c, const Embedding& emb,
                           const Graph& g, const ReachabilityProfile& prof,
                           const Eigen::VectorXd& z, LayerTrace* trace = nullptr);

Eigen::VectorXd mlp_apply(const LayerParams& lp, const Eigen::VectorXd& x);

// Network-free ideal update (z_c* + alpha m_f^{-1/2} z_new*) / sqrt(1 + alpha^2 / m_f).
Eigen::VectorXd ideal_on_manifold_step(const Embedding& emb, const ReachabilityProfile& prof, int c,
                                       double alpha_eff);

nlohmann::json checkpoint_to_json(const ModelParams& params, const Embedding& emb);
ModelParams checkpoint_from_json(const nlohmann::json& j, Embedding* emb = nullptr);

}  // namespace cascade
