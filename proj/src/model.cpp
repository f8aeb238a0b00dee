#include "cascade/model.hpp"

#include <cmath>
#include <string>

#include "cascade/error.hpp"
#include "cascade/rng.hpp"

namespace cascade {

namespace {

constexpr double kLnFloor = 1e-30;

std::span<double> span_of(Eigen::MatrixXd& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<double> span_of(Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

}  // namespace

std::string to_string(ParamMode m) { return m == ParamMode::Reduced ? "reduced" : "matrix"; }

ParamMode param_mode_from_string(const std::string& s) {
  if (s == "reduced") return ParamMode::Reduced;
  if (s == "matrix") return ParamMode::Matrix;
  throw ConfigError("unknown parameter mode: " + s);
}

std::vector<ParamBlock> ParamSet::blocks() {
  std::vector<ParamBlock> out;
  for (std::size_t c = 0; c < layers.size(); ++c) {
    auto& lp = layers[c];
    const std::string sfx = "[" + std::to_string(c) + "]";
    if (mode == ParamMode::Reduced)
      out.push_back({"gamma" + sfx, {&lp.gamma, 1}});
    else
      out.push_back({"wqk" + sfx, span_of(lp.wqk)});
    out.push_back({"alpha" + sfx, {&lp.alpha, 1}});
    out.push_back({"w1" + sfx, span_of(lp.w1)});
    out.push_back({"b1" + sfx, span_of(lp.b1)});
    out.push_back({"w2" + sfx, span_of(lp.w2)});
    out.push_back({"b2" + sfx, span_of(lp.b2)});
  }
  return out;
}

std::size_t ParamSet::size() const {
  std::size_t n = 0;
  for (const auto& lp : layers)
    n += (mode == ParamMode::Reduced ? 1 : lp.wqk.size()) + 1 + lp.w1.size() + lp.b1.size() +
         lp.w2.size() + lp.b2.size();
  return n;
}

std::vector<double> ParamSet::flatten() const {
  std::vector<double> flat;
  flat.reserve(size());
  for (auto& b : const_cast<ParamSet*>(this)->blocks())
    flat.insert(flat.end(), b.values.begin(), b.values.end());
  return flat;
}

void ParamSet::assign(std::span<const double> flat) {
  if (flat.size() != size()) throw InputError("ParamSet::assign: size mismatch");
  std::size_t off = 0;
  for (auto& b : blocks())
    for (auto& x : b.values) x = flat[off++];
}

ParamSet ParamSet::zeros_like() const {
  ParamSet z = *this;
  for (auto& b : z.blocks())
    for (auto& x : b.values) x = 0.0;
  return z;
}

void ParamSet::add_scaled(const ParamSet& other, double s) {
  auto mine = blocks();
  auto theirs = const_cast<ParamSet&>(other).blocks();
  if (mine.size() != theirs.size()) throw InputError("ParamSet::add_scaled: shape mismatch");
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (mine[i].values.size() != theirs[i].values.size())
      throw InputError("ParamSet::add_scaled: shape mismatch");
    for (std::size_t j = 0; j < mine[i].values.size(); ++j)
      mine[i].values[j] += s * theirs[i].values[j];
  }
}

void ParamSet::scale(double s) {
  for (auto& b : blocks())
    for (auto& x : b.values) x *= s;
}

bool ParamSet::all_finite() const {
  for (auto& b : const_cast<ParamSet*>(this)->blocks())
    for (double x : b.values)
      if (!std::isfinite(x)) return false;
  return true;
}

ModelParams init_params(const ModelDims& dims, ParamMode mode, const ArchFlags& flags,
                        std::uint64_t seed) {
  if (dims.d < 1 || dims.d_mlp < 1 || dims.depth < 2)
    throw ConfigError("init_params: need d >= 1, d_mlp >= 1, depth >= 2");
  Rng rng(seed);
  ModelParams p;
  p.dims = dims;
  p.mode = mode;
  p.flags = flags;
  p.weights.mode = mode;
  const int d = dims.d, h = dims.d_mlp;
  for (int c = 0; c < dims.num_layers(); ++c) {
    LayerParams lp;
    lp.gamma = mode == ParamMode::Reduced ? uniform(rng, 0.01, 0.1) : 0.0;
    lp.alpha = uniform(rng, 0.01, 0.1);
    if (mode == ParamMode::Matrix) {
      lp.wqk.resize(d, d);
      for (int i = 0; i < d * d; ++i) lp.wqk.data()[i] = normal(rng);
      // scale so the operator norm is 5e-3
      const double op = Eigen::JacobiSVD<Eigen::MatrixXd>(lp.wqk).singularValues()(0);
      lp.wqk *= 5e-3 / op;
    }
    lp.w1.resize(h, d);
    for (int i = 0; i < h * d; ++i) lp.w1.data()[i] = normal(rng) / std::sqrt(double(d));
    lp.b1 = Eigen::VectorXd::Constant(h, -0.01);
    lp.w2.resize(d, h);
    for (int i = 0; i < h * d; ++i) lp.w2.data()[i] = normal(rng) / std::sqrt(double(h));
    lp.b2 = Eigen::VectorXd::Zero(d);
    p.weights.layers.push_back(std::move(lp));
  }
  return p;
}

void validate(const ModelParams& p, const Embedding& emb) {
  if (p.dims.d != emb.d) throw ConfigError("model width does not match embedding dimension");
  if (static_cast<int>(p.weights.layers.size()) != p.dims.num_layers())
    throw ConfigError("layer count does not match depth");
  for (const auto& lp : p.weights.layers) {
    if (lp.w1.rows() != p.dims.d_mlp || lp.w1.cols() != p.dims.d || lp.b1.size() != p.dims.d_mlp ||
        lp.w2.rows() != p.dims.d || lp.w2.cols() != p.dims.d_mlp || lp.b2.size() != p.dims.d)
      throw ConfigError("MLP block has wrong shape");
    if (p.mode == ParamMode::Matrix && (lp.wqk.rows() != p.dims.d || lp.wqk.cols() != p.dims.d))
      throw ConfigError("W_QK has wrong shape");
  }
  if (!p.weights.all_finite()) throw InputError("parameters contain non-finite values");
}

Sample make_sample(Graph g, const Embedding& emb, int depth) {
  if (g.n != emb.n) throw ConfigError("make_sample: graph size does not match embedding");
  Sample s;
  s.profile = bfs_profile(g, depth - 1);
  for (int c = 0; c + 1 <= depth - 1; ++c)
    if (s.profile.m_new(c) == 0) throw DegenerateFrontierError("make_sample: empty frontier");
  for (int c = 0; c < depth; ++c) s.targets.push_back(ideal_state(emb, s.profile, c));
  s.graph = std::move(g);
  return s;
}

Eigen::VectorXd ideal_on_manifold_step(const Embedding& emb, const ReachabilityProfile& prof, int c,
                                       double alpha_eff) {
  const double m = prof.m_new(c);
  if (m < 1) throw DegenerateFrontierError("ideal_on_manifold_step: empty frontier at step " + std::to_string(c));
  return (ideal_state(emb, prof, c) + alpha_eff / std::sqrt(m) * frontier_state(emb, prof, c)) /
         std::sqrt(1.0 + alpha_eff * alpha_eff / m);
}

Eigen::VectorXd mlp_apply(const LayerParams& lp, const Eigen::VectorXd& x) {
  return lp.w2 * (lp.w1 * x + lp.b1).cwiseMax(0.0) + lp.b2;
}

Eigen::VectorXd layer_step(const ModelParams& params, int c, const Embedding& emb,
                           const Graph& g, const ReachabilityProfile& prof,
                           const Eigen::VectorXd& z, LayerTrace* trace) {
  const auto& lp = params.weights.layers.at(c);
  LayerTrace local;
  LayerTrace& t = trace ? *trace : local;
  const double inv_sqrt_d = 1.0 / std::sqrt(double(params.dims.d));

  if (params.mode == ParamMode::Reduced)
    t.query = z;
  else
    t.query = lp.wqk.transpose() * z;
  t.node_score = emb.U.transpose() * t.query;
  const double scale = params.mode == ParamMode::Reduced ? lp.gamma * inv_sqrt_d : inv_sqrt_d;

  const int m = g.num_edges();
  t.attn.resize(m);
  t.selectivity = 0.0;
  Eigen::VectorXd node_w = Eigen::VectorXd::Zero(emb.n);
  if (m > 0) {
    double mx = -INFINITY;
    for (int i = 0; i < m; ++i) {
      t.attn[i] = scale * t.node_score[g.edges[i].src];
      mx = std::max(mx, t.attn[i]);
    }
    double sum = 0;
    for (int i = 0; i < m; ++i) sum += (t.attn[i] = std::exp(t.attn[i] - mx));
    t.attn /= sum;
    for (int i = 0; i < m; ++i) node_w[g.edges[i].dst] += t.attn[i];
    if (c < static_cast<int>(prof.frontier.size()))
      for (int i : prof.frontier[c]) t.selectivity += t.attn[i];
  }
  t.attn_out = emb.U * node_w;

  t.pre = lp.alpha * t.attn_out;
  if (params.flags.residual) t.pre += z;
  t.hidden_pre = lp.w1 * t.pre + lp.b1;
  t.mlp_out = lp.w2 * t.hidden_pre.cwiseMax(0.0) + lp.b2;
  Eigen::VectorXd x = t.pre + t.mlp_out;
  if (!params.flags.layer_norm) {
    t.x_norm = 1.0;
    return x;
  }
  t.x_norm = x.norm();
  if (!(t.x_norm >= kLnFloor))
    throw DegenerateStateError("layer norm of a zero (or non-finite) vector at layer " +
                               std::to_string(c));
  return x / t.x_norm;
}

ForwardTrace forward(const ModelParams& params, const Embedding& emb, const Sample& s) {
  const int layers = params.dims.num_layers();
  ForwardTrace tr;
  tr.z.reserve(layers + 1);
  tr.layers.resize(layers);
  tr.z.push_back(emb.U.col(s.graph.root));
  for (int c = 0; c < layers; ++c)
    tr.z.push_back(layer_step(params, c, emb, s.graph, s.profile, tr.z[c], &tr.layers[c]));
  return tr;
}

namespace {

nlohmann::json matrix_rows(const Eigen::MatrixXd& m) {
  std::vector<double> flat;
  flat.reserve(m.size());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
  return flat;
}

Eigen::MatrixXd matrix_from_rows(const nlohmann::json& j, int rows, int cols) {
  const auto flat = j.get<std::vector<double>>();
  if (static_cast<int>(flat.size()) != rows * cols) throw InputError("checkpoint: block size mismatch");
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int k = 0; k < cols; ++k) m(i, k) = flat[i * cols + k];
  return m;
}

}  // namespace

nlohmann::json checkpoint_to_json(const ModelParams& p, const Embedding& emb) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& lp : p.weights.layers) {
    nlohmann::json l;
    l["alpha"] = lp.alpha;
    if (p.mode == ParamMode::Reduced)
      l["gamma"] = lp.gamma;
    else
      l["wqk"] = matrix_rows(lp.wqk);
    l["w1"] = matrix_rows(lp.w1);
    l["b1"] = std::vector<double>(lp.b1.data(), lp.b1.data() + lp.b1.size());
    l["w2"] = matrix_rows(lp.w2);
    l["b2"] = std::vector<double>(lp.b2.data(), lp.b2.data() + lp.b2.size());
    layers.push_back(std::move(l));
  }
  return {{"dims", {{"d", p.dims.d}, {"d_mlp", p.dims.d_mlp}, {"depth", p.dims.depth}}},
          {"mode", to_string(p.mode)},
          {"flags", {{"layer_norm", p.flags.layer_norm}, {"residual", p.flags.residual}}},
          {"embedding", embedding_recipe(emb)},
          {"layers", layers}};
}

ModelParams checkpoint_from_json(const nlohmann::json& j, Embedding* emb) {
  ModelParams p;
  try {
    p.dims.d = j.at("dims").at("d").get<int>();
    p.dims.d_mlp = j.at("dims").at("d_mlp").get<int>();
    p.dims.depth = j.at("dims").at("depth").get<int>();
    p.mode = param_mode_from_string(j.at("mode").get<std::string>());
    p.flags.layer_norm = j.at("flags").at("layer_norm").get<bool>();
    p.flags.residual = j.at("flags").at("residual").get<bool>();
    p.weights.mode = p.mode;
    const int d = p.dims.d, h = p.dims.d_mlp;
    for (const auto& l : j.at("layers")) {
      LayerParams lp;
      lp.alpha = l.at("alpha").get<double>();
      if (p.mode == ParamMode::Reduced)
        lp.gamma = l.at("gamma").get<double>();
      else
        lp.wqk = matrix_from_rows(l.at("wqk"), d, d);
      lp.w1 = matrix_from_rows(l.at("w1"), h, d);
      lp.b1 = matrix_from_rows(l.at("b1"), h, 1);
      lp.w2 = matrix_from_rows(l.at("w2"), d, h);
      lp.b2 = matrix_from_rows(l.at("b2"), d, 1);
      p.weights.layers.push_back(std::move(lp));
    }
    if (emb) *emb = embedding_from_recipe(j.at("embedding"));
  } catch (const nlohmann::json::exception& ex) {
    throw InputError(std::string("checkpoint: ") + ex.what());
  }
  if (static_cast<int>(p.weights.layers.size()) != p.dims.num_layers())
    throw InputError("checkpoint: layer count does not match depth");
  return p;
}

}  // namespace cascade
