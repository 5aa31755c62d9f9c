#include "supercut/gnn.hpp"

#include "supercut/binary_io.hpp"
#include "supercut/error.hpp"
#include "supercut/rng.hpp"

#include <algorithm>
#include <cmath>

namespace supercut {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

DenseLayer make_layer(std::int32_t in, std::int32_t out) {
  return {MatrixXd::Zero(out, in), VectorXd::Zero(out)};
}

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

/// Row i = mean of rows N[i] of h.
MatrixXd aggregate(const GnnInput& in, const MatrixXd& h) {
  MatrixXd out = MatrixXd::Zero(h.rows(), h.cols());
  for (std::size_t i = 0; i < in.closed.size(); ++i) {
    const auto& nb = in.closed[i];
    for (auto j : nb) out.row(static_cast<Eigen::Index>(i)) += h.row(j);
    out.row(static_cast<Eigen::Index>(i)) /= static_cast<double>(nb.size());
  }
  return out;
}

/// Transpose of `aggregate`: row j = sum over i with j in N[i] of g_i / |N[i]|.
MatrixXd aggregate_transpose(const GnnInput& in, const MatrixXd& g) {
  MatrixXd out = MatrixXd::Zero(g.rows(), g.cols());
  for (std::size_t i = 0; i < in.closed.size(); ++i) {
    const auto& nb = in.closed[i];
    const double scale = 1.0 / static_cast<double>(nb.size());
    for (auto j : nb) out.row(j) += scale * g.row(static_cast<Eigen::Index>(i));
  }
  return out;
}

MatrixXd affine(const MatrixXd& x, const DenseLayer& layer) {
  MatrixXd z = x * layer.w.transpose();
  z.rowwise() += layer.b.transpose();
  return z;
}

MatrixXd relu(const MatrixXd& z) { return z.cwiseMax(0.0); }

MatrixXd relu_mask(const MatrixXd& z) { return (z.array() > 0.0).cast<double>().matrix(); }

struct GcnCache {
  std::vector<MatrixXd> agg;  // input to each layer after aggregation
  std::vector<MatrixXd> z;    // pre-activation
  MatrixXd out;
};

GcnCache gcn_forward_cached(const GnnInput& input, const GnnParameters& params) {
  GcnCache c;
  MatrixXd h = input.features;
  for (std::size_t l = 0; l < params.gcn.size(); ++l) {
    c.agg.push_back(aggregate(input, h));
    c.z.push_back(affine(c.agg.back(), params.gcn[l]));
    h = l + 1 == params.gcn.size() ? c.z.back() : relu(c.z.back());
  }
  c.out = std::move(h);
  return c;
}

struct MlpCache {
  MatrixXd x, a1, r1, a2, r2;
  VectorXd p;  // sigmoid output per edge
};

MatrixXd edge_inputs(const GnnInput& input, const MatrixXd& h, bool swapped, bool use_weights) {
  const auto hd = h.cols();
  MatrixXd x(static_cast<Eigen::Index>(input.edges.size()), 2 * hd + 1);
  for (std::size_t e = 0; e < input.edges.size(); ++e) {
    const auto& edge = input.edges[e];
    const auto a = swapped ? edge.v : edge.u, b = swapped ? edge.u : edge.v;
    const auto r = static_cast<Eigen::Index>(e);
    x.row(r).head(hd) = h.row(a);
    x.row(r).segment(hd, hd) = h.row(b);
    x(r, 2 * hd) = use_weights ? edge.w : 0.0;
  }
  return x;
}

MlpCache mlp_forward(const GnnParameters& params, MatrixXd x) {
  MlpCache c;
  c.x = std::move(x);
  c.a1 = affine(c.x, params.mlp[0]);
  c.r1 = relu(c.a1);
  c.a2 = affine(c.r1, params.mlp[1]);
  c.r2 = relu(c.a2);
  const MatrixXd a3 = affine(c.r2, params.mlp[2]);
  c.p.resize(a3.rows());
  for (Eigen::Index i = 0; i < a3.rows(); ++i) c.p(i) = sigmoid(a3(i, 0));
  return c;
}

struct Forward {
  GcnCache gcn;
  MlpCache mlp[2];
  VectorXd s;
};

Forward forward(const GnnInput& input, const GnnParameters& params, bool use_weights) {
  Forward f;
  f.gcn = gcn_forward_cached(input, params);
  for (int o = 0; o < 2; ++o) f.mlp[o] = mlp_forward(params, edge_inputs(input, f.gcn.out, o == 1, use_weights));
  f.s = 0.5 * (f.mlp[0].p + f.mlp[1].p);
  return f;
}

struct EdgeTerms {
  double bce = 0.0, reg = 0.0;
  std::size_t labeled = 0, unlabeled = 0;
  VectorXd ds;  // dL/ds per edge
};

EdgeTerms edge_terms(const GnnInput& input, const VectorXd& s, const LossOptions& options, std::uint64_t* pattern) {
  EdgeTerms t;
  for (const auto& e : input.edges) {
    if (e.label >= 0) {
      ++t.labeled;
    } else if (options.use_edge_weights) {
      ++t.unlabeled;
    }
  }
  if (t.labeled == 0 && t.unlabeled == 0) {
    throw Error(ErrorCode::kInvalidArgument, "loss needs at least one labelled or weighted unlabelled edge");
  }
  t.ds = VectorXd::Zero(s.size());
  for (std::size_t k = 0; k < input.edges.size(); ++k) {
    const auto& e = input.edges[k];
    const auto i = static_cast<Eigen::Index>(k);
    if (e.label >= 0) {
      const double y = e.label;
      const double sc = std::clamp(s(i), kProbabilityClamp, 1.0 - kProbabilityClamp);
      const bool inside = s(i) > kProbabilityClamp && s(i) < 1.0 - kProbabilityClamp;
      t.bce -= (y * std::log(sc) + (1.0 - y) * std::log(1.0 - sc)) / static_cast<double>(t.labeled);
      if (inside) t.ds(i) = -(y / sc - (1.0 - y) / (1.0 - sc)) / static_cast<double>(t.labeled);
      if (pattern != nullptr) *pattern = splitmix64(*pattern ^ (inside ? 3u : 5u));
    } else if (options.use_edge_weights) {
      const double coef = std::abs(e.w - 0.5);
      const double diff = s(i) - e.w;
      t.reg += coef * std::abs(diff) / static_cast<double>(t.unlabeled);
      const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      t.ds(i) = coef * sign / static_cast<double>(t.unlabeled);
      if (pattern != nullptr) *pattern = splitmix64(*pattern ^ static_cast<std::uint64_t>(sign + 7.0));
    }
  }
  return t;
}

void hash_mask(std::uint64_t& h, const MatrixXd& z) {
  std::uint64_t word = 0;
  int bits = 0;
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      word = (word << 1) | (z(i, j) > 0.0 ? 1u : 0u);
      if (++bits == 64) {
        h = splitmix64(h ^ word);
        word = 0;
        bits = 0;
      }
    }
  }
  h = splitmix64(h ^ word ^ static_cast<std::uint64_t>(bits));
}

template <typename Span, typename Params>
std::vector<Span> tensor_views(Params& p) {
  std::vector<Span> out;
  for (auto* group : {&p.gcn, &p.mlp}) {
    for (auto& layer : *group) {
      out.emplace_back(layer.w.data(), static_cast<std::size_t>(layer.w.size()));
      out.emplace_back(layer.b.data(), static_cast<std::size_t>(layer.b.size()));
    }
  }
  return out;
}

}  // namespace

GnnShape GnnParameters::shape() const {
  GnnShape s;
  s.gcn_layers = static_cast<std::int32_t>(gcn.size());
  if (!gcn.empty()) {
    s.input_dim = static_cast<std::int32_t>(gcn.front().w.cols());
    s.hidden_dim = static_cast<std::int32_t>(gcn.back().w.rows());
  }
  if (!mlp.empty()) s.mlp_hidden = static_cast<std::int32_t>(mlp.front().w.rows());
  return s;
}

std::size_t GnnParameters::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors()) n += t.size();
  return n;
}

std::vector<std::span<double>> GnnParameters::tensors() { return tensor_views<std::span<double>>(*this); }

std::vector<std::span<const double>> GnnParameters::tensors() const {
  return tensor_views<std::span<const double>>(*this);
}

void validate_parameters(const GnnParameters& params) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kInvalidArgument, "GNN parameters: " + msg); };
  if (params.gcn.empty()) fail("no graph-convolution layers");
  if (params.mlp.size() != 3) fail("edge MLP must have three layers");
  for (std::size_t l = 0; l < params.gcn.size(); ++l) {
    if (params.gcn[l].b.size() != params.gcn[l].w.rows()) fail("bias size mismatch");
    if (l > 0 && params.gcn[l].w.cols() != params.gcn[l - 1].w.rows()) fail("graph-convolution widths do not chain");
  }
  const auto hd = params.gcn.back().w.rows();
  if (params.mlp[0].w.cols() != 2 * hd + 1) fail("edge MLP input must be 2 * hidden + 1");
  for (std::size_t l = 0; l < 3; ++l) {
    if (params.mlp[l].b.size() != params.mlp[l].w.rows()) fail("bias size mismatch");
    if (l > 0 && params.mlp[l].w.cols() != params.mlp[l - 1].w.rows()) fail("edge MLP widths do not chain");
  }
  if (params.mlp[2].w.rows() != 1) fail("edge MLP output must be scalar");
  for (const auto& t : params.tensors()) {
    for (auto x : t) {
      if (!std::isfinite(x)) fail("non-finite value");
    }
  }
}

GnnParameters zero_parameters(const GnnShape& shape) {
  if (shape.input_dim < 1 || shape.hidden_dim < 1 || shape.gcn_layers < 1 || shape.mlp_hidden < 1) {
    throw Error(ErrorCode::kInvalidArgument, "GNN shape entries must be >= 1");
  }
  GnnParameters p;
  for (std::int32_t l = 0; l < shape.gcn_layers; ++l) {
    p.gcn.push_back(make_layer(l == 0 ? shape.input_dim : shape.hidden_dim, shape.hidden_dim));
  }
  p.mlp.push_back(make_layer(2 * shape.hidden_dim + 1, shape.mlp_hidden));
  p.mlp.push_back(make_layer(shape.mlp_hidden, shape.mlp_hidden));
  p.mlp.push_back(make_layer(shape.mlp_hidden, 1));
  return p;
}

GnnParameters init_parameters(const GnnShape& shape, std::uint64_t seed) {
  auto p = zero_parameters(shape);
  std::int64_t index = 0;
  for (auto* group : {&p.gcn, &p.mlp}) {
    for (auto& layer : *group) {
      Rng rng(derive_seed(seed, {index++}));
      const double limit = std::sqrt(6.0 / static_cast<double>(layer.w.rows() + layer.w.cols()));
      for (Eigen::Index r = 0; r < layer.w.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.w.cols(); ++c) layer.w(r, c) = uniform(rng, -limit, limit);
      }
    }
  }
  return p;
}

GnnInput make_gnn_input(std::span<const SuperpointGraph> graphs, bool require_weights) {
  GnnInput in;
  std::size_t total = 0;
  std::int64_t dim = -1;
  for (const auto& g : graphs) {
    total += g.nodes.size();
    for (const auto& n : g.nodes) {
      if (n.feature.empty()) {
        throw Error(ErrorCode::kInvalidArgument, "node sp_id " + std::to_string(n.sp_id) + " has no feature");
      }
      if (dim < 0) dim = static_cast<std::int64_t>(n.feature.size());
      if (static_cast<std::int64_t>(n.feature.size()) != dim) {
        throw Error(ErrorCode::kInvalidArgument, "node sp_id " + std::to_string(n.sp_id) + " has a feature of another size");
      }
    }
  }
  in.features = MatrixXd::Zero(static_cast<Eigen::Index>(total), std::max<std::int64_t>(dim, 0));
  in.closed.resize(total);
  std::uint32_t offset = 0;
  for (const auto& g : graphs) {
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(offset + i);
      for (std::size_t k = 0; k < g.nodes[i].feature.size(); ++k) in.features(row, static_cast<Eigen::Index>(k)) = g.nodes[i].feature[k];
      in.closed[offset + i].push_back(offset + static_cast<std::uint32_t>(i));
    }
    for (const auto& e : g.edges) {
      if (e.u >= g.nodes.size() || e.v >= g.nodes.size()) throw Error(ErrorCode::kInvalidArgument, "edge node out of range");
      if (!e.w_sam && require_weights) {
        throw Error(ErrorCode::kInvalidArgument, "edge (" + std::to_string(g.nodes[e.u].sp_id) + ", " +
                                                     std::to_string(g.nodes[e.v].sp_id) + ") has no w_sam");
      }
      GnnInput::Edge edge;
      edge.u = offset + e.u;
      edge.v = offset + e.v;
      edge.w = e.w_sam.value_or(0.0f);
      if (e.label) edge.label = static_cast<std::int8_t>(*e.label);
      in.edges.push_back(edge);
      in.closed[edge.u].push_back(edge.v);
      in.closed[edge.v].push_back(edge.u);
    }
    offset += static_cast<std::uint32_t>(g.nodes.size());
  }
  for (auto& nb : in.closed) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  return in;
}

GnnInput make_gnn_input(const SuperpointGraph& graph, bool require_weights) {
  return make_gnn_input(std::span<const SuperpointGraph>(&graph, 1), require_weights);
}

Eigen::MatrixXd gcn_forward(const GnnInput& input, const GnnParameters& params) {
  validate_parameters(params);
  if (input.features.rows() > 0 && input.features.cols() != params.gcn.front().w.cols()) {
    throw Error(ErrorCode::kInvalidArgument, "node feature size does not match the network input");
  }
  return gcn_forward_cached(input, params).out;
}

double edge_mlp(const GnnParameters& params, const Eigen::VectorXd& x) {
  VectorXd r1 = (params.mlp[0].w * x + params.mlp[0].b).cwiseMax(0.0);
  VectorXd r2 = (params.mlp[1].w * r1 + params.mlp[1].b).cwiseMax(0.0);
  return sigmoid((params.mlp[2].w * r2 + params.mlp[2].b)(0));
}

double edge_affinity(const GnnParameters& params, const Eigen::MatrixXd& embeddings, std::uint32_t u,
                     std::uint32_t v, double w) {
  const auto hd = embeddings.cols();
  VectorXd x(2 * hd + 1), y(2 * hd + 1);
  x << embeddings.row(u).transpose(), embeddings.row(v).transpose(), w;
  y << embeddings.row(v).transpose(), embeddings.row(u).transpose(), w;
  return 0.5 * (edge_mlp(params, x) + edge_mlp(params, y));
}

std::vector<double> edge_affinities(const GnnInput& input, const GnnParameters& params) {
  validate_parameters(params);
  const auto f = forward(input, params, true);
  return {f.s.data(), f.s.data() + f.s.size()};
}

double loss_value(const GnnInput& input, const GnnParameters& params, const LossOptions& options,
                  std::uint64_t* pattern) {
  const auto f = forward(input, params, options.use_edge_weights);
  if (pattern != nullptr) {
    *pattern = 0;
    for (std::size_t l = 0; l + 1 < f.gcn.z.size(); ++l) hash_mask(*pattern, f.gcn.z[l]);
    for (const auto& m : f.mlp) {
      hash_mask(*pattern, m.a1);
      hash_mask(*pattern, m.a2);
    }
  }
  const auto t = edge_terms(input, f.s, options, pattern);
  return t.bce + t.reg;
}

LossResult loss_and_gradients(const GnnInput& input, const GnnParameters& params, const LossOptions& options) {
  validate_parameters(params);
  const auto f = forward(input, params, options.use_edge_weights);
  const auto t = edge_terms(input, f.s, options, nullptr);
  LossResult r;
  r.bce = t.bce;
  r.reg = t.reg;
  r.loss = t.bce + t.reg;
  r.labeled = t.labeled;
  r.unlabeled = t.unlabeled;
  r.gradients = zero_parameters(params.shape());
  auto& g = r.gradients;

  const auto hd = f.gcn.out.cols();
  MatrixXd dh = MatrixXd::Zero(f.gcn.out.rows(), hd);
  for (int o = 0; o < 2; ++o) {
    const auto& m = f.mlp[o];
    const VectorXd da3 = (0.5 * t.ds.array() * m.p.array() * (1.0 - m.p.array())).matrix();
    g.mlp[2].w += da3.transpose() * m.r2;
    g.mlp[2].b(0) += da3.sum();
    const MatrixXd da2 = (da3 * params.mlp[2].w).cwiseProduct(relu_mask(m.a2));
    g.mlp[1].w += da2.transpose() * m.r1;
    g.mlp[1].b += da2.colwise().sum().transpose();
    const MatrixXd da1 = (da2 * params.mlp[1].w).cwiseProduct(relu_mask(m.a1));
    g.mlp[0].w += da1.transpose() * m.x;
    g.mlp[0].b += da1.colwise().sum().transpose();
    const MatrixXd dx = da1 * params.mlp[0].w;
    for (std::size_t e = 0; e < input.edges.size(); ++e) {
      const auto& edge = input.edges[e];
      const auto a = o == 1 ? edge.v : edge.u, b = o == 1 ? edge.u : edge.v;
      const auto row = static_cast<Eigen::Index>(e);
      dh.row(a) += dx.row(row).head(hd);
      dh.row(b) += dx.row(row).segment(hd, hd);
    }
  }
  for (std::size_t l = params.gcn.size(); l-- > 0;) {
    const MatrixXd dz = l + 1 == params.gcn.size() ? dh : MatrixXd(dh.cwiseProduct(relu_mask(f.gcn.z[l])));
    g.gcn[l].w = dz.transpose() * f.gcn.agg[l];
    g.gcn[l].b = dz.colwise().sum().transpose();
    if (l > 0) dh = aggregate_transpose(input, dz * params.gcn[l].w);
  }
  return r;
}

void validate_config(const TrainConfig& config) {
  if (config.epochs < 1) throw Error(ErrorCode::kInvalidArgument, "epochs must be >= 1");
  if (!(config.learning_rate >= 0.0) || !std::isfinite(config.learning_rate)) {
    throw Error(ErrorCode::kInvalidArgument, "learning_rate must be finite and >= 0");
  }
}

TrainResult train(std::span<const SuperpointGraph> graphs, const TrainConfig& config,
                  const std::function<void(std::int32_t, double)>& on_epoch) {
  validate_config(config);
  const auto input = make_gnn_input(graphs, config.use_edge_weights);
  if (input.features.cols() != config.shape.input_dim) {
    throw Error(ErrorCode::kInvalidArgument, "node features have " + std::to_string(input.features.cols()) +
                                                 " channels, network expects " +
                                                 std::to_string(config.shape.input_dim));
  }
  const LossOptions options{config.use_edge_weights};
  TrainResult result;
  result.params = init_parameters(config.shape, config.seed);
  const auto weight_column = result.params.mlp[0].w.cols() - 1;
  if (!config.use_edge_weights) result.params.mlp[0].w.col(weight_column).setZero();

  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  auto m = zero_parameters(config.shape), v = zero_parameters(config.shape);
  for (std::int32_t epoch = 1; epoch <= config.epochs; ++epoch) {
    auto lg = loss_and_gradients(input, result.params, options);
    if (!std::isfinite(lg.loss)) {
      throw Error(ErrorCode::kDivergence, "training diverged at epoch " + std::to_string(epoch));
    }
    result.loss_history.push_back(lg.loss);
    if (on_epoch) on_epoch(epoch, lg.loss);
    if (!config.use_edge_weights) lg.gradients.mlp[0].w.col(weight_column).setZero();
    const double c1 = 1.0 - std::pow(kBeta1, epoch), c2 = 1.0 - std::pow(kBeta2, epoch);
    auto pt = result.params.tensors();
    const auto gt = std::as_const(lg.gradients).tensors();
    auto mt = m.tensors(), vt = v.tensors();
    for (std::size_t k = 0; k < pt.size(); ++k) {
      for (std::size_t i = 0; i < pt[k].size(); ++i) {
        const double gi = gt[k][i];
        mt[k][i] = kBeta1 * mt[k][i] + (1.0 - kBeta1) * gi;
        vt[k][i] = kBeta2 * vt[k][i] + (1.0 - kBeta2) * gi * gi;
        pt[k][i] -= config.learning_rate * (mt[k][i] / c1) / (std::sqrt(vt[k][i] / c2) + kEps);
      }
    }
  }
  return result;
}

void infer(SuperpointGraph& graph, const GnnParameters& params) {
  const auto input = make_gnn_input(graph, true);
  if (input.features.rows() > 0 && input.features.cols() != params.gcn.front().w.cols()) {
    throw Error(ErrorCode::kInvalidArgument, "node feature size does not match the network input");
  }
  const auto s = edge_affinities(input, params);
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    graph.edges[e].affinity = static_cast<float>(std::clamp(s[e], 0.0, 1.0));
  }
}

std::vector<std::uint8_t> encode_parameters(const GnnParameters& params) {
  validate_parameters(params);
  ByteWriter w;
  w.put_magic("GNN1");
  for (const auto* group : {&params.gcn, &params.mlp}) {
    for (const auto& layer : *group) {
      w.put(static_cast<std::uint32_t>(layer.w.rows()));
      w.put(static_cast<std::uint32_t>(layer.w.cols()));
      for (Eigen::Index r = 0; r < layer.w.rows(); ++r) {
        for (Eigen::Index c = 0; c < layer.w.cols(); ++c) w.put(static_cast<float>(layer.w(r, c)));
      }
      for (Eigen::Index r = 0; r < layer.b.size(); ++r) w.put(static_cast<float>(layer.b(r)));
    }
  }
  return w.bytes();
}

GnnParameters decode_parameters(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "GNN parameters");
  r.expect_magic("GNN1");
  std::vector<DenseLayer> layers;
  while (!r.at_end()) {
    const auto rows = r.get<std::uint32_t>(), cols = r.get<std::uint32_t>();
    const auto need = (static_cast<std::uint64_t>(rows) * cols + rows) * 4;
    if (need > r.remaining()) throw Error(ErrorCode::kTruncated, "GNN parameters: layer exceeds file size");
    DenseLayer layer{MatrixXd(rows, cols), VectorXd(rows)};
    for (std::uint32_t i = 0; i < rows; ++i) {
      for (std::uint32_t j = 0; j < cols; ++j) layer.w(i, j) = r.get<float>();
    }
    for (std::uint32_t i = 0; i < rows; ++i) layer.b(i) = r.get<float>();
    layers.push_back(std::move(layer));
  }
  if (layers.size() < 4) throw Error(ErrorCode::kFormat, "GNN parameters: expected at least 4 layers");
  GnnParameters p;
  p.gcn.assign(layers.begin(), layers.end() - 3);
  p.mlp.assign(layers.end() - 3, layers.end());
  validate_parameters(p);
  return p;
}

void save_parameters(const GnnParameters& params, const std::filesystem::path& path) {
  write_file_atomic(path, encode_parameters(params));
}

GnnParameters load_parameters(const std::filesystem::path& path) { return decode_parameters(read_file(path)); }

}  // namespace supercut
