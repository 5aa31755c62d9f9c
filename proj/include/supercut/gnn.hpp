#pragma once

#include "supercut/types.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

namespace supercut {

/// Layer widths. The default is the reference architecture: five graph
/// convolutions 256 -> 128 (-> 128 x4) and an edge MLP 257 -> 128 -> 128 -> 1.
struct GnnShape {
  std::int32_t input_dim = static_cast<std::int32_t>(kFeatureDim);
  std::int32_t hidden_dim = 128;
  std::int32_t gcn_layers = 5;
  std::int32_t mlp_hidden = 128;
};

/// y = W x + b with W stored out x in.
struct DenseLayer {
  Eigen::MatrixXd w;
  Eigen::VectorXd b;

  bool operator==(const DenseLayer& o) const { return w == o.w && b == o.b; }
};

struct GnnParameters {
  std::vector<DenseLayer> gcn;
  std::vector<DenseLayer> mlp;  ///< exactly three layers

  GnnShape shape() const;
  std::size_t parameter_count() const;
  /// Flat views of every tensor in a fixed order: gcn W, b per layer, then
  /// mlp W, b per layer (W column-major).
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  bool operator==(const GnnParameters&) const = default;
};

/// Throws kInvalidArgument on inconsistent layer sizes or non-finite values.
void validate_parameters(const GnnParameters& params);

/// Glorot-uniform weights, zero biases.
GnnParameters init_parameters(const GnnShape& shape, std::uint64_t seed);
GnnParameters zero_parameters(const GnnShape& shape);

/// Graph(s) packed for the network: node features, closed neighbourhoods and edges.
struct GnnInput {
  Eigen::MatrixXd features;                        ///< nodes x input_dim
  std::vector<std::vector<std::uint32_t>> closed;  ///< N(v) plus v, sorted
  struct Edge {
    std::uint32_t u = 0, v = 0;
    double w = 0.0;
    std::int8_t label = -1;  ///< -1 absent, 0 negative, 1 positive
  };
  std::vector<Edge> edges;
};

/// Packs one graph; several graphs are packed as a disjoint union. Throws
/// kInvalidArgument naming the sp_id of a node without features, or the edge
/// lacking w_sam when `require_weights` is set.
GnnInput make_gnn_input(std::span<const SuperpointGraph> graphs, bool require_weights = true);
GnnInput make_gnn_input(const SuperpointGraph& graph, bool require_weights = true);

/// Per-node embeddings (nodes x hidden): h' = ReLU(W mean(N[v]) + b), no ReLU on the last layer.
Eigen::MatrixXd gcn_forward(const GnnInput& input, const GnnParameters& params);

/// Raw MLP output probability f(x) for one input order.
double edge_mlp(const GnnParameters& params, const Eigen::VectorXd& x);

/// s = (f(h_u, h_v, w) + f(h_v, h_u, w)) / 2.
double edge_affinity(const GnnParameters& params, const Eigen::MatrixXd& embeddings, std::uint32_t u,
                     std::uint32_t v, double w);

/// Affinities of every edge of `input`.
std::vector<double> edge_affinities(const GnnInput& input, const GnnParameters& params);

struct LossOptions {
  /// When false the edge weight is fed to the MLP as 0 and the consistency
  /// regulariser is dropped.
  bool use_edge_weights = true;
};

inline constexpr double kProbabilityClamp = 1e-7;

struct LossResult {
  double loss = 0.0;
  double bce = 0.0;
  double reg = 0.0;
  std::size_t labeled = 0;
  std::size_t unlabeled = 0;
  GnnParameters gradients;
};

/// BCE over pseudo-labelled edges (mean) plus mean |w - 0.5| |s - w| over the
/// unlabelled ones, with exact reverse-mode gradients.
LossResult loss_and_gradients(const GnnInput& input, const GnnParameters& params, const LossOptions& options = {});
/// Loss only; `pattern` (when given) receives a hash of every ReLU, clamp and
/// absolute-value branch taken, so callers can detect non-smooth points.
double loss_value(const GnnInput& input, const GnnParameters& params, const LossOptions& options = {},
                  std::uint64_t* pattern = nullptr);

struct TrainConfig {
  std::int32_t epochs = 200;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  bool use_edge_weights = true;
  GnnShape shape;
};

void validate_config(const TrainConfig& config);

struct TrainResult {
  GnnParameters params;
  std::vector<double> loss_history;  ///< loss before each update
};

/// Full-batch Adam (0.9, 0.999, 1e-8). Throws kDivergence naming the epoch
/// when the loss becomes non-finite. Without edge weights the MLP's weight
/// column is held at zero.
TrainResult train(std::span<const SuperpointGraph> graphs, const TrainConfig& config,
                  const std::function<void(std::int32_t, double)>& on_epoch = {});

/// Writes affinities into every edge.
void infer(SuperpointGraph& graph, const GnnParameters& params);

/// `.gnn`: magic "GNN1", then per layer (gcn first, then the three MLP
/// layers) u32 rows, u32 cols, f32 W row-major, f32 bias[rows].
std::vector<std::uint8_t> encode_parameters(const GnnParameters& params);
GnnParameters decode_parameters(std::span<const std::uint8_t> bytes);
void save_parameters(const GnnParameters& params, const std::filesystem::path& path);
GnnParameters load_parameters(const std::filesystem::path& path);

}  // namespace supercut
