#pragma once

#include "supercut/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace supercut {

struct CutConfig {
  double tau = 0.5;   ///< edges scoring below tau are cut
  double rho = 0.25;  ///< maximum tolerated share of inconsistent 2-paths
  bool use_affinity = true;  ///< false: cut on w_sam
};

void validate_config(const CutConfig& config);

/// Per-edge score used for cutting; throws kInvalidArgument naming the first
/// edge lacking it.
std::vector<double> edge_scores(const SuperpointGraph& graph, bool use_affinity);

/// An edge stays connected when its score is >= tau and, among the 2-paths
/// u-w-v through common neighbours, the mixed ones (exactly one leg >= tau)
/// make up at most rho of the high-high plus mixed ones. Low-low paths are
/// not counted.
std::vector<std::uint8_t> decide_connections(const SuperpointGraph& graph, std::span<const double> scores,
                                             const CutConfig& config, std::size_t threads = 0);

/// Connected components of the kept edges; one instance per component, ids
/// ordered by each component's smallest node index. Confidence is the mean
/// score of the component's kept edges, 1.0 for a lone superpoint. Points
/// outside every superpoint stay kInstanceNone.
InstanceSegmentation partition(std::size_t num_points, std::span<const Superpoint> superpoints,
                               const SuperpointGraph& graph, std::span<const std::uint8_t> connected,
                               std::span<const double> scores);

/// decide_connections followed by partition.
InstanceSegmentation segment_graph(const SuperpointGraph& graph, std::span<const Superpoint> superpoints,
                                   std::size_t num_points, const CutConfig& config, std::size_t threads = 0);

}  // namespace supercut
