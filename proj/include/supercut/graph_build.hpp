#pragma once

#include "supercut/feature_map.hpp"
#include "supercut/mask_oracle.hpp"
#include "supercut/projection.hpp"
#include "supercut/types.hpp"

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace supercut {

enum class AdjacencyMode { kMeshSharedEdge, kDistance };

struct AdjacencyConfig {
  AdjacencyMode mode = AdjacencyMode::kDistance;
  double distance_threshold = 0.10;  ///< meters, distance mode only
};

/// Pairs of superpoint positions (u < v), sorted. Mesh mode links superpoints
/// holding the two endpoints of a mesh edge; distance mode links superpoints
/// whose closest points are nearer than the threshold (grid hashing).
std::vector<std::pair<std::uint32_t, std::uint32_t>> build_adjacency(const SceneGeometry& scene,
                                                                     std::span<const Superpoint> superpoints,
                                                                     const AdjacencyConfig& config);

/// max(|A∩B|/|A|, |A∩B|/|B|).
double single_view_weight(const MaskCandidate& a, const MaskCandidate& b);

struct EdgeObservation {
  std::int32_t view_id = 0;
  double w = 0.0;
  double conf_a = 0.0;
  double conf_b = 0.0;
  double dist_2d = 0.0;
};

/// L1-normalised per-view coefficients from score = dist_2d * conf_a * conf_b;
/// uniform when every score is zero.
std::vector<double> aggregation_coefficients(std::span<const EdgeObservation> observations);

/// sum_i c_i w_i, or 0 without observations.
double aggregate_edge_weight(std::span<const EdgeObservation> observations);

/// Mean over visible views of the mean interpolated feature at
/// `samples_per_view` pixels drawn uniformly (with replacement) from the
/// projection mask, seeded by (seed, sp_id, view_id). An invisible superpoint
/// gets a zero vector and sets `invisible`.
std::vector<float> compute_node_feature(std::size_t sp_index, std::int32_t sp_id, const VisibilityIndex& visibility,
                                        const FeatureStore& features, std::uint32_t samples_per_view,
                                        std::uint64_t seed, bool* invisible = nullptr);

struct GraphBuildConfig {
  AdjacencyConfig adjacency;
  ProjectionConfig projection;
  std::uint32_t prompt_count = kDefaultPromptCount;
  std::uint32_t samples_per_view = 5;
  std::uint32_t max_views_per_edge = 0;  ///< 0 = every co-visible view
  std::uint64_t seed = 0;
};

void validate_config(const GraphBuildConfig& config);

/// Co-visible views of an edge used for weighting, in view order, capped by config.
std::vector<std::size_t> edge_views(const VisibilityIndex& visibility, std::uint32_t u, std::uint32_t v,
                                    const GraphBuildConfig& config);

/// Every distinct (view, superpoint) prompt set the edges need, ordered by
/// (view_id, sp_id). build-graph queries exactly these.
std::vector<PromptSet> collect_prompt_requests(const VisibilityIndex& visibility, std::span<const Superpoint> superpoints,
                                               std::span<const std::pair<std::uint32_t, std::uint32_t>> edges,
                                               const GraphBuildConfig& config);

struct AnnotateResult {
  SuperpointGraph graph;
  std::vector<std::int32_t> invisible_superpoints;  ///< sp_ids with zero features
};

/// Adjacency, oracle edge weights and (when `features` is non-null) node features.
AnnotateResult annotate_graph(const SceneGeometry& scene, std::span<const Superpoint> superpoints,
                              std::span<const CameraView> views, const MaskOracle& oracle,
                              const FeatureStore* features, const GraphBuildConfig& config, std::size_t threads = 0);

/// Same, reusing a prebuilt visibility index and adjacency.
AnnotateResult annotate_graph(std::span<const Superpoint> superpoints, const VisibilityIndex& visibility,
                              std::span<const std::pair<std::uint32_t, std::uint32_t>> edges,
                              const MaskOracle& oracle, const FeatureStore* features,
                              const GraphBuildConfig& config, std::size_t threads = 0);

}  // namespace supercut
