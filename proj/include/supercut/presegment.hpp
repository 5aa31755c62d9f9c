#pragma once

#include "supercut/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace supercut {

/// Felzenszwalb over-segmentation parameters. Defaults are the ScanNet segmentator setting.
struct PresegmentConfig {
  double k_thresh = 0.01;      ///< scale parameter; larger merges more
  std::uint32_t seg_min_verts = 20;
  std::uint32_t knn = 8;       ///< neighbors per point in point-cloud mode

  static PresegmentConfig scannet() { return {0.01, 20, 8}; }
  static PresegmentConfig scannetpp() { return {0.2, 500, 8}; }
};

void validate_config(const PresegmentConfig& config);

struct AffinityEdge {
  std::uint32_t i = 0;  ///< i < j
  std::uint32_t j = 0;
  float dissimilarity = 0.0f;  ///< 1 - dot(n_i, n_j), clamped to [0, 2]

  bool operator==(const AffinityEdge&) const = default;
};

float normal_dissimilarity(const Vec3f& a, const Vec3f& b);

/// Mesh mode: one entry per unique mesh edge. Point-cloud mode: symmetrized
/// k-NN graph (an edge when either endpoint lists the other). Sorted by (i, j).
std::vector<AffinityEdge> build_affinity_edges(const SceneGeometry& scene, const PresegmentConfig& config,
                                               std::size_t threads = 0);

/// Greedy Felzenszwalb-Huttenlocher merging on edges sorted by (d, i, j),
/// followed by a pass that absorbs segments below seg_min_verts into the
/// neighbor reached by their lowest-dissimilarity edge. Superpoints are
/// numbered 0..n-1 in order of their smallest point index.
std::vector<Superpoint> felzenszwalb_segment(std::span<const AffinityEdge> edges, std::size_t num_points,
                                             const PresegmentConfig& config);

/// Convenience: edges + segmentation + centroids.
std::vector<Superpoint> presegment(const SceneGeometry& scene, const PresegmentConfig& config,
                                   std::size_t threads = 0);

}  // namespace supercut
