#pragma once

#include <Eigen/Core>

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <vector>

namespace supercut {

// Reserved ground-truth ids.
inline constexpr std::int32_t kInstanceNone = -1;
inline constexpr std::int32_t kInstanceFloor = -2;
inline constexpr std::int32_t kInstanceWall = -3;

inline constexpr std::size_t kFeatureDim = 256;

using Vec3f = Eigen::Vector3f;
using Face = std::array<std::uint32_t, 3>;

/// Triangle mesh or point cloud. `faces` non-empty means mesh mode.
struct SceneGeometry {
  std::vector<Vec3f> points;
  std::vector<Vec3f> normals;
  std::vector<Vec3f> colors;             ///< RGB in [0,1]; empty when absent
  std::vector<Face> faces;               ///< empty for point clouds
  std::vector<std::int32_t> gt_instance;  ///< empty when unannotated

  std::size_t size() const { return points.size(); }
  bool is_mesh() const { return !faces.empty(); }
  bool has_colors() const { return !colors.empty(); }
  bool has_gt() const { return !gt_instance.empty(); }
};

/// Throws Error(kInvariant) on the first violated invariant.
void validate_scene(const SceneGeometry& scene);

struct Pixel {
  std::int32_t row = 0;
  std::int32_t col = 0;
  auto operator<=>(const Pixel&) const = default;
};

/// Pinhole camera. World-to-camera: p_cam = R * p_world + t, +z forward,
/// +x towards increasing column, +y towards increasing row.
struct CameraView {
  std::int32_t view_id = 0;
  double fx = 0, fy = 0, cx = 0, cy = 0;
  std::int32_t width = 0, height = 0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d to_camera(const Eigen::Vector3d& world) const { return rotation * world + translation; }

  /// Continuous image coordinates (u = column axis, v = row axis) of a camera-frame point.
  Eigen::Vector2d project_camera(const Eigen::Vector3d& cam) const {
    return {fx * cam.x() / cam.z() + cx, fy * cam.y() / cam.z() + cy};
  }

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
};

void validate_camera(const CameraView& view);

struct Superpoint {
  std::int32_t sp_id = 0;
  std::vector<std::uint32_t> point_indices;  ///< sorted ascending
  Vec3f centroid = Vec3f::Zero();
};

Vec3f compute_centroid(const SceneGeometry& scene, const std::vector<std::uint32_t>& indices);

/// Checks disjointness, non-emptiness, index range, and centroids.
void validate_superpoints(const SceneGeometry& scene, const std::vector<Superpoint>& superpoints);

enum class EdgeLabel : std::int8_t { kNegative = 0, kPositive = 1 };

struct GraphNode {
  std::uint32_t sp_id = 0;
  std::vector<float> feature;  ///< kFeatureDim values, or empty when absent

  bool has_feature() const { return !feature.empty(); }
  bool operator==(const GraphNode&) const = default;
};

/// Edge endpoints are node indices with u < v.
struct GraphEdge {
  std::uint32_t u = 0;
  std::uint32_t v = 0;
  std::optional<float> w_sam;
  std::optional<float> affinity;
  std::optional<EdgeLabel> label;

  bool operator==(const GraphEdge&) const = default;
};

struct SuperpointGraph {
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;

  bool operator==(const SuperpointGraph&) const = default;
};

void validate_graph(const SuperpointGraph& graph);

struct InstanceInfo {
  std::int32_t instance_id = 0;
  double confidence = 1.0;
  bool operator==(const InstanceInfo&) const = default;
};

struct InstanceSegmentation {
  std::vector<std::int32_t> assignment;  ///< per point; kInstanceNone when unassigned
  std::vector<InstanceInfo> instances;

  bool operator==(const InstanceSegmentation&) const = default;
};

void validate_segmentation(const InstanceSegmentation& seg);

}  // namespace supercut
