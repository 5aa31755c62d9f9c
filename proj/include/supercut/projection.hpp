#pragma once

#include "supercut/types.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace supercut {

inline constexpr double kNearPlane = 1e-3;

/// Depth in meters along +z of the camera; +inf where nothing was rasterized.
struct DepthMap {
  std::int32_t width = 0;
  std::int32_t height = 0;
  std::vector<float> depth;

  float at(std::int32_t row, std::int32_t col) const { return depth[static_cast<std::size_t>(row) * width + col]; }
};

/// Depth plus, per pixel, the scene point that won the z-test (-1 when empty).
/// In mesh mode the winner is the covering triangle's vertex with the largest
/// barycentric weight.
struct RenderResult {
  DepthMap depth;
  std::vector<std::int32_t> source_point;
};

/// Mesh mode z-buffers triangles (triangles crossing the near plane are
/// dropped); point mode splats every point over a 3x3 pixel footprint.
RenderResult render_scene(const SceneGeometry& scene, const CameraView& view);
DepthMap render_depth(const SceneGeometry& scene, const CameraView& view);

struct ProjectionConfig {
  double occlusion_tol = 0.03;           ///< meters
  std::uint32_t min_visible_pixels = 50;
};

struct ProjectionMask {
  std::int32_t view_id = 0;
  std::int32_t sp_id = 0;
  std::int32_t width = 0;
  std::int32_t height = 0;
  std::vector<std::uint32_t> pixels;  ///< sorted row-major linear indices
  double centroid_row = 0.0;
  double centroid_col = 0.0;

  std::size_t pixel_count() const { return pixels.size(); }
  Pixel pixel(std::size_t i) const {
    return {static_cast<std::int32_t>(pixels[i] / width), static_cast<std::int32_t>(pixels[i] % width)};
  }
  bool contains(Pixel p) const;
  /// Dense row-major 0/1 bitmap of the full image.
  std::vector<std::uint8_t> bitmap() const;
};

/// Builds a mask from arbitrary pixel indices (deduplicated and sorted); computes the centroid.
ProjectionMask make_projection_mask(std::int32_t view_id, std::int32_t sp_id, std::int32_t width,
                                    std::int32_t height, std::vector<std::uint32_t> pixels);

/// Member points that land inside the image and pass the depth test.
std::vector<std::uint32_t> visible_points(const SceneGeometry& scene, const Superpoint& sp, const CameraView& view,
                                          const DepthMap& depth, const ProjectionConfig& config);

/// Union of the 3x3 footprints of visible points, or nullopt when the result
/// has fewer than min_visible_pixels pixels.
std::optional<ProjectionMask> project_superpoint(const SceneGeometry& scene, const Superpoint& sp,
                                                 const CameraView& view, const DepthMap& depth,
                                                 const ProjectionConfig& config);

/// Distance in pixels between the two masks' centroids. Masks must share a view.
double superpoint_distance_2d(const ProjectionMask& a, const ProjectionMask& b);

/// Projection masks for every (superpoint, view) pair that passes the visibility test.
/// Superpoints and views are addressed by their position in the input vectors.
class VisibilityIndex {
public:
  VisibilityIndex() = default;
  static VisibilityIndex build(const SceneGeometry& scene, std::span<const Superpoint> superpoints,
                               std::span<const CameraView> views, const ProjectionConfig& config,
                               std::size_t threads = 0);

  std::size_t num_superpoints() const { return num_superpoints_; }
  std::size_t num_views() const { return views_.size(); }
  const CameraView& view(std::size_t view_index) const { return views_[view_index]; }
  std::span<const CameraView> views() const { return views_; }

  bool visible(std::size_t sp_index, std::size_t view_index) const { return mask(sp_index, view_index) != nullptr; }
  const ProjectionMask* mask(std::size_t sp_index, std::size_t view_index) const;
  std::vector<std::size_t> views_of(std::size_t sp_index) const;
  std::vector<std::size_t> co_visible_views(std::size_t sp_a, std::size_t sp_b) const;

private:
  std::size_t num_superpoints_ = 0;
  std::vector<CameraView> views_;
  std::vector<ProjectionMask> masks_;
  std::vector<std::int32_t> slot_;  // [view * num_superpoints + sp] -> masks_ index or -1
};

}  // namespace supercut
