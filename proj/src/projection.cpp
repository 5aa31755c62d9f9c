#include "supercut/projection.hpp"

#include "supercut/error.hpp"
#include "supercut/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace supercut {

namespace {

constexpr float kInf = std::numeric_limits<float>::infinity();

void splat_points(const SceneGeometry& scene, const CameraView& view, RenderResult& out) {
  const auto w = view.width, h = view.height;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const Eigen::Vector3d cam = view.to_camera(scene.points[i].cast<double>());
    if (cam.z() <= kNearPlane) continue;
    const Eigen::Vector2d uv = view.project_camera(cam);
    const double fc = std::floor(uv.x()), fr = std::floor(uv.y());
    if (fc < -1 || fr < -1 || fc > w || fr > h) continue;
    const auto col = static_cast<std::int32_t>(fc), row = static_cast<std::int32_t>(fr);
    const auto z = static_cast<float>(cam.z());
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        const auto r = row + dr, c = col + dc;
        if (r < 0 || c < 0 || r >= h || c >= w) continue;
        const auto idx = static_cast<std::size_t>(r) * w + c;
        if (z < out.depth.depth[idx]) {
          out.depth.depth[idx] = z;
          out.source_point[idx] = static_cast<std::int32_t>(i);
        }
      }
    }
  }
}

void rasterize_mesh(const SceneGeometry& scene, const CameraView& view, RenderResult& out) {
  const auto w = view.width, h = view.height;
  std::vector<Eigen::Vector3d> cam(scene.size());
  for (std::size_t i = 0; i < scene.size(); ++i) cam[i] = view.to_camera(scene.points[i].cast<double>());
  for (const auto& f : scene.faces) {
    const Eigen::Vector3d& a = cam[f[0]];
    const Eigen::Vector3d& b = cam[f[1]];
    const Eigen::Vector3d& c = cam[f[2]];
    if (a.z() <= kNearPlane || b.z() <= kNearPlane || c.z() <= kNearPlane) continue;
    const Eigen::Vector2d pa = view.project_camera(a), pb = view.project_camera(b), pc = view.project_camera(c);
    const double area = (pb.x() - pa.x()) * (pc.y() - pa.y()) - (pb.y() - pa.y()) * (pc.x() - pa.x());
    if (std::abs(area) < 1e-12) continue;
    const double min_u = std::min({pa.x(), pb.x(), pc.x()}), max_u = std::max({pa.x(), pb.x(), pc.x()});
    const double min_v = std::min({pa.y(), pb.y(), pc.y()}), max_v = std::max({pa.y(), pb.y(), pc.y()});
    const auto c0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(min_u)));
    const auto c1 = std::min<std::int64_t>(w - 1, static_cast<std::int64_t>(std::ceil(max_u)));
    const auto r0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(min_v)));
    const auto r1 = std::min<std::int64_t>(h - 1, static_cast<std::int64_t>(std::ceil(max_v)));
    for (auto r = r0; r <= r1; ++r) {
      for (auto col = c0; col <= c1; ++col) {
        const double u = col + 0.5, v = r + 0.5;
        // Screen-space barycentrics.
        const double wa = ((pb.x() - u) * (pc.y() - v) - (pb.y() - v) * (pc.x() - u)) / area;
        const double wb = ((pc.x() - u) * (pa.y() - v) - (pc.y() - v) * (pa.x() - u)) / area;
        const double wc = 1.0 - wa - wb;
        if (wa < 0 || wb < 0 || wc < 0) continue;
        // Perspective-correct depth: 1/z is affine in screen space.
        const double inv_z = wa / a.z() + wb / b.z() + wc / c.z();
        const auto z = static_cast<float>(1.0 / inv_z);
        const auto idx = static_cast<std::size_t>(r) * w + col;
        if (z < out.depth.depth[idx]) {
          out.depth.depth[idx] = z;
          const int best = (wa >= wb && wa >= wc) ? 0 : (wb >= wc ? 1 : 2);
          out.source_point[idx] = static_cast<std::int32_t>(f[best]);
        }
      }
    }
  }
}

}  // namespace

RenderResult render_scene(const SceneGeometry& scene, const CameraView& view) {
  RenderResult out;
  out.depth.width = view.width;
  out.depth.height = view.height;
  out.depth.depth.assign(view.pixel_count(), kInf);
  out.source_point.assign(view.pixel_count(), -1);
  if (scene.is_mesh()) {
    rasterize_mesh(scene, view, out);
  } else {
    splat_points(scene, view, out);
  }
  return out;
}

DepthMap render_depth(const SceneGeometry& scene, const CameraView& view) {
  return render_scene(scene, view).depth;
}

bool ProjectionMask::contains(Pixel p) const {
  if (p.row < 0 || p.col < 0 || p.row >= height || p.col >= width) return false;
  const auto idx = static_cast<std::uint32_t>(p.row) * static_cast<std::uint32_t>(width) + static_cast<std::uint32_t>(p.col);
  return std::binary_search(pixels.begin(), pixels.end(), idx);
}

std::vector<std::uint8_t> ProjectionMask::bitmap() const {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(width) * height, 0);
  for (auto idx : pixels) out[idx] = 1;
  return out;
}

ProjectionMask make_projection_mask(std::int32_t view_id, std::int32_t sp_id, std::int32_t width,
                                    std::int32_t height, std::vector<std::uint32_t> pixels) {
  std::sort(pixels.begin(), pixels.end());
  pixels.erase(std::unique(pixels.begin(), pixels.end()), pixels.end());
  ProjectionMask m;
  m.view_id = view_id;
  m.sp_id = sp_id;
  m.width = width;
  m.height = height;
  m.pixels = std::move(pixels);
  double sr = 0, sc = 0;
  for (auto idx : m.pixels) {
    sr += idx / static_cast<std::uint32_t>(width);
    sc += idx % static_cast<std::uint32_t>(width);
  }
  if (!m.pixels.empty()) {
    m.centroid_row = sr / static_cast<double>(m.pixels.size());
    m.centroid_col = sc / static_cast<double>(m.pixels.size());
  }
  return m;
}

std::vector<std::uint32_t> visible_points(const SceneGeometry& scene, const Superpoint& sp, const CameraView& view,
                                          const DepthMap& depth, const ProjectionConfig& config) {
  std::vector<std::uint32_t> kept;
  for (auto i : sp.point_indices) {
    const Eigen::Vector3d cam = view.to_camera(scene.points[i].cast<double>());
    if (cam.z() <= kNearPlane) continue;
    const Eigen::Vector2d uv = view.project_camera(cam);
    const double fc = std::floor(uv.x()), fr = std::floor(uv.y());
    if (fc < 0 || fr < 0 || fc >= view.width || fr >= view.height) continue;
    const float d = depth.at(static_cast<std::int32_t>(fr), static_cast<std::int32_t>(fc));
    if (std::abs(cam.z() - static_cast<double>(d)) <= config.occlusion_tol) kept.push_back(i);
  }
  return kept;
}

std::optional<ProjectionMask> project_superpoint(const SceneGeometry& scene, const Superpoint& sp,
                                                 const CameraView& view, const DepthMap& depth,
                                                 const ProjectionConfig& config) {
  const auto kept = visible_points(scene, sp, view, depth, config);
  if (kept.empty()) return std::nullopt;
  std::vector<std::uint32_t> pixels;
  pixels.reserve(kept.size() * 9);
  for (auto i : kept) {
    const Eigen::Vector2d uv = view.project_camera(view.to_camera(scene.points[i].cast<double>()));
    const auto col = static_cast<std::int32_t>(std::floor(uv.x()));
    const auto row = static_cast<std::int32_t>(std::floor(uv.y()));
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        const auto r = row + dr, c = col + dc;
        if (r < 0 || c < 0 || r >= view.height || c >= view.width) continue;
        pixels.push_back(static_cast<std::uint32_t>(r) * static_cast<std::uint32_t>(view.width) +
                         static_cast<std::uint32_t>(c));
      }
    }
  }
  auto mask = make_projection_mask(view.view_id, sp.sp_id, view.width, view.height, std::move(pixels));
  if (mask.pixel_count() < config.min_visible_pixels) return std::nullopt;
  return mask;
}

double superpoint_distance_2d(const ProjectionMask& a, const ProjectionMask& b) {
  if (a.view_id != b.view_id) throw Error(ErrorCode::kInvalidArgument, "masks from different views");
  return std::hypot(a.centroid_row - b.centroid_row, a.centroid_col - b.centroid_col);
}

VisibilityIndex VisibilityIndex::build(const SceneGeometry& scene, std::span<const Superpoint> superpoints,
                                       std::span<const CameraView> views, const ProjectionConfig& config,
                                       std::size_t threads) {
  VisibilityIndex index;
  index.num_superpoints_ = superpoints.size();
  index.views_.assign(views.begin(), views.end());
  std::vector<std::vector<std::optional<ProjectionMask>>> per_view(views.size());
  parallel_for(
      views.size(),
      [&](std::size_t v) {
        const auto depth = render_depth(scene, views[v]);
        auto& row = per_view[v];
        row.resize(superpoints.size());
        for (std::size_t s = 0; s < superpoints.size(); ++s) {
          row[s] = project_superpoint(scene, superpoints[s], views[v], depth, config);
        }
      },
      threads);
  index.slot_.assign(views.size() * superpoints.size(), -1);
  for (std::size_t v = 0; v < views.size(); ++v) {
    for (std::size_t s = 0; s < superpoints.size(); ++s) {
      if (!per_view[v][s]) continue;
      index.slot_[v * superpoints.size() + s] = static_cast<std::int32_t>(index.masks_.size());
      index.masks_.push_back(std::move(*per_view[v][s]));
    }
  }
  return index;
}

const ProjectionMask* VisibilityIndex::mask(std::size_t sp_index, std::size_t view_index) const {
  const auto slot = slot_[view_index * num_superpoints_ + sp_index];
  return slot < 0 ? nullptr : &masks_[slot];
}

std::vector<std::size_t> VisibilityIndex::views_of(std::size_t sp_index) const {
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < views_.size(); ++v) {
    if (visible(sp_index, v)) out.push_back(v);
  }
  return out;
}

std::vector<std::size_t> VisibilityIndex::co_visible_views(std::size_t sp_a, std::size_t sp_b) const {
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < views_.size(); ++v) {
    if (visible(sp_a, v) && visible(sp_b, v)) out.push_back(v);
  }
  return out;
}

}  // namespace supercut
