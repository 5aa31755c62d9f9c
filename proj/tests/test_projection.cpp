#include "supercut/projection.hpp"

#include "test_support.hpp"

#include <cmath>

using namespace supercut;
using supercut::test::error_code_of;

namespace {

CameraView identity_camera(int w = 40, int h = 30, double f = 20.0) {
  CameraView v;
  v.view_id = 0;
  v.fx = v.fy = f;
  v.cx = w / 2.0;
  v.cy = h / 2.0;
  v.width = w;
  v.height = h;
  return v;
}

/// Dense grid of points on z = depth spanning [-half, half]^2 in x and y.
SceneGeometry facing_square(float depth, float half, int n, std::int32_t gt) {
  SceneGeometry s;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      s.points.emplace_back(-half + 2 * half * i / (n - 1), -half + 2 * half * j / (n - 1), depth);
      s.normals.emplace_back(0, 0, -1);
      s.gt_instance.push_back(gt);
    }
  }
  return s;
}

void append(SceneGeometry& a, const SceneGeometry& b) {
  a.points.insert(a.points.end(), b.points.begin(), b.points.end());
  a.normals.insert(a.normals.end(), b.normals.begin(), b.normals.end());
  a.gt_instance.insert(a.gt_instance.end(), b.gt_instance.begin(), b.gt_instance.end());
}

Superpoint range_sp(std::int32_t id, std::uint32_t begin, std::uint32_t end) {
  Superpoint sp;
  sp.sp_id = id;
  for (auto i = begin; i < end; ++i) sp.point_indices.push_back(i);
  return sp;
}

}  // namespace

TEST_CASE("pinhole projection follows the axis convention") {
  const auto v = identity_camera();
  const auto uv = v.project_camera({1.0, 0.5, 2.0});
  CHECK(uv.x() == doctest::Approx(20 + 10));
  CHECK(uv.y() == doctest::Approx(15 + 5));
  const auto cam = test::look_at(0, {0, -3, 1}, {0, 0, 1}, 40, 30, 20.0);
  CHECK(cam.to_camera({0, 0, 1}).isApprox(Eigen::Vector3d(0, 0, 3)));
  CHECK(cam.to_camera({0, 0, 2}).y() < 0);  // up in the world is up in the image
}

TEST_CASE("a single point splats a 3x3 footprint") {
  SceneGeometry s;
  s.points = {{0.0f, 0.0f, 2.0f}};
  s.normals = {{0, 0, -1}};
  const auto r = render_scene(s, identity_camera());
  int covered = 0;
  for (int row = 0; row < 30; ++row) {
    for (int col = 0; col < 40; ++col) {
      const bool in = std::abs(row - 15) <= 1 && std::abs(col - 20) <= 1;
      covered += in;
      CHECK((r.depth.at(row, col) == 2.0f) == in);
      CHECK((r.source_point[row * 40 + col] == 0) == in);
    }
  }
  CHECK(covered == 9);
}

TEST_CASE("mesh rasterisation gives the plane depth inside the triangles") {
  SceneGeometry s;
  s.points = {{-1, -1, 4}, {1, -1, 4}, {1, 1, 4}, {-1, 1, 4}};
  s.normals.assign(4, Vec3f(0, 0, -1));
  s.faces = {{0, 1, 2}, {0, 2, 3}};
  const auto depth = render_depth(s, identity_camera());
  // The square spans columns 15..25 and rows 10..20 at focal 20, depth 4.
  for (int row = 0; row < 30; ++row) {
    for (int col = 0; col < 40; ++col) {
      const bool inside = col >= 15 && col < 25 && row >= 10 && row < 20;
      if (inside) {
        CHECK(depth.at(row, col) == doctest::Approx(4.0f));
      } else if (col < 14 || col > 25 || row < 9 || row > 20) {
        CHECK(std::isinf(depth.at(row, col)));
      }
    }
  }
}

TEST_CASE("occluded superpoints fail the depth test") {
  auto s = facing_square(2.0f, 0.5f, 30, 0);
  append(s, facing_square(3.0f, 0.3f, 20, 1));
  const auto front = range_sp(0, 0, 900), back = range_sp(1, 900, 1300);
  const auto v = identity_camera();
  const auto depth = render_depth(s, v);
  ProjectionConfig config;
  CHECK(visible_points(s, front, v, depth, config).size() == 900);
  CHECK(visible_points(s, back, v, depth, config).empty());
  CHECK(project_superpoint(s, front, v, depth, config).has_value());
  CHECK_FALSE(project_superpoint(s, back, v, depth, config).has_value());

  config.occlusion_tol = 1.5;
  CHECK(visible_points(s, back, v, depth, config).size() == 400);
}

TEST_CASE("min_visible_pixels gates small projections") {
  const auto s = facing_square(2.0f, 0.05f, 3, 0);
  const auto sp = range_sp(0, 0, 9);
  const auto v = identity_camera();
  const auto depth = render_depth(s, v);
  ProjectionConfig config;
  config.min_visible_pixels = 1;
  const auto mask = project_superpoint(s, sp, v, depth, config);
  REQUIRE(mask.has_value());
  config.min_visible_pixels = static_cast<std::uint32_t>(mask->pixel_count()) + 1;
  CHECK_FALSE(project_superpoint(s, sp, v, depth, config).has_value());
}

TEST_CASE("projection masks keep sorted unique pixels and their centroid") {
  const auto m = make_projection_mask(2, 5, 10, 10, {23, 3, 3, 13});
  CHECK(m.pixels == std::vector<std::uint32_t>{3, 13, 23});
  CHECK(m.centroid_row == doctest::Approx(1.0));
  CHECK(m.centroid_col == doctest::Approx(3.0));
  CHECK(m.contains({2, 3}));
  CHECK_FALSE(m.contains({2, 4}));
  const auto other = make_projection_mask(2, 6, 10, 10, {0});
  CHECK(superpoint_distance_2d(m, other) == doctest::Approx(std::hypot(1.0, 3.0)));
  const auto elsewhere = make_projection_mask(3, 6, 10, 10, {0});
  CHECK(error_code_of([&] { superpoint_distance_2d(m, elsewhere); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("visibility index agrees with per-pair projection") {
  auto s = facing_square(2.0f, 0.5f, 30, 0);
  append(s, facing_square(3.0f, 1.0f, 30, 1));
  std::vector<Superpoint> sps = {range_sp(0, 0, 450), range_sp(1, 450, 900), range_sp(2, 900, 1800)};
  std::vector<CameraView> views = {test::look_at(0, {0, -1.5, -1}, {0, 0, 2}, 64, 48, 40),
                                   test::look_at(1, {2, 0, 0}, {0, 0, 2.5}, 64, 48, 40),
                                   test::look_at(2, {-2, 1, 0}, {0, 0, 2.5}, 64, 48, 40)};
  ProjectionConfig config;
  const auto index = VisibilityIndex::build(s, sps, views, config, 2);
  for (std::size_t v = 0; v < views.size(); ++v) {
    const auto depth = render_depth(s, views[v]);
    for (std::size_t sp = 0; sp < sps.size(); ++sp) {
      const auto direct = project_superpoint(s, sps[sp], views[v], depth, config);
      REQUIRE(index.visible(sp, v) == direct.has_value());
      if (direct) CHECK(index.mask(sp, v)->pixels == direct->pixels);
    }
  }
  for (std::size_t a = 0; a < sps.size(); ++a) {
    for (std::size_t b = 0; b < sps.size(); ++b) {
      std::vector<std::size_t> expected;
      for (std::size_t v = 0; v < views.size(); ++v) {
        if (index.visible(a, v) && index.visible(b, v)) expected.push_back(v);
      }
      CHECK(index.co_visible_views(a, b) == expected);
    }
  }
}
