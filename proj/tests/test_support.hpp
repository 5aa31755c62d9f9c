#pragma once

#include "fixtures.hpp"
#include "supercut/error.hpp"
#include "supercut/rng.hpp"
#include "supercut/types.hpp"

#include <doctest/doctest.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace supercut::test {

/// Runs `fn` and returns the code of the supercut::Error it throws; fails the test otherwise.
inline ErrorCode error_code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected supercut::Error");
  return ErrorCode::kIo;
}

/// Regular grid of points on the plane z = z0 with upward normals.
inline SceneGeometry grid_plane(int nx, int ny, float spacing, float z0 = 0.0f, std::int32_t gt = 0) {
  SceneGeometry s;
  for (int y = 0; y < ny; ++y) {
    for (int x = 0; x < nx; ++x) {
      s.points.emplace_back(x * spacing, y * spacing, z0);
      s.normals.emplace_back(0.0f, 0.0f, 1.0f);
      s.colors.emplace_back(0.5f, 0.5f, 0.5f);
      s.gt_instance.push_back(gt);
    }
  }
  return s;
}

/// Random simple graph on n nodes with edge probability p (u < v, sorted).
inline std::vector<std::pair<std::uint32_t, std::uint32_t>> random_edges(Rng& rng, std::uint32_t n, double p) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::uint32_t u = 0; u < n; ++u) {
    for (std::uint32_t v = u + 1; v < n; ++v) {
      if (uniform(rng) < p) edges.emplace_back(u, v);
    }
  }
  return edges;
}

/// Camera at `eye` looking at `target` with world +z as up.
CameraView look_at(std::int32_t view_id, const Eigen::Vector3d& eye, const Eigen::Vector3d& target, int width,
                   int height, double focal);

/// A 2 x 1 m wall in the plane y = 0, cut into a 4 x 2 grid of superpoints and
/// seen by four cameras 3 m in front of it.
struct WallFixture {
  SceneGeometry scene;
  std::vector<Superpoint> sps;
  std::vector<CameraView> views;

  WallFixture() {
    const int nx = 80, ny = 40, cells_x = 4, cells_y = 2;
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        scene.points.emplace_back(-1.0f + 2.0f * i / (nx - 1), 0.0f, 0.5f + 1.0f * j / (ny - 1));
        scene.normals.emplace_back(0, -1, 0);
        scene.gt_instance.push_back(i < nx / 2 ? 0 : 1);
      }
    }
    sps.resize(cells_x * cells_y);
    for (int c = 0; c < cells_x * cells_y; ++c) sps[c].sp_id = 10 + 3 * c;
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const int cell = (j * cells_y / ny) * cells_x + i * cells_x / nx;
        sps[cell].point_indices.push_back(static_cast<std::uint32_t>(j * nx + i));
      }
    }
    for (auto& sp : sps) sp.centroid = compute_centroid(scene, sp.point_indices);
    for (int v = 0; v < 4; ++v) {
      views.push_back(test::look_at(7 - v, {-0.6 + 0.4 * v, -3.0, 0.8 + 0.15 * v}, {0, 0, 1}, 96, 72, 60));
    }
  }
};

}  // namespace supercut::test
