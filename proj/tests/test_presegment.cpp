#include "supercut/presegment.hpp"

#include "test_support.hpp"

#include <algorithm>
#include <map>
#include <set>

using namespace supercut;
using supercut::test::error_code_of;

namespace {

/// Textbook merging with an explicit label array, relabelling on every union.
std::vector<std::vector<std::uint32_t>> reference_segments(std::vector<AffinityEdge> edges, std::size_t n,
                                                           const PresegmentConfig& config) {
  std::sort(edges.begin(), edges.end(), [](const auto& a, const auto& b) {
    return std::tie(a.dissimilarity, a.i, a.j) < std::tie(b.dissimilarity, b.i, b.j);
  });
  std::vector<std::uint32_t> label(n);
  for (std::uint32_t i = 0; i < n; ++i) label[i] = i;
  std::vector<double> thresh(n, config.k_thresh);
  auto size_of = [&](std::uint32_t l) { return static_cast<std::size_t>(std::count(label.begin(), label.end(), l)); };
  auto relabel = [&](std::uint32_t from, std::uint32_t to) {
    for (auto& l : label) {
      if (l == from) l = to;
    }
  };
  for (const auto& e : edges) {
    const auto a = label[e.i], b = label[e.j];
    if (a == b) continue;
    if (e.dissimilarity <= thresh[a] && e.dissimilarity <= thresh[b]) {
      relabel(b, a);
      thresh[a] = e.dissimilarity + config.k_thresh / static_cast<double>(size_of(a));
    }
  }
  for (const auto& e : edges) {
    const auto a = label[e.i], b = label[e.j];
    if (a != b && (size_of(a) < config.seg_min_verts || size_of(b) < config.seg_min_verts)) relabel(b, a);
  }
  std::map<std::uint32_t, std::vector<std::uint32_t>> groups;
  for (std::uint32_t p = 0; p < n; ++p) groups[label[p]].push_back(p);
  std::vector<std::vector<std::uint32_t>> out;
  for (auto& [l, pts] : groups) out.push_back(pts);
  std::sort(out.begin(), out.end());  // orders by smallest member
  return out;
}

}  // namespace

TEST_CASE("mesh affinity edges are the unique face edges") {
  SceneGeometry s = test::grid_plane(3, 3, 1.0f);
  s.faces = {{0, 1, 4}, {0, 4, 3}, {1, 2, 5}, {1, 5, 4}};
  s.normals[4] = Vec3f(0, 1, 0);
  const auto edges = build_affinity_edges(s, {});
  std::set<std::pair<std::uint32_t, std::uint32_t>> expected;
  for (const auto& f : s.faces) {
    for (int k = 0; k < 3; ++k) expected.insert({std::min(f[k], f[(k + 1) % 3]), std::max(f[k], f[(k + 1) % 3])});
  }
  REQUIRE(edges.size() == expected.size());
  auto it = expected.begin();
  for (const auto& e : edges) {
    CHECK(std::make_pair(e.i, e.j) == *it++);
    const float d = (e.i == 4 || e.j == 4) ? 1.0f : 0.0f;
    CHECK(e.dissimilarity == doctest::Approx(d));
  }
}

TEST_CASE("point-cloud affinity edges are the symmetrised k-NN graph") {
  Rng rng(17);
  SceneGeometry s;
  for (int i = 0; i < 120; ++i) {
    s.points.emplace_back(float(uniform(rng)), float(uniform(rng)), float(uniform(rng)));
    s.normals.emplace_back(0, 0, 1);
  }
  PresegmentConfig config;
  config.knn = 4;
  std::set<std::pair<std::uint32_t, std::uint32_t>> expected;
  for (std::uint32_t i = 0; i < s.size(); ++i) {
    std::vector<std::uint32_t> order;
    for (std::uint32_t j = 0; j < s.size(); ++j) {
      if (j != i) order.push_back(j);
    }
    std::sort(order.begin(), order.end(), [&](auto a, auto b) {
      const float da = (s.points[a] - s.points[i]).squaredNorm(), db = (s.points[b] - s.points[i]).squaredNorm();
      return da != db ? da < db : a < b;
    });
    for (int k = 0; k < 4; ++k) expected.insert({std::min(i, order[k]), std::max(i, order[k])});
  }
  const auto edges = build_affinity_edges(s, config);
  std::set<std::pair<std::uint32_t, std::uint32_t>> got;
  for (const auto& e : edges) got.insert({e.i, e.j});
  CHECK(got == expected);
  CHECK(got.size() == edges.size());
}

TEST_CASE("segmentation matches the reference merge on random graphs") {
  Rng rng(31);
  for (int trial = 0; trial < 60; ++trial) {
    const auto n = static_cast<std::uint32_t>(5 + uniform_index(rng, 80));
    std::vector<AffinityEdge> edges;
    for (auto [u, v] : test::random_edges(rng, n, 0.08)) {
      // Quantised weights exercise the (d, i, j) tie order.
      edges.push_back({u, v, static_cast<float>(uniform_index(rng, 10)) * 0.01f});
    }
    PresegmentConfig config;
    config.k_thresh = 0.005 + 0.1 * uniform(rng);
    config.seg_min_verts = 1 + static_cast<std::uint32_t>(uniform_index(rng, 8));
    const auto sps = felzenszwalb_segment(edges, n, config);
    const auto ref = reference_segments(edges, n, config);
    REQUIRE(sps.size() == ref.size());
    for (std::size_t i = 0; i < sps.size(); ++i) {
      CHECK(sps[i].sp_id == static_cast<std::int32_t>(i));
      CHECK(sps[i].point_indices == ref[i]);
    }
  }
}

TEST_CASE("a fold in a surface splits it and small segments are absorbed") {
  // Floor and wall meeting at a right angle, as one point cloud.
  SceneGeometry s = test::grid_plane(12, 12, 0.05f);
  for (int z = 1; z <= 8; ++z) {
    for (int x = 0; x < 12; ++x) {
      s.points.emplace_back(x * 0.05f, 0.0f - 0.0001f, z * 0.05f);
      s.normals.emplace_back(0, 1, 0);
    }
  }
  s.colors.clear();
  s.gt_instance.clear();
  PresegmentConfig config;
  config.seg_min_verts = 20;
  const auto sps = presegment(s, config);
  REQUIRE(sps.size() == 2);
  CHECK(sps[0].point_indices.size() == 144);
  CHECK(sps[1].point_indices.size() == 96);
  CHECK(sps[1].centroid.z() == doctest::Approx(0.225));

  config.seg_min_verts = 200;
  CHECK(presegment(s, config).size() == 1);
}

TEST_CASE("presegment config validation") {
  PresegmentConfig bad;
  bad.k_thresh = 0;
  CHECK(error_code_of([&] { validate_config(bad); }) == ErrorCode::kInvalidArgument);
  bad = {};
  bad.seg_min_verts = 0;
  CHECK(error_code_of([&] { validate_config(bad); }) == ErrorCode::kInvalidArgument);
}
