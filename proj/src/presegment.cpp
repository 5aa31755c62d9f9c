#include "supercut/presegment.hpp"

#include "supercut/error.hpp"
#include "supercut/knn.hpp"
#include "supercut/parallel.hpp"
#include "supercut/union_find.hpp"

#include <algorithm>
#include <map>

namespace supercut {

void validate_config(const PresegmentConfig& config) {
  if (!(config.k_thresh > 0)) throw Error(ErrorCode::kInvalidArgument, "k_thresh must be > 0");
  if (config.seg_min_verts < 1) throw Error(ErrorCode::kInvalidArgument, "seg_min_verts must be >= 1");
  if (config.knn < 1) throw Error(ErrorCode::kInvalidArgument, "knn must be >= 1");
}

float normal_dissimilarity(const Vec3f& a, const Vec3f& b) {
  return std::clamp(1.0f - a.dot(b), 0.0f, 2.0f);
}

std::vector<AffinityEdge> build_affinity_edges(const SceneGeometry& scene, const PresegmentConfig& config,
                                               std::size_t threads) {
  validate_config(config);
  if (scene.normals.size() != scene.size()) throw Error(ErrorCode::kInvalidArgument, "normals required");
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  if (scene.is_mesh()) {
    pairs.reserve(scene.faces.size() * 3);
    for (const auto& f : scene.faces) {
      for (int k = 0; k < 3; ++k) {
        auto a = f[k], b = f[(k + 1) % 3];
        if (a == b) continue;
        pairs.emplace_back(std::min(a, b), std::max(a, b));
      }
    }
  } else if (scene.size() > 1) {
    const KdTree tree(scene.points);
    std::vector<std::vector<std::uint32_t>> nbrs(scene.size());
    parallel_for(
        scene.size(),
        [&](std::size_t i) {
          nbrs[i] = tree.knn(scene.points[i], config.knn, static_cast<std::uint32_t>(i));
        },
        threads);
    pairs.reserve(scene.size() * config.knn);
    for (std::uint32_t i = 0; i < scene.size(); ++i) {
      for (auto j : nbrs[i]) pairs.emplace_back(std::min(i, j), std::max(i, j));
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

  std::vector<AffinityEdge> edges(pairs.size());
  for (std::size_t e = 0; e < pairs.size(); ++e) {
    const auto [i, j] = pairs[e];
    edges[e] = {i, j, normal_dissimilarity(scene.normals[i], scene.normals[j])};
  }
  return edges;
}

std::vector<Superpoint> felzenszwalb_segment(std::span<const AffinityEdge> edges, std::size_t num_points,
                                             const PresegmentConfig& config) {
  validate_config(config);
  if (num_points == 0) return {};
  std::vector<AffinityEdge> sorted(edges.begin(), edges.end());
  std::sort(sorted.begin(), sorted.end(), [](const AffinityEdge& a, const AffinityEdge& b) {
    if (a.dissimilarity != b.dissimilarity) return a.dissimilarity < b.dissimilarity;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });

  UnionFind uf(num_points);
  std::vector<double> threshold(num_points, config.k_thresh);  // Int(C) + k/|C|
  for (const auto& e : sorted) {
    if (e.i >= num_points || e.j >= num_points) throw Error(ErrorCode::kInvalidArgument, "edge index out of range");
    auto a = uf.find(e.i);
    auto b = uf.find(e.j);
    if (a == b) continue;
    const double d = e.dissimilarity;
    if (d <= threshold[a] && d <= threshold[b]) {
      const auto root = uf.unite(a, b);
      threshold[root] = d + config.k_thresh / uf.component_size(root);
    }
  }
  // Small segments join the neighbor across their cheapest edge (edges are still sorted).
  for (const auto& e : sorted) {
    auto a = uf.find(e.i);
    auto b = uf.find(e.j);
    if (a != b && (uf.component_size(a) < config.seg_min_verts || uf.component_size(b) < config.seg_min_verts)) {
      uf.unite(a, b);
    }
  }

  std::vector<std::int32_t> label_of_root(num_points, -1);
  std::vector<Superpoint> out;
  for (std::uint32_t p = 0; p < num_points; ++p) {
    const auto root = uf.find(p);
    if (label_of_root[root] < 0) {
      label_of_root[root] = static_cast<std::int32_t>(out.size());
      out.push_back({});
      out.back().sp_id = label_of_root[root];
    }
    out[label_of_root[root]].point_indices.push_back(p);
  }
  return out;
}

std::vector<Superpoint> presegment(const SceneGeometry& scene, const PresegmentConfig& config, std::size_t threads) {
  const auto edges = build_affinity_edges(scene, config, threads);
  auto sps = felzenszwalb_segment(edges, scene.size(), config);
  for (auto& sp : sps) sp.centroid = compute_centroid(scene, sp.point_indices);
  return sps;
}

}  // namespace supercut
