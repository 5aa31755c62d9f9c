#include "supercut/graph_build.hpp"

#include "supercut/error.hpp"
#include "supercut/parallel.hpp"
#include "supercut/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

namespace supercut {

namespace {

using EdgeList = std::vector<std::pair<std::uint32_t, std::uint32_t>>;

std::uint64_t pair_key(std::uint32_t a, std::uint32_t b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

std::vector<std::uint32_t> point_owner(const SceneGeometry& scene, std::span<const Superpoint> superpoints) {
  std::vector<std::uint32_t> owner(scene.size(), UINT32_MAX);
  for (std::size_t s = 0; s < superpoints.size(); ++s) {
    for (auto p : superpoints[s].point_indices) {
      if (p >= owner.size()) throw Error(ErrorCode::kInvalidArgument, "superpoint index out of range");
      owner[p] = static_cast<std::uint32_t>(s);
    }
  }
  return owner;
}

EdgeList sorted_pairs(const std::unordered_set<std::uint64_t>& keys) {
  EdgeList out;
  out.reserve(keys.size());
  for (auto k : keys) out.emplace_back(static_cast<std::uint32_t>(k >> 32), static_cast<std::uint32_t>(k));
  std::sort(out.begin(), out.end());
  return out;
}

struct PromptPlan {
  std::vector<PromptSet> prompts;
  std::vector<std::pair<std::size_t, std::size_t>> slots;  // (view index, sp index) per prompt
  std::vector<std::size_t> first_edge;                     // first edge needing each prompt
};

PromptPlan plan_prompts(const VisibilityIndex& visibility, std::span<const Superpoint> superpoints,
                        std::span<const std::pair<std::uint32_t, std::uint32_t>> edges,
                        const GraphBuildConfig& config) {
  const auto ns = visibility.num_superpoints();
  std::vector<std::int64_t> first(visibility.num_views() * ns, -1);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    for (auto vi : edge_views(visibility, edges[e].first, edges[e].second, config)) {
      for (auto s : {edges[e].first, edges[e].second}) {
        auto& slot = first[vi * ns + s];
        if (slot < 0) slot = static_cast<std::int64_t>(e);
      }
    }
  }
  std::vector<std::size_t> order(visibility.num_views());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return visibility.view(a).view_id < visibility.view(b).view_id; });
  std::vector<std::size_t> sp_order(ns);
  for (std::size_t i = 0; i < ns; ++i) sp_order[i] = i;
  std::sort(sp_order.begin(), sp_order.end(),
            [&](std::size_t a, std::size_t b) { return superpoints[a].sp_id < superpoints[b].sp_id; });

  PromptPlan plan;
  for (auto vi : order) {
    for (auto s : sp_order) {
      if (first[vi * ns + s] < 0) continue;
      plan.slots.emplace_back(vi, s);
      plan.first_edge.push_back(static_cast<std::size_t>(first[vi * ns + s]));
    }
  }
  plan.prompts.resize(plan.slots.size());
  parallel_for(plan.slots.size(), [&](std::size_t i) {
    const auto [vi, s] = plan.slots[i];
    plan.prompts[i] = sample_prompts(*visibility.mask(s, vi), config.prompt_count);
  });
  return plan;
}

}  // namespace

EdgeList build_adjacency(const SceneGeometry& scene, std::span<const Superpoint> superpoints,
                         const AdjacencyConfig& config) {
  const auto owner = point_owner(scene, superpoints);
  std::unordered_set<std::uint64_t> keys;
  if (config.mode == AdjacencyMode::kMeshSharedEdge) {
    if (!scene.is_mesh()) throw Error(ErrorCode::kInvalidArgument, "mesh adjacency requires a mesh scene");
    for (const auto& f : scene.faces) {
      for (int k = 0; k < 3; ++k) {
        const auto a = owner[f[k]], b = owner[f[(k + 1) % 3]];
        if (a != b && a != UINT32_MAX && b != UINT32_MAX) keys.insert(pair_key(a, b));
      }
    }
    return sorted_pairs(keys);
  }

  const double thr = config.distance_threshold;
  if (!(thr > 0.0)) throw Error(ErrorCode::kInvalidArgument, "distance threshold must be > 0");
  const double thr2 = thr * thr;
  auto cell_of = [&](const Vec3f& p) {
    return std::array<std::int64_t, 3>{static_cast<std::int64_t>(std::floor(p.x() / thr)),
                                       static_cast<std::int64_t>(std::floor(p.y() / thr)),
                                       static_cast<std::int64_t>(std::floor(p.z() / thr))};
  };
  auto cell_key = [](std::int64_t x, std::int64_t y, std::int64_t z) {
    return splitmix64(static_cast<std::uint64_t>(x) ^ splitmix64(static_cast<std::uint64_t>(y) ^
                                                                 splitmix64(static_cast<std::uint64_t>(z))));
  };
  struct Cell {
    std::array<std::int64_t, 3> coord;
    std::vector<std::uint32_t> points;
  };
  std::unordered_map<std::uint64_t, std::vector<Cell>> grid;
  auto find_cell = [&](const std::array<std::int64_t, 3>& c) -> const Cell* {
    const auto it = grid.find(cell_key(c[0], c[1], c[2]));
    if (it == grid.end()) return nullptr;
    for (const auto& cell : it->second) {
      if (cell.coord == c) return &cell;
    }
    return nullptr;
  };
  for (std::uint32_t i = 0; i < scene.size(); ++i) {
    if (owner[i] == UINT32_MAX) continue;
    const auto c = cell_of(scene.points[i]);
    auto& bucket = grid[cell_key(c[0], c[1], c[2])];
    auto it = std::find_if(bucket.begin(), bucket.end(), [&](const Cell& cell) { return cell.coord == c; });
    if (it == bucket.end()) {
      bucket.push_back({c, {}});
      it = std::prev(bucket.end());
    }
    it->points.push_back(i);
  }
  for (std::uint32_t i = 0; i < scene.size(); ++i) {
    if (owner[i] == UINT32_MAX) continue;
    const auto c = cell_of(scene.points[i]);
    const Vec3f& p = scene.points[i];
    for (std::int64_t dx = -1; dx <= 1; ++dx) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dz = -1; dz <= 1; ++dz) {
          const auto* cell = find_cell({c[0] + dx, c[1] + dy, c[2] + dz});
          if (cell == nullptr) continue;
          for (auto j : cell->points) {
            if (j <= i || owner[j] == owner[i]) continue;
            const double d2 = (p.cast<double>() - scene.points[j].cast<double>()).squaredNorm();
            if (d2 < thr2) keys.insert(pair_key(owner[i], owner[j]));
          }
        }
      }
    }
  }
  return sorted_pairs(keys);
}

double single_view_weight(const MaskCandidate& a, const MaskCandidate& b) {
  const auto area_a = a.area(), area_b = b.area();
  if (area_a == 0 || area_b == 0) return 0.0;
  const auto inter = static_cast<double>(intersection_area(a.mask, b.mask));
  return std::max(inter / static_cast<double>(area_a), inter / static_cast<double>(area_b));
}

std::vector<double> aggregation_coefficients(std::span<const EdgeObservation> observations) {
  std::vector<double> c(observations.size());
  double total = 0.0;
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const auto& o = observations[i];
    c[i] = o.dist_2d * o.conf_a * o.conf_b;
    total += c[i];
  }
  for (auto& x : c) x = total > 0.0 ? x / total : 1.0 / static_cast<double>(observations.size());
  return c;
}

double aggregate_edge_weight(std::span<const EdgeObservation> observations) {
  if (observations.empty()) return 0.0;
  const auto c = aggregation_coefficients(observations);
  double w = 0.0;
  for (std::size_t i = 0; i < observations.size(); ++i) w += c[i] * observations[i].w;
  return std::clamp(w, 0.0, 1.0);
}

std::vector<float> compute_node_feature(std::size_t sp_index, std::int32_t sp_id, const VisibilityIndex& visibility,
                                        const FeatureStore& features, std::uint32_t samples_per_view,
                                        std::uint64_t seed, bool* invisible) {
  if (samples_per_view < 1) throw Error(ErrorCode::kInvalidArgument, "samples_per_view must be >= 1");
  std::vector<double> acc(kFeatureDim, 0.0);
  std::size_t views = 0;
  for (auto vi : visibility.views_of(sp_index)) {
    const auto& view = visibility.view(vi);
    const auto* mask = visibility.mask(sp_index, vi);
    const auto& fm = features.get(view.view_id);
    Rng rng(derive_seed(seed, {sp_id, view.view_id}));
    std::vector<double> view_acc(kFeatureDim, 0.0);
    for (std::uint32_t s = 0; s < samples_per_view; ++s) {
      const auto px = mask->pixel(uniform_index(rng, mask->pixel_count()));
      const auto f = interpolate_feature(fm, px, view.height, view.width);
      for (std::size_t k = 0; k < kFeatureDim; ++k) view_acc[k] += f[k];
    }
    for (std::size_t k = 0; k < kFeatureDim; ++k) acc[k] += view_acc[k] / samples_per_view;
    ++views;
  }
  if (invisible != nullptr) *invisible = views == 0;
  std::vector<float> out(kFeatureDim, 0.0f);
  if (views > 0) {
    for (std::size_t k = 0; k < kFeatureDim; ++k) out[k] = static_cast<float>(acc[k] / static_cast<double>(views));
  }
  return out;
}

void validate_config(const GraphBuildConfig& config) {
  if (config.adjacency.mode == AdjacencyMode::kDistance && !(config.adjacency.distance_threshold > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "distance_threshold must be > 0");
  }
  if (config.prompt_count < 1 || config.prompt_count > kMaxPromptCount) {
    throw Error(ErrorCode::kInvalidArgument, "prompt_count must be in [1, 16]");
  }
  if (config.samples_per_view < 1) throw Error(ErrorCode::kInvalidArgument, "samples_per_view must be >= 1");
  if (config.projection.occlusion_tol < 0.0) throw Error(ErrorCode::kInvalidArgument, "occlusion_tol must be >= 0");
}

std::vector<std::size_t> edge_views(const VisibilityIndex& visibility, std::uint32_t u, std::uint32_t v,
                                    const GraphBuildConfig& config) {
  auto views = visibility.co_visible_views(u, v);
  if (config.max_views_per_edge > 0 && views.size() > config.max_views_per_edge) {
    views.resize(config.max_views_per_edge);
  }
  return views;
}

std::vector<PromptSet> collect_prompt_requests(const VisibilityIndex& visibility, std::span<const Superpoint> superpoints,
                                               std::span<const std::pair<std::uint32_t, std::uint32_t>> edges,
                                               const GraphBuildConfig& config) {
  return plan_prompts(visibility, superpoints, edges, config).prompts;
}

AnnotateResult annotate_graph(const SceneGeometry& scene, std::span<const Superpoint> superpoints,
                              std::span<const CameraView> views, const MaskOracle& oracle,
                              const FeatureStore* features, const GraphBuildConfig& config, std::size_t threads) {
  validate_config(config);
  const auto visibility = VisibilityIndex::build(scene, superpoints, views, config.projection, threads);
  const auto edges = build_adjacency(scene, superpoints, config.adjacency);
  return annotate_graph(superpoints, visibility, edges, oracle, features, config, threads);
}

AnnotateResult annotate_graph(std::span<const Superpoint> superpoints, const VisibilityIndex& visibility,
                              std::span<const std::pair<std::uint32_t, std::uint32_t>> edges,
                              const MaskOracle& oracle, const FeatureStore* features,
                              const GraphBuildConfig& config, std::size_t threads) {
  validate_config(config);
  const auto ns = superpoints.size();
  const auto plan = plan_prompts(visibility, superpoints, edges, config);

  // One oracle query per (view, superpoint); keep only the selected mask.
  std::vector<MaskCandidate> selected(plan.prompts.size());
  parallel_for(
      plan.prompts.size(),
      [&](std::size_t i) {
        try {
          selected[i] = select_mask(oracle.query(plan.prompts[i]));
        } catch (const Error& e) {
          const auto& edge = edges[plan.first_edge[i]];
          throw Error(e.code(), "edge (" + std::to_string(superpoints[edge.first].sp_id) + ", " +
                                    std::to_string(superpoints[edge.second].sp_id) + "): " + e.what());
        }
      },
      threads);
  std::vector<std::int64_t> slot(visibility.num_views() * ns, -1);
  for (std::size_t i = 0; i < plan.slots.size(); ++i) {
    slot[plan.slots[i].first * ns + plan.slots[i].second] = static_cast<std::int64_t>(i);
  }

  AnnotateResult result;
  result.graph.edges.resize(edges.size());
  parallel_for(
      edges.size(),
      [&](std::size_t e) {
        const auto [u, v] = edges[e];
        std::vector<EdgeObservation> obs;
        for (auto vi : edge_views(visibility, u, v, config)) {
          const auto& ma = selected[static_cast<std::size_t>(slot[vi * ns + u])];
          const auto& mb = selected[static_cast<std::size_t>(slot[vi * ns + v])];
          obs.push_back({visibility.view(vi).view_id, single_view_weight(ma, mb), ma.confidence, mb.confidence,
                         superpoint_distance_2d(*visibility.mask(u, vi), *visibility.mask(v, vi))});
        }
        auto& edge = result.graph.edges[e];
        edge.u = u;
        edge.v = v;
        edge.w_sam = static_cast<float>(aggregate_edge_weight(obs));
      },
      threads);

  result.graph.nodes.resize(ns);
  std::vector<std::uint8_t> invisible(ns, 0);
  parallel_for(
      ns,
      [&](std::size_t s) {
        auto& node = result.graph.nodes[s];
        node.sp_id = static_cast<std::uint32_t>(superpoints[s].sp_id);
        if (features != nullptr) {
          bool inv = false;
          node.feature = compute_node_feature(s, superpoints[s].sp_id, visibility, *features, config.samples_per_view,
                                              config.seed, &inv);
          invisible[s] = inv;
        }
      },
      threads);
  for (std::size_t s = 0; s < ns; ++s) {
    if (invisible[s]) result.invisible_superpoints.push_back(superpoints[s].sp_id);
  }
  validate_graph(result.graph);
  return result;
}

}  // namespace supercut
