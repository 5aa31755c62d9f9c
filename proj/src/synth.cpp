#include "supercut/synth.hpp"

#include "supercut/error.hpp"
#include "supercut/parallel.hpp"
#include "supercut/projection.hpp"
#include "supercut/rng.hpp"
#include "supercut/union_find.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <map>

namespace supercut {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kWallMargin = 0.1;
constexpr double kCameraHeight = 1.5;
constexpr double kCameraRadius = 0.45;  // fraction of room_size
constexpr double kPlacementRadius = 0.32;  // objects stay inside this disc (fraction of room_size)
constexpr double kWallHeight = 0.6;     // fraction of room_size
constexpr int kMaxLayouts = 20;

struct Builder {
  SceneGeometry scene;

  void add(const Eigen::Vector3d& p, const Eigen::Vector3d& n, std::int32_t gt, const Eigen::Vector3f& color) {
    scene.points.push_back(p.cast<float>());
    scene.normals.push_back(n.normalized().cast<float>());
    scene.gt_instance.push_back(gt);
    scene.colors.push_back(color);
  }
};

/// Jittered grid over the rectangle origin + a*u + b*v, a in [0, lu], b in [0, lv].
template <typename Keep>
void sample_rect(Builder& b, Rng& rng, const Eigen::Vector3d& origin, const Eigen::Vector3d& u,
                 const Eigen::Vector3d& v, double lu, double lv, double spacing, const Eigen::Vector3d& normal,
                 std::int32_t gt, const Eigen::Vector3f& color, Keep keep) {
  const int nu = std::max(1, static_cast<int>(std::lround(lu / spacing)));
  const int nv = std::max(1, static_cast<int>(std::lround(lv / spacing)));
  for (int i = 0; i < nu; ++i) {
    for (int j = 0; j < nv; ++j) {
      const double a = (i + uniform(rng, 0.05, 0.95)) / nu * lu;
      const double c = (j + uniform(rng, 0.05, 0.95)) / nv * lv;
      const Eigen::Vector3d p = origin + a * u + c * v;
      if (keep(p)) b.add(p, normal, gt, color);
    }
  }
}

bool inside_footprint(const SynthObject& o, double x, double y) {
  if (o.kind == ShapeKind::kBox) return std::abs(x - o.cx) <= o.sx / 2 && std::abs(y - o.cy) <= o.sy / 2;
  return std::hypot(x - o.cx, y - o.cy) <= o.sx / 2;
}

/// Distance from the room centre to the farthest footprint point.
double footprint_radius(const SynthObject& o) {
  if (o.kind == ShapeKind::kCylinder) return std::hypot(o.cx, o.cy) + o.sx / 2;
  return std::hypot(std::abs(o.cx) + o.sx / 2, std::abs(o.cy) + o.sy / 2);
}

double object_area(const SynthObject& o) {
  if (o.kind == ShapeKind::kBox) return o.sx * o.sy + 2.0 * (o.sx + o.sy) * o.height;
  const double r = o.sx / 2;
  return kPi * r * r + 2.0 * kPi * r * o.height;
}

Eigen::Vector3f hue_color(double h) {
  const double r = 0.5 + 0.5 * std::cos(2 * kPi * h), g = 0.5 + 0.5 * std::cos(2 * kPi * (h - 1.0 / 3));
  const double b = 0.5 + 0.5 * std::cos(2 * kPi * (h - 2.0 / 3));
  return {static_cast<float>(r), static_cast<float>(g), static_cast<float>(b)};
}

void sample_object(Builder& b, Rng& rng, const SynthObject& o, std::int32_t points) {
  const double spacing = std::sqrt(object_area(o) / points);
  const auto color = hue_color(uniform(rng));
  const auto all = [](const Eigen::Vector3d&) { return true; };
  const Eigen::Vector3d ex(1, 0, 0), ey(0, 1, 0), ez(0, 0, 1);
  if (o.kind == ShapeKind::kBox) {
    const double x0 = o.cx - o.sx / 2, y0 = o.cy - o.sy / 2, x1 = o.cx + o.sx / 2, y1 = o.cy + o.sy / 2;
    sample_rect(b, rng, {x0, y0, o.height}, ex, ey, o.sx, o.sy, spacing, ez, o.gt_id, color, all);
    sample_rect(b, rng, {x0, y0, 0}, ex, ez, o.sx, o.height, spacing, -ey, o.gt_id, color, all);
    sample_rect(b, rng, {x0, y1, 0}, ex, ez, o.sx, o.height, spacing, ey, o.gt_id, color, all);
    sample_rect(b, rng, {x0, y0, 0}, ey, ez, o.sy, o.height, spacing, -ex, o.gt_id, color, all);
    sample_rect(b, rng, {x1, y0, 0}, ey, ez, o.sy, o.height, spacing, ex, o.gt_id, color, all);
    return;
  }
  const double r = o.sx / 2;
  const int nt = std::max(3, static_cast<int>(std::lround(2 * kPi * r / spacing)));
  const int nz = std::max(1, static_cast<int>(std::lround(o.height / spacing)));
  for (int i = 0; i < nt; ++i) {
    for (int j = 0; j < nz; ++j) {
      const double t = 2 * kPi * (i + uniform(rng, 0.05, 0.95)) / nt;
      const double z = (j + uniform(rng, 0.05, 0.95)) / nz * o.height;
      const Eigen::Vector3d n(std::cos(t), std::sin(t), 0);
      b.add(Eigen::Vector3d(o.cx, o.cy, z) + r * n, n, o.gt_id, color);
    }
  }
  sample_rect(b, rng, {o.cx - r, o.cy - r, o.height}, ex, ey, 2 * r, 2 * r, spacing, ez, o.gt_id, color,
              [&](const Eigen::Vector3d& p) { return std::hypot(p.x() - o.cx, p.y() - o.cy) < r; });
}

CameraView look_at(std::int32_t id, const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                   const SynthConfig& config) {
  const Eigen::Vector3d f = (target - eye).normalized();
  const Eigen::Vector3d r = f.cross(Eigen::Vector3d::UnitZ()).normalized();
  const Eigen::Vector3d d = f.cross(r);
  CameraView v;
  v.view_id = id;
  v.fx = v.fy = config.focal;
  v.width = config.image_width;
  v.height = config.image_height;
  v.cx = config.image_width / 2.0;
  v.cy = config.image_height / 2.0;
  v.rotation.row(0) = r.transpose();
  v.rotation.row(1) = d.transpose();
  v.rotation.row(2) = f.transpose();
  v.translation = -v.rotation * eye;
  return v;
}

std::vector<SynthObject> place_objects(const SynthConfig& config, Rng& rng) {
  const double reach = kPlacementRadius * config.room_size;
  std::vector<SynthObject> objects;
  for (std::int32_t i = 0; i < config.num_objects; ++i) {
    bool placed = false;
    for (std::int32_t attempt = 0; attempt < kMaxPlacementAttempts && !placed; ++attempt) {
      SynthObject o;
      o.gt_id = i;
      o.kind = uniform(rng) < 0.6 ? ShapeKind::kBox : ShapeKind::kCylinder;
      if (o.kind == ShapeKind::kBox) {
        o.sx = uniform(rng, 0.25, 0.7);
        o.sy = uniform(rng, 0.25, 0.7);
      } else {
        o.sx = o.sy = 2.0 * uniform(rng, 0.15, 0.33);
      }
      o.height = uniform(rng, 0.3, 0.9);
      if (!objects.empty() && uniform(rng) < 0.5) {
        // Next to an earlier object along a roughly diagonal direction, so the
        // two come within 10 cm at a corner while their faces stay in view.
        const auto& anchor = objects[uniform_index(rng, objects.size())];
        const double theta = kPi / 4 + kPi / 2 * static_cast<double>(uniform_index(rng, 4)) +
                             uniform(rng, -kPi / 12, kPi / 12);
        const double gap = uniform(rng, kMinObjectGap, 0.09);
        double lo = 0.0, hi = 3.0;
        for (int it = 0; it < 60; ++it) {
          const double mid = 0.5 * (lo + hi);
          o.cx = anchor.cx + mid * std::cos(theta);
          o.cy = anchor.cy + mid * std::sin(theta);
          (footprint_gap(o, anchor) < gap ? lo : hi) = mid;
        }
        o.cx = anchor.cx + hi * std::cos(theta);
        o.cy = anchor.cy + hi * std::sin(theta);
      } else {
        o.cx = uniform(rng, -reach, reach);
        o.cy = uniform(rng, -reach, reach);
      }
      if (footprint_radius(o) > reach) continue;
      placed = std::all_of(objects.begin(), objects.end(),
                           [&](const SynthObject& other) { return footprint_gap(o, other) >= kMinObjectGap; });
      if (placed) objects.push_back(o);
    }
    if (!placed) {
      throw Error(ErrorCode::kPlacement, "could not place object " + std::to_string(i) + " without overlap after " +
                                             std::to_string(kMaxPlacementAttempts) +
                                             " attempts; use fewer objects or a larger room");
    }
  }
  return objects;
}

SynthScene build_scene(const SynthConfig& config, Rng& rng) {
  SynthScene out;
  out.objects = place_objects(config, rng);
  Builder b;
  const double room = config.room_size, half = room / 2, wall_h = kWallHeight * room;
  const double spacing = std::sqrt((room * room + 4 * room * wall_h) / config.points_on_walls_floor);
  const Eigen::Vector3d ex(1, 0, 0), ey(0, 1, 0), ez(0, 0, 1);
  const Eigen::Vector3f floor_color(0.55f, 0.5f, 0.45f), wall_color(0.85f, 0.82f, 0.75f);
  sample_rect(b, rng, {-half, -half, 0}, ex, ey, room, room, spacing, ez, kInstanceFloor, floor_color,
              [&](const Eigen::Vector3d& p) {
                return std::none_of(out.objects.begin(), out.objects.end(),
                                    [&](const SynthObject& o) { return inside_footprint(o, p.x(), p.y()); });
              });
  const auto all = [](const Eigen::Vector3d&) { return true; };
  sample_rect(b, rng, {-half, -half, 0}, ex, ez, room, wall_h, spacing, ey, kInstanceWall, wall_color, all);
  sample_rect(b, rng, {-half, half, 0}, ex, ez, room, wall_h, spacing, -ey, kInstanceWall, wall_color, all);
  sample_rect(b, rng, {-half, -half, 0}, ey, ez, room, wall_h, spacing, ex, kInstanceWall, wall_color, all);
  sample_rect(b, rng, {half, -half, 0}, ey, ez, room, wall_h, spacing, -ex, kInstanceWall, wall_color, all);
  for (const auto& o : out.objects) sample_object(b, rng, o, config.points_per_object);
  out.scene = std::move(b.scene);

  for (std::int32_t i = 0; i < config.camera_count; ++i) {
    const double step = 2 * kPi / config.camera_count;
    const double t = step * i + uniform(rng, -0.2, 0.2) * step;
    const Eigen::Vector3d eye(kCameraRadius * room * std::cos(t), kCameraRadius * room * std::sin(t), kCameraHeight);
    const Eigen::Vector3d target(uniform(rng, -0.1, 0.1) * room, uniform(rng, -0.1, 0.1) * room, 0.3);
    out.cameras.push_back(look_at(i, eye, target, config));
  }
  return out;
}

bool covered(const SynthScene& s, const SynthConfig& config) {
  const auto needed = static_cast<std::size_t>(std::max(3, config.camera_count / 4));
  std::vector<Superpoint> parts(s.objects.size());
  for (std::uint32_t p = 0; p < s.scene.size(); ++p) {
    const auto g = s.scene.gt_instance[p];
    if (g >= 0) parts[static_cast<std::size_t>(g)].point_indices.push_back(p);
  }
  std::vector<std::size_t> seen(s.objects.size(), 0);
  for (const auto& view : s.cameras) {
    const auto depth = render_depth(s.scene, view);
    for (std::size_t k = 0; k < parts.size(); ++k) {
      if (project_superpoint(s.scene, parts[k], view, depth, ProjectionConfig{})) ++seen[k];
    }
  }
  return std::all_of(seen.begin(), seen.end(), [&](std::size_t n) { return n >= needed; });
}

Eigen::VectorXf random_direction(std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXf v(static_cast<Eigen::Index>(kFeatureDim));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = static_cast<float>(normal(rng));
  return v.normalized();
}

}  // namespace

void validate_config(const SynthConfig& config) {
  auto bad = [](const std::string& msg) { throw Error(ErrorCode::kInvalidArgument, "synth: " + msg); };
  if (config.num_objects < 1) bad("num_objects must be >= 1");
  if (config.camera_count < 1) bad("camera_count must be >= 1");
  if (config.points_per_object < 1 || config.points_on_walls_floor < 1) bad("point counts must be >= 1");
  if (!(config.room_size >= 2.0 * (kWallMargin + 0.4))) bad("room_size too small");
  if (config.image_width < 8 || config.image_height < 8 || !(config.focal > 0.0)) bad("invalid camera intrinsics");
  validate_noise(config.noise);
  validate_noise(config.instance_noise);
}

double footprint_gap(const SynthObject& a, const SynthObject& b) {
  if (a.kind == ShapeKind::kBox && b.kind == ShapeKind::kBox) {
    const double dx = std::max(0.0, std::abs(a.cx - b.cx) - (a.sx + b.sx) / 2);
    const double dy = std::max(0.0, std::abs(a.cy - b.cy) - (a.sy + b.sy) / 2);
    return std::hypot(dx, dy);
  }
  if (a.kind == ShapeKind::kCylinder && b.kind == ShapeKind::kCylinder) {
    return std::max(0.0, std::hypot(a.cx - b.cx, a.cy - b.cy) - a.sx / 2 - b.sx / 2);
  }
  const auto& box = a.kind == ShapeKind::kBox ? a : b;
  const auto& cyl = a.kind == ShapeKind::kBox ? b : a;
  const double dx = std::max(0.0, std::abs(cyl.cx - box.cx) - box.sx / 2);
  const double dy = std::max(0.0, std::abs(cyl.cy - box.cy) - box.sy / 2);
  return std::max(0.0, std::hypot(dx, dy) - cyl.sx / 2);
}

SynthScene generate(const SynthConfig& config) {
  validate_config(config);
  for (int layout = 0; layout < kMaxLayouts; ++layout) {
    Rng rng(derive_seed(config.seed, {layout}));
    auto s = build_scene(config, rng);
    if (covered(s, config)) return s;
  }
  throw Error(ErrorCode::kPlacement, "no layout of " + std::to_string(config.num_objects) + " objects is seen by " +
                                         std::to_string(std::max(3, config.camera_count / 4)) +
                                         " cameras; use fewer objects or more cameras");
}

FeatureStore synth_feature_maps(const SceneGeometry& scene, std::span<const CameraView> views, std::uint64_t seed,
                                const FeatureSynthConfig& config, std::size_t threads) {
  if (config.stride < 1) throw Error(ErrorCode::kInvalidArgument, "feature stride must be >= 1");
  if (!scene.has_gt() || !scene.has_colors()) {
    throw Error(ErrorCode::kInvalidArgument, "synthetic features need instance labels and colors");
  }
  // The class directions and the color projection are shared by every scene.
  constexpr std::uint64_t kClassSeed = 0x5eedc1a55ULL;
  const Eigen::VectorXf floor_dir = random_direction(derive_seed(kClassSeed, {0}));
  const Eigen::VectorXf wall_dir = random_direction(derive_seed(kClassSeed, {1}));
  const Eigen::VectorXf object_dir = random_direction(derive_seed(kClassSeed, {2}));
  Eigen::MatrixXf color_proj(static_cast<Eigen::Index>(kFeatureDim), 3);
  for (int k = 0; k < 3; ++k) color_proj.col(k) = random_direction(derive_seed(kClassSeed, {3 + k}));
  const auto scale = static_cast<float>(config.appearance_scale);
  std::vector<FeatureMap> maps(views.size());
  parallel_for(
      views.size(),
      [&](std::size_t i) {
        const auto& view = views[i];
        const auto render = render_scene(scene, view);
        FeatureMap fm;
        fm.view_id = view.view_id;
        fm.height = (view.height + config.stride - 1) / config.stride;
        fm.width = (view.width + config.stride - 1) / config.stride;
        fm.data.assign(static_cast<std::size_t>(fm.height) * fm.width * kFeatureDim, 0.0f);
        Rng rng(derive_seed(seed, {view.view_id, 91}));
        Eigen::VectorXf cell(static_cast<Eigen::Index>(kFeatureDim));
        for (std::int32_t r = 0; r < fm.height; ++r) {
          for (std::int32_t c = 0; c < fm.width; ++c) {
            const auto pr = std::min(view.height - 1, r * config.stride + config.stride / 2);
            const auto pc = std::min(view.width - 1, c * config.stride + config.stride / 2);
            const auto src = render.source_point[static_cast<std::size_t>(pr) * view.width + pc];
            if (src >= 0) {
              const auto p = static_cast<std::size_t>(src);
              const auto label = scene.gt_instance[p];
              const Eigen::Vector3f centered = 2.0f * (scene.colors[p] - Eigen::Vector3f::Constant(0.5f));
              cell = label == kInstanceFloor ? floor_dir : label == kInstanceWall ? wall_dir : object_dir;
              cell += scale * (color_proj * centered);
            }
            float* out = fm.data.data() + (static_cast<std::size_t>(r) * fm.width + c) * kFeatureDim;
            for (std::size_t k = 0; k < kFeatureDim; ++k) {
              const double noise = config.noise_sigma * normal(rng);
              if (src >= 0) out[k] = cell(static_cast<Eigen::Index>(k)) + static_cast<float>(noise);
            }
          }
        }
        maps[i] = std::move(fm);
      },
      threads);
  FeatureStore store;
  for (auto& m : maps) store.add(std::move(m));
  return store;
}

InstanceMapStore synth_instance_maps(const SceneGeometry& scene, std::span<const CameraView> views,
                                     const NoiseConfig& noise, std::uint64_t seed, std::size_t threads) {
  validate_noise(noise);
  std::vector<InstanceMap> maps(views.size());
  parallel_for(
      views.size(),
      [&](std::size_t vi) {
        const auto& view = views[vi];
        const auto labels = render_label_image(scene, view);
        const auto w = view.width, h = view.height;
        // Dense index per GT label present in the view.
        std::map<std::int32_t, std::uint32_t> index;
        for (auto l : labels) {
          if (l != SyntheticOracle::kBackgroundLabel) index.emplace(l, 0);
        }
        std::vector<std::int32_t> present;
        for (auto& [l, i] : index) {
          i = static_cast<std::uint32_t>(present.size());
          present.push_back(l);
        }
        std::vector<std::vector<std::uint8_t>> touches(present.size(), std::vector<std::uint8_t>(present.size(), 0));
        std::vector<double> cr(present.size(), 0.0), cc(present.size(), 0.0);
        std::vector<std::size_t> count(present.size(), 0);
        for (std::int32_t r = 0; r < h; ++r) {
          for (std::int32_t c = 0; c < w; ++c) {
            const auto l = labels[static_cast<std::size_t>(r) * w + c];
            if (l == SyntheticOracle::kBackgroundLabel) continue;
            const auto a = index.at(l);
            cr[a] += r;
            cc[a] += c;
            ++count[a];
            if (c + 1 < w) {
              const auto l2 = labels[static_cast<std::size_t>(r) * w + c + 1];
              if (l2 != l && l2 != SyntheticOracle::kBackgroundLabel) touches[a][index.at(l2)] = touches[index.at(l2)][a] = 1;
            }
            if (r + 1 < h) {
              const auto l2 = labels[static_cast<std::size_t>(r + 1) * w + c];
              if (l2 != l && l2 != SyntheticOracle::kBackgroundLabel) touches[a][index.at(l2)] = touches[index.at(l2)][a] = 1;
            }
          }
        }
        UnionFind groups(present.size());
        std::vector<std::uint8_t> split(present.size(), 0);
        std::vector<double> angle(present.size(), 0.0);
        for (std::size_t a = 0; a < present.size(); ++a) {
          Rng rng(derive_seed(seed, {view.view_id, present[a], 13}));
          const double u_merge = uniform(rng), u_split = uniform(rng);
          angle[a] = uniform(rng, 0.0, 2 * kPi);
          std::vector<std::uint32_t> nbrs;
          for (std::size_t b = 0; b < present.size(); ++b) {
            if (touches[a][b]) nbrs.push_back(static_cast<std::uint32_t>(b));
          }
          const auto pick = nbrs.empty() ? 0 : uniform_index(rng, nbrs.size());
          if (u_merge < noise.p_merge && !nbrs.empty()) groups.unite(static_cast<std::uint32_t>(a), nbrs[pick]);
          if (u_split < noise.p_split) split[a] = 1;
          cr[a] /= static_cast<double>(count[a]);
          cc[a] /= static_cast<double>(count[a]);
        }
        // Region key: group root, plus a flag for the far side of a split.
        InstanceMap map;
        map.view_id = view.view_id;
        map.height = h;
        map.width = w;
        map.labels.assign(labels.size(), 0);
        std::map<std::uint64_t, std::uint16_t> local;
        for (std::size_t p = 0; p < labels.size(); ++p) {
          const auto l = labels[p];
          if (l == SyntheticOracle::kBackgroundLabel) continue;
          const auto a = index.at(l);
          std::uint64_t key = static_cast<std::uint64_t>(groups.find(a)) << 1;
          if (split[a]) {
            const double r = static_cast<double>(p / w) - cr[a], c = static_cast<double>(p % w) - cc[a];
            if (r * std::sin(angle[a]) + c * std::cos(angle[a]) < 0.0) key = (static_cast<std::uint64_t>(a) << 33) | 1u;
          }
          auto it = local.find(key);
          if (it == local.end()) it = local.emplace(key, static_cast<std::uint16_t>(local.size() + 1)).first;
          map.labels[p] = it->second;
        }
        maps[vi] = std::move(map);
      },
      threads);
  InstanceMapStore store;
  for (auto& m : maps) store.add(std::move(m));
  return store;
}

}  // namespace supercut
