#pragma once

#include "supercut/feature_map.hpp"
#include "supercut/mask_oracle.hpp"
#include "supercut/pseudo_label.hpp"
#include "supercut/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace supercut {

struct SynthConfig {
  std::int32_t num_objects = 8;
  double room_size = 4.0;                     ///< meters, square footprint
  std::int32_t points_per_object = 2000;      ///< approximate; surfaces are sampled on a jittered grid
  std::int32_t points_on_walls_floor = 40000;
  std::int32_t camera_count = 24;
  std::int32_t image_width = 320;
  std::int32_t image_height = 240;
  double focal = 160.0;                       ///< pixels
  std::uint64_t seed = 0;
  NoiseConfig noise;                          ///< mask-oracle noise
  NoiseConfig instance_noise;                 ///< whole-image instance-map noise
};

void validate_config(const SynthConfig& config);

enum class ShapeKind { kBox, kCylinder };

struct SynthObject {
  ShapeKind kind = ShapeKind::kBox;
  std::int32_t gt_id = 0;
  double cx = 0.0, cy = 0.0;  ///< footprint centre
  double sx = 0.0, sy = 0.0;  ///< box extents (x, y); cylinder: sx = sy = 2 * radius
  double height = 0.0;
};

struct SynthScene {
  SceneGeometry scene;
  std::vector<CameraView> cameras;
  std::vector<SynthObject> objects;
};

inline constexpr double kMinObjectGap = 0.05;
inline constexpr std::int32_t kMaxPlacementAttempts = 1000;

/// Room of side room_size (floor at z = 0, walls 0.6 * room_size high, inward
/// normals) holding num_objects boxes and cylinders on the floor, separated by
/// at least 5 cm. Objects are often placed next to an earlier one with a 5-9 cm
/// gap. Cameras sit on a ring at 1.5 m height looking towards the room centre;
/// every object is checked to be seen (>= 50 projected pixels) by at least
/// max(3, camera_count / 4) cameras, resampling the layout otherwise.
SynthScene generate(const SynthConfig& config);

/// Minimum footprint distance between two objects.
double footprint_gap(const SynthObject& a, const SynthObject& b);

/// Stand-in for image-encoder features, driven by appearance like a real
/// encoder. Each cell of a grid `stride` times coarser than the image holds,
/// for the surface rendered at the cell centre, a fixed class direction
/// (floor, wall or object) plus `appearance_scale` times a fixed projection of
/// its color, plus per-cell Gaussian noise. Empty cells are zero. Both the
/// directions and the projection are shared by all scenes.
struct FeatureSynthConfig {
  std::int32_t stride = 8;
  double appearance_scale = 0.5;
  double noise_sigma = 0.05;
};

FeatureStore synth_feature_maps(const SceneGeometry& scene, std::span<const CameraView> views, std::uint64_t seed,
                                const FeatureSynthConfig& config = {}, std::size_t threads = 0);

/// Stand-in for whole-image instance segmentation: rendered GT labels renamed
/// to view-local ids 1..K (0 = empty). Noise is independent per view: each
/// instance merges into an adjacent one with p_merge, or is split in two by a
/// random line through its centroid with p_split.
InstanceMapStore synth_instance_maps(const SceneGeometry& scene, std::span<const CameraView> views,
                                     const NoiseConfig& noise, std::uint64_t seed, std::size_t threads = 0);

}  // namespace supercut
