#pragma once

#include "supercut/types.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace supercut {

/// Loads a PLY (ascii or binary little-endian). Recognized vertex properties:
/// x y z, nx ny nz, red green blue (uchar or float), instance (any integer type).
/// Faces come from a `vertex_indices`/`vertex_index` list; polygons are fan-triangulated.
/// Missing normals are filled in (see fill_normals). Throws kParse with the byte
/// offset of the failure, kEmptyScene for zero vertices.
SceneGeometry load_scene(const std::filesystem::path& path);
SceneGeometry parse_ply(std::span<const std::uint8_t> bytes);

/// Writes binary little-endian PLY with float fields, so a reload is bit-exact.
void save_scene(const SceneGeometry& scene, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_ply(const SceneGeometry& scene);

/// Area-weighted vertex normals from faces; vertices not touched by any face
/// (and every vertex of a point cloud) get 16-NN PCA normals oriented towards
/// the bounding-box center.
void fill_normals(SceneGeometry& scene);

/// `.spg` superpoint graph container.
std::vector<std::uint8_t> encode_graph(const SuperpointGraph& graph);
SuperpointGraph decode_graph(std::span<const std::uint8_t> bytes);
void save_graph(const SuperpointGraph& graph, const std::filesystem::path& path);
SuperpointGraph load_graph(const std::filesystem::path& path);

/// Cameras: JSON array of {view_id, fx, fy, cx, cy, width, height, R[9] row-major, t[3]}.
std::vector<CameraView> load_cameras(const std::filesystem::path& path);
void save_cameras(std::span<const CameraView> views, const std::filesystem::path& path);

/// Superpoints: JSON array of {sp_id, point_indices}. Centroids are recomputed against `scene`.
std::vector<Superpoint> load_superpoints(const std::filesystem::path& path, const SceneGeometry& scene);
/// Without a scene: checks non-emptiness and disjointness only; centroids stay zero.
std::vector<Superpoint> load_superpoints(const std::filesystem::path& path);
void save_superpoints(std::span<const Superpoint> superpoints, const std::filesystem::path& path);

/// Segmentation: {assignment: [...], instances: [{id, confidence}]}.
InstanceSegmentation load_segmentation(const std::filesystem::path& path);
void save_segmentation(const InstanceSegmentation& seg, const std::filesystem::path& path);

}  // namespace supercut
