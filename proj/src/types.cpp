#include "supercut/types.hpp"

#include "supercut/error.hpp"

#include <Eigen/LU>

#include <cmath>
#include <set>
#include <sstream>
#include <unordered_set>

namespace supercut {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kParse: return "PARSE_ERROR";
    case ErrorCode::kEmptyScene: return "EMPTY_SCENE";
    case ErrorCode::kInvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::kInvariant: return "INVARIANT_VIOLATION";
    case ErrorCode::kVersionMismatch: return "VERSION_MISMATCH";
    case ErrorCode::kTruncated: return "TRUNCATED";
    case ErrorCode::kMissingOracleData: return "MISSING_ORACLE_DATA";
    case ErrorCode::kFormat: return "FORMAT_ERROR";
    case ErrorCode::kPlacement: return "PLACEMENT_FAILED";
    case ErrorCode::kDivergence: return "DIVERGENCE";
    case ErrorCode::kIo: return "IO_ERROR";
  }
  return "UNKNOWN";
}

namespace {

[[noreturn]] void fail(const std::string& what) { throw Error(ErrorCode::kInvariant, what); }

}  // namespace

void validate_scene(const SceneGeometry& scene) {
  const std::size_t n = scene.points.size();
  if (scene.normals.size() != n) fail("normals count differs from point count");
  if (!scene.colors.empty() && scene.colors.size() != n) fail("colors count differs from point count");
  if (!scene.gt_instance.empty() && scene.gt_instance.size() != n) fail("gt_instance count differs from point count");
  for (std::size_t i = 0; i < n; ++i) {
    if (!scene.points[i].allFinite()) fail("point " + std::to_string(i) + " is not finite");
    const float len = scene.normals[i].norm();
    if (!std::isfinite(len) || std::abs(len - 1.0f) > 1e-4f) fail("normal " + std::to_string(i) + " is not unit length");
  }
  for (const auto& c : scene.colors) {
    if (!c.allFinite() || c.minCoeff() < 0.0f || c.maxCoeff() > 1.0f) fail("color outside [0,1]");
  }
  for (std::size_t f = 0; f < scene.faces.size(); ++f) {
    for (auto idx : scene.faces[f]) {
      if (idx >= n) fail("face " + std::to_string(f) + " references vertex out of range");
    }
  }
}

void validate_camera(const CameraView& view) {
  std::ostringstream id;
  id << "camera " << view.view_id << ": ";
  if (!(view.fx > 0 && view.fy > 0)) fail(id.str() + "focal lengths must be positive");
  if (view.width <= 0 || view.height <= 0) fail(id.str() + "image size must be positive");
  if (!(view.cx > 0 && view.cx < view.width && view.cy > 0 && view.cy < view.height)) {
    fail(id.str() + "principal point outside image");
  }
  const Eigen::Matrix3d should_be_identity = view.rotation * view.rotation.transpose();
  if ((should_be_identity - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-6) {
    fail(id.str() + "rotation is not orthonormal");
  }
  if (view.rotation.determinant() < 0) fail(id.str() + "rotation is a reflection");
  if (!view.translation.allFinite()) fail(id.str() + "translation not finite");
}

Vec3f compute_centroid(const SceneGeometry& scene, const std::vector<std::uint32_t>& indices) {
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  for (auto i : indices) sum += scene.points[i].cast<double>();
  if (indices.empty()) return Vec3f::Zero();
  return (sum / static_cast<double>(indices.size())).cast<float>();
}

void validate_superpoints(const SceneGeometry& scene, const std::vector<Superpoint>& superpoints) {
  std::vector<char> seen(scene.size(), 0);
  std::unordered_set<std::int32_t> ids;
  for (const auto& sp : superpoints) {
    const std::string tag = "superpoint " + std::to_string(sp.sp_id) + ": ";
    if (!ids.insert(sp.sp_id).second) fail(tag + "duplicate id");
    if (sp.point_indices.empty()) fail(tag + "empty");
    for (auto i : sp.point_indices) {
      if (i >= scene.size()) fail(tag + "point index out of range");
      if (seen[i]) fail(tag + "overlaps another superpoint at point " + std::to_string(i));
      seen[i] = 1;
    }
    const Vec3f c = compute_centroid(scene, sp.point_indices);
    if ((c - sp.centroid).cwiseAbs().maxCoeff() > 1e-6f * std::max(1.0f, c.cwiseAbs().maxCoeff())) {
      fail(tag + "centroid mismatch");
    }
  }
}

void validate_graph(const SuperpointGraph& graph) {
  const auto n = static_cast<std::uint32_t>(graph.nodes.size());
  std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
  for (const auto& node : graph.nodes) {
    if (node.has_feature() && node.feature.size() != kFeatureDim) {
      fail("node " + std::to_string(node.sp_id) + " feature has wrong dimension");
    }
  }
  for (const auto& e : graph.edges) {
    const std::string tag = "edge (" + std::to_string(e.u) + "," + std::to_string(e.v) + "): ";
    if (e.u >= e.v) fail(tag + "not canonical (u < v required)");
    if (e.v >= n) fail(tag + "node index out of range");
    if (!seen.emplace(e.u, e.v).second) fail(tag + "duplicate");
    auto in_unit = [](std::optional<float> x) { return !x || (*x >= 0.0f && *x <= 1.0f); };
    if (!in_unit(e.w_sam)) fail(tag + "w_sam outside [0,1]");
    if (!in_unit(e.affinity)) fail(tag + "affinity outside [0,1]");
  }
}

void validate_segmentation(const InstanceSegmentation& seg) {
  std::unordered_set<std::int32_t> ids;
  for (const auto& inst : seg.instances) {
    if (!ids.insert(inst.instance_id).second) fail("duplicate instance id " + std::to_string(inst.instance_id));
    if (!(inst.confidence >= 0.0 && inst.confidence <= 1.0)) fail("instance confidence outside [0,1]");
  }
  for (auto a : seg.assignment) {
    if (a != kInstanceNone && !ids.contains(a)) fail("assigned id " + std::to_string(a) + " has no instance entry");
  }
}

}  // namespace supercut
