#include "supercut/binary_io.hpp"
#include "supercut/error.hpp"
#include "supercut/io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>

namespace supercut {

using nlohmann::json;

namespace {

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

template <typename T>
T field(const json& j, const char* key, const std::string& context) {
  if (!j.contains(key)) throw Error(ErrorCode::kFormat, context + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, context + ": field '" + key + "': " + e.what());
  }
}

}  // namespace

std::vector<CameraView> load_cameras(const std::filesystem::path& path) {
  const json doc = read_json(path);
  if (!doc.is_array()) throw Error(ErrorCode::kFormat, path.string() + ": expected a JSON array of cameras");
  std::vector<CameraView> views;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& j = doc[i];
    const std::string ctx = path.string() + "[" + std::to_string(i) + "]";
    CameraView v;
    v.view_id = field<std::int32_t>(j, "view_id", ctx);
    v.fx = field<double>(j, "fx", ctx);
    v.fy = field<double>(j, "fy", ctx);
    v.cx = field<double>(j, "cx", ctx);
    v.cy = field<double>(j, "cy", ctx);
    v.width = field<std::int32_t>(j, "width", ctx);
    v.height = field<std::int32_t>(j, "height", ctx);
    const auto r = field<std::vector<double>>(j, "R", ctx);
    const auto t = field<std::vector<double>>(j, "t", ctx);
    if (r.size() != 9 || t.size() != 3) throw Error(ErrorCode::kFormat, ctx + ": R needs 9 values and t 3");
    for (int row = 0; row < 3; ++row) {
      for (int col = 0; col < 3; ++col) v.rotation(row, col) = r[row * 3 + col];
      v.translation[row] = t[row];
    }
    validate_camera(v);
    views.push_back(v);
  }
  std::vector<std::int32_t> ids;
  for (const auto& v : views) ids.push_back(v.view_id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw Error(ErrorCode::kFormat, path.string() + ": duplicate view_id");
  }
  return views;
}

void save_cameras(std::span<const CameraView> views, const std::filesystem::path& path) {
  json doc = json::array();
  for (const auto& v : views) {
    std::vector<double> r(9), t(3);
    for (int row = 0; row < 3; ++row) {
      for (int col = 0; col < 3; ++col) r[row * 3 + col] = v.rotation(row, col);
      t[row] = v.translation[row];
    }
    doc.push_back({{"view_id", v.view_id}, {"fx", v.fx}, {"fy", v.fy}, {"cx", v.cx}, {"cy", v.cy},
                   {"width", v.width}, {"height", v.height}, {"R", r}, {"t", t}});
  }
  write_text_atomic(path, doc.dump(1));
}

std::vector<Superpoint> load_superpoints(const std::filesystem::path& path) {
  const json doc = read_json(path);
  if (!doc.is_array()) throw Error(ErrorCode::kFormat, path.string() + ": expected a JSON array of superpoints");
  std::vector<Superpoint> sps;
  sps.reserve(doc.size());
  std::vector<std::uint8_t> seen;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string ctx = path.string() + "[" + std::to_string(i) + "]";
    Superpoint sp;
    sp.sp_id = field<std::int32_t>(doc[i], "sp_id", ctx);
    sp.point_indices = field<std::vector<std::uint32_t>>(doc[i], "point_indices", ctx);
    if (sp.point_indices.empty()) throw Error(ErrorCode::kFormat, ctx + ": empty superpoint");
    std::sort(sp.point_indices.begin(), sp.point_indices.end());
    for (auto idx : sp.point_indices) {
      if (idx >= seen.size()) seen.resize(static_cast<std::size_t>(idx) + 1, 0);
      if (seen[idx]++) throw Error(ErrorCode::kFormat, ctx + ": point " + std::to_string(idx) + " is in two superpoints");
    }
    sps.push_back(std::move(sp));
  }
  return sps;
}

std::vector<Superpoint> load_superpoints(const std::filesystem::path& path, const SceneGeometry& scene) {
  auto sps = load_superpoints(path);
  for (std::size_t i = 0; i < sps.size(); ++i) {
    for (auto idx : sps[i].point_indices) {
      if (idx >= scene.size()) {
        throw Error(ErrorCode::kFormat, path.string() + "[" + std::to_string(i) + "]: point index out of range");
      }
    }
    sps[i].centroid = compute_centroid(scene, sps[i].point_indices);
  }
  validate_superpoints(scene, sps);
  return sps;
}

void save_superpoints(std::span<const Superpoint> superpoints, const std::filesystem::path& path) {
  json doc = json::array();
  for (const auto& sp : superpoints) doc.push_back({{"sp_id", sp.sp_id}, {"point_indices", sp.point_indices}});
  write_text_atomic(path, doc.dump());
}

InstanceSegmentation load_segmentation(const std::filesystem::path& path) {
  const json doc = read_json(path);
  const std::string ctx = path.string();
  InstanceSegmentation seg;
  seg.assignment = field<std::vector<std::int32_t>>(doc, "assignment", ctx);
  if (!doc.contains("instances") || !doc["instances"].is_array()) {
    throw Error(ErrorCode::kFormat, ctx + ": missing instances array");
  }
  for (const auto& j : doc["instances"]) {
    seg.instances.push_back({field<std::int32_t>(j, "id", ctx), field<double>(j, "confidence", ctx)});
  }
  validate_segmentation(seg);
  return seg;
}

void save_segmentation(const InstanceSegmentation& seg, const std::filesystem::path& path) {
  json instances = json::array();
  for (const auto& inst : seg.instances) instances.push_back({{"id", inst.instance_id}, {"confidence", inst.confidence}});
  const json doc = {{"assignment", seg.assignment}, {"instances", instances}};
  write_text_atomic(path, doc.dump());
}

}  // namespace supercut
