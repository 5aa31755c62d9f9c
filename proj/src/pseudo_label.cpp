#include "supercut/pseudo_label.hpp"

#include "supercut/binary_io.hpp"
#include "supercut/error.hpp"
#include "supercut/parallel.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <memory>
#include <regex>
#include <unordered_map>

namespace supercut {

namespace {

InstanceMap read_png(const std::filesystem::path& path, std::int32_t view_id) {
  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!file) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error(ErrorCode::kIo, "libpng initialisation failed");
  }
  InstanceMap map;
  map.view_id = view_id;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::kFormat, path.string() + ": corrupt PNG");
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  const auto depth = png_get_bit_depth(png, info);
  if (color != PNG_COLOR_TYPE_GRAY || (depth != 8 && depth != 16)) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::kFormat, path.string() + ": instance PNG must be 8- or 16-bit grayscale");
  }
  map.width = static_cast<std::int32_t>(png_get_image_width(png, info));
  map.height = static_cast<std::int32_t>(png_get_image_height(png, info));
  const auto row_bytes = png_get_rowbytes(png, info);
  std::vector<png_byte> raw(row_bytes * static_cast<std::size_t>(map.height));
  std::vector<png_bytep> rows(static_cast<std::size_t>(map.height));
  for (std::int32_t r = 0; r < map.height; ++r) rows[r] = raw.data() + row_bytes * r;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  map.labels.resize(static_cast<std::size_t>(map.height) * map.width);
  for (std::size_t i = 0; i < map.labels.size(); ++i) {
    // PNG samples are big-endian.
    map.labels[i] = depth == 16 ? static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]) : raw[i];
  }
  return map;
}

}  // namespace

std::vector<std::uint8_t> encode_instance_map(const InstanceMap& map) {
  if (map.labels.size() != static_cast<std::size_t>(map.height) * map.width) {
    throw Error(ErrorCode::kInvalidArgument, "instance map size mismatch");
  }
  ByteWriter w;
  w.put_magic("IMP1");
  w.put(static_cast<std::uint32_t>(map.height));
  w.put(static_cast<std::uint32_t>(map.width));
  w.put_array(std::span<const std::uint16_t>(map.labels));
  return w.bytes();
}

InstanceMap decode_instance_map(std::span<const std::uint8_t> bytes, std::int32_t view_id) {
  const std::string ctx = "instance map of view " + std::to_string(view_id);
  ByteReader r(bytes, ctx);
  r.expect_magic("IMP1");
  InstanceMap map;
  map.view_id = view_id;
  map.height = static_cast<std::int32_t>(r.get<std::uint32_t>());
  map.width = static_cast<std::int32_t>(r.get<std::uint32_t>());
  const auto n = static_cast<std::uint64_t>(static_cast<std::uint32_t>(map.height)) * static_cast<std::uint32_t>(map.width);
  if (n * 2 != r.remaining()) throw Error(ErrorCode::kFormat, ctx + ": payload size does not match header");
  map.labels.resize(n);
  r.get_array(std::span<std::uint16_t>(map.labels));
  return map;
}

void save_instance_map(const InstanceMap& map, const std::filesystem::path& path) {
  write_file_atomic(path, encode_instance_map(map));
}

InstanceMap load_instance_map(const std::filesystem::path& path, std::int32_t view_id) {
  if (path.extension() == ".png") return read_png(path, view_id);
  return decode_instance_map(read_file(path), view_id);
}

std::filesystem::path instance_map_filename(std::int32_t view_id) {
  return "instances_" + std::to_string(view_id) + ".imap";
}

InstanceMapStore InstanceMapStore::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::kIo, "instance map directory not found: " + dir.string());
  static const std::regex pattern(R"(instances_(-?\d+)\.(imap|png))");
  InstanceMapStore store;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const auto name = entry.path().filename().string();
    if (!std::regex_match(name, m, pattern)) continue;
    const auto id = std::stoi(m[1].str());
    if (store.contains(id)) throw Error(ErrorCode::kFormat, "two instance maps for view " + std::to_string(id));
    store.add(load_instance_map(entry.path(), id));
  }
  return store;
}

void InstanceMapStore::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  for (const auto& [id, map] : maps_) save_instance_map(map, dir / instance_map_filename(id));
}

void InstanceMapStore::add(InstanceMap map) {
  if (map.labels.size() != static_cast<std::size_t>(map.height) * map.width) {
    throw Error(ErrorCode::kFormat, "instance map of view " + std::to_string(map.view_id) + " has inconsistent size");
  }
  const auto id = map.view_id;
  maps_[id] = std::move(map);
}

const InstanceMap& InstanceMapStore::get(std::int32_t view_id) const {
  const auto it = maps_.find(view_id);
  if (it == maps_.end()) {
    throw Error(ErrorCode::kMissingOracleData, "no instance map for view " + std::to_string(view_id));
  }
  return it->second;
}

void InstanceMapStore::validate_against(std::span<const CameraView> views) const {
  for (const auto& view : views) {
    if (!contains(view.view_id)) continue;
    const auto& m = get(view.view_id);
    if (m.height != view.height || m.width != view.width) {
      throw Error(ErrorCode::kFormat, "instance map of view " + std::to_string(view.view_id) + " is " +
                                          std::to_string(m.width) + "x" + std::to_string(m.height) +
                                          ", camera is " + std::to_string(view.width) + "x" +
                                          std::to_string(view.height));
    }
  }
}

std::optional<std::uint16_t> majority_instance(const ProjectionMask& mask, const InstanceMap& map) {
  if (mask.width != map.width || mask.height != map.height) {
    throw Error(ErrorCode::kFormat, "instance map of view " + std::to_string(map.view_id) + " does not match the image size");
  }
  std::unordered_map<std::uint16_t, std::uint32_t> counts;
  for (auto p : mask.pixels) {
    const auto l = map.at(p);
    if (l != 0) ++counts[l];
  }
  std::optional<std::uint16_t> best;
  std::uint32_t best_count = 0;
  bool tied = false;
  for (const auto& [label, n] : counts) {
    if (n > best_count) {
      best = label;
      best_count = n;
      tied = false;
    } else if (n == best_count) {
      tied = true;
    }
  }
  if (tied) return std::nullopt;
  return best;
}

CoVisibilityRecord record_edge_votes(std::uint32_t u, std::uint32_t v, const VisibilityIndex& visibility,
                                     const InstanceMapStore& maps) {
  CoVisibilityRecord rec{u, v, 0, 0};
  for (auto vi : visibility.co_visible_views(u, v)) {
    const auto& map = maps.get(visibility.view(vi).view_id);
    const auto a = majority_instance(*visibility.mask(u, vi), map);
    const auto b = majority_instance(*visibility.mask(v, vi), map);
    if (!a || !b) continue;
    if (*a == *b) {
      ++rec.votes_same;
    } else {
      ++rec.votes_diff;
    }
  }
  return rec;
}

std::optional<EdgeLabel> pseudo_label(const CoVisibilityRecord& record, std::uint32_t n_min) {
  if (n_min < 1) throw Error(ErrorCode::kInvalidArgument, "n_min must be >= 1");
  if (record.votes_same >= n_min && record.votes_diff == 0) return EdgeLabel::kPositive;
  if (record.votes_diff >= n_min && record.votes_same == 0) return EdgeLabel::kNegative;
  return std::nullopt;
}

std::vector<std::optional<EdgeLabel>> make_pseudo_labels(std::span<const CoVisibilityRecord> records,
                                                         std::uint32_t n_min) {
  std::vector<std::optional<EdgeLabel>> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(pseudo_label(r, n_min));
  return out;
}

PseudoLabelStats label_graph(SuperpointGraph& graph, const VisibilityIndex& visibility, const InstanceMapStore& maps,
                             std::uint32_t n_min, std::size_t threads) {
  if (graph.nodes.size() != visibility.num_superpoints()) {
    throw Error(ErrorCode::kInvalidArgument, "graph and visibility index disagree on the superpoint count");
  }
  std::vector<CoVisibilityRecord> records(graph.edges.size());
  parallel_for(
      graph.edges.size(),
      [&](std::size_t e) { records[e] = record_edge_votes(graph.edges[e].u, graph.edges[e].v, visibility, maps); },
      threads);
  const auto labels = make_pseudo_labels(records, n_min);
  PseudoLabelStats stats;
  for (std::size_t e = 0; e < labels.size(); ++e) {
    graph.edges[e].label = labels[e];
    if (!labels[e]) {
      ++stats.unlabeled;
    } else if (*labels[e] == EdgeLabel::kPositive) {
      ++stats.positive;
    } else {
      ++stats.negative;
    }
  }
  return stats;
}

}  // namespace supercut
