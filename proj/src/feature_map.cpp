#include "supercut/feature_map.hpp"

#include "supercut/binary_io.hpp"
#include "supercut/error.hpp"

#include <algorithm>
#include <cmath>
#include <regex>

namespace supercut {

void validate_feature_map(const FeatureMap& fm) {
  if (fm.channels != static_cast<std::int32_t>(kFeatureDim)) {
    throw Error(ErrorCode::kFormat, "feature map of view " + std::to_string(fm.view_id) + " has " +
                                        std::to_string(fm.channels) + " channels, expected 256");
  }
  if (fm.height < 1 || fm.width < 1 ||
      fm.data.size() != static_cast<std::size_t>(fm.height) * fm.width * fm.channels) {
    throw Error(ErrorCode::kFormat, "feature map of view " + std::to_string(fm.view_id) + " has inconsistent size");
  }
  for (auto v : fm.data) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kFormat, "feature map of view " + std::to_string(fm.view_id) + " is not finite");
  }
}

std::vector<float> interpolate_feature(const FeatureMap& fm, Pixel pixel, std::int32_t image_height,
                                       std::int32_t image_width) {
  auto grid = [](std::int32_t p, std::int32_t image, std::int32_t cells) {
    const double g = (p + 0.5) / image * cells - 0.5;
    return std::clamp(g, 0.0, static_cast<double>(cells - 1));
  };
  const double y = grid(pixel.row, image_height, fm.height);
  const double x = grid(pixel.col, image_width, fm.width);
  const auto y0 = static_cast<std::int32_t>(std::floor(y)), x0 = static_cast<std::int32_t>(std::floor(x));
  const auto y1 = std::min(y0 + 1, fm.height - 1), x1 = std::min(x0 + 1, fm.width - 1);
  const double fy = y - y0, fx = x - x0;
  const double w00 = (1 - fy) * (1 - fx), w01 = (1 - fy) * fx, w10 = fy * (1 - fx), w11 = fy * fx;
  const float *a = fm.cell(y0, x0), *b = fm.cell(y0, x1), *c = fm.cell(y1, x0), *d = fm.cell(y1, x1);
  std::vector<float> out(static_cast<std::size_t>(fm.channels));
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = static_cast<float>(w00 * a[k] + w01 * b[k] + w10 * c[k] + w11 * d[k]);
  }
  return out;
}

std::vector<std::uint8_t> encode_feature_map(const FeatureMap& fm) {
  validate_feature_map(fm);
  ByteWriter w;
  w.put_magic("FMP1");
  w.put(static_cast<std::uint32_t>(fm.height));
  w.put(static_cast<std::uint32_t>(fm.width));
  w.put(static_cast<std::uint32_t>(fm.channels));
  w.put_array(std::span<const float>(fm.data));
  return w.bytes();
}

FeatureMap decode_feature_map(std::span<const std::uint8_t> bytes, std::int32_t view_id) {
  const std::string ctx = "features of view " + std::to_string(view_id);
  ByteReader r(bytes, ctx);
  r.expect_magic("FMP1");
  FeatureMap fm;
  fm.view_id = view_id;
  fm.height = static_cast<std::int32_t>(r.get<std::uint32_t>());
  fm.width = static_cast<std::int32_t>(r.get<std::uint32_t>());
  fm.channels = static_cast<std::int32_t>(r.get<std::uint32_t>());
  const auto n = static_cast<std::uint64_t>(static_cast<std::uint32_t>(fm.height)) *
                 static_cast<std::uint32_t>(fm.width) * static_cast<std::uint32_t>(fm.channels);
  if (n * 4 != r.remaining()) throw Error(ErrorCode::kFormat, ctx + ": payload size does not match header");
  fm.data.resize(n);
  r.get_array(std::span<float>(fm.data));
  validate_feature_map(fm);
  return fm;
}

void save_feature_map(const FeatureMap& fm, const std::filesystem::path& path) {
  write_file_atomic(path, encode_feature_map(fm));
}

FeatureMap load_feature_map(const std::filesystem::path& path, std::int32_t view_id) {
  return decode_feature_map(read_file(path), view_id);
}

std::filesystem::path feature_map_filename(std::int32_t view_id) {
  return "features_" + std::to_string(view_id) + ".fmap";
}

FeatureStore FeatureStore::load(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::kIo, "feature directory not found: " + dir.string());
  static const std::regex pattern(R"(features_(-?\d+)\.fmap)");
  FeatureStore store;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    const auto name = entry.path().filename().string();
    if (!std::regex_match(name, m, pattern)) continue;
    store.add(load_feature_map(entry.path(), std::stoi(m[1].str())));
  }
  return store;
}

void FeatureStore::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  for (const auto& [id, fm] : maps_) save_feature_map(fm, dir / feature_map_filename(id));
}

void FeatureStore::add(FeatureMap fm) {
  validate_feature_map(fm);
  const auto id = fm.view_id;
  maps_[id] = std::move(fm);
}

const FeatureMap& FeatureStore::get(std::int32_t view_id) const {
  const auto it = maps_.find(view_id);
  if (it == maps_.end()) {
    throw Error(ErrorCode::kMissingOracleData, "no feature map for view " + std::to_string(view_id));
  }
  return it->second;
}

}  // namespace supercut
