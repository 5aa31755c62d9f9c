#pragma once

#include "supercut/types.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

namespace supercut {

/// Image-encoder feature grid for one view, row-major HWC.
struct FeatureMap {
  std::int32_t view_id = 0;
  std::int32_t height = 0;
  std::int32_t width = 0;
  std::int32_t channels = static_cast<std::int32_t>(kFeatureDim);
  std::vector<float> data;

  const float* cell(std::int32_t row, std::int32_t col) const {
    return data.data() + (static_cast<std::size_t>(row) * width + col) * channels;
  }
  bool operator==(const FeatureMap&) const = default;
};

/// Throws kFormat unless channels == 256, sizes agree and values are finite.
void validate_feature_map(const FeatureMap& fm);

/// Bilinear lookup of the feature at an image pixel. The pixel centre maps to
/// grid coordinate (row + 0.5) / image_height * height - 0.5 (same for cols);
/// coordinates are clamped to the grid.
std::vector<float> interpolate_feature(const FeatureMap& fm, Pixel pixel, std::int32_t image_height,
                                       std::int32_t image_width);

/// `.fmap`: magic "FMP1", u32 H_f, u32 W_f, u32 C, f32 data row-major.
std::vector<std::uint8_t> encode_feature_map(const FeatureMap& fm);
FeatureMap decode_feature_map(std::span<const std::uint8_t> bytes, std::int32_t view_id);
void save_feature_map(const FeatureMap& fm, const std::filesystem::path& path);
FeatureMap load_feature_map(const std::filesystem::path& path, std::int32_t view_id);

/// Feature maps keyed by view_id.
class FeatureStore {
public:
  /// Reads every `features_<view_id>.fmap` in `dir`.
  static FeatureStore load(const std::filesystem::path& dir);
  /// Writes `features_<view_id>.fmap` for every map.
  void save(const std::filesystem::path& dir) const;

  void add(FeatureMap fm);
  bool contains(std::int32_t view_id) const { return maps_.contains(view_id); }
  /// Throws kMissingOracleData when absent.
  const FeatureMap& get(std::int32_t view_id) const;
  std::size_t size() const { return maps_.size(); }
  const std::map<std::int32_t, FeatureMap>& maps() const { return maps_; }

private:
  std::map<std::int32_t, FeatureMap> maps_;
};

std::filesystem::path feature_map_filename(std::int32_t view_id);

}  // namespace supercut
