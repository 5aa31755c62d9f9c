#pragma once

#include "supercut/projection.hpp"
#include "supercut/types.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace supercut {

/// Whole-image instance segmentation of one view: 0 = background, ids >= 1
/// are local to the view.
struct InstanceMap {
  std::int32_t view_id = 0;
  std::int32_t height = 0;
  std::int32_t width = 0;
  std::vector<std::uint16_t> labels;  ///< row-major

  std::uint16_t at(std::uint32_t linear) const { return labels[linear]; }
  bool operator==(const InstanceMap&) const = default;
};

/// `.imap`: magic "IMP1", u32 H, u32 W, u16 labels row-major.
std::vector<std::uint8_t> encode_instance_map(const InstanceMap& map);
InstanceMap decode_instance_map(std::span<const std::uint8_t> bytes, std::int32_t view_id);
void save_instance_map(const InstanceMap& map, const std::filesystem::path& path);
/// Reads `.imap`, or a 16-bit (or 8-bit) grayscale PNG when the extension is `.png`.
InstanceMap load_instance_map(const std::filesystem::path& path, std::int32_t view_id);

class InstanceMapStore {
public:
  /// Reads every `instances_<view_id>.imap` / `.png` in `dir`.
  static InstanceMapStore load(const std::filesystem::path& dir);
  void save(const std::filesystem::path& dir) const;

  void add(InstanceMap map);
  bool contains(std::int32_t view_id) const { return maps_.contains(view_id); }
  /// Throws kMissingOracleData when absent.
  const InstanceMap& get(std::int32_t view_id) const;
  std::size_t size() const { return maps_.size(); }
  const std::map<std::int32_t, InstanceMap>& maps() const { return maps_; }

  /// Throws kFormat when a map's size differs from its camera's image size.
  void validate_against(std::span<const CameraView> views) const;

private:
  std::map<std::int32_t, InstanceMap> maps_;
};

std::filesystem::path instance_map_filename(std::int32_t view_id);

/// Most frequent non-background label under the mask's pixels; nullopt when
/// every pixel is background or the top count is tied.
std::optional<std::uint16_t> majority_instance(const ProjectionMask& mask, const InstanceMap& map);

struct CoVisibilityRecord {
  std::uint32_t u = 0;
  std::uint32_t v = 0;
  std::uint32_t votes_same = 0;
  std::uint32_t votes_diff = 0;
};

/// One vote per co-visible view; a view abstains when either majority is undefined.
CoVisibilityRecord record_edge_votes(std::uint32_t u, std::uint32_t v, const VisibilityIndex& visibility,
                                     const InstanceMapStore& maps);

/// POSITIVE iff votes_same >= n_min and votes_diff == 0; NEGATIVE iff
/// votes_diff >= n_min and votes_same == 0; otherwise unlabeled.
std::optional<EdgeLabel> pseudo_label(const CoVisibilityRecord& record, std::uint32_t n_min);
std::vector<std::optional<EdgeLabel>> make_pseudo_labels(std::span<const CoVisibilityRecord> records,
                                                         std::uint32_t n_min);

inline constexpr std::uint32_t kDefaultMinViews = 10;

struct PseudoLabelStats {
  std::size_t positive = 0;
  std::size_t negative = 0;
  std::size_t unlabeled = 0;
};

/// Votes every graph edge (node positions index `visibility`) and writes labels.
PseudoLabelStats label_graph(SuperpointGraph& graph, const VisibilityIndex& visibility, const InstanceMapStore& maps,
                             std::uint32_t n_min, std::size_t threads = 0);

}  // namespace supercut
