#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace supercut {

/// Binary image stored as run lengths over the row-major pixel sequence,
/// alternating background/foreground and starting with background (the first
/// run may be zero), as in COCO uncompressed counts.
class RleMask {
public:
  RleMask() = default;
  /// Throws kFormat when the runs do not sum to height * width.
  RleMask(std::int32_t height, std::int32_t width, std::vector<std::uint32_t> counts);

  static RleMask from_bitmap(std::span<const std::uint8_t> bitmap, std::int32_t height, std::int32_t width);
  /// `indices` must be sorted ascending and unique.
  static RleMask from_indices(std::span<const std::uint32_t> indices, std::int32_t height, std::int32_t width);

  std::vector<std::uint8_t> to_bitmap() const;
  std::vector<std::uint32_t> to_indices() const;

  std::int32_t height() const { return height_; }
  std::int32_t width() const { return width_; }
  const std::vector<std::uint32_t>& counts() const { return counts_; }
  std::uint64_t area() const;

  bool operator==(const RleMask&) const = default;

private:
  std::int32_t height_ = 0;
  std::int32_t width_ = 0;
  std::vector<std::uint32_t> counts_;
};

/// |a ∩ b| by merging runs; masks must have equal dimensions.
std::uint64_t intersection_area(const RleMask& a, const RleMask& b);

}  // namespace supercut
