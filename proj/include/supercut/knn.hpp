#pragma once

#include "supercut/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace supercut {

/// Static 3-d tree over a borrowed point array.
class KdTree {
public:
  explicit KdTree(std::span<const Vec3f> points);

  /// k nearest neighbors of `query`, ordered by (squared distance, index).
  /// `exclude` is skipped (pass the query's own index for self-free neighborhoods).
  std::vector<std::uint32_t> knn(const Vec3f& query, std::size_t k,
                                 std::uint32_t exclude = UINT32_MAX) const;

private:
  struct Node {
    std::uint32_t begin, end;  // range into order_
    std::int32_t left = -1, right = -1;
    std::uint8_t axis = 0;
    float split = 0.0f;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end, int depth);

  std::span<const Vec3f> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace supercut
