#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

namespace supercut {

/// Disjoint sets with union by rank and path compression.
class UnionFind {
public:
  explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), 0u);
  }

  std::uint32_t find(std::uint32_t x) {
    std::uint32_t root = x;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[x] != root) {
      const auto next = parent_[x];
      parent_[x] = root;
      x = next;
    }
    return root;
  }

  /// Returns the new root, or the common root when already joined.
  std::uint32_t unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return a;
    if (rank_[a] < rank_[b] || (rank_[a] == rank_[b] && b < a)) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    if (rank_[a] == rank_[b]) ++rank_[a];
    return a;
  }

  std::uint32_t component_size(std::uint32_t x) { return size_[find(x)]; }
  std::size_t size() const { return parent_.size(); }

private:
  std::vector<std::uint32_t> parent_;
  std::vector<std::uint32_t> rank_;
  std::vector<std::uint32_t> size_;
};

}  // namespace supercut
