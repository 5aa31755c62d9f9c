#include "supercut/knn.hpp"

#include <algorithm>
#include <numeric>
#include <queue>

namespace supercut {

namespace {
constexpr std::uint32_t kLeafSize = 16;
}

KdTree::KdTree(std::span<const Vec3f> points) : points_(points), order_(points.size()) {
  std::iota(order_.begin(), order_.end(), 0u);
  if (!order_.empty()) {
    nodes_.reserve(2 * points.size() / kLeafSize + 2);
    build(0, static_cast<std::uint32_t>(order_.size()), 0);
  }
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end, int depth) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back({begin, end});
  if (end - begin <= kLeafSize) return id;

  Vec3f lo = points_[order_[begin]], hi = lo;
  for (auto i = begin; i < end; ++i) {
    lo = lo.cwiseMin(points_[order_[i]]);
    hi = hi.cwiseMax(points_[order_[i]]);
  }
  int axis = 0;
  (hi - lo).maxCoeff(&axis);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const float pa = points_[a][axis], pb = points_[b][axis];
                     return pa < pb || (pa == pb && a < b);
                   });
  nodes_[id].axis = static_cast<std::uint8_t>(axis);
  nodes_[id].split = points_[order_[mid]][axis];
  const auto left = build(begin, mid, depth + 1);
  const auto right = build(mid, end, depth + 1);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

std::vector<std::uint32_t> KdTree::knn(const Vec3f& query, std::size_t k, std::uint32_t exclude) const {
  using Entry = std::pair<float, std::uint32_t>;  // (squared distance, index); max-heap
  std::priority_queue<Entry> heap;
  if (k == 0 || nodes_.empty()) return {};

  auto visit = [&](auto&& self, std::int32_t node_id) -> void {
    const Node& node = nodes_[node_id];
    if (node.left < 0) {
      for (auto i = node.begin; i < node.end; ++i) {
        const auto idx = order_[i];
        if (idx == exclude) continue;
        const Entry e{(points_[idx] - query).squaredNorm(), idx};
        if (heap.size() < k) {
          heap.push(e);
        } else if (e < heap.top()) {
          heap.pop();
          heap.push(e);
        }
      }
      return;
    }
    const float diff = query[node.axis] - node.split;
    const auto near = diff < 0 ? node.left : node.right;
    const auto far = diff < 0 ? node.right : node.left;
    self(self, near);
    // <= keeps equal-distance candidates reachable for index tie-breaking.
    if (heap.size() < k || diff * diff <= heap.top().first) self(self, far);
  };
  visit(visit, 0);

  std::vector<Entry> sorted;
  sorted.reserve(heap.size());
  while (!heap.empty()) {
    sorted.push_back(heap.top());
    heap.pop();
  }
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::uint32_t> out;
  out.reserve(sorted.size());
  for (const auto& e : sorted) out.push_back(e.second);
  return out;
}

}  // namespace supercut
