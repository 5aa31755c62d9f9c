#include "supercut/rle_mask.hpp"

#include "supercut/error.hpp"

#include <algorithm>

namespace supercut {

RleMask::RleMask(std::int32_t height, std::int32_t width, std::vector<std::uint32_t> counts)
    : height_(height), width_(width), counts_(std::move(counts)) {
  if (height < 0 || width < 0) throw Error(ErrorCode::kFormat, "RLE mask with negative size");
  std::uint64_t total = 0;
  for (auto c : counts_) total += c;
  if (total != static_cast<std::uint64_t>(height) * static_cast<std::uint64_t>(width)) {
    throw Error(ErrorCode::kFormat, "RLE runs sum to " + std::to_string(total) + ", expected " +
                                        std::to_string(static_cast<std::uint64_t>(height) * width));
  }
}

RleMask RleMask::from_bitmap(std::span<const std::uint8_t> bitmap, std::int32_t height, std::int32_t width) {
  if (bitmap.size() != static_cast<std::size_t>(height) * width) {
    throw Error(ErrorCode::kInvalidArgument, "bitmap size mismatch");
  }
  std::vector<std::uint32_t> counts;
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (auto px : bitmap) {
    const std::uint8_t bit = px ? 1 : 0;
    if (bit != current) {
      counts.push_back(run);
      run = 0;
      current = bit;
    }
    ++run;
  }
  counts.push_back(run);
  return RleMask(height, width, std::move(counts));
}

RleMask RleMask::from_indices(std::span<const std::uint32_t> indices, std::int32_t height, std::int32_t width) {
  const auto total = static_cast<std::uint64_t>(height) * static_cast<std::uint64_t>(width);
  std::vector<std::uint32_t> counts;
  std::uint64_t pos = 0;
  std::size_t i = 0;
  while (i < indices.size()) {
    if (indices[i] >= total || indices[i] < pos) throw Error(ErrorCode::kInvalidArgument, "indices unsorted or out of range");
    const std::uint32_t start = indices[i];
    std::size_t j = i + 1;
    while (j < indices.size() && indices[j] == indices[j - 1] + 1) ++j;
    counts.push_back(static_cast<std::uint32_t>(start - pos));
    counts.push_back(static_cast<std::uint32_t>(j - i));
    pos = static_cast<std::uint64_t>(start) + (j - i);
    i = j;
  }
  if (pos < total || counts.empty()) counts.push_back(static_cast<std::uint32_t>(total - pos));
  return RleMask(height, width, std::move(counts));
}

std::vector<std::uint8_t> RleMask::to_bitmap() const {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(height_) * width_, 0);
  std::size_t pos = 0;
  for (std::size_t k = 0; k < counts_.size(); ++k) {
    if (k % 2 == 1) std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(pos), counts_[k], std::uint8_t{1});
    pos += counts_[k];
  }
  return out;
}

std::vector<std::uint32_t> RleMask::to_indices() const {
  std::vector<std::uint32_t> out;
  std::uint32_t pos = 0;
  for (std::size_t k = 0; k < counts_.size(); ++k) {
    if (k % 2 == 1) {
      for (std::uint32_t t = 0; t < counts_[k]; ++t) out.push_back(pos + t);
    }
    pos += counts_[k];
  }
  return out;
}

std::uint64_t RleMask::area() const {
  std::uint64_t a = 0;
  for (std::size_t k = 1; k < counts_.size(); k += 2) a += counts_[k];
  return a;
}

std::uint64_t intersection_area(const RleMask& a, const RleMask& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw Error(ErrorCode::kInvalidArgument, "intersection of masks with different sizes");
  }
  // Walk foreground intervals [start, end) of both masks in order.
  auto intervals = [](const RleMask& m) {
    std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
    std::uint64_t pos = 0;
    const auto& c = m.counts();
    for (std::size_t k = 0; k < c.size(); ++k) {
      if (k % 2 == 1 && c[k] > 0) out.emplace_back(pos, pos + c[k]);
      pos += c[k];
    }
    return out;
  };
  const auto ia = intervals(a), ib = intervals(b);
  std::uint64_t total = 0;
  std::size_t i = 0, j = 0;
  while (i < ia.size() && j < ib.size()) {
    const auto lo = std::max(ia[i].first, ib[j].first);
    const auto hi = std::min(ia[i].second, ib[j].second);
    if (lo < hi) total += hi - lo;
    if (ia[i].second < ib[j].second) {
      ++i;
    } else {
      ++j;
    }
  }
  return total;
}

}  // namespace supercut
