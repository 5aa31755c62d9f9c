#include "supercut/distance_transform.hpp"

#include "supercut/error.hpp"

#include <limits>

namespace supercut {

namespace {

constexpr std::int64_t kFar = std::numeric_limits<std::int64_t>::max() / 4;

// 1-D squared distance transform of sampled function f (lower envelope of parabolas).
// All arithmetic stays integral; intersections are compared by cross-multiplication.
void edt_1d(const std::vector<std::int64_t>& f, std::vector<std::int64_t>& d, std::vector<std::int32_t>& v,
            std::vector<std::int32_t>& finite) {
  const auto n = static_cast<std::int32_t>(f.size());
  finite.clear();
  for (std::int32_t q = 0; q < n; ++q) {
    if (f[q] < kFar) finite.push_back(q);
  }
  if (finite.empty()) {
    for (std::int32_t q = 0; q < n; ++q) d[q] = kFar;
    return;
  }
  // Intersection of parabolas rooted at p < q: s = ((f[q]+q^2) - (f[p]+p^2)) / (2(q-p)).
  auto beyond = [&](std::int32_t p, std::int32_t q, std::int32_t r) {
    // True when intersection(q, r) <= intersection(p, q), i.e. q is hidden.
    const std::int64_t a = (f[r] + std::int64_t{r} * r) - (f[q] + std::int64_t{q} * q);
    const std::int64_t b = (f[q] + std::int64_t{q} * q) - (f[p] + std::int64_t{p} * p);
    return static_cast<__int128>(a) * (q - p) <= static_cast<__int128>(b) * (r - q);
  };
  std::int32_t k = 0;
  v[0] = finite[0];
  for (std::size_t i = 1; i < finite.size(); ++i) {
    const auto q = finite[i];
    while (k > 0 && beyond(v[k - 1], v[k], q)) --k;
    v[++k] = q;
  }
  std::int32_t j = 0;
  for (std::int32_t q = 0; q < n; ++q) {
    // Advance while the next parabola is at least as low at q.
    while (j < k) {
      const std::int64_t cur = f[v[j]] + std::int64_t{q - v[j]} * (q - v[j]);
      const std::int64_t nxt = f[v[j + 1]] + std::int64_t{q - v[j + 1]} * (q - v[j + 1]);
      if (nxt <= cur) {
        ++j;
      } else {
        break;
      }
    }
    d[q] = f[v[j]] + std::int64_t{q - v[j]} * (q - v[j]);
  }
}

}  // namespace

std::vector<std::int64_t> squared_edt(std::span<const std::uint8_t> mask, std::int32_t height, std::int32_t width) {
  if (height < 0 || width < 0 || mask.size() != static_cast<std::size_t>(height) * width) {
    throw Error(ErrorCode::kInvalidArgument, "squared_edt: mask size mismatch");
  }
  // Pad one background pixel on every side so the image border acts as background.
  const std::int32_t ph = height + 2, pw = width + 2;
  std::vector<std::int64_t> grid(static_cast<std::size_t>(ph) * pw, 0);
  for (std::int32_t r = 0; r < height; ++r) {
    for (std::int32_t c = 0; c < width; ++c) {
      if (mask[static_cast<std::size_t>(r) * width + c]) grid[static_cast<std::size_t>(r + 1) * pw + c + 1] = kFar;
    }
  }
  std::vector<std::int64_t> f, d;
  std::vector<std::int32_t> v, finite;
  // Columns.
  f.resize(ph);
  d.resize(ph);
  v.resize(ph);
  for (std::int32_t c = 0; c < pw; ++c) {
    for (std::int32_t r = 0; r < ph; ++r) f[r] = grid[static_cast<std::size_t>(r) * pw + c];
    edt_1d(f, d, v, finite);
    for (std::int32_t r = 0; r < ph; ++r) grid[static_cast<std::size_t>(r) * pw + c] = d[r];
  }
  // Rows.
  f.resize(pw);
  d.resize(pw);
  v.resize(pw);
  std::vector<std::int64_t> out(static_cast<std::size_t>(height) * width);
  for (std::int32_t r = 0; r < height; ++r) {
    const auto base = static_cast<std::size_t>(r + 1) * pw;
    for (std::int32_t c = 0; c < pw; ++c) f[c] = grid[base + c];
    edt_1d(f, d, v, finite);
    for (std::int32_t c = 0; c < width; ++c) out[static_cast<std::size_t>(r) * width + c] = d[c + 1];
  }
  return out;
}

}  // namespace supercut
