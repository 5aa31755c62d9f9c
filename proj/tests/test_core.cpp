#include "supercut/binary_io.hpp"
#include "supercut/distance_transform.hpp"
#include "supercut/knn.hpp"
#include "supercut/parallel.hpp"
#include "supercut/rle_mask.hpp"
#include "supercut/rng.hpp"
#include "supercut/union_find.hpp"

#include "test_support.hpp"

#include <algorithm>
#include <atomic>
#include <limits>
#include <numeric>
#include <set>

using namespace supercut;
using supercut::test::error_code_of;

namespace {

/// Squared distance to the nearest background pixel, treating the outside as background.
std::vector<std::int64_t> brute_edt(const std::vector<std::uint8_t>& mask, int h, int w) {
  std::vector<std::int64_t> out(mask.size(), 0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!mask[r * w + c]) continue;
      std::int64_t best = std::numeric_limits<std::int64_t>::max();
      for (int rr = -1; rr <= h; ++rr) {
        for (int cc = -1; cc <= w; ++cc) {
          const bool outside = rr < 0 || cc < 0 || rr >= h || cc >= w;
          if (!outside && mask[rr * w + cc]) continue;
          const std::int64_t d = std::int64_t(rr - r) * (rr - r) + std::int64_t(cc - c) * (cc - c);
          best = std::min(best, d);
        }
      }
      out[r * w + c] = best;
    }
  }
  return out;
}

std::vector<std::uint8_t> random_bitmap(Rng& rng, int h, int w, double density) {
  std::vector<std::uint8_t> m(static_cast<std::size_t>(h) * w);
  for (auto& v : m) v = uniform(rng) < density ? 1 : 0;
  return m;
}

}  // namespace

TEST_CASE("derive_seed depends on every key and their order") {
  CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
  CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
  CHECK(derive_seed(1, {2}) != derive_seed(2, {2}));
  CHECK(derive_seed(1, {}) != derive_seed(1, {0}));
}

TEST_CASE("uniform draws stay in range and uniform_index is unbiased enough") {
  Rng rng(42);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const double u = uniform(rng, -2.0, 3.0);
    REQUIRE(u >= -2.0);
    REQUIRE(u < 3.0);
    ++counts[uniform_index(rng, 7)];
  }
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
}

TEST_CASE("normal draws have unit variance") {
  Rng rng(3);
  double sum = 0, sq = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = normal(rng);
    sum += x;
    sq += x * x;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.02);
}

TEST_CASE("union-find components match a naive relabelling") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::uint32_t n = 1 + static_cast<std::uint32_t>(uniform_index(rng, 60));
    UnionFind uf(n);
    std::vector<std::uint32_t> label(n);
    std::iota(label.begin(), label.end(), 0u);
    for (int k = 0; k < 40; ++k) {
      const auto a = static_cast<std::uint32_t>(uniform_index(rng, n));
      const auto b = static_cast<std::uint32_t>(uniform_index(rng, n));
      uf.unite(a, b);
      const auto from = label[b], to = label[a];
      for (auto& l : label) {
        if (l == from) l = to;
      }
    }
    for (std::uint32_t i = 0; i < n; ++i) {
      const auto size = static_cast<std::uint32_t>(std::count(label.begin(), label.end(), label[i]));
      CHECK(uf.component_size(i) == size);
      for (std::uint32_t j = 0; j < n; ++j) CHECK((uf.find(i) == uf.find(j)) == (label[i] == label[j]));
    }
  }
}

TEST_CASE("RLE round-trips bitmaps and indices") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const int h = 1 + static_cast<int>(uniform_index(rng, 20));
    const int w = 1 + static_cast<int>(uniform_index(rng, 20));
    const auto bitmap = random_bitmap(rng, h, w, uniform(rng));
    const auto rle = RleMask::from_bitmap(bitmap, h, w);
    CHECK(rle.to_bitmap() == bitmap);
    CHECK(rle.area() == static_cast<std::uint64_t>(std::count(bitmap.begin(), bitmap.end(), 1)));
    const auto indices = rle.to_indices();
    CHECK(RleMask::from_indices(indices, h, w) == rle);
    std::uint64_t sum = 0;
    for (auto c : rle.counts()) sum += c;
    CHECK(sum == static_cast<std::uint64_t>(h) * w);

    const auto other = random_bitmap(rng, h, w, 0.5);
    std::uint64_t both = 0;
    for (std::size_t i = 0; i < other.size(); ++i) both += bitmap[i] && other[i];
    CHECK(intersection_area(rle, RleMask::from_bitmap(other, h, w)) == both);
  }
}

TEST_CASE("RLE starting with foreground has a zero first run") {
  const std::vector<std::uint8_t> bitmap = {1, 1, 0, 1};
  const auto rle = RleMask::from_bitmap(bitmap, 2, 2);
  CHECK(rle.counts() == std::vector<std::uint32_t>{0, 2, 1, 1});
}

TEST_CASE("RLE rejects counts that do not cover the image") {
  CHECK(error_code_of([] { RleMask(2, 2, {1, 2}); }) == ErrorCode::kFormat);
}

TEST_CASE("squared EDT matches brute force") {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const int h = 1 + static_cast<int>(uniform_index(rng, 24));
    const int w = 1 + static_cast<int>(uniform_index(rng, 24));
    const auto mask = random_bitmap(rng, h, w, 0.3 + 0.7 * uniform(rng));
    CHECK(squared_edt(mask, h, w) == brute_edt(mask, h, w));
  }
}

TEST_CASE("k-d tree neighbours match brute force with index tie-break") {
  Rng rng(21);
  std::vector<Vec3f> pts;
  for (int i = 0; i < 500; ++i) {
    // Coarse coordinates create many exact distance ties.
    pts.emplace_back(float(uniform_index(rng, 6)), float(uniform_index(rng, 6)), float(uniform_index(rng, 6)));
  }
  const KdTree tree(pts);
  for (std::uint32_t q = 0; q < 50; ++q) {
    for (std::size_t k : {1u, 5u, 17u}) {
      std::vector<std::uint32_t> order;
      for (std::uint32_t i = 0; i < pts.size(); ++i) {
        if (i != q) order.push_back(i);
      }
      std::sort(order.begin(), order.end(), [&](auto a, auto b) {
        const float da = (pts[a] - pts[q]).squaredNorm(), db = (pts[b] - pts[q]).squaredNorm();
        return da != db ? da < db : a < b;
      });
      order.resize(k);
      CHECK(tree.knn(pts[q], k, q) == order);
    }
  }
}

TEST_CASE("parallel_for visits each index once and rethrows worker errors") {
  std::vector<std::atomic<int>> hits(1000);
  parallel_for(hits.size(), [&](std::size_t i) { ++hits[i]; }, 4);
  for (auto& h : hits) CHECK(h.load() == 1);
  CHECK(error_code_of([] {
          parallel_for(100, [](std::size_t i) {
            if (i == 37) throw Error(ErrorCode::kInvariant, "boom");
          }, 3);
        }) == ErrorCode::kInvariant);
}

TEST_CASE("ByteReader reports truncation and wrong magic") {
  ByteWriter w;
  w.put_magic("ABCD");
  w.put<std::uint32_t>(7);
  {
    ByteReader r(w.bytes(), "t");
    r.expect_magic("ABCD");
    CHECK(r.get<std::uint32_t>() == 7u);
    CHECK(r.at_end());
    CHECK(error_code_of([&] { r.get<std::uint8_t>(); }) == ErrorCode::kTruncated);
  }
  ByteReader r(w.bytes(), "t");
  CHECK(error_code_of([&] { r.expect_magic("ABCE"); }) == ErrorCode::kVersionMismatch);
}
