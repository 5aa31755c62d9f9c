#include "supercut/binary_io.hpp"
#include "supercut/distance_transform.hpp"
#include "supercut/mask_oracle.hpp"

#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

using namespace supercut;
using supercut::test::error_code_of;
using supercut::test::TempDir;

namespace {

/// Random blob-like mask: union of a few discs clipped to the image.
ProjectionMask random_mask(Rng& rng, int h, int w) {
  std::vector<std::uint32_t> pixels;
  const int discs = 1 + static_cast<int>(uniform_index(rng, 4));
  for (int d = 0; d < discs; ++d) {
    const double cr = uniform(rng, 0, h), cc = uniform(rng, 0, w), rad = uniform(rng, 1.0, 12.0);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        if ((r - cr) * (r - cr) + (c - cc) * (c - cc) <= rad * rad) pixels.push_back(r * w + c);
      }
    }
  }
  if (pixels.empty()) pixels.push_back(static_cast<std::uint32_t>(uniform_index(rng, h * w)));
  return make_projection_mask(0, 1, w, h, pixels);
}

/// Full-image farthest-from-boundary sampling with a brute-force distance map.
std::vector<Pixel> reference_prompts(const ProjectionMask& mask, std::uint32_t k, double radius) {
  const int h = mask.height, w = mask.width;
  const auto bitmap = mask.bitmap();
  std::vector<double> dist(bitmap.size(), 0.0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!bitmap[r * w + c]) continue;
      double best = std::numeric_limits<double>::infinity();
      for (int rr = -1; rr <= h; ++rr) {
        for (int cc = -1; cc <= w; ++cc) {
          const bool outside = rr < 0 || cc < 0 || rr >= h || cc >= w;
          if (outside || !bitmap[rr * w + cc]) best = std::min(best, std::hypot(rr - r, cc - c));
        }
      }
      dist[r * w + c] = best;
    }
  }
  std::vector<Pixel> out;
  for (std::uint32_t n = 0; n < k; ++n) {
    int best = -1;
    for (int i = 0; i < h * w; ++i) {
      if (dist[i] > 0 && (best < 0 || dist[i] > dist[best])) best = i;
    }
    if (best < 0) break;
    const Pixel p{best / w, best % w};
    out.push_back(p);
    for (int i = 0; i < h * w; ++i) {
      const double dr = i / w - p.row, dc = i % w - p.col;
      if (dr * dr + dc * dc <= radius * radius) dist[i] = 0;
    }
  }
  return out;
}

MaskCandidate candidate(int h, int w, std::vector<std::uint32_t> pixels, float conf) {
  return {RleMask::from_indices(pixels, h, w), conf};
}

OracleResponse response_with(float large, float medium, float small) {
  return {{candidate(4, 4, {0, 1, 2, 3, 4, 5}, large), candidate(4, 4, {0, 1, 2}, medium),
           candidate(4, 4, {0}, small)}};
}

/// Two 0.8 x 0.8 squares side by side at depth 3 (gt 0 and 1) with a gap between them.
SceneGeometry two_squares() {
  SceneGeometry s;
  for (int obj = 0; obj < 2; ++obj) {
    const float x0 = obj == 0 ? -0.95f : 0.15f;
    for (int i = 0; i < 40; ++i) {
      for (int j = 0; j < 40; ++j) {
        s.points.emplace_back(x0 + 0.8f * i / 39, -0.4f + 0.8f * j / 39, 3.0f);
        s.normals.emplace_back(0, 0, -1);
        s.gt_instance.push_back(obj);
      }
    }
  }
  return s;
}

CameraView front_camera(std::int32_t id) {
  CameraView v;
  v.view_id = id;
  v.fx = v.fy = 60;
  v.width = 80;
  v.height = 60;
  v.cx = 40;
  v.cy = 30;
  return v;
}

std::set<std::uint32_t> label_pixels(const std::vector<std::int32_t>& labels, std::set<std::int32_t> wanted) {
  std::set<std::uint32_t> out;
  for (std::uint32_t i = 0; i < labels.size(); ++i) {
    if (wanted.contains(labels[i])) out.insert(i);
  }
  return out;
}

std::set<std::uint32_t> as_set(const RleMask& m) {
  const auto v = m.to_indices();
  return {v.begin(), v.end()};
}

}  // namespace

TEST_CASE("default suppression radius") {
  CHECK(default_suppression_radius(1) == 3.0);
  CHECK(default_suppression_radius(144) == 3.0);
  CHECK(default_suppression_radius(400) == 5.0);
}

TEST_CASE("prompt sampling matches the full-image brute-force sampler") {
  Rng rng(77);
  for (int trial = 0; trial < 150; ++trial) {
    const int h = 8 + static_cast<int>(uniform_index(rng, 30)), w = 8 + static_cast<int>(uniform_index(rng, 30));
    const auto mask = random_mask(rng, h, w);
    const std::uint32_t k = 1 + static_cast<std::uint32_t>(uniform_index(rng, 8));
    const auto prompts = sample_prompts(mask, k);
    const double radius = default_suppression_radius(mask.pixel_count());
    CHECK(prompts.points == reference_prompts(mask, k, radius));
    CHECK(prompts.view_id == mask.view_id);
    CHECK(prompts.sp_id == mask.sp_id);
    for (std::size_t i = 0; i < prompts.points.size(); ++i) {
      CHECK(mask.contains(prompts.points[i]));
      for (std::size_t j = 0; j < i; ++j) {
        const double d = std::hypot(prompts.points[i].row - prompts.points[j].row,
                                    prompts.points[i].col - prompts.points[j].col);
        CHECK(d > radius);
      }
    }
  }
}

TEST_CASE("prompt sampling argument checks") {
  const auto mask = make_projection_mask(0, 0, 4, 4, {5});
  CHECK(error_code_of([&] { sample_prompts(mask, 0); }) == ErrorCode::kInvalidArgument);
  CHECK(error_code_of([&] { sample_prompts(mask, 17); }) == ErrorCode::kInvalidArgument);
  CHECK(sample_prompts(mask, 5).points == std::vector<Pixel>{{1, 1}});
}

TEST_CASE("mask selection prefers large masks within the margin") {
  CHECK(select_mask_index(response_with(0.9f, 0.8f, 0.7f)) == 0);
  CHECK(select_mask_index(response_with(0.80f, 0.84f, 0.7f)) == 0);
  CHECK(select_mask_index(response_with(0.70f, 0.80f, 0.6f)) == 1);
  CHECK(select_mask_index(response_with(0.50f, 0.60f, 0.64f)) == 1);
  CHECK(select_mask_index(response_with(0.50f, 0.60f, 0.70f)) == 2);
  CHECK(select_mask_index(response_with(0.50f, 0.40f, 0.70f)) == 2);
}

TEST_CASE("response validation") {
  validate_response(response_with(0.5f, 0.5f, 0.5f));
  auto r = response_with(0.5f, 0.5f, 0.5f);
  std::swap(r.candidates[0], r.candidates[2]);
  CHECK(error_code_of([&] { validate_response(r); }) == ErrorCode::kFormat);
  r = response_with(1.5f, 0.5f, 0.5f);
  CHECK(error_code_of([&] { validate_response(r); }) == ErrorCode::kFormat);
  r = response_with(0.5f, 0.5f, 0.5f);
  r.candidates[2] = candidate(4, 4, {}, 0.5f);
  CHECK(error_code_of([&] { validate_response(r); }) == ErrorCode::kFormat);
}

TEST_CASE("prompt dump round-trips and rejects damage") {
  std::vector<PromptSet> prompts = {{0, 3, {{1, 2}, {3, 4}}}, {7, 1, {{0, 0}}}, {7, 2, {}}};
  const auto bytes = encode_prompts(prompts);
  CHECK(decode_prompts(bytes) == prompts);
  // magic + count + (3 + 2*2) + (3 + 2) + 3 words
  CHECK(bytes.size() == 4 + 4 * (1 + 7 + 5 + 3));
  auto cut = bytes;
  cut.pop_back();
  CHECK(error_code_of([&] { decode_prompts(cut); }) == ErrorCode::kTruncated);
  auto extra = bytes;
  extra.push_back(1);
  CHECK(error_code_of([&] { decode_prompts(extra); }) == ErrorCode::kFormat);

  TempDir dir("prompts");
  save_prompts(prompts, dir / "p.bin");
  CHECK(load_prompts(dir / "p.bin") == prompts);
}

TEST_CASE("oracle store round-trip, lookup errors and corruption") {
  TempDir dir("store");
  OracleStoreWriter writer;
  writer.add(0, 5, response_with(0.9f, 0.5f, 0.25f));
  writer.add(2, 1, response_with(0.1f, 0.2f, 0.3f));
  writer.write(dir.path());

  const auto store = OracleStore::load(dir.path());
  CHECK(store.size() == 2);
  store.validate_all();
  CHECK(store.get(0, 5) == response_with(0.9f, 0.5f, 0.25f));
  CHECK(error_code_of([&] { store.get(1, 5); }) == ErrorCode::kMissingOracleData);

  const FileOracle oracle(store);
  PromptSet p{2, 1, {{0, 0}}};
  CHECK(oracle.query(p) == response_with(0.1f, 0.2f, 0.3f));

  auto blob = read_file(dir / "masks.bin");
  blob.resize(blob.size() - 6);
  write_file_atomic(dir / "masks.bin", blob);
  const auto damaged = OracleStore::load(dir.path());
  CHECK(error_code_of([&] { damaged.validate_all(); }) == ErrorCode::kFormat);

  std::filesystem::remove(dir / "masks.bin");
  CHECK(error_code_of([&] { OracleStore::load(dir.path()); }) == ErrorCode::kIo);
  CHECK(error_code_of([&] { OracleStore::load(dir / "missing"); }) == ErrorCode::kIo);
}

TEST_CASE("noiseless synthetic oracle returns the prompted instance") {
  const auto scene = two_squares();
  const std::vector<CameraView> views = {front_camera(0)};
  const SyntheticOracle oracle(scene, views, {}, 9);
  const auto& labels = oracle.label_image(0);
  const auto left = label_pixels(labels, {0}), right = label_pixels(labels, {1});
  REQUIRE(left.size() > 100);
  REQUIRE(right.size() > 100);

  const std::uint32_t probe = *std::next(left.begin(), static_cast<long>(left.size() / 2));
  PromptSet prompt{0, 4, {{static_cast<std::int32_t>(probe / 80), static_cast<std::int32_t>(probe % 80)}}};
  const auto response = oracle.query(prompt);
  validate_response(response);
  CHECK(select_mask_index(response) == 0);
  CHECK(as_set(response.candidates[0].mask) == left);
  CHECK(response.candidates[0].confidence >= 0.8f);
  for (int i = 1; i < 3; ++i) {
    for (auto p : as_set(response.candidates[i].mask)) CHECK(left.contains(p));
  }
  CHECK(oracle.query(prompt) == response);
}

TEST_CASE("merge and split noise is systematic per superpoint") {
  const auto scene = two_squares();
  const std::vector<CameraView> views = {front_camera(0), front_camera(1)};
  const auto& labels = SyntheticOracle(scene, views, {}, 1).label_image(0);
  const auto left = label_pixels(labels, {0});
  const std::uint32_t probe = *std::next(left.begin(), static_cast<long>(left.size() / 2));
  const Pixel px{static_cast<std::int32_t>(probe / 80), static_cast<std::int32_t>(probe % 80)};

  // The squares are separated by background, so there is no instance to merge with.
  const SyntheticOracle merging(scene, views, {1.0, 0.0}, 3);
  CHECK(as_set(merging.query({0, 2, {px}}).candidates[0].mask) == left);

  const SyntheticOracle splitting(scene, views, {0.0, 1.0}, 3);
  const auto r0 = splitting.query({0, 2, {px}});
  const auto r1 = splitting.query({1, 2, {px}});
  const auto half = as_set(r0.candidates[0].mask);
  CHECK(half.size() < left.size());
  CHECK(half.size() > 0);
  CHECK(half.contains(probe));
  for (auto p : half) CHECK(left.contains(p));
  CHECK(r0.candidates[0].confidence >= 0.3f);
  CHECK(r0.candidates[0].confidence <= 0.6f);
  // Identical views and the same superpoint give the same corruption.
  CHECK(as_set(r1.candidates[0].mask) == half);
}

TEST_CASE("merge noise absorbs a touching instance") {
  // Two squares sharing an edge.
  SceneGeometry s;
  for (int obj = 0; obj < 2; ++obj) {
    for (int i = 0; i < 40; ++i) {
      for (int j = 0; j < 40; ++j) {
        s.points.emplace_back(-0.8f + 0.8f * obj + 0.8f * i / 40, -0.4f + 0.8f * j / 39, 3.0f);
        s.normals.emplace_back(0, 0, -1);
        s.gt_instance.push_back(obj);
      }
    }
  }
  const std::vector<CameraView> views = {front_camera(0)};
  const SyntheticOracle oracle(s, views, {1.0, 0.0}, 5);
  const auto& labels = oracle.label_image(0);
  const auto left = label_pixels(labels, {0});
  const auto both = label_pixels(labels, {0, 1});
  const std::uint32_t probe = *std::next(left.begin(), static_cast<long>(left.size() / 2));
  const auto r = oracle.query({0, 8, {{static_cast<std::int32_t>(probe / 80), static_cast<std::int32_t>(probe % 80)}}});
  CHECK(as_set(r.candidates[0].mask) == both);
  CHECK(r.candidates[0].confidence <= 0.6f);
}

TEST_CASE("synthetic oracle argument checks") {
  const auto scene = two_squares();
  const std::vector<CameraView> views = {front_camera(0)};
  const SyntheticOracle oracle(scene, views, {}, 1);
  CHECK(error_code_of([&] { oracle.query({0, 0, {}}); }) == ErrorCode::kInvalidArgument);
  CHECK(error_code_of([&] { oracle.query({0, 0, {{-1, 0}}}); }) == ErrorCode::kInvalidArgument);
  CHECK(error_code_of([&] { oracle.query({3, 0, {{1, 1}}}); }) == ErrorCode::kInvalidArgument);
  CHECK(error_code_of([&] { SyntheticOracle(scene, views, {1.5, 0}, 1); }) == ErrorCode::kInvalidArgument);
}
