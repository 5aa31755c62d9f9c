#include "supercut/binary_io.hpp"
#include "supercut/distance_transform.hpp"
#include "supercut/error.hpp"
#include "supercut/mask_oracle.hpp"

#include <algorithm>
#include <cmath>

namespace supercut {

double default_suppression_radius(std::size_t mask_area) {
  return std::max(3.0, std::sqrt(static_cast<double>(mask_area)) / 4.0);
}

PromptSet sample_prompts(const ProjectionMask& mask, std::uint32_t k, std::optional<double> suppression_radius) {
  if (k < 1 || k > kMaxPromptCount) throw Error(ErrorCode::kInvalidArgument, "prompt count must be in [1, 16]");
  if (mask.pixels.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot sample prompts in an empty mask");
  PromptSet prompts{mask.view_id, mask.sp_id, {}};
  const double radius = suppression_radius.value_or(default_suppression_radius(mask.pixel_count()));

  // Work on the bounding box; everything outside it is background anyway.
  std::int32_t r0 = INT32_MAX, r1 = -1, c0 = INT32_MAX, c1 = -1;
  for (std::size_t i = 0; i < mask.pixel_count(); ++i) {
    const auto p = mask.pixel(i);
    r0 = std::min(r0, p.row);
    r1 = std::max(r1, p.row);
    c0 = std::min(c0, p.col);
    c1 = std::max(c1, p.col);
  }
  const std::int32_t h = r1 - r0 + 1, w = c1 - c0 + 1;
  std::vector<std::uint8_t> local(static_cast<std::size_t>(h) * w, 0);
  for (std::size_t i = 0; i < mask.pixel_count(); ++i) {
    const auto p = mask.pixel(i);
    local[static_cast<std::size_t>(p.row - r0) * w + (p.col - c0)] = 1;
  }
  const auto sq = squared_edt(local, h, w);
  std::vector<double> dist(sq.size());
  for (std::size_t i = 0; i < sq.size(); ++i) dist[i] = std::sqrt(static_cast<double>(sq[i]));

  const double r2 = radius * radius;
  const auto reach = static_cast<std::int32_t>(std::floor(radius));
  for (std::uint32_t n = 0; n < k; ++n) {
    std::size_t best = 0;
    double best_value = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
      if (dist[i] > best_value) {
        best_value = dist[i];
        best = i;
      }
    }
    if (best_value <= 0.0) break;
    const auto br = static_cast<std::int32_t>(best / w), bc = static_cast<std::int32_t>(best % w);
    prompts.points.push_back({br + r0, bc + c0});
    for (std::int32_t dr = -reach; dr <= reach; ++dr) {
      for (std::int32_t dc = -reach; dc <= reach; ++dc) {
        const auto r = br + dr, c = bc + dc;
        if (r < 0 || c < 0 || r >= h || c >= w) continue;
        if (static_cast<double>(dr * dr + dc * dc) <= r2) dist[static_cast<std::size_t>(r) * w + c] = 0.0;
      }
    }
  }
  return prompts;
}

void validate_response(const OracleResponse& response) {
  const auto& c = response.candidates;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i].area() == 0) throw Error(ErrorCode::kFormat, "candidate " + std::to_string(i) + " is empty");
    if (!(c[i].confidence >= 0.0f && c[i].confidence <= 1.0f)) {
      throw Error(ErrorCode::kFormat, "candidate " + std::to_string(i) + " confidence outside [0,1]");
    }
    if (c[i].mask.height() != c[0].mask.height() || c[i].mask.width() != c[0].mask.width()) {
      throw Error(ErrorCode::kFormat, "candidates have different image sizes");
    }
  }
  if (!(c[0].area() >= c[1].area() && c[1].area() >= c[2].area())) {
    throw Error(ErrorCode::kFormat, "candidates not ordered by descending area");
  }
}

std::size_t select_mask_index(const OracleResponse& response) {
  const double large = response.candidates[0].confidence;
  const double medium = response.candidates[1].confidence;
  const double small = response.candidates[2].confidence;
  if (large >= std::max(medium, small) - kSelectionMargin) return 0;
  if (medium >= small - kSelectionMargin) return 1;
  return 2;
}

const MaskCandidate& select_mask(const OracleResponse& response) {
  return response.candidates[select_mask_index(response)];
}

std::vector<std::uint8_t> encode_prompts(std::span<const PromptSet> prompts) {
  ByteWriter w;
  w.put_magic("PRM1");
  w.put(static_cast<std::uint32_t>(prompts.size()));
  for (const auto& p : prompts) {
    w.put(static_cast<std::uint32_t>(p.view_id));
    w.put(static_cast<std::uint32_t>(p.sp_id));
    w.put(static_cast<std::uint32_t>(p.points.size()));
    for (const auto& px : p.points) {
      w.put(static_cast<std::uint32_t>(px.row));
      w.put(static_cast<std::uint32_t>(px.col));
    }
  }
  return w.bytes();
}

std::vector<PromptSet> decode_prompts(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, "prompts");
  r.expect_magic("PRM1");
  const auto count = r.get<std::uint32_t>();
  std::vector<PromptSet> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    PromptSet p;
    p.view_id = static_cast<std::int32_t>(r.get<std::uint32_t>());
    p.sp_id = static_cast<std::int32_t>(r.get<std::uint32_t>());
    const auto k = r.get<std::uint32_t>();
    if (k > kMaxPromptCount) throw Error(ErrorCode::kFormat, "prompts: record " + std::to_string(i) + " has k > 16");
    for (std::uint32_t j = 0; j < k; ++j) {
      const auto row = static_cast<std::int32_t>(r.get<std::uint32_t>());
      const auto col = static_cast<std::int32_t>(r.get<std::uint32_t>());
      p.points.push_back({row, col});
    }
    out.push_back(std::move(p));
  }
  if (!r.at_end()) throw Error(ErrorCode::kFormat, "prompts: trailing bytes");
  return out;
}

void save_prompts(std::span<const PromptSet> prompts, const std::filesystem::path& path) {
  write_file_atomic(path, encode_prompts(prompts));
}

std::vector<PromptSet> load_prompts(const std::filesystem::path& path) { return decode_prompts(read_file(path)); }

}  // namespace supercut
