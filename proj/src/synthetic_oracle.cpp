#include "supercut/distance_transform.hpp"
#include "supercut/error.hpp"
#include "supercut/mask_oracle.hpp"
#include "supercut/parallel.hpp"
#include "supercut/rng.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

namespace supercut {

namespace {

constexpr double kPartKeepFraction = 0.75;

/// Squared distance transform of the region's bounding-box crop; the crop
/// origin and size are returned through r0, c0, h, w.
std::vector<std::int64_t> region_edt(std::span<const std::uint32_t> pixels, std::int32_t width,
                                     std::int32_t& r0, std::int32_t& c0, std::int32_t& h, std::int32_t& w) {
  std::int32_t r1 = -1, c1 = -1;
  r0 = INT32_MAX;
  c0 = INT32_MAX;
  for (auto p : pixels) {
    const auto r = static_cast<std::int32_t>(p / width), c = static_cast<std::int32_t>(p % width);
    r0 = std::min(r0, r);
    r1 = std::max(r1, r);
    c0 = std::min(c0, c);
    c1 = std::max(c1, c);
  }
  h = r1 - r0 + 1;
  w = c1 - c0 + 1;
  std::vector<std::uint8_t> local(static_cast<std::size_t>(h) * w, 0);
  for (auto p : pixels) {
    local[static_cast<std::size_t>(p / width - r0) * w + (p % width - c0)] = 1;
  }
  return squared_edt(local, h, w);
}

std::vector<std::uint32_t> erode_by_area(const std::vector<std::uint32_t>& pixels, std::int32_t width) {
  std::int32_t r0, c0, h, w;
  const auto edt = region_edt(pixels, width, r0, c0, h, w);
  std::vector<std::pair<std::int64_t, std::uint32_t>> ranked;
  ranked.reserve(pixels.size());
  for (auto p : pixels) {
    const auto local = static_cast<std::size_t>(p / width - r0) * w + (p % width - c0);
    ranked.emplace_back(-edt[local], p);
  }
  std::sort(ranked.begin(), ranked.end());
  const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(kPartKeepFraction * pixels.size())));
  std::vector<std::uint32_t> out;
  for (std::size_t i = 0; i < keep; ++i) out.push_back(ranked[i].second);
  std::sort(out.begin(), out.end());
  return out;
}

/// 4-connected pixels of `member` reachable from `seed` within `radius`.
std::vector<std::uint32_t> flood(const std::vector<std::uint8_t>& member, std::int32_t height, std::int32_t width,
                                 std::uint32_t seed, double radius) {
  const double r2 = radius * radius;
  const auto sr = static_cast<std::int32_t>(seed / width), sc = static_cast<std::int32_t>(seed % width);
  std::vector<std::uint8_t> seen(member.size(), 0);
  std::vector<std::uint32_t> out;
  std::deque<std::uint32_t> queue{seed};
  seen[seed] = 1;
  while (!queue.empty()) {
    const auto p = queue.front();
    queue.pop_front();
    out.push_back(p);
    const auto r = static_cast<std::int32_t>(p / width), c = static_cast<std::int32_t>(p % width);
    const std::int32_t dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
    for (int k = 0; k < 4; ++k) {
      const auto nr = r + dr[k], nc = c + dc[k];
      if (nr < 0 || nc < 0 || nr >= height || nc >= width) continue;
      const auto q = static_cast<std::uint32_t>(nr * width + nc);
      if (seen[q] || !member[q]) continue;
      const double d2 = static_cast<double>((nr - sr) * (nr - sr) + (nc - sc) * (nc - sc));
      if (d2 > r2) continue;
      seen[q] = 1;
      queue.push_back(q);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::uint32_t> connected_component(const std::vector<std::int32_t>& labels, std::int32_t height,
                                               std::int32_t width, std::uint32_t seed) {
  std::vector<std::uint8_t> member(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) member[i] = labels[i] == labels[seed];
  return flood(member, height, width, seed, std::numeric_limits<double>::infinity());
}

OracleResponse respond(const std::vector<std::int32_t>& labels, const CameraView& view, const PromptSet& prompt,
                       const NoiseConfig& noise, std::uint64_t seed) {
  const auto width = view.width, height = view.height;
  if (prompt.points.empty()) throw Error(ErrorCode::kInvalidArgument, "oracle query without prompt points");
  std::vector<std::uint32_t> prompt_index;
  for (const auto& p : prompt.points) {
    if (p.row < 0 || p.col < 0 || p.row >= height || p.col >= width) {
      throw Error(ErrorCode::kInvalidArgument, "prompt point outside the image");
    }
    prompt_index.push_back(static_cast<std::uint32_t>(p.row * width + p.col));
  }

  // Majority label under the prompts; ties go to the label of the earliest prompt.
  std::int32_t label = labels[prompt_index[0]];
  std::size_t best = 0;
  for (std::size_t i = 0; i < prompt_index.size(); ++i) {
    const auto l = labels[prompt_index[i]];
    const auto n = static_cast<std::size_t>(
        std::count_if(prompt_index.begin(), prompt_index.end(), [&](std::uint32_t q) { return labels[q] == l; }));
    if (n > best) {
      best = n;
      label = l;
    }
  }
  std::uint32_t anchor = prompt_index[0];
  for (auto q : prompt_index) {
    if (labels[q] == label) {
      anchor = q;
      break;
    }
  }

  Rng rng(derive_seed(seed, {prompt.sp_id}));
  const double u_merge = uniform(rng), u_split = uniform(rng);
  const double angle = uniform(rng, 0.0, 6.283185307179586);

  std::vector<std::uint32_t> base;
  bool corrupted = false;
  const bool background = label == SyntheticOracle::kBackgroundLabel;
  if (background) {
    base = connected_component(labels, height, width, anchor);
  } else {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == label) base.push_back(static_cast<std::uint32_t>(i));
    }
    if (u_merge < noise.p_merge) {
      std::int32_t partner = 0;
      std::uint64_t partner_priority = 0;
      bool found = false;
      for (auto p : base) {
        const auto r = static_cast<std::int32_t>(p / width), c = static_cast<std::int32_t>(p % width);
        const std::int32_t dr[4] = {-1, 1, 0, 0}, dc[4] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
          const auto nr = r + dr[k], nc = c + dc[k];
          if (nr < 0 || nc < 0 || nr >= height || nc >= width) continue;
          const auto l = labels[static_cast<std::size_t>(nr) * width + nc];
          if (l == label || l == SyntheticOracle::kBackgroundLabel) continue;
          const auto priority = derive_seed(seed, {prompt.sp_id, l, 1});
          if (!found || priority > partner_priority) {
            found = true;
            partner = l;
            partner_priority = priority;
          }
        }
      }
      if (found) {
        corrupted = true;
        for (std::size_t i = 0; i < labels.size(); ++i) {
          if (labels[i] == partner) base.push_back(static_cast<std::uint32_t>(i));
        }
        std::sort(base.begin(), base.end());
      }
    } else if (u_split < noise.p_split) {
      double cr = 0.0, cc = 0.0;
      for (auto p : base) {
        cr += p / width;
        cc += p % width;
      }
      cr /= static_cast<double>(base.size());
      cc /= static_cast<double>(base.size());
      const double dr = std::sin(angle), dc = std::cos(angle);
      auto side = [&](std::uint32_t p) {
        return (static_cast<double>(p / width) - cr) * dr + (static_cast<double>(p % width) - cc) * dc >= 0.0;
      };
      const bool keep_side = side(anchor);
      std::vector<std::uint32_t> half;
      for (auto p : base) {
        if (side(p) == keep_side) half.push_back(p);
      }
      if (!half.empty() && half.size() < base.size()) {
        corrupted = true;
        base = std::move(half);
      }
    }
  }

  std::vector<std::uint8_t> member(labels.size(), 0);
  for (auto p : base) member[p] = 1;
  auto seed_pixel = anchor;
  if (!member[seed_pixel]) {
    seed_pixel = base.front();
    for (auto q : prompt_index) {
      if (member[q]) {
        seed_pixel = q;
        break;
      }
    }
  }
  const auto medium = erode_by_area(base, width);
  const double small_radius = std::max(2.0, std::sqrt(static_cast<double>(base.size())) / 4.0);
  const auto small = flood(member, height, width, seed_pixel, small_radius);

  double whole_conf;
  if (background) {
    whole_conf = uniform(rng, 0.1, 0.3);
  } else if (corrupted) {
    whole_conf = uniform(rng, 0.3, 0.6);
  } else {
    whole_conf = uniform(rng, 0.8, 1.0);
  }
  auto part_conf = [&] { return static_cast<float>(std::clamp(whole_conf + uniform(rng, -0.1, 0.04), 0.0, 1.0)); };
  std::array<MaskCandidate, 3> cands{
      MaskCandidate{RleMask::from_indices(base, height, width), static_cast<float>(whole_conf)},
      MaskCandidate{RleMask::from_indices(medium, height, width), part_conf()},
      MaskCandidate{RleMask::from_indices(small, height, width), part_conf()}};
  std::stable_sort(cands.begin(), cands.end(),
                   [](const MaskCandidate& a, const MaskCandidate& b) { return a.area() > b.area(); });
  OracleResponse response{cands};
  validate_response(response);
  return response;
}

}  // namespace

void validate_noise(const NoiseConfig& noise) {
  auto ok = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!ok(noise.p_merge) || !ok(noise.p_split)) {
    throw Error(ErrorCode::kInvalidArgument, "noise probabilities must be in [0, 1]");
  }
}

std::vector<std::int32_t> render_label_image(const SceneGeometry& scene, const CameraView& view) {
  if (!scene.has_gt()) throw Error(ErrorCode::kInvalidArgument, "synthetic oracle needs ground-truth instance labels");
  const auto render = render_scene(scene, view);
  std::vector<std::int32_t> labels(render.source_point.size(), SyntheticOracle::kBackgroundLabel);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto src = render.source_point[i];
    if (src >= 0) labels[i] = scene.gt_instance[static_cast<std::size_t>(src)];
  }
  return labels;
}

SyntheticOracle::SyntheticOracle(const SceneGeometry& scene, std::span<const CameraView> views, NoiseConfig noise,
                                 std::uint64_t seed, std::size_t threads)
    : noise_(noise), seed_(seed) {
  validate_noise(noise);
  std::vector<std::vector<std::int32_t>> images(views.size());
  parallel_for(
      views.size(), [&](std::size_t i) { images[i] = render_label_image(scene, views[i]); }, threads);
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (!views_.emplace(views[i].view_id, ViewData{views[i], std::move(images[i])}).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate view_id " + std::to_string(views[i].view_id));
    }
  }
}

const SyntheticOracle::ViewData& SyntheticOracle::data(std::int32_t view_id) const {
  const auto it = views_.find(view_id);
  if (it == views_.end()) throw Error(ErrorCode::kInvalidArgument, "unknown view_id " + std::to_string(view_id));
  return it->second;
}

OracleResponse SyntheticOracle::query(const PromptSet& prompt) const {
  const auto& d = data(prompt.view_id);
  return respond(d.labels, d.view, prompt, noise_, seed_);
}

const std::vector<std::int32_t>& SyntheticOracle::label_image(std::int32_t view_id) const {
  return data(view_id).labels;
}

const CameraView& SyntheticOracle::view(std::int32_t view_id) const { return data(view_id).view; }

OracleResponse query_synthetic_oracle(const SceneGeometry& scene, const CameraView& view, const PromptSet& prompt,
                                      const NoiseConfig& noise, std::uint64_t rng_seed) {
  validate_noise(noise);
  return respond(render_label_image(scene, view), view, prompt, noise, rng_seed);
}

}  // namespace supercut
