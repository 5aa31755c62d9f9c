#pragma once

#include "supercut/projection.hpp"
#include "supercut/rle_mask.hpp"
#include "supercut/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace supercut {

inline constexpr std::uint32_t kDefaultPromptCount = 5;
inline constexpr std::uint32_t kMaxPromptCount = 16;
inline constexpr double kSelectionMargin = 0.05;

struct PromptSet {
  std::int32_t view_id = 0;
  std::int32_t sp_id = 0;
  std::vector<Pixel> points;

  bool operator==(const PromptSet&) const = default;
};

/// max(3, sqrt(area) / 4) pixels.
double default_suppression_radius(std::size_t mask_area);

/// Greedy farthest-from-boundary sampling: take the distance-transform argmax
/// (ties to the smallest (row, col)), zero the disk of `suppression_radius`
/// around it, repeat until k points or the map is exhausted.
PromptSet sample_prompts(const ProjectionMask& mask, std::uint32_t k = kDefaultPromptCount,
                         std::optional<double> suppression_radius = std::nullopt);

struct MaskCandidate {
  RleMask mask;
  float confidence = 0.0f;

  std::uint64_t area() const { return mask.area(); }
  bool operator==(const MaskCandidate&) const = default;
};

/// Three candidates ordered by descending area: whole, medium, small.
struct OracleResponse {
  std::array<MaskCandidate, 3> candidates;

  bool operator==(const OracleResponse&) const = default;
};

/// Throws kFormat on empty masks, mismatched sizes, unordered areas or bad confidences.
void validate_response(const OracleResponse& response);

/// Large-mask preference with a 0.05 confidence margin: the largest wins unless
/// it trails the best of the others by more than the margin; then the medium
/// wins unless it trails the small by more than the margin.
std::size_t select_mask_index(const OracleResponse& response);
const MaskCandidate& select_mask(const OracleResponse& response);

/// Source of promptable-segmenter responses.
class MaskOracle {
public:
  virtual ~MaskOracle() = default;
  /// Must be safe to call concurrently.
  virtual OracleResponse query(const PromptSet& prompt) const = 0;
};

/// On-disk oracle store: `index.json` + `masks.bin`.
class OracleStore {
public:
  struct Record {
    std::uint64_t offset = 0;
    std::int32_t height = 0;
    std::int32_t width = 0;
  };

  static OracleStore load(const std::filesystem::path& dir);

  bool contains(std::int32_t view_id, std::int32_t sp_id) const { return index_.contains({view_id, sp_id}); }
  std::size_t size() const { return index_.size(); }
  /// Throws kMissingOracleData for absent keys and kFormat for corrupt records.
  OracleResponse get(std::int32_t view_id, std::int32_t sp_id) const;
  /// Decodes every record; throws on the first corrupt one.
  void validate_all() const;
  std::vector<std::pair<std::int32_t, std::int32_t>> keys() const;

private:
  std::map<std::pair<std::int32_t, std::int32_t>, Record> index_;
  std::vector<std::uint8_t> blob_;
};

class OracleStoreWriter {
public:
  void add(std::int32_t view_id, std::int32_t sp_id, const OracleResponse& response);
  /// Writes index.json and masks.bin into `dir` (created if needed).
  void write(const std::filesystem::path& dir, const std::string& model_id = "synthetic") const;

private:
  std::map<std::pair<std::int32_t, std::int32_t>, OracleResponse> responses_;
};

/// Oracle backed by an exported store; returns stored responses verbatim.
class FileOracle final : public MaskOracle {
public:
  explicit FileOracle(OracleStore store) : store_(std::move(store)) {}
  OracleResponse query(const PromptSet& prompt) const override;
  const OracleStore& store() const { return store_; }

private:
  OracleStore store_;
};

OracleResponse query_file_oracle(const OracleStore& store, std::int32_t view_id, const PromptSet& prompt);

struct NoiseConfig {
  double p_merge = 0.0;
  double p_split = 0.0;

  bool enabled() const { return p_merge > 0.0 || p_split > 0.0; }
};

void validate_noise(const NoiseConfig& noise);

/// Ground-truth oracle over a labelled scene. Each query reads the GT instance
/// under the majority of prompt points from a rendered label image.
///
/// Noise is drawn per superpoint from (seed, sp_id), so a corrupted superpoint
/// is corrupted the same way in every view: with p_merge its masks include one
/// neighbouring instance (the neighbour with the highest per-superpoint priority
/// among instances touching it in that view); with p_split they cover one half
/// of the instance, cut by a per-superpoint image direction through the
/// instance centroid. All candidates derive from the (possibly corrupted) base.
/// Whole-mask confidence is U(0.8,1) clean, U(0.3,0.6) corrupted; the medium
/// and small candidates get the whole confidence plus U(-0.1, 0.04), so the
/// whole mask always survives the selection margin.
class SyntheticOracle final : public MaskOracle {
public:
  SyntheticOracle(const SceneGeometry& scene, std::span<const CameraView> views, NoiseConfig noise,
                  std::uint64_t seed, std::size_t threads = 0);

  OracleResponse query(const PromptSet& prompt) const override;

  /// GT label per pixel for a view; kBackgroundLabel where nothing was rendered.
  const std::vector<std::int32_t>& label_image(std::int32_t view_id) const;
  const CameraView& view(std::int32_t view_id) const;

  static constexpr std::int32_t kBackgroundLabel = INT32_MIN;

private:
  struct ViewData {
    CameraView view;
    std::vector<std::int32_t> labels;
  };
  const ViewData& data(std::int32_t view_id) const;

  NoiseConfig noise_;
  std::uint64_t seed_;
  std::map<std::int32_t, ViewData> views_;
};

/// Rendered GT label image (point splat / z-buffer winner's gt_instance).
std::vector<std::int32_t> render_label_image(const SceneGeometry& scene, const CameraView& view);

OracleResponse query_synthetic_oracle(const SceneGeometry& scene, const CameraView& view, const PromptSet& prompt,
                                      const NoiseConfig& noise, std::uint64_t rng_seed);

/// Prompt dump (`prompts.bin`) handed to external exporters:
/// magic "PRM1", u32 count, then per record u32 view_id, u32 sp_id, u32 k,
/// k x (u32 row, u32 col). Little-endian.
std::vector<std::uint8_t> encode_prompts(std::span<const PromptSet> prompts);
std::vector<PromptSet> decode_prompts(std::span<const std::uint8_t> bytes);
void save_prompts(std::span<const PromptSet> prompts, const std::filesystem::path& path);
std::vector<PromptSet> load_prompts(const std::filesystem::path& path);

}  // namespace supercut
