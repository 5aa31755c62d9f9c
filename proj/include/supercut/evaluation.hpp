#pragma once

#include "supercut/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace supercut {

/// |pred ∩ gt| / |pred ∪ gt| over sorted point-index sets, after removing
/// points flagged in `excluded` (may be empty) from both; 0 when both are empty.
double mask_iou(std::span<const std::uint32_t> pred, std::span<const std::uint32_t> gt,
                std::span<const std::uint8_t> excluded = {});

/// Area under the all-point interpolated precision/recall curve for
/// predictions already sorted by confidence; `true_positive[i]` marks matches.
double average_precision(std::span<const std::uint8_t> true_positive, std::size_t num_gt);

struct ApReport {
  double map = 0.0;
  double ap50 = 0.0;
  double ap25 = 0.0;
  std::vector<std::pair<double, double>> per_threshold;  ///< (iou threshold, AP), 0.25 then 0.50..0.95
  std::size_t num_gt = 0;
  std::size_t num_predictions = 0;  ///< after the exclusion filter
  std::vector<std::string> warnings;
};

/// The ten thresholds 0.50, 0.55, ..., 0.95.
std::vector<double> map_thresholds();

/// Class-agnostic AP. GT instances are the ids of `gt_instance` outside
/// `exclusions` and NONE; those regions are excluded. Predictions lying at
/// least half in excluded regions are dropped, the rest are trimmed to the
/// kept region. Predictions are matched greedily in confidence order (ties by
/// id) to the unmatched GT of highest IoU at or above each threshold.
ApReport evaluate(const InstanceSegmentation& pred, std::span<const std::int32_t> gt_instance,
                  const std::set<std::int32_t>& exclusions = {kInstanceFloor, kInstanceWall});

/// Parses a comma list of `floor`, `wall` or integer ids; empty string = none.
std::set<std::int32_t> parse_exclusions(const std::string& text);

nlohmann::json report_to_json(const ApReport& report, const std::set<std::int32_t>& exclusions);
void save_report(const ApReport& report, const std::set<std::int32_t>& exclusions, const std::filesystem::path& path);

}  // namespace supercut
