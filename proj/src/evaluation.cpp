#include "supercut/evaluation.hpp"

#include "supercut/binary_io.hpp"
#include "supercut/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

namespace supercut {

double mask_iou(std::span<const std::uint32_t> pred, std::span<const std::uint32_t> gt,
                std::span<const std::uint8_t> excluded) {
  auto kept = [&](std::uint32_t p) { return excluded.empty() || !excluded[p]; };
  std::size_t a = 0, b = 0, inter = 0, i = 0, j = 0;
  for (auto p : pred) a += kept(p);
  for (auto p : gt) b += kept(p);
  while (i < pred.size() && j < gt.size()) {
    if (pred[i] < gt[j]) {
      ++i;
    } else if (gt[j] < pred[i]) {
      ++j;
    } else {
      inter += kept(pred[i]);
      ++i;
      ++j;
    }
  }
  const auto uni = a + b - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double average_precision(std::span<const std::uint8_t> true_positive, std::size_t num_gt) {
  if (num_gt == 0 || true_positive.empty()) return 0.0;
  const auto n = true_positive.size();
  std::vector<double> precision(n), recall(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += true_positive[i] ? 1 : 0;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(num_gt);
  }
  for (std::size_t i = n - 1; i-- > 0;) precision[i] = std::max(precision[i], precision[i + 1]);
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

std::vector<double> map_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back(0.5 + 0.05 * i);
  return t;
}

ApReport evaluate(const InstanceSegmentation& pred, std::span<const std::int32_t> gt_instance,
                  const std::set<std::int32_t>& exclusions) {
  validate_segmentation(pred);
  if (pred.assignment.size() != gt_instance.size()) {
    throw Error(ErrorCode::kInvalidArgument, "segmentation has " + std::to_string(pred.assignment.size()) +
                                                 " points, ground truth has " + std::to_string(gt_instance.size()));
  }
  const auto n = gt_instance.size();
  std::vector<std::uint8_t> excluded(n);
  std::map<std::int32_t, std::size_t> gt_index;
  for (std::size_t p = 0; p < n; ++p) {
    const auto g = gt_instance[p];
    excluded[p] = g == kInstanceNone || exclusions.contains(g);
    if (!excluded[p]) gt_index.emplace(g, 0);
  }
  std::size_t k = 0;
  for (auto& [id, idx] : gt_index) idx = k++;
  std::vector<std::size_t> gt_size(gt_index.size(), 0);
  for (std::size_t p = 0; p < n; ++p) {
    if (!excluded[p]) ++gt_size[gt_index.at(gt_instance[p])];
  }

  // Per prediction: total size, excluded share, kept size and overlaps.
  std::map<std::int32_t, std::size_t> pred_index;
  for (std::size_t i = 0; i < pred.instances.size(); ++i) pred_index[pred.instances[i].instance_id] = i;
  std::vector<std::size_t> total(pred.instances.size(), 0), kept(pred.instances.size(), 0);
  std::vector<std::map<std::size_t, std::size_t>> overlap(pred.instances.size());
  for (std::size_t p = 0; p < n; ++p) {
    const auto a = pred.assignment[p];
    if (a == kInstanceNone) continue;
    const auto i = pred_index.at(a);
    ++total[i];
    if (excluded[p]) continue;
    ++kept[i];
    ++overlap[i][gt_index.at(gt_instance[p])];
  }
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < pred.instances.size(); ++i) {
    if (kept[i] == 0 || 2 * (total[i] - kept[i]) >= total[i]) continue;
    order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto &ia = pred.instances[a], &ib = pred.instances[b];
    if (ia.confidence != ib.confidence) return ia.confidence > ib.confidence;
    return ia.instance_id < ib.instance_id;
  });

  ApReport report;
  report.num_gt = gt_index.size();
  report.num_predictions = order.size();
  if (report.num_gt == 0) report.warnings.push_back("no ground-truth instances after exclusion");

  auto ap_at = [&](double threshold) {
    std::vector<std::uint8_t> matched(report.num_gt, 0), tp;
    for (auto i : order) {
      std::int64_t best = -1;
      double best_iou = 0.0;
      for (const auto& [g, inter] : overlap[i]) {
        if (matched[g]) continue;
        const double iou = static_cast<double>(inter) / static_cast<double>(kept[i] + gt_size[g] - inter);
        if (iou >= threshold && (best < 0 || iou > best_iou)) {
          best = static_cast<std::int64_t>(g);
          best_iou = iou;
        }
      }
      if (best >= 0) matched[static_cast<std::size_t>(best)] = 1;
      tp.push_back(best >= 0 ? 1 : 0);
    }
    return average_precision(tp, report.num_gt);
  };
  report.ap25 = ap_at(0.25);
  report.per_threshold.emplace_back(0.25, report.ap25);
  double sum = 0.0;
  for (auto t : map_thresholds()) {
    const double ap = ap_at(t);
    report.per_threshold.emplace_back(t, ap);
    sum += ap;
    if (std::abs(t - 0.5) < 1e-12) report.ap50 = ap;
  }
  report.map = sum / static_cast<double>(map_thresholds().size());
  return report;
}

std::set<std::int32_t> parse_exclusions(const std::string& text) {
  std::set<std::int32_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c); }), item.end());
    if (item.empty()) continue;
    if (item == "floor") {
      out.insert(kInstanceFloor);
    } else if (item == "wall") {
      out.insert(kInstanceWall);
    } else {
      try {
        std::size_t used = 0;
        out.insert(std::stoi(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw Error(ErrorCode::kInvalidArgument, "unknown exclusion '" + item + "'");
      }
    }
  }
  return out;
}

nlohmann::json report_to_json(const ApReport& report, const std::set<std::int32_t>& exclusions) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& [t, ap] : report.per_threshold) per.push_back({{"iou", t}, {"ap", ap}});
  return {{"map", report.map},
          {"ap50", report.ap50},
          {"ap25", report.ap25},
          {"per_threshold", per},
          {"num_gt", report.num_gt},
          {"num_predictions", report.num_predictions},
          {"warnings", report.warnings},
          {"excluded_ids", exclusions},
          {"exclusion_rule", "excluded points are trimmed from predictions; predictions with at least 50% of their "
                             "points excluded are dropped"}};
}

void save_report(const ApReport& report, const std::set<std::int32_t>& exclusions, const std::filesystem::path& path) {
  write_text_atomic(path, report_to_json(report, exclusions).dump(2) + "\n");
}

}  // namespace supercut
