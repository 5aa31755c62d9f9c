#pragma once

#include "supercut/evaluation.hpp"
#include "supercut/gnn.hpp"
#include "supercut/graph_build.hpp"
#include "supercut/graph_cut.hpp"
#include "supercut/mask_oracle.hpp"
#include "supercut/presegment.hpp"
#include "supercut/pseudo_label.hpp"
#include "supercut/synth.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace supercut {

enum class Stage { kPresegment, kBuildGraph, kPseudoLabels, kTrain, kInfer, kSegment, kEval };

inline constexpr std::size_t kStageCount = 7;

const char* stage_name(Stage stage);
/// Throws kInvalidArgument for unknown names.
Stage parse_stage(const std::string& name);
std::vector<Stage> all_stages();

/// Marker for paths that are served by the synthetic ground-truth generators.
inline constexpr const char* kSyntheticSource = "synthetic";

struct PipelinePaths {
  std::filesystem::path scene;
  std::filesystem::path cameras;
  std::filesystem::path oracle;     ///< store directory or "synthetic"
  std::filesystem::path features;   ///< store directory, "synthetic", or empty for none
  std::filesystem::path instances;  ///< store directory or "synthetic"
  std::filesystem::path out_dir;
  std::filesystem::path model;      ///< pretrained parameters used when the train stage is absent
  std::vector<std::filesystem::path> extra_train_graphs;  ///< labelled graphs trained alongside this scene
};

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::vector<Stage> stages = all_stages();
  PipelinePaths paths;
  PresegmentConfig presegment;
  GraphBuildConfig graph;
  NoiseConfig synthetic_noise;            ///< synthetic mask oracle
  NoiseConfig synthetic_instance_noise;   ///< synthetic whole-image instance maps
  FeatureSynthConfig synthetic_features;
  std::uint32_t n_min = kDefaultMinViews;
  TrainConfig train;
  CutConfig segment;
  std::set<std::int32_t> exclusions = {kInstanceFloor, kInstanceWall};
};

/// Parses a TOML run file. Relative paths resolve against `base_dir`.
/// Unknown keys are rejected so typos do not silently fall back to defaults.
PipelineConfig parse_pipeline_config(const std::string& text, const std::filesystem::path& base_dir,
                                     const std::string& source_name = "config");
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Checks module configs, stage order and that every input a listed stage
/// reads from outside out_dir exists.
void validate_config(const PipelineConfig& config);

/// Canonical JSON text of every setting that affects artifacts.
std::string canonical_config(const PipelineConfig& config);
/// 64-bit FNV-1a of canonical_config, as 16 hex digits.
std::string config_hash(const PipelineConfig& config);

/// Independent seeds for each randomised consumer.
struct StageSeeds {
  std::uint64_t oracle = 0;
  std::uint64_t features = 0;
  std::uint64_t instances = 0;
  std::uint64_t graph = 0;
  std::uint64_t train = 0;
};

StageSeeds stage_seeds(std::uint64_t seed);

/// Artifact file names inside out_dir.
namespace artifacts {
inline constexpr const char* kSuperpoints = "sp.json";
inline constexpr const char* kGraph = "graph.spg";
inline constexpr const char* kLabeledGraph = "graph_labeled.spg";
inline constexpr const char* kModel = "model.gnn";
inline constexpr const char* kRefinedGraph = "graph_refined.spg";
inline constexpr const char* kSegmentation = "seg.json";
inline constexpr const char* kReport = "report.json";
inline constexpr const char* kManifest = "manifest.json";
}  // namespace artifacts

struct RunOptions {
  bool resume = false;
  std::size_t threads = 0;  ///< 0 = hardware parallelism
  bool verbose = true;      ///< one progress line per stage on stderr
};

struct StageRecord {
  Stage stage = Stage::kPresegment;
  std::string status;  ///< "ok", "skipped", "failed" or "pending"
  double wall_time_s = 0.0;
  std::vector<std::string> outputs;
  std::string error;
};

struct RunResult {
  std::string config_hash;
  std::vector<StageRecord> stages;
  std::optional<ApReport> report;

  std::vector<Stage> executed() const;
};

/// Runs the configured stages in order. The manifest is rewritten after every
/// stage; on failure it marks the failed stage and the error is rethrown with
/// earlier artifacts left in place. With `resume`, a stage is skipped when the
/// previous manifest has the same config hash, the stage succeeded there, its
/// outputs load and validate, and no earlier stage of this run executed.
RunResult run_pipeline(const PipelineConfig& config, const RunOptions& options = {});

}  // namespace supercut
