#include "supercut/binary_io.hpp"
#include "supercut/error.hpp"
#include "supercut/io.hpp"
#include "supercut/parallel.hpp"
#include "supercut/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <memory>

namespace supercut {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

bool is_synthetic(const fs::path& p) { return p == kSyntheticSource; }

bool has_stage(const PipelineConfig& c, Stage s) {
  return std::find(c.stages.begin(), c.stages.end(), s) != c.stages.end();
}

/// Inputs loaded at most once per run.
class RunState {
public:
  RunState(const PipelineConfig& config, std::size_t threads) : config_(config), threads_(threads) {}

  fs::path out(const char* name) const { return config_.paths.out_dir / name; }

  const SceneGeometry& scene() {
    if (!scene_) scene_ = load_scene(config_.paths.scene);
    return *scene_;
  }

  const std::vector<CameraView>& cameras() {
    if (!cameras_) cameras_ = load_cameras(config_.paths.cameras);
    return *cameras_;
  }

  const std::vector<Superpoint>& superpoints() {
    if (!superpoints_) superpoints_ = load_superpoints(out(artifacts::kSuperpoints), scene());
    return *superpoints_;
  }
  void set_superpoints(std::vector<Superpoint> sps) {
    superpoints_ = std::move(sps);
    visibility_.reset();
  }

  const VisibilityIndex& visibility() {
    if (!visibility_) {
      visibility_ = VisibilityIndex::build(scene(), superpoints(), cameras(), config_.graph.projection, threads_);
    }
    return *visibility_;
  }

  /// Model file read by infer.
  fs::path model_path() const {
    if (!has_stage(config_, Stage::kTrain) && !config_.paths.model.empty()) return config_.paths.model;
    return out(artifacts::kModel);
  }

  /// Graph read by segment.
  fs::path segment_input() const {
    return out(config_.segment.use_affinity ? artifacts::kRefinedGraph : artifacts::kGraph);
  }

private:
  const PipelineConfig& config_;
  std::size_t threads_;
  std::optional<SceneGeometry> scene_;
  std::optional<std::vector<CameraView>> cameras_;
  std::optional<std::vector<Superpoint>> superpoints_;
  std::optional<VisibilityIndex> visibility_;
};

std::vector<std::string> stage_outputs(Stage stage) {
  switch (stage) {
    case Stage::kPresegment: return {artifacts::kSuperpoints};
    case Stage::kBuildGraph: return {artifacts::kGraph};
    case Stage::kPseudoLabels: return {artifacts::kLabeledGraph};
    case Stage::kTrain: return {artifacts::kModel};
    case Stage::kInfer: return {artifacts::kRefinedGraph};
    case Stage::kSegment: return {artifacts::kSegmentation};
    case Stage::kEval: return {artifacts::kReport};
  }
  return {};
}

void check_graph_matches(const SuperpointGraph& g, RunState& state, const fs::path& path) {
  validate_graph(g);
  if (g.nodes.size() != state.superpoints().size()) {
    throw Error(ErrorCode::kInvariant, path.string() + " does not match the superpoints");
  }
}

/// Loads and validates a stage's outputs; throws when they are unusable.
void check_outputs(Stage stage, RunState& state) {
  switch (stage) {
    case Stage::kPresegment:
      validate_superpoints(state.scene(), state.superpoints());
      return;
    case Stage::kBuildGraph:
    case Stage::kPseudoLabels: {
      const auto path = state.out(stage == Stage::kBuildGraph ? artifacts::kGraph : artifacts::kLabeledGraph);
      check_graph_matches(load_graph(path), state, path);
      return;
    }
    case Stage::kTrain:
      (void)load_parameters(state.out(artifacts::kModel));
      return;
    case Stage::kInfer: {
      const auto path = state.out(artifacts::kRefinedGraph);
      const auto g = load_graph(path);
      check_graph_matches(g, state, path);
      for (const auto& e : g.edges) {
        if (!e.affinity) throw Error(ErrorCode::kInvariant, path.string() + " lacks affinities");
      }
      return;
    }
    case Stage::kSegment: {
      const auto seg = load_segmentation(state.out(artifacts::kSegmentation));
      validate_segmentation(seg);
      if (seg.assignment.size() != state.scene().size()) {
        throw Error(ErrorCode::kInvariant, "seg.json does not match the scene");
      }
      return;
    }
    case Stage::kEval: {
      std::ifstream in(state.out(artifacts::kReport));
      if (!in) throw Error(ErrorCode::kIo, "missing report.json");
      const auto report = json::parse(in);
      if (!report.is_object()) throw Error(ErrorCode::kFormat, "report.json is not an object");
      return;
    }
  }
}

std::unique_ptr<MaskOracle> make_oracle(const PipelineConfig& c, RunState& state, std::size_t threads) {
  if (is_synthetic(c.paths.oracle)) {
    return std::make_unique<SyntheticOracle>(state.scene(), state.cameras(), c.synthetic_noise,
                                             stage_seeds(c.seed).oracle, threads);
  }
  return std::make_unique<FileOracle>(OracleStore::load(c.paths.oracle));
}

std::optional<FeatureStore> make_features(const PipelineConfig& c, RunState& state, std::size_t threads) {
  if (c.paths.features.empty()) return std::nullopt;
  if (is_synthetic(c.paths.features)) {
    return synth_feature_maps(state.scene(), state.cameras(), stage_seeds(c.seed).features, c.synthetic_features,
                              threads);
  }
  return FeatureStore::load(c.paths.features);
}

InstanceMapStore make_instances(const PipelineConfig& c, RunState& state, std::size_t threads) {
  if (is_synthetic(c.paths.instances)) {
    return synth_instance_maps(state.scene(), state.cameras(), c.synthetic_instance_noise, stage_seeds(c.seed).instances,
                               threads);
  }
  auto store = InstanceMapStore::load(c.paths.instances);
  store.validate_against(state.cameras());
  return store;
}

/// Executes one stage; returns a short human-readable summary.
std::string execute(Stage stage, const PipelineConfig& c, RunState& state, std::size_t threads,
                    std::optional<ApReport>& report) {
  switch (stage) {
    case Stage::kPresegment: {
      auto sps = presegment(state.scene(), c.presegment, threads);
      save_superpoints(sps, state.out(artifacts::kSuperpoints));
      const auto n = sps.size();
      state.set_superpoints(std::move(sps));
      return std::to_string(n) + " superpoints";
    }
    case Stage::kBuildGraph: {
      const auto oracle = make_oracle(c, state, threads);
      const auto features = make_features(c, state, threads);
      auto graph_config = c.graph;
      graph_config.seed = stage_seeds(c.seed).graph;
      const auto edges = build_adjacency(state.scene(), state.superpoints(), graph_config.adjacency);
      const auto result = annotate_graph(state.superpoints(), state.visibility(), edges, *oracle,
                                         features ? &*features : nullptr, graph_config, threads);
      save_graph(result.graph, state.out(artifacts::kGraph));
      std::string summary = std::to_string(result.graph.nodes.size()) + " nodes, " +
                            std::to_string(result.graph.edges.size()) + " edges";
      if (features && !result.invisible_superpoints.empty()) {
        summary += ", " + std::to_string(result.invisible_superpoints.size()) + " superpoints seen in no view";
      }
      return summary;
    }
    case Stage::kPseudoLabels: {
      auto graph = load_graph(state.out(artifacts::kGraph));
      const auto maps = make_instances(c, state, threads);
      const auto stats = label_graph(graph, state.visibility(), maps, c.n_min, threads);
      save_graph(graph, state.out(artifacts::kLabeledGraph));
      return std::to_string(stats.positive) + " positive, " + std::to_string(stats.negative) + " negative, " +
             std::to_string(stats.unlabeled) + " unlabeled";
    }
    case Stage::kTrain: {
      std::vector<SuperpointGraph> graphs{load_graph(state.out(artifacts::kLabeledGraph))};
      for (const auto& g : c.paths.extra_train_graphs) graphs.push_back(load_graph(g));
      auto train_config = c.train;
      train_config.seed = stage_seeds(c.seed).train;
      const auto result = train(graphs, train_config);
      save_parameters(result.params, state.out(artifacts::kModel));
      return "final loss " + std::to_string(result.loss_history.empty() ? 0.0 : result.loss_history.back());
    }
    case Stage::kInfer: {
      const auto labeled = state.out(artifacts::kLabeledGraph);
      auto graph = load_graph(fs::exists(labeled) ? labeled : state.out(artifacts::kGraph));
      infer(graph, load_parameters(state.model_path()));
      save_graph(graph, state.out(artifacts::kRefinedGraph));
      return std::to_string(graph.edges.size()) + " affinities";
    }
    case Stage::kSegment: {
      const auto graph = load_graph(state.segment_input());
      const auto seg = segment_graph(graph, state.superpoints(), state.scene().size(), c.segment, threads);
      save_segmentation(seg, state.out(artifacts::kSegmentation));
      return std::to_string(seg.instances.size()) + " instances";
    }
    case Stage::kEval: {
      const auto seg = load_segmentation(state.out(artifacts::kSegmentation));
      if (!state.scene().has_gt()) throw Error(ErrorCode::kInvalidArgument, "eval needs a scene with instance labels");
      report = evaluate(seg, state.scene().gt_instance, c.exclusions);
      save_report(*report, c.exclusions, state.out(artifacts::kReport));
      char buf[96];
      std::snprintf(buf, sizeof buf, "mAP %.4f AP50 %.4f AP25 %.4f", report->map, report->ap50, report->ap25);
      return buf;
    }
  }
  return {};
}

json manifest_json(const PipelineConfig& c, const RunResult& r, const std::string& status) {
  json stages = json::array();
  for (const auto& s : r.stages) {
    json j = {{"name", stage_name(s.stage)},
              {"status", s.status},
              {"wall_time_s", s.wall_time_s},
              {"outputs", s.outputs}};
    if (!s.error.empty()) j["error"] = s.error;
    stages.push_back(std::move(j));
  }
  return {{"format", "supercut-manifest"},
          {"version", 1},
          {"config_hash", r.config_hash},
          {"seed", c.seed},
          {"status", status},
          {"stages", stages}};
}

/// Stages that succeeded in the previous run with the same config hash.
std::vector<std::string> previous_successes(const fs::path& manifest, const std::string& hash) {
  std::vector<std::string> out;
  std::ifstream in(manifest);
  if (!in) return out;
  try {
    const auto j = json::parse(in);
    if (j.value("config_hash", "") != hash) return out;
    for (const auto& s : j.at("stages")) {
      if (s.value("status", "") == "ok" || s.value("status", "") == "skipped") out.push_back(s.at("name"));
    }
  } catch (const json::exception&) {
    out.clear();
  }
  return out;
}

}  // namespace

std::vector<Stage> RunResult::executed() const {
  std::vector<Stage> out;
  for (const auto& s : stages) {
    if (s.status == "ok") out.push_back(s.stage);
  }
  return out;
}

RunResult run_pipeline(const PipelineConfig& config, const RunOptions& options) {
  validate_config(config);
  const std::size_t threads = options.threads == 0 ? default_thread_count() : options.threads;
  fs::create_directories(config.paths.out_dir);

  RunResult result;
  result.config_hash = config_hash(config);
  for (auto s : config.stages) result.stages.push_back({s, "pending", 0.0, stage_outputs(s), {}});

  const auto manifest_path = config.paths.out_dir / artifacts::kManifest;
  const auto reusable = options.resume ? previous_successes(manifest_path, result.config_hash)
                                       : std::vector<std::string>{};
  auto write_manifest = [&](const std::string& status) {
    write_text_atomic(manifest_path, manifest_json(config, result, status).dump(2) + "\n");
  };
  write_manifest("running");

  RunState state(config, threads);
  bool upstream_ran = false;
  for (auto& record : result.stages) {
    const char* name = stage_name(record.stage);
    if (!upstream_ran && std::find(reusable.begin(), reusable.end(), name) != reusable.end()) {
      bool valid = true;
      try {
        check_outputs(record.stage, state);
      } catch (const std::exception&) {
        valid = false;
      }
      if (valid) {
        record.status = "skipped";
        if (options.verbose) std::cerr << "[" << name << "] up to date, skipped\n";
        write_manifest("running");
        continue;
      }
    }
    const auto start = std::chrono::steady_clock::now();
    try {
      const auto summary = execute(record.stage, config, state, threads, result.report);
      record.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      record.status = "ok";
      upstream_ran = true;
      if (options.verbose) std::cerr << "[" << name << "] " << summary << " (" << record.wall_time_s << " s)\n";
      write_manifest("running");
    } catch (const std::exception& e) {
      record.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      record.status = "failed";
      record.error = e.what();
      write_manifest("failed");
      throw;
    }
  }
  write_manifest("ok");
  return result;
}

}  // namespace supercut
