#include "supercut/error.hpp"
#include "supercut/pipeline.hpp"
#include "supercut/rng.hpp"

#include <nlohmann/json.hpp>
#include <toml.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace supercut {

namespace {

constexpr Stage kStages[] = {Stage::kPresegment, Stage::kBuildGraph, Stage::kPseudoLabels, Stage::kTrain,
                             Stage::kInfer,      Stage::kSegment,    Stage::kEval};

/// Typed reader for one TOML table that remembers which keys were consumed.
class Section {
public:
  Section(const toml::table* table, std::string name) : table_(table), name_(std::move(name)) {}

  template <typename T>
  void read(const char* key, T& out) {
    if (!table_) return;
    const toml::node* node = table_->get(key);
    if (!node) return;
    used_.push_back(key);
    if constexpr (std::is_same_v<T, bool>) {
      auto v = node->value_exact<bool>();
      if (!v) fail(key, "expected a boolean");
      out = *v;
    } else if constexpr (std::is_floating_point_v<T>) {
      auto v = node->value<double>();
      if (!v || node->is_boolean()) fail(key, "expected a number");
      out = static_cast<T>(*v);
    } else if constexpr (std::is_integral_v<T>) {
      auto v = node->value_exact<std::int64_t>();
      if (!v) fail(key, "expected an integer");
      if (*v < 0 && std::is_unsigned_v<T>) fail(key, "must not be negative");
      out = static_cast<T>(*v);
    } else {
      auto v = node->value_exact<std::string>();
      if (!v) fail(key, "expected a string");
      out = *v;
    }
  }

  std::vector<std::string> read_strings(const char* key) {
    std::vector<std::string> out;
    if (!table_) return out;
    const toml::node* node = table_->get(key);
    if (!node) return out;
    used_.push_back(key);
    const auto* arr = node->as_array();
    if (!arr) fail(key, "expected an array of strings");
    for (const auto& item : *arr) {
      auto v = item.value_exact<std::string>();
      if (!v) fail(key, "expected an array of strings");
      out.push_back(*v);
    }
    return out;
  }

  bool has(const char* key) const { return table_ && table_->contains(key); }

  /// Throws on any key that no read() asked for.
  void finish(const std::vector<std::string>& subtables = {}) const {
    if (!table_) return;
    for (const auto& [k, v] : *table_) {
      const std::string key(k.str());
      if (std::find(used_.begin(), used_.end(), key) != used_.end()) continue;
      if (std::find(subtables.begin(), subtables.end(), key) != subtables.end()) continue;
      throw Error(ErrorCode::kParse, "unknown key '" + qualified(key) + "'");
    }
  }

private:
  std::string qualified(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }
  [[noreturn]] void fail(const char* key, const char* what) const {
    throw Error(ErrorCode::kParse, "'" + qualified(key) + "': " + what);
  }

  const toml::table* table_;
  std::string name_;
  std::vector<std::string> used_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  if (value.empty() || value == kSyntheticSource) return value;
  const std::filesystem::path p(value);
  return p.is_absolute() ? p : base / p;
}

bool is_synthetic(const std::filesystem::path& p) { return p == kSyntheticSource; }

bool has_stage(const PipelineConfig& c, Stage s) {
  return std::find(c.stages.begin(), c.stages.end(), s) != c.stages.end();
}

void require_path(const std::filesystem::path& p, const char* what) {
  if (p.empty()) throw Error(ErrorCode::kInvalidArgument, std::string("config: paths.") + what + " is required");
  if (!std::filesystem::exists(p)) {
    throw Error(ErrorCode::kIo, std::string("config: paths.") + what + " does not exist: " + p.string());
  }
}

}  // namespace

const char* stage_name(Stage stage) {
  switch (stage) {
    case Stage::kPresegment: return "presegment";
    case Stage::kBuildGraph: return "build_graph";
    case Stage::kPseudoLabels: return "pseudo_labels";
    case Stage::kTrain: return "train";
    case Stage::kInfer: return "infer";
    case Stage::kSegment: return "segment";
    case Stage::kEval: return "eval";
  }
  return "unknown";
}

Stage parse_stage(const std::string& name) {
  for (auto s : kStages) {
    if (name == stage_name(s)) return s;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown stage '" + name + "'");
}

std::vector<Stage> all_stages() { return {std::begin(kStages), std::end(kStages)}; }

PipelineConfig parse_pipeline_config(const std::string& text, const std::filesystem::path& base_dir,
                                     const std::string& source_name) {
  toml::table root;
  try {
    root = toml::parse(text, source_name);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << source_name << ":" << e.source().begin.line << ":" << e.source().begin.column << ": " << e.description();
    throw Error(ErrorCode::kParse, msg.str());
  }

  PipelineConfig c;
  Section top(&root, "");
  std::int64_t seed = 0;
  top.read("seed", seed);
  c.seed = static_cast<std::uint64_t>(seed);
  if (top.has("stages")) {
    c.stages.clear();
    for (const auto& name : top.read_strings("stages")) c.stages.push_back(parse_stage(name));
  }

  auto table = [&](const char* name) { return root.get_as<toml::table>(name); };
  const std::vector<std::string> sections = {"paths", "presegment", "graph",         "synthetic",
                                             "train", "segment",    "pseudo_labels", "eval"};
  for (const auto& s : sections) {
    if (root.contains(s) && !table(s.c_str())) throw Error(ErrorCode::kParse, "'" + s + "' must be a table");
  }
  top.finish(sections);

  Section paths(table("paths"), "paths");
  std::string scene, cameras, oracle, features, instances, out_dir = "out", model;
  paths.read("scene", scene);
  paths.read("cameras", cameras);
  paths.read("oracle", oracle);
  paths.read("features", features);
  paths.read("instances", instances);
  paths.read("out_dir", out_dir);
  paths.read("model", model);
  for (const auto& g : paths.read_strings("extra_train_graphs")) c.paths.extra_train_graphs.push_back(resolve(base_dir, g));
  paths.finish();
  c.paths.scene = resolve(base_dir, scene);
  c.paths.cameras = resolve(base_dir, cameras);
  c.paths.oracle = resolve(base_dir, oracle);
  c.paths.features = resolve(base_dir, features);
  c.paths.instances = resolve(base_dir, instances);
  c.paths.out_dir = resolve(base_dir, out_dir);
  c.paths.model = resolve(base_dir, model);

  Section pre(table("presegment"), "presegment");
  pre.read("k_thresh", c.presegment.k_thresh);
  pre.read("min_verts", c.presegment.seg_min_verts);
  pre.read("knn", c.presegment.knn);
  pre.finish();

  Section graph(table("graph"), "graph");
  std::string adjacency = "distance";
  graph.read("adjacency", adjacency);
  if (adjacency == "distance") {
    c.graph.adjacency.mode = AdjacencyMode::kDistance;
  } else if (adjacency == "mesh") {
    c.graph.adjacency.mode = AdjacencyMode::kMeshSharedEdge;
  } else {
    throw Error(ErrorCode::kParse, "'graph.adjacency' must be \"distance\" or \"mesh\"");
  }
  graph.read("distance_threshold", c.graph.adjacency.distance_threshold);
  graph.read("prompt_count", c.graph.prompt_count);
  graph.read("samples_per_view", c.graph.samples_per_view);
  graph.read("max_views_per_edge", c.graph.max_views_per_edge);
  graph.read("occlusion_tol", c.graph.projection.occlusion_tol);
  graph.read("min_visible_pixels", c.graph.projection.min_visible_pixels);
  graph.finish();

  Section synth(table("synthetic"), "synthetic");
  synth.read("p_merge", c.synthetic_noise.p_merge);
  synth.read("p_split", c.synthetic_noise.p_split);
  synth.read("instance_p_merge", c.synthetic_instance_noise.p_merge);
  synth.read("instance_p_split", c.synthetic_instance_noise.p_split);
  synth.read("feature_stride", c.synthetic_features.stride);
  synth.read("appearance_scale", c.synthetic_features.appearance_scale);
  synth.read("feature_noise", c.synthetic_features.noise_sigma);
  synth.finish();

  Section labels(table("pseudo_labels"), "pseudo_labels");
  labels.read("n_min", c.n_min);
  labels.finish();

  Section train(table("train"), "train");
  train.read("epochs", c.train.epochs);
  train.read("learning_rate", c.train.learning_rate);
  train.read("use_edge_weights", c.train.use_edge_weights);
  train.read("hidden_dim", c.train.shape.hidden_dim);
  train.read("gcn_layers", c.train.shape.gcn_layers);
  train.read("mlp_hidden", c.train.shape.mlp_hidden);
  train.finish();

  Section seg(table("segment"), "segment");
  seg.read("tau", c.segment.tau);
  seg.read("rho", c.segment.rho);
  seg.read("use_affinity", c.segment.use_affinity);
  seg.finish();

  Section eval(table("eval"), "eval");
  std::string exclude = "floor,wall";
  eval.read("exclude", exclude);
  eval.finish();
  c.exclusions = parse_exclusions(exclude);
  return c;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_pipeline_config(ss.str(), path.parent_path().empty() ? "." : path.parent_path(), path.string());
}

void validate_config(const PipelineConfig& c) {
  if (c.stages.empty()) throw Error(ErrorCode::kInvalidArgument, "config: no stages");
  for (std::size_t i = 1; i < c.stages.size(); ++i) {
    if (static_cast<int>(c.stages[i]) <= static_cast<int>(c.stages[i - 1])) {
      throw Error(ErrorCode::kInvalidArgument, std::string("config: stage '") + stage_name(c.stages[i]) +
                                                   "' is out of order or repeated");
    }
  }
  validate_config(c.presegment);
  validate_config(c.graph);
  validate_noise(c.synthetic_noise);
  validate_noise(c.synthetic_instance_noise);
  if (c.synthetic_features.stride < 1) throw Error(ErrorCode::kInvalidArgument, "config: synthetic.feature_stride must be >= 1");
  if (c.n_min < 1) throw Error(ErrorCode::kInvalidArgument, "config: pseudo_labels.n_min must be >= 1");
  validate_config(c.train);
  validate_config(c.segment);
  if (c.paths.out_dir.empty()) throw Error(ErrorCode::kInvalidArgument, "config: paths.out_dir is required");

  const bool needs_views = has_stage(c, Stage::kBuildGraph) || has_stage(c, Stage::kPseudoLabels);
  require_path(c.paths.scene, "scene");
  if (needs_views) require_path(c.paths.cameras, "cameras");
  if (has_stage(c, Stage::kBuildGraph)) {
    if (!is_synthetic(c.paths.oracle)) require_path(c.paths.oracle, "oracle");
    if (!c.paths.features.empty() && !is_synthetic(c.paths.features)) require_path(c.paths.features, "features");
  }
  if (has_stage(c, Stage::kPseudoLabels) && !is_synthetic(c.paths.instances)) {
    require_path(c.paths.instances, "instances");
  }
  if (has_stage(c, Stage::kInfer) && !has_stage(c, Stage::kTrain) && !c.paths.model.empty()) {
    require_path(c.paths.model, "model");
  }
  for (const auto& g : c.paths.extra_train_graphs) {
    if (!std::filesystem::exists(g)) throw Error(ErrorCode::kIo, "config: extra train graph does not exist: " + g.string());
  }
  if (has_stage(c, Stage::kTrain) && c.paths.features.empty() && has_stage(c, Stage::kBuildGraph)) {
    throw Error(ErrorCode::kInvalidArgument, "config: the train stage needs node features (paths.features)");
  }
}

std::string canonical_config(const PipelineConfig& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  std::vector<std::string> stages;
  for (auto s : c.stages) stages.push_back(stage_name(s));
  j["stages"] = stages;
  std::vector<std::string> extra;
  for (const auto& g : c.paths.extra_train_graphs) extra.push_back(g.lexically_normal().string());
  j["paths"] = {{"scene", c.paths.scene.lexically_normal().string()},
                {"cameras", c.paths.cameras.lexically_normal().string()},
                {"oracle", c.paths.oracle.lexically_normal().string()},
                {"features", c.paths.features.lexically_normal().string()},
                {"instances", c.paths.instances.lexically_normal().string()},
                {"model", c.paths.model.lexically_normal().string()},
                {"extra_train_graphs", extra}};
  j["presegment"] = {{"k_thresh", c.presegment.k_thresh},
                     {"min_verts", c.presegment.seg_min_verts},
                     {"knn", c.presegment.knn}};
  j["graph"] = {{"adjacency", c.graph.adjacency.mode == AdjacencyMode::kDistance ? "distance" : "mesh"},
                {"distance_threshold", c.graph.adjacency.distance_threshold},
                {"prompt_count", c.graph.prompt_count},
                {"samples_per_view", c.graph.samples_per_view},
                {"max_views_per_edge", c.graph.max_views_per_edge},
                {"occlusion_tol", c.graph.projection.occlusion_tol},
                {"min_visible_pixels", c.graph.projection.min_visible_pixels}};
  j["synthetic"] = {{"p_merge", c.synthetic_noise.p_merge},
                    {"p_split", c.synthetic_noise.p_split},
                    {"instance_p_merge", c.synthetic_instance_noise.p_merge},
                    {"instance_p_split", c.synthetic_instance_noise.p_split},
                    {"feature_stride", c.synthetic_features.stride},
                    {"appearance_scale", c.synthetic_features.appearance_scale},
                    {"feature_noise", c.synthetic_features.noise_sigma}};
  j["pseudo_labels"] = {{"n_min", c.n_min}};
  j["train"] = {{"epochs", c.train.epochs},
                {"learning_rate", c.train.learning_rate},
                {"use_edge_weights", c.train.use_edge_weights},
                {"hidden_dim", c.train.shape.hidden_dim},
                {"gcn_layers", c.train.shape.gcn_layers},
                {"mlp_hidden", c.train.shape.mlp_hidden}};
  j["segment"] = {{"tau", c.segment.tau}, {"rho", c.segment.rho}, {"use_affinity", c.segment.use_affinity}};
  j["eval"] = {{"exclude", std::vector<std::int32_t>(c.exclusions.begin(), c.exclusions.end())}};
  return j.dump();
}

std::string config_hash(const PipelineConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical_config(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

StageSeeds stage_seeds(std::uint64_t seed) {
  return {derive_seed(seed, {1}), derive_seed(seed, {2}), derive_seed(seed, {3}), derive_seed(seed, {4}),
          derive_seed(seed, {5})};
}

}  // namespace supercut
