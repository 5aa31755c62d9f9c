#include "supercut/io.hpp"
#include "supercut/pipeline.hpp"

#include "test_support.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

using namespace supercut;
using supercut::test::error_code_of;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Small synthetic scene on disk plus a config that runs every stage on it.
struct SmokeRun {
  test::TempDir dir{"pipeline"};
  PipelineConfig config;

  SmokeRun() {
    SynthConfig sc;
    sc.num_objects = 4;
    sc.points_per_object = 600;
    sc.points_on_walls_floor = 6000;
    sc.camera_count = 8;
    sc.image_width = 160;
    sc.image_height = 120;
    sc.focal = 80.0;
    sc.seed = 11;
    const auto synth = generate(sc);
    save_scene(synth.scene, dir / "scene.ply");
    save_cameras(synth.cameras, dir / "cameras.json");

    const std::string toml = R"(
seed = 5
[paths]
scene = "scene.ply"
cameras = "cameras.json"
oracle = "synthetic"
features = "synthetic"
instances = "synthetic"
out_dir = "out"
[presegment]
min_verts = 60
[synthetic]
p_merge = 0.2
p_split = 0.2
[pseudo_labels]
n_min = 3
[train]
epochs = 15
learning_rate = 0.003
hidden_dim = 16
mlp_hidden = 16
gcn_layers = 2
)";
    config = parse_pipeline_config(toml, dir.path());
  }
};

}  // namespace

TEST_CASE("config parsing resolves paths and rejects unknown keys") {
  const auto c = parse_pipeline_config("seed = 9\nstages = [\"presegment\", \"build_graph\"]\n"
                                       "[paths]\nscene = \"a/s.ply\"\noracle = \"synthetic\"\n"
                                       "[segment]\ntau = 0.4\n[eval]\nexclude = \"floor\"\n",
                                       "/base");
  CHECK(c.seed == 9);
  CHECK(c.stages == std::vector<Stage>{Stage::kPresegment, Stage::kBuildGraph});
  CHECK(c.paths.scene == std::filesystem::path("/base/a/s.ply"));
  CHECK(c.paths.oracle == std::filesystem::path(kSyntheticSource));
  CHECK(c.paths.out_dir == std::filesystem::path("/base/out"));
  CHECK(c.segment.tau == 0.4);
  CHECK(c.exclusions == std::set<std::int32_t>{kInstanceFloor});

  CHECK(error_code_of([] { parse_pipeline_config("sede = 1\n", "."); }) == ErrorCode::kParse);
  CHECK(error_code_of([] { parse_pipeline_config("[train]\nepoch = 1\n", "."); }) == ErrorCode::kParse);
  CHECK(error_code_of([] { parse_pipeline_config("[bogus]\n", "."); }) == ErrorCode::kParse);
  CHECK(error_code_of([] { parse_pipeline_config("seed = \"x\"\n", "."); }) == ErrorCode::kParse);
  CHECK(error_code_of([] { parse_pipeline_config("seed = [\n", "."); }) == ErrorCode::kParse);
  CHECK(error_code_of([] { parse_pipeline_config("stages = [\"fly\"]\n", "."); }) == ErrorCode::kInvalidArgument);
  CHECK(error_code_of([] { load_pipeline_config("/nonexistent/run.toml"); }) == ErrorCode::kIo);
}

TEST_CASE("config validation checks stage order and inputs") {
  test::TempDir dir("pipeline_validate");
  auto c = parse_pipeline_config("[paths]\nscene = \"missing.ply\"\n", dir.path());
  CHECK(error_code_of([&] { validate_config(c); }) == ErrorCode::kIo);
  c.stages = {Stage::kTrain, Stage::kPresegment};
  CHECK(error_code_of([&] { validate_config(c); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("config hash follows every artifact-affecting setting") {
  const auto a = parse_pipeline_config("seed = 1\n", "/x");
  auto b = a;
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.seed = 2;
  CHECK(config_hash(a) != config_hash(b));
  b = a;
  b.train.learning_rate *= 2;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("stage seeds are distinct and stage names round-trip") {
  const auto s = stage_seeds(42);
  const std::set<std::uint64_t> distinct = {s.oracle, s.features, s.instances, s.graph, s.train};
  CHECK(distinct.size() == 5);
  CHECK(stage_seeds(42).train == s.train);
  CHECK(stage_seeds(43).train != s.train);
  for (const auto st : all_stages()) CHECK(parse_stage(stage_name(st)) == st);
}

TEST_CASE("end-to-end synthetic run writes artifacts, resumes and is deterministic") {
  SmokeRun run;
  RunOptions opts;
  opts.verbose = false;
  opts.threads = 1;
  const auto first = run.config.paths.out_dir;
  const auto r1 = run_pipeline(run.config, opts);
  CHECK(r1.executed().size() == kStageCount);
  REQUIRE(r1.report.has_value());
  CHECK(r1.report->map >= 0.0);
  CHECK(r1.report->map <= 1.0);
  for (const char* name : {artifacts::kSuperpoints, artifacts::kGraph, artifacts::kLabeledGraph, artifacts::kModel,
                           artifacts::kRefinedGraph, artifacts::kSegmentation, artifacts::kReport,
                           artifacts::kManifest}) {
    CHECK_MESSAGE(std::filesystem::exists(first / name), name);
  }
  std::ifstream in(first / artifacts::kManifest);
  const auto manifest = nlohmann::json::parse(in);
  CHECK(manifest.at("status") == "ok");
  CHECK(manifest.at("config_hash") == r1.config_hash);
  CHECK(manifest.at("stages").size() == kStageCount);

  const auto refined = load_graph(first / artifacts::kRefinedGraph);
  for (const auto& e : refined.edges) {
    REQUIRE(e.affinity.has_value());
    CHECK(*e.affinity >= 0.0);
    CHECK(*e.affinity <= 1.0);
  }

  RunOptions resume = opts;
  resume.resume = true;
  const auto r2 = run_pipeline(run.config, resume);
  CHECK(r2.executed().empty());

  auto second = run.config;
  second.paths.out_dir = run.dir / "out2";
  run_pipeline(second, opts);
  for (const char* name : {artifacts::kGraph, artifacts::kModel, artifacts::kSegmentation}) {
    CHECK_MESSAGE(read_file(first / name) == read_file(second.paths.out_dir / name), name);
  }

  // Any change to the config hash invalidates every earlier artifact.
  auto changed = run.config;
  changed.segment.tau = 0.6;
  const auto r3 = run_pipeline(changed, resume);
  CHECK(r3.executed().size() == kStageCount);
}
