#include "supercut/error.hpp"
#include "supercut/io.hpp"
#include "supercut/parallel.hpp"
#include "supercut/pipeline.hpp"

#include <CLI11.hpp>

#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace supercut;

namespace {

struct GraphOptions {
  GraphBuildConfig config;
  std::string adjacency = "distance";

  void add(CLI::App* cmd) {
    cmd->add_option("--adjacency", adjacency, "distance or mesh")->check(CLI::IsMember({"distance", "mesh"}));
    cmd->add_option("--distance-threshold", config.adjacency.distance_threshold, "Adjacency distance in meters");
    cmd->add_option("--prompts", config.prompt_count, "Prompt points per superpoint and view");
    cmd->add_option("--samples-per-view", config.samples_per_view, "Feature samples per view");
    cmd->add_option("--max-views", config.max_views_per_edge, "Cap on views per edge (0 = all)");
    cmd->add_option("--occlusion-tol", config.projection.occlusion_tol, "Depth test tolerance in meters");
    cmd->add_option("--min-visible-pixels", config.projection.min_visible_pixels, "Visibility threshold");
  }

  GraphBuildConfig resolved() const {
    auto c = config;
    c.adjacency.mode = adjacency == "mesh" ? AdjacencyMode::kMeshSharedEdge : AdjacencyMode::kDistance;
    validate_config(c);
    return c;
  }
};

std::string toml_string(const fs::path& p) { return nlohmann::json(p.generic_string()).dump(); }

/// Everything an external exporter would produce, generated from scene GT.
void write_synthetic_store(const SynthScene& s, const SynthConfig& sc, const PresegmentConfig& pre,
                           const GraphBuildConfig& graph, const fs::path& out_dir) {
  const auto seeds = stage_seeds(sc.seed);
  const auto sps = presegment(s.scene, pre);
  save_superpoints(sps, out_dir / "sp.json");
  const auto visibility = VisibilityIndex::build(s.scene, sps, s.cameras, graph.projection);
  const auto edges = build_adjacency(s.scene, sps, graph.adjacency);
  const auto requests = collect_prompt_requests(visibility, sps, edges, graph);
  save_prompts(requests, out_dir / "prompts.bin");

  const SyntheticOracle oracle(s.scene, s.cameras, sc.noise, seeds.oracle);
  std::vector<OracleResponse> responses(requests.size());
  parallel_for(requests.size(), [&](std::size_t i) { responses[i] = oracle.query(requests[i]); });
  OracleStoreWriter writer;
  for (std::size_t i = 0; i < requests.size(); ++i) writer.add(requests[i].view_id, requests[i].sp_id, responses[i]);
  const auto store = out_dir / "store";
  writer.write(store, "synthetic");
  synth_feature_maps(s.scene, s.cameras, seeds.features).save(store);
  synth_instance_maps(s.scene, s.cameras, sc.instance_noise, seeds.instances).save(store);

  std::ofstream toml(out_dir / "run.toml");
  toml << "seed = " << sc.seed << "\n\n[paths]\nscene = \"scene.ply\"\ncameras = \"cams.json\"\n"
       << "oracle = \"store\"\nfeatures = \"store\"\ninstances = \"store\"\nout_dir = \"run\"\n\n"
       << "[presegment]\nk_thresh = " << pre.k_thresh << "\nmin_verts = " << pre.seg_min_verts
       << "\nknn = " << pre.knn << "\n\n[synthetic]\np_merge = " << sc.noise.p_merge
       << "\np_split = " << sc.noise.p_split << "\ninstance_p_merge = " << sc.instance_noise.p_merge
       << "\ninstance_p_split = " << sc.instance_noise.p_split << "\n\n[graph]\nadjacency = \""
       << (graph.adjacency.mode == AdjacencyMode::kMeshSharedEdge ? "mesh" : "distance")
       << "\"\ndistance_threshold = " << graph.adjacency.distance_threshold << "\nprompt_count = " << graph.prompt_count
       << "\nsamples_per_view = " << graph.samples_per_view << "\nmax_views_per_edge = " << graph.max_views_per_edge
       << "\nocclusion_tol = " << graph.projection.occlusion_tol
       << "\nmin_visible_pixels = " << graph.projection.min_visible_pixels << "\n";
  std::cout << requests.size() << " prompt sets, " << sps.size() << " superpoints written to "
            << toml_string(store) << "\n";
}

/// Checks every oracle, feature and instance file in a store directory.
int validate_store(const fs::path& dir, const fs::path& cameras_path) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::kIo, "not a directory: " + dir.string());
  std::size_t oracle_records = 0;
  if (fs::exists(dir / "index.json")) {
    const auto store = OracleStore::load(dir);
    store.validate_all();
    oracle_records = store.size();
  }
  const auto features = FeatureStore::load(dir);
  for (const auto& [id, fm] : features.maps()) validate_feature_map(fm);
  const auto instances = InstanceMapStore::load(dir);
  if (!cameras_path.empty()) {
    const auto views = load_cameras(cameras_path);
    instances.validate_against(views);
  }
  std::cout << "ok: " << oracle_records << " oracle records, " << features.size() << " feature maps, "
            << instances.size() << " instance maps\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"supercut: superpoint-graph 3D instance segmentation"};
  app.require_subcommand(1);
  std::size_t threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = hardware parallelism)");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic labelled scene and cameras");
  SynthConfig synth_config;
  fs::path synth_out;
  bool with_store = false;
  PresegmentConfig synth_pre;
  synth_pre.seg_min_verts = 100;
  GraphOptions synth_graph;
  synth->add_option("--objects", synth_config.num_objects, "Number of objects");
  synth->add_option("--cameras", synth_config.camera_count, "Number of cameras");
  synth->add_option("--seed", synth_config.seed, "Random seed");
  synth->add_option("--room-size", synth_config.room_size, "Room side in meters");
  synth->add_option("--p-merge", synth_config.noise.p_merge, "Oracle merge probability");
  synth->add_option("--p-split", synth_config.noise.p_split, "Oracle split probability");
  synth->add_option("--instance-p-merge", synth_config.instance_noise.p_merge, "Instance-map merge probability");
  synth->add_option("--instance-p-split", synth_config.instance_noise.p_split, "Instance-map split probability");
  synth->add_option("--out-dir", synth_out, "Output directory")->required();
  synth->add_flag("--with-store", with_store, "Also write sp.json, prompts.bin, store/ and run.toml");
  synth->add_option("--k-thresh", synth_pre.k_thresh, "Presegmentation scale for --with-store");
  synth->add_option("--min-verts", synth_pre.seg_min_verts, "Minimum superpoint size for --with-store");
  synth_graph.add(synth);

  // presegment
  auto* pre = app.add_subcommand("presegment", "Over-segment a scene into superpoints");
  fs::path pre_in, pre_out;
  PresegmentConfig pre_config;
  pre->add_option("--in", pre_in, "Scene PLY")->required()->check(CLI::ExistingFile);
  pre->add_option("--k-thresh", pre_config.k_thresh, "Felzenszwalb scale");
  pre->add_option("--min-verts", pre_config.seg_min_verts, "Minimum superpoint size");
  pre->add_option("--knn", pre_config.knn, "Neighbours per point for point clouds");
  pre->add_option("--out", pre_out, "Output sp.json")->required();

  // build-graph
  auto* build = app.add_subcommand("build-graph", "Build the superpoint graph with oracle edge weights");
  fs::path bg_scene, bg_sp, bg_cams, bg_out;
  std::string bg_oracle, bg_features;
  std::uint64_t bg_seed = 0;
  NoiseConfig bg_noise;
  GraphOptions bg_graph;
  build->add_option("--scene", bg_scene, "Scene PLY")->required()->check(CLI::ExistingFile);
  build->add_option("--superpoints", bg_sp, "sp.json")->required()->check(CLI::ExistingFile);
  build->add_option("--cameras", bg_cams, "cams.json")->required()->check(CLI::ExistingFile);
  build->add_option("--oracle", bg_oracle, "Oracle store directory or 'synthetic'")->required();
  build->add_option("--features", bg_features, "Feature store directory, 'synthetic', or omitted");
  build->add_option("--seed", bg_seed, "Seed for feature sampling and synthetic sources");
  build->add_option("--p-merge", bg_noise.p_merge, "Synthetic oracle merge probability");
  build->add_option("--p-split", bg_noise.p_split, "Synthetic oracle split probability");
  build->add_option("--out", bg_out, "Output graph.spg")->required();
  bg_graph.add(build);

  // dump-prompts
  auto* dump = app.add_subcommand("dump-prompts", "Write the prompt sets build-graph will query");
  fs::path dp_scene, dp_sp, dp_cams, dp_out;
  GraphOptions dp_graph;
  dump->add_option("--scene", dp_scene, "Scene PLY")->required()->check(CLI::ExistingFile);
  dump->add_option("--superpoints", dp_sp, "sp.json")->required()->check(CLI::ExistingFile);
  dump->add_option("--cameras", dp_cams, "cams.json")->required()->check(CLI::ExistingFile);
  dump->add_option("--out", dp_out, "Output prompts.bin")->required();
  dp_graph.add(dump);

  // validate-store
  auto* vs = app.add_subcommand("validate-store", "Validate oracle, feature and instance-map files");
  fs::path vs_store, vs_cams;
  vs->add_option("--store", vs_store, "Store directory")->required();
  vs->add_option("--cameras", vs_cams, "cams.json to check instance map sizes")->check(CLI::ExistingFile);

  // pseudo-labels
  auto* pl = app.add_subcommand("pseudo-labels", "Label graph edges from whole-image instance maps");
  fs::path pl_graph, pl_scene, pl_sp, pl_cams, pl_out;
  std::string pl_instances;
  std::uint32_t pl_nmin = kDefaultMinViews;
  std::uint64_t pl_seed = 0;
  NoiseConfig pl_noise;
  ProjectionConfig pl_proj;
  pl->add_option("--graph", pl_graph, "Input graph.spg")->required()->check(CLI::ExistingFile);
  pl->add_option("--scene", pl_scene, "Scene PLY")->required()->check(CLI::ExistingFile);
  pl->add_option("--superpoints", pl_sp, "sp.json")->required()->check(CLI::ExistingFile);
  pl->add_option("--cameras", pl_cams, "cams.json")->required()->check(CLI::ExistingFile);
  pl->add_option("--instances", pl_instances, "Instance map directory or 'synthetic'")->required();
  pl->add_option("--n-min", pl_nmin, "Minimum agreeing views");
  pl->add_option("--seed", pl_seed, "Seed for synthetic instance maps");
  pl->add_option("--p-merge", pl_noise.p_merge, "Synthetic instance-map merge probability");
  pl->add_option("--p-split", pl_noise.p_split, "Synthetic instance-map split probability");
  pl->add_option("--occlusion-tol", pl_proj.occlusion_tol, "Depth test tolerance in meters");
  pl->add_option("--min-visible-pixels", pl_proj.min_visible_pixels, "Visibility threshold");
  pl->add_option("--out", pl_out, "Output labelled graph")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train the affinity network on labelled graphs");
  std::vector<fs::path> tr_graphs;
  fs::path tr_out;
  TrainConfig tr_config;
  bool tr_no_weights = false;
  tr->add_option("--graph", tr_graphs, "Labelled graph(s)")->required()->check(CLI::ExistingFile);
  tr->add_option("--epochs", tr_config.epochs, "Epochs");
  tr->add_option("--seed", tr_config.seed, "Initialisation seed");
  tr->add_option("--lr", tr_config.learning_rate, "Adam learning rate");
  tr->add_option("--hidden", tr_config.shape.hidden_dim, "Graph convolution width");
  tr->add_option("--layers", tr_config.shape.gcn_layers, "Graph convolution count");
  tr->add_option("--mlp-hidden", tr_config.shape.mlp_hidden, "Edge MLP width");
  tr->add_flag("--no-edge-weights", tr_no_weights, "Ablation: hide w_sam from the network");
  tr->add_option("--out", tr_out, "Output model.gnn")->required();

  // infer
  auto* inf = app.add_subcommand("infer", "Write network affinities into a graph");
  fs::path inf_graph, inf_model, inf_out;
  inf->add_option("--graph", inf_graph, "Input graph")->required()->check(CLI::ExistingFile);
  inf->add_option("--model", inf_model, "model.gnn")->required()->check(CLI::ExistingFile);
  inf->add_option("--out", inf_out, "Output graph")->required();

  // segment
  auto* seg = app.add_subcommand("segment", "Cut the graph and merge superpoints into instances");
  fs::path seg_graph, seg_sp, seg_scene, seg_out;
  CutConfig cut;
  bool seg_wsam = false;
  seg->add_option("--graph", seg_graph, "Input graph")->required()->check(CLI::ExistingFile);
  seg->add_option("--superpoints", seg_sp, "sp.json")->required()->check(CLI::ExistingFile);
  seg->add_option("--scene", seg_scene, "Scene PLY (point count; default: largest superpoint index + 1)")
      ->check(CLI::ExistingFile);
  seg->add_option("--tau", cut.tau, "Cut threshold");
  seg->add_option("--rho", cut.rho, "Inconsistent 2-path tolerance");
  seg->add_flag("--use-wsam", seg_wsam, "Cut on w_sam instead of affinities");
  seg->add_option("--out", seg_out, "Output seg.json")->required();

  // eval
  auto* ev = app.add_subcommand("eval", "Class-agnostic AP against the scene's instance labels");
  fs::path ev_seg, ev_scene, ev_out;
  std::string ev_exclude = "floor,wall";
  ev->add_option("--seg", ev_seg, "seg.json")->required()->check(CLI::ExistingFile);
  ev->add_option("--scene", ev_scene, "Labelled scene PLY")->required()->check(CLI::ExistingFile);
  ev->add_option("--exclude", ev_exclude, "Excluded GT ids: floor, wall or integers");
  ev->add_option("--out", ev_out, "Output report.json")->required();

  // run
  auto* run = app.add_subcommand("run", "Run the configured pipeline stages");
  fs::path run_config;
  bool resume = false;
  std::optional<std::uint64_t> run_seed;
  std::optional<std::string> run_out;
  run->add_option("--config", run_config, "run.toml")->required();
  run->add_flag("--resume", resume, "Skip stages whose outputs are valid and current");
  run->add_option("--seed", run_seed, "Override the config seed");
  run->add_option("--out-dir", run_out, "Override paths.out_dir");
  run->add_option("--threads", threads, "Worker threads (0 = hardware parallelism)");

  CLI11_PARSE(app, argc, argv);
  if (threads > 0) set_default_thread_count(threads);

  try {
    if (*synth) {
      validate_config(synth_config);
      const auto s = generate(synth_config);
      fs::create_directories(synth_out);
      save_scene(s.scene, synth_out / "scene.ply");
      save_cameras(s.cameras, synth_out / "cams.json");
      std::cout << s.scene.size() << " points, " << s.objects.size() << " objects, " << s.cameras.size()
                << " cameras\n";
      if (with_store) {
        validate_config(synth_pre);
        write_synthetic_store(s, synth_config, synth_pre, synth_graph.resolved(), synth_out);
      }
    } else if (*pre) {
      validate_config(pre_config);
      const auto scene = load_scene(pre_in);
      const auto sps = presegment(scene, pre_config);
      save_superpoints(sps, pre_out);
      std::cout << sps.size() << " superpoints\n";
    } else if (*build) {
      auto config = bg_graph.resolved();
      config.seed = stage_seeds(bg_seed).graph;
      const auto scene = load_scene(bg_scene);
      const auto sps = load_superpoints(bg_sp, scene);
      const auto views = load_cameras(bg_cams);
      std::unique_ptr<MaskOracle> oracle;
      if (bg_oracle == kSyntheticSource) {
        oracle = std::make_unique<SyntheticOracle>(scene, views, bg_noise, stage_seeds(bg_seed).oracle);
      } else {
        oracle = std::make_unique<FileOracle>(OracleStore::load(bg_oracle));
      }
      std::optional<FeatureStore> features;
      if (bg_features == kSyntheticSource) {
        features = synth_feature_maps(scene, views, stage_seeds(bg_seed).features);
      } else if (!bg_features.empty()) {
        features = FeatureStore::load(bg_features);
      }
      const auto result = annotate_graph(scene, sps, views, *oracle, features ? &*features : nullptr, config);
      save_graph(result.graph, bg_out);
      std::cout << result.graph.nodes.size() << " nodes, " << result.graph.edges.size() << " edges\n";
      if (features && !result.invisible_superpoints.empty()) {
        std::cerr << "warning: " << result.invisible_superpoints.size()
                  << " superpoints are visible in no view and got zero features\n";
      }
    } else if (*dump) {
      const auto config = dp_graph.resolved();
      const auto scene = load_scene(dp_scene);
      const auto sps = load_superpoints(dp_sp, scene);
      const auto views = load_cameras(dp_cams);
      const auto visibility = VisibilityIndex::build(scene, sps, views, config.projection);
      const auto edges = build_adjacency(scene, sps, config.adjacency);
      const auto prompts = collect_prompt_requests(visibility, sps, edges, config);
      save_prompts(prompts, dp_out);
      std::cout << prompts.size() << " prompt sets\n";
    } else if (*vs) {
      return validate_store(vs_store, vs_cams);
    } else if (*pl) {
      auto graph = load_graph(pl_graph);
      const auto scene = load_scene(pl_scene);
      const auto sps = load_superpoints(pl_sp, scene);
      const auto views = load_cameras(pl_cams);
      if (graph.nodes.size() != sps.size()) throw Error(ErrorCode::kInvalidArgument, "graph does not match sp.json");
      const auto visibility = VisibilityIndex::build(scene, sps, views, pl_proj);
      InstanceMapStore maps;
      if (pl_instances == kSyntheticSource) {
        maps = synth_instance_maps(scene, views, pl_noise, stage_seeds(pl_seed).instances);
      } else {
        maps = InstanceMapStore::load(pl_instances);
        maps.validate_against(views);
      }
      const auto stats = label_graph(graph, visibility, maps, pl_nmin);
      save_graph(graph, pl_out);
      std::cout << stats.positive << " positive, " << stats.negative << " negative, " << stats.unlabeled
                << " unlabeled\n";
    } else if (*tr) {
      tr_config.use_edge_weights = !tr_no_weights;
      std::vector<SuperpointGraph> graphs;
      for (const auto& g : tr_graphs) graphs.push_back(load_graph(g));
      const auto result = train(graphs, tr_config, [&](std::int32_t epoch, double loss) {
        if (epoch % 20 == 0 || epoch + 1 == tr_config.epochs) std::cerr << "epoch " << epoch << " loss " << loss << "\n";
      });
      save_parameters(result.params, tr_out);
    } else if (*inf) {
      auto graph = load_graph(inf_graph);
      infer(graph, load_parameters(inf_model));
      save_graph(graph, inf_out);
    } else if (*seg) {
      cut.use_affinity = !seg_wsam;
      const auto graph = load_graph(seg_graph);
      std::vector<Superpoint> sps;
      std::size_t num_points = 0;
      if (!seg_scene.empty()) {
        const auto scene = load_scene(seg_scene);
        sps = load_superpoints(seg_sp, scene);
        num_points = scene.size();
      } else {
        sps = load_superpoints(seg_sp);
        for (const auto& sp : sps) num_points = std::max<std::size_t>(num_points, sp.point_indices.back() + 1);
      }
      const auto result = segment_graph(graph, sps, num_points, cut);
      save_segmentation(result, seg_out);
      std::cout << result.instances.size() << " instances\n";
    } else if (*ev) {
      const auto exclusions = parse_exclusions(ev_exclude);
      const auto scene = load_scene(ev_scene);
      if (!scene.has_gt()) throw Error(ErrorCode::kInvalidArgument, "scene has no instance labels");
      const auto report = evaluate(load_segmentation(ev_seg), scene.gt_instance, exclusions);
      save_report(report, exclusions, ev_out);
      for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << "mAP " << report.map << " AP50 " << report.ap50 << " AP25 " << report.ap25 << "\n";
    } else if (*run) {
      auto config = load_pipeline_config(run_config);
      if (run_seed) config.seed = *run_seed;
      if (run_out) config.paths.out_dir = *run_out;
      RunOptions options;
      options.resume = resume;
      options.threads = threads;
      run_pipeline(config, options);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
