#include "supercut/graph_build.hpp"
#include "supercut/pseudo_label.hpp"
#include "supercut/synth.hpp"

#include "test_support.hpp"

#include <map>

using namespace supercut;
using supercut::test::error_code_of;

namespace {

std::optional<std::uint16_t> brute_majority(const ProjectionMask& mask, const InstanceMap& map) {
  std::map<std::uint16_t, int> counts;
  for (auto p : mask.pixels) {
    if (map.labels[p] != 0) ++counts[map.labels[p]];
  }
  int best = 0, winners = 0;
  std::uint16_t label = 0;
  for (auto [l, n] : counts) {
    if (n > best) {
      best = n;
      label = l;
      winners = 1;
    } else if (n == best) {
      ++winners;
    }
  }
  if (winners != 1) return std::nullopt;
  return label;
}

/// Labels each view's pixels by the GT instance of the fixture (ids 1 and 2).
InstanceMapStore gt_maps(const test::WallFixture& f) {
  return synth_instance_maps(f.scene, f.views, {}, 1);
}

}  // namespace

TEST_CASE("pseudo-label rule over every vote combination") {
  for (std::uint32_t n_min = 1; n_min <= 4; ++n_min) {
    for (std::uint32_t same = 0; same <= 6; ++same) {
      for (std::uint32_t diff = 0; diff <= 6; ++diff) {
        const auto label = pseudo_label({0, 1, same, diff}, n_min);
        if (diff == 0 && same >= n_min) {
          CHECK(label == EdgeLabel::kPositive);
        } else if (same == 0 && diff >= n_min) {
          CHECK(label == EdgeLabel::kNegative);
        } else {
          CHECK_FALSE(label.has_value());
        }
      }
    }
  }
  CHECK(error_code_of([] { pseudo_label({0, 1, 3, 0}, 0); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("majority instance matches counting, with ties and background abstaining") {
  Rng rng(14);
  for (int trial = 0; trial < 300; ++trial) {
    InstanceMap map{0, 6, 6, std::vector<std::uint16_t>(36)};
    for (auto& l : map.labels) l = static_cast<std::uint16_t>(uniform_index(rng, 4));
    std::vector<std::uint32_t> pixels;
    for (std::uint32_t p = 0; p < 36; ++p) {
      if (uniform(rng) < 0.3) pixels.push_back(p);
    }
    if (pixels.empty()) pixels.push_back(0);
    const auto mask = make_projection_mask(0, 0, 6, 6, pixels);
    CHECK(majority_instance(mask, map) == brute_majority(mask, map));
  }
  InstanceMap map{0, 2, 2, {1, 2, 0, 0}};
  CHECK_FALSE(majority_instance(make_projection_mask(0, 0, 2, 2, {0, 1}), map).has_value());
  CHECK_FALSE(majority_instance(make_projection_mask(0, 0, 2, 2, {2, 3}), map).has_value());
  CHECK(majority_instance(make_projection_mask(0, 0, 2, 2, {0, 2, 3}), map) == std::uint16_t{1});
  InstanceMap wrong{0, 3, 2, std::vector<std::uint16_t>(6)};
  CHECK(error_code_of([&] { majority_instance(make_projection_mask(0, 0, 2, 2, {0}), wrong); }) ==
        ErrorCode::kFormat);
}

TEST_CASE("clean instance maps label every co-visible edge correctly") {
  const test::WallFixture f;
  GraphBuildConfig config;
  const auto vis = VisibilityIndex::build(f.scene, f.sps, f.views, config.projection);
  const auto edges = build_adjacency(f.scene, f.sps, config.adjacency);
  const auto maps = gt_maps(f);

  SuperpointGraph graph;
  for (const auto& sp : f.sps) graph.nodes.push_back({static_cast<std::uint32_t>(sp.sp_id), {}});
  for (auto [u, v] : edges) graph.edges.push_back({u, v, 0.5f});

  auto labelled = graph;
  const auto stats = label_graph(labelled, vis, maps, 4);
  CHECK(stats.unlabeled == 0);
  CHECK(stats.positive > 0);
  CHECK(stats.negative > 0);
  for (const auto& e : labelled.edges) {
    const bool same = f.scene.gt_instance[f.sps[e.u].point_indices[0]] ==
                      f.scene.gt_instance[f.sps[e.v].point_indices[0]];
    REQUIRE(e.label.has_value());
    CHECK((*e.label == EdgeLabel::kPositive) == same);
    const auto rec = record_edge_votes(e.u, e.v, vis, maps);
    CHECK(rec.votes_same + rec.votes_diff == 4);
  }

  // Four views cannot reach five votes.
  auto strict = graph;
  CHECK(label_graph(strict, vis, maps, 5).unlabeled == graph.edges.size());

  // A missing view is an error, not an abstention.
  InstanceMapStore partial;
  partial.add(maps.get(f.views[0].view_id));
  auto g = graph;
  CHECK(error_code_of([&] { label_graph(g, vis, partial, 1); }) == ErrorCode::kMissingOracleData);
}
