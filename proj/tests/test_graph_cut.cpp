#include "supercut/graph_cut.hpp"

#include "test_support.hpp"

#include <deque>
#include <map>
#include <set>

using namespace supercut;
using supercut::test::error_code_of;

namespace {

SuperpointGraph random_scored_graph(Rng& rng, std::uint32_t n, double p) {
  SuperpointGraph g;
  for (std::uint32_t i = 0; i < n; ++i) g.nodes.push_back({i, {}});
  for (auto [u, v] : test::random_edges(rng, n, p)) {
    GraphEdge e{u, v};
    e.w_sam = static_cast<float>(uniform(rng));
    e.affinity = static_cast<float>(uniform(rng));
    g.edges.push_back(e);
  }
  return g;
}

/// Triple loop over every third node.
std::vector<std::uint8_t> brute_connections(const SuperpointGraph& g, const std::vector<double>& s,
                                            const CutConfig& config) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, double> score;
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    score[{g.edges[e].u, g.edges[e].v}] = s[e];
    score[{g.edges[e].v, g.edges[e].u}] = s[e];
  }
  std::vector<std::uint8_t> out;
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    if (s[e] < config.tau) {
      out.push_back(0);
      continue;
    }
    int hh = 0, mixed = 0;
    for (std::uint32_t w = 0; w < g.nodes.size(); ++w) {
      const auto a = score.find({g.edges[e].u, w}), b = score.find({g.edges[e].v, w});
      if (a == score.end() || b == score.end()) continue;
      const bool ha = a->second >= config.tau, hb = b->second >= config.tau;
      hh += ha && hb;
      mixed += ha != hb;
    }
    out.push_back(hh + mixed > 0 && double(mixed) / (hh + mixed) > config.rho ? 0 : 1);
  }
  return out;
}

/// Component label per node by breadth-first search over kept edges, numbered by smallest node.
std::vector<std::int32_t> bfs_components(const SuperpointGraph& g, const std::vector<std::uint8_t>& keep) {
  std::vector<std::vector<std::uint32_t>> adj(g.nodes.size());
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    if (!keep[e]) continue;
    adj[g.edges[e].u].push_back(g.edges[e].v);
    adj[g.edges[e].v].push_back(g.edges[e].u);
  }
  std::vector<std::int32_t> comp(g.nodes.size(), -1);
  std::int32_t next = 0;
  for (std::uint32_t s = 0; s < g.nodes.size(); ++s) {
    if (comp[s] >= 0) continue;
    std::deque<std::uint32_t> q{s};
    comp[s] = next;
    while (!q.empty()) {
      const auto x = q.front();
      q.pop_front();
      for (auto y : adj[x]) {
        if (comp[y] < 0) {
          comp[y] = next;
          q.push_back(y);
        }
      }
    }
    ++next;
  }
  return comp;
}

std::vector<Superpoint> singleton_superpoints(std::size_t n) {
  std::vector<Superpoint> sps(n);
  for (std::size_t i = 0; i < n; ++i) {
    sps[i].sp_id = static_cast<std::int32_t>(i);
    sps[i].point_indices = {static_cast<std::uint32_t>(2 * i), static_cast<std::uint32_t>(2 * i + 1)};
  }
  return sps;
}

}  // namespace

TEST_CASE("connection decisions match the triple-loop count") {
  Rng rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = random_scored_graph(rng, 2 + static_cast<std::uint32_t>(uniform_index(rng, 30)), 0.3);
    CutConfig config;
    config.tau = uniform(rng, 0.2, 0.8);
    config.rho = uniform(rng, 0.0, 0.6);
    const auto scores = edge_scores(g, true);
    CHECK(decide_connections(g, scores, config, 3) == brute_connections(g, scores, config));
  }
}

TEST_CASE("the 2-path veto cuts a bridge between two cliques") {
  // Triangle 0-1-2 where 0-2 is weak: the strong edge 0-1 sees one mixed path (via 2).
  SuperpointGraph g;
  for (std::uint32_t i = 0; i < 3; ++i) g.nodes.push_back({i, {}});
  g.edges = {{0, 1, 0.9f}, {0, 2, 0.1f}, {1, 2, 0.9f}};
  const auto scores = edge_scores(g, false);
  CutConfig config;
  config.rho = 0.25;
  CHECK(decide_connections(g, scores, config) == std::vector<std::uint8_t>{0, 0, 0});
  config.rho = 1.0;
  CHECK(decide_connections(g, scores, config) == std::vector<std::uint8_t>{1, 0, 1});
}

TEST_CASE("partition equals BFS components and assigns points") {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = 1 + static_cast<std::uint32_t>(uniform_index(rng, 40));
    const auto g = random_scored_graph(rng, n, 0.1);
    const auto scores = edge_scores(g, true);
    std::vector<std::uint8_t> keep(g.edges.size());
    for (auto& k : keep) k = uniform(rng) < 0.6;
    const auto sps = singleton_superpoints(n);
    const auto seg = partition(2 * n + 1, sps, g, keep, scores);
    const auto comp = bfs_components(g, keep);
    for (std::uint32_t i = 0; i < n; ++i) {
      CHECK(seg.assignment[2 * i] == comp[i]);
      CHECK(seg.assignment[2 * i + 1] == comp[i]);
    }
    CHECK(seg.assignment.back() == kInstanceNone);
    std::set<std::int32_t> ids(comp.begin(), comp.end());
    REQUIRE(seg.instances.size() == ids.size());
    for (std::size_t k = 0; k < seg.instances.size(); ++k) {
      const auto id = seg.instances[k].instance_id;
      CHECK(id == static_cast<std::int32_t>(k));
      double sum = 0;
      int count = 0;
      for (std::size_t e = 0; e < g.edges.size(); ++e) {
        if (keep[e] && comp[g.edges[e].u] == id) {
          sum += scores[e];
          ++count;
        }
      }
      CHECK(seg.instances[k].confidence == doctest::Approx(count ? sum / count : 1.0));
    }
  }
}

TEST_CASE("segment_graph chooses the score source") {
  SuperpointGraph g;
  for (std::uint32_t i = 0; i < 2; ++i) g.nodes.push_back({i, {}});
  g.edges = {{0, 1, 0.9f, 0.1f}};
  const auto sps = singleton_superpoints(2);
  CutConfig config;
  CHECK(segment_graph(g, sps, 4, config).instances.size() == 2);
  config.use_affinity = false;
  CHECK(segment_graph(g, sps, 4, config).instances.size() == 1);
  g.edges[0].affinity.reset();
  config.use_affinity = true;
  CHECK(error_code_of([&] { segment_graph(g, sps, 4, config); }) == ErrorCode::kInvalidArgument);
  config.tau = 1.5;
  CHECK(error_code_of([&] { validate_config(config); }) == ErrorCode::kInvalidArgument);
}
