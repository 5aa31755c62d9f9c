#include "supercut/graph_cut.hpp"

#include "supercut/error.hpp"
#include "supercut/parallel.hpp"
#include "supercut/union_find.hpp"

#include <algorithm>

namespace supercut {

void validate_config(const CutConfig& config) {
  if (!(config.tau >= 0.0 && config.tau <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "tau must be in [0, 1]");
  if (!(config.rho >= 0.0 && config.rho <= 1.0)) throw Error(ErrorCode::kInvalidArgument, "rho must be in [0, 1]");
}

std::vector<double> edge_scores(const SuperpointGraph& graph, bool use_affinity) {
  std::vector<double> scores;
  scores.reserve(graph.edges.size());
  for (const auto& e : graph.edges) {
    const auto& s = use_affinity ? e.affinity : e.w_sam;
    if (!s) {
      throw Error(ErrorCode::kInvalidArgument, std::string("edge (") + std::to_string(e.u) + ", " + std::to_string(e.v) +
                                                   ") has no " + (use_affinity ? "affinity" : "w_sam"));
    }
    scores.push_back(*s);
  }
  return scores;
}

std::vector<std::uint8_t> decide_connections(const SuperpointGraph& graph, std::span<const double> scores,
                                             const CutConfig& config, std::size_t threads) {
  validate_config(config);
  if (scores.size() != graph.edges.size()) throw Error(ErrorCode::kInvalidArgument, "one score per edge required");
  // Neighbour lists of (node, edge index), sorted by node.
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> adj(graph.nodes.size());
  for (std::uint32_t e = 0; e < graph.edges.size(); ++e) {
    adj[graph.edges[e].u].emplace_back(graph.edges[e].v, e);
    adj[graph.edges[e].v].emplace_back(graph.edges[e].u, e);
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());

  std::vector<std::uint8_t> connected(graph.edges.size(), 0);
  parallel_for(
      graph.edges.size(),
      [&](std::size_t e) {
        if (scores[e] < config.tau) return;
        const auto& a = adj[graph.edges[e].u];
        const auto& b = adj[graph.edges[e].v];
        std::size_t high_high = 0, mixed = 0, i = 0, j = 0;
        while (i < a.size() && j < b.size()) {
          if (a[i].first < b[j].first) {
            ++i;
          } else if (b[j].first < a[i].first) {
            ++j;
          } else {
            const bool ha = scores[a[i].second] >= config.tau, hb = scores[b[j].second] >= config.tau;
            if (ha && hb) {
              ++high_high;
            } else if (ha != hb) {
              ++mixed;
            }
            ++i;
            ++j;
          }
        }
        const auto counted = high_high + mixed;
        const bool veto =
            counted > 0 && static_cast<double>(mixed) / static_cast<double>(counted) > config.rho;
        connected[e] = veto ? 0 : 1;
      },
      threads);
  return connected;
}

InstanceSegmentation partition(std::size_t num_points, std::span<const Superpoint> superpoints,
                               const SuperpointGraph& graph, std::span<const std::uint8_t> connected,
                               std::span<const double> scores) {
  if (superpoints.size() != graph.nodes.size()) {
    throw Error(ErrorCode::kInvalidArgument, "graph and superpoint list disagree on the node count");
  }
  if (connected.size() != graph.edges.size() || scores.size() != graph.edges.size()) {
    throw Error(ErrorCode::kInvalidArgument, "one decision and score per edge required");
  }
  const auto n = graph.nodes.size();
  UnionFind uf(n);
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    if (connected[e]) uf.unite(graph.edges[e].u, graph.edges[e].v);
  }
  std::vector<std::int32_t> instance_of_root(n, -1);
  std::vector<std::int32_t> node_instance(n);
  std::int32_t next = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    auto& id = instance_of_root[uf.find(i)];
    if (id < 0) id = next++;
    node_instance[i] = id;
  }
  std::vector<double> score_sum(static_cast<std::size_t>(next), 0.0);
  std::vector<std::size_t> score_count(static_cast<std::size_t>(next), 0);
  for (std::size_t e = 0; e < graph.edges.size(); ++e) {
    if (!connected[e]) continue;
    const auto id = static_cast<std::size_t>(node_instance[graph.edges[e].u]);
    score_sum[id] += scores[e];
    ++score_count[id];
  }
  InstanceSegmentation seg;
  seg.assignment.assign(num_points, kInstanceNone);
  for (std::size_t s = 0; s < superpoints.size(); ++s) {
    for (auto p : superpoints[s].point_indices) {
      if (p >= num_points) throw Error(ErrorCode::kInvalidArgument, "superpoint index out of range");
      seg.assignment[p] = node_instance[s];
    }
  }
  for (std::int32_t id = 0; id < next; ++id) {
    const auto k = static_cast<std::size_t>(id);
    seg.instances.push_back({id, score_count[k] > 0 ? score_sum[k] / static_cast<double>(score_count[k]) : 1.0});
  }
  return seg;
}

InstanceSegmentation segment_graph(const SuperpointGraph& graph, std::span<const Superpoint> superpoints,
                                   std::size_t num_points, const CutConfig& config, std::size_t threads) {
  const auto scores = edge_scores(graph, config.use_affinity);
  const auto connected = decide_connections(graph, scores, config, threads);
  return partition(num_points, superpoints, graph, connected, scores);
}

}  // namespace supercut
