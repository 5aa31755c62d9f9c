#include "supercut/binary_io.hpp"
#include "supercut/error.hpp"
#include "supercut/io.hpp"

#include <algorithm>

namespace supercut {

namespace {

constexpr std::uint8_t kFlagFeatures = 1u << 0;
constexpr std::uint8_t kFlagWeights = 1u << 1;
constexpr std::uint8_t kFlagAffinities = 1u << 2;
constexpr std::uint8_t kFlagLabels = 1u << 3;

// Flags are container-wide; a field is either present on every element or on none.
template <typename Range, typename Pred>
bool all_or_none(const Range& range, Pred has, const char* what) {
  const auto count = std::count_if(range.begin(), range.end(), has);
  if (count != 0 && static_cast<std::size_t>(count) != range.size()) {
    throw Error(ErrorCode::kInvalidArgument, std::string("graph has ") + what + " on some but not all elements");
  }
  return count != 0;
}

}  // namespace

std::vector<std::uint8_t> encode_graph(const SuperpointGraph& graph) {
  validate_graph(graph);
  const bool features = all_or_none(graph.nodes, [](const GraphNode& n) { return n.has_feature(); }, "features");
  const bool weights = all_or_none(graph.edges, [](const GraphEdge& e) { return e.w_sam.has_value(); }, "w_sam");
  const bool affinities =
      all_or_none(graph.edges, [](const GraphEdge& e) { return e.affinity.has_value(); }, "affinity");
  const bool labels =
      std::any_of(graph.edges.begin(), graph.edges.end(), [](const GraphEdge& e) { return e.label.has_value(); });

  ByteWriter w;
  w.put_magic("SPG1");
  w.put(static_cast<std::uint32_t>(graph.nodes.size()));
  w.put(static_cast<std::uint32_t>(graph.edges.size()));
  std::uint8_t flags = 0;
  if (features) flags |= kFlagFeatures;
  if (weights) flags |= kFlagWeights;
  if (affinities) flags |= kFlagAffinities;
  if (labels) flags |= kFlagLabels;
  w.put(flags);
  for (const auto& node : graph.nodes) {
    w.put(node.sp_id);
    if (features) w.put_array(std::span<const float>(node.feature));
  }
  for (const auto& e : graph.edges) {
    w.put(e.u);
    w.put(e.v);
    if (weights) w.put(*e.w_sam);
    if (affinities) w.put(*e.affinity);
    if (labels) w.put(static_cast<std::int8_t>(e.label ? static_cast<std::int8_t>(*e.label) : -1));
  }
  return w.bytes();
}

SuperpointGraph decode_graph(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, ".spg");
  r.expect_magic("SPG1");
  const auto num_nodes = r.get<std::uint32_t>();
  const auto num_edges = r.get<std::uint32_t>();
  const auto flags = r.get<std::uint8_t>();
  if (flags & ~(kFlagFeatures | kFlagWeights | kFlagAffinities | kFlagLabels)) {
    throw Error(ErrorCode::kVersionMismatch, ".spg: unknown flag bits");
  }
  SuperpointGraph graph;
  // Guard allocations against corrupt counts before reserving.
  if (num_nodes > r.remaining() / 4 || num_edges > r.remaining() / 8) {
    throw Error(ErrorCode::kTruncated, ".spg: counts exceed file size");
  }
  graph.nodes.resize(num_nodes);
  for (auto& node : graph.nodes) {
    node.sp_id = r.get<std::uint32_t>();
    if (flags & kFlagFeatures) {
      node.feature.resize(kFeatureDim);
      r.get_array(std::span<float>(node.feature));
    }
  }
  graph.edges.resize(num_edges);
  for (auto& e : graph.edges) {
    e.u = r.get<std::uint32_t>();
    e.v = r.get<std::uint32_t>();
    if (flags & kFlagWeights) e.w_sam = r.get<float>();
    if (flags & kFlagAffinities) e.affinity = r.get<float>();
    if (flags & kFlagLabels) {
      const auto label = r.get<std::int8_t>();
      if (label == 0) {
        e.label = EdgeLabel::kNegative;
      } else if (label == 1) {
        e.label = EdgeLabel::kPositive;
      } else if (label != -1) {
        throw Error(ErrorCode::kFormat, ".spg: invalid edge label " + std::to_string(label));
      }
    }
  }
  if (!r.at_end()) throw Error(ErrorCode::kFormat, ".spg: trailing bytes after last edge");
  validate_graph(graph);
  return graph;
}

void save_graph(const SuperpointGraph& graph, const std::filesystem::path& path) {
  write_file_atomic(path, encode_graph(graph));
}

SuperpointGraph load_graph(const std::filesystem::path& path) { return decode_graph(read_file(path)); }

}  // namespace supercut
