#include "supercut/gnn.hpp"

#include "test_support.hpp"

#include <cmath>
#include <limits>

using namespace supercut;
using supercut::test::error_code_of;

namespace {

GnnShape small_shape() { return {6, 4, 3, 5}; }

/// Random graph with features of `dim` channels; about half the edges labelled.
SuperpointGraph random_graph(Rng& rng, std::uint32_t n, std::size_t dim, double p_edge = 0.4) {
  SuperpointGraph g;
  for (std::uint32_t i = 0; i < n; ++i) {
    GraphNode node{i, std::vector<float>(dim)};
    for (auto& x : node.feature) x = static_cast<float>(normal(rng));
    g.nodes.push_back(node);
  }
  for (auto [u, v] : test::random_edges(rng, n, p_edge)) {
    GraphEdge e{u, v, static_cast<float>(uniform(rng)), std::nullopt, std::nullopt};
    if (uniform(rng) < 0.5) e.label = uniform(rng) < 0.5 ? EdgeLabel::kPositive : EdgeLabel::kNegative;
    g.edges.push_back(e);
  }
  if (g.edges.empty()) g.edges.push_back({0, 1, 0.3f, std::nullopt, EdgeLabel::kPositive});
  return g;
}

/// Row-normalised (A + I) as a dense matrix.
Eigen::MatrixXd dense_propagation(const SuperpointGraph& g) {
  const auto n = static_cast<Eigen::Index>(g.nodes.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  for (const auto& e : g.edges) a(e.u, e.v) = a(e.v, e.u) = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) a.row(i) /= a.row(i).sum();
  return a;
}

double dense_mlp(const GnnParameters& p, const Eigen::VectorXd& x) {
  const Eigen::VectorXd h1 = (p.mlp[0].w * x + p.mlp[0].b).cwiseMax(0.0);
  const Eigen::VectorXd h2 = (p.mlp[1].w * h1 + p.mlp[1].b).cwiseMax(0.0);
  return 1.0 / (1.0 + std::exp(-(p.mlp[2].w * h2 + p.mlp[2].b)(0)));
}

GnnParameters random_parameters(Rng& rng, const GnnShape& shape) {
  auto p = init_parameters(shape, rng());
  for (auto t : p.tensors()) {
    for (auto& x : t) x += 0.1 * normal(rng);  // non-zero biases too
  }
  return p;
}

}  // namespace

TEST_CASE("graph convolution and edge scores match a dense formulation") {
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const auto g = random_graph(rng, 9, 6);
    const auto p = random_parameters(rng, small_shape());
    const auto input = make_gnn_input(g);

    Eigen::MatrixXd h(9, 6);
    for (int i = 0; i < 9; ++i) {
      for (int k = 0; k < 6; ++k) h(i, k) = g.nodes[i].feature[k];
    }
    const auto a = dense_propagation(g);
    for (std::size_t l = 0; l < p.gcn.size(); ++l) {
      Eigen::MatrixXd z = a * h * p.gcn[l].w.transpose();
      z.rowwise() += p.gcn[l].b.transpose();
      h = l + 1 == p.gcn.size() ? z : z.cwiseMax(0.0);
    }
    const auto emb = gcn_forward(input, p);
    CHECK((emb - h).cwiseAbs().maxCoeff() < 1e-12);

    const auto s = edge_affinities(input, p);
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
      const auto u = g.edges[e].u, v = g.edges[e].v;
      const double w = *g.edges[e].w_sam;
      Eigen::VectorXd x(9), y(9);
      x << h.row(u).transpose(), h.row(v).transpose(), w;
      y << h.row(v).transpose(), h.row(u).transpose(), w;
      const double expected = 0.5 * (dense_mlp(p, x) + dense_mlp(p, y));
      CHECK(s[e] == doctest::Approx(expected).epsilon(1e-12));
      CHECK(edge_affinity(p, emb, u, v, w) == doctest::Approx(expected).epsilon(1e-12));
      CHECK(edge_affinity(p, emb, v, u, w) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("loss terms follow their definitions") {
  Rng rng(2);
  const auto g = random_graph(rng, 10, 6);
  const auto p = random_parameters(rng, small_shape());
  const auto input = make_gnn_input(g);
  const auto s = edge_affinities(input, p);
  double bce = 0, reg = 0;
  std::size_t nl = 0, nu = 0;
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    if (g.edges[e].label) {
      const double y = *g.edges[e].label == EdgeLabel::kPositive ? 1.0 : 0.0;
      bce -= y * std::log(s[e]) + (1 - y) * std::log(1 - s[e]);
      ++nl;
    } else {
      const double w = *g.edges[e].w_sam;
      reg += std::abs(w - 0.5) * std::abs(s[e] - w);
      ++nu;
    }
  }
  const auto r = loss_and_gradients(input, p);
  REQUIRE(nl > 0);
  REQUIRE(nu > 0);
  CHECK(r.labeled == nl);
  CHECK(r.unlabeled == nu);
  CHECK(r.bce == doctest::Approx(bce / nl).epsilon(1e-12));
  CHECK(r.reg == doctest::Approx(reg / nu).epsilon(1e-12));
  CHECK(loss_value(input, p) == doctest::Approx(r.loss).epsilon(1e-14));

  const auto ablated = loss_and_gradients(input, p, {false});
  CHECK(ablated.unlabeled == 0);
  CHECK(ablated.reg == 0.0);
}

TEST_CASE("analytic gradients match central differences") {
  Rng rng(3);
  for (const bool use_weights : {true, false}) {
    for (int trial = 0; trial < 5; ++trial) {
      const auto g = random_graph(rng, 8, 6);
      auto p = random_parameters(rng, small_shape());
      const auto input = make_gnn_input(g);
      const LossOptions options{use_weights};
      const auto analytic = loss_and_gradients(input, p, options).gradients;
      const auto grads = analytic.tensors();
      auto params = p.tensors();
      std::size_t checked = 0;
      for (std::size_t t = 0; t < params.size(); ++t) {
        for (std::size_t i = 0; i < params[t].size(); ++i) {
          const double h = 1e-5, orig = params[t][i];
          std::uint64_t pat_plus = 0, pat_minus = 0, pat0 = 0;
          loss_value(input, p, options, &pat0);
          params[t][i] = orig + h;
          const double lp = loss_value(input, p, options, &pat_plus);
          params[t][i] = orig - h;
          const double lm = loss_value(input, p, options, &pat_minus);
          params[t][i] = orig;
          if (pat_plus != pat0 || pat_minus != pat0) continue;  // a kink lies within the stencil
          const double numeric = (lp - lm) / (2 * h), a = grads[t][i];
          const double scale = std::max({std::abs(numeric), std::abs(a), 1e-6});
          CHECK_MESSAGE(std::abs(numeric - a) / scale < 1e-4, "numeric " << numeric << " analytic " << a);
          ++checked;
        }
      }
      CHECK(checked > p.parameter_count() * 9 / 10);
    }
  }
}

TEST_CASE("parameter layout and validation") {
  const auto p = init_parameters({}, 0);
  CHECK(p.gcn.size() == 5);
  CHECK(p.gcn[0].w.rows() == 128);
  CHECK(p.gcn[0].w.cols() == 256);
  CHECK(p.mlp[0].w.cols() == 257);
  CHECK(p.mlp[2].w.rows() == 1);
  CHECK(p.shape().hidden_dim == 128);
  for (const auto& layer : p.gcn) CHECK(layer.b.isZero());
  const double limit = std::sqrt(6.0 / (256 + 128));
  CHECK(p.gcn[0].w.cwiseAbs().maxCoeff() <= limit);
  CHECK(init_parameters({}, 0) == p);
  CHECK_FALSE(init_parameters({}, 1) == p);

  auto bad = p;
  bad.mlp.pop_back();
  CHECK(error_code_of([&] { validate_parameters(bad); }) == ErrorCode::kInvalidArgument);
  bad = p;
  bad.gcn[1].w(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK(error_code_of([&] { validate_parameters(bad); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE(".gnn round-trip through float32") {
  Rng rng(4);
  const auto p = random_parameters(rng, small_shape());
  const auto bytes = encode_parameters(p);
  const auto back = decode_parameters(bytes);
  CHECK(encode_parameters(back) == bytes);
  for (std::size_t l = 0; l < p.gcn.size(); ++l) {
    CHECK((back.gcn[l].w - p.gcn[l].w).cwiseAbs().maxCoeff() < 1e-6);
  }
  auto cut = bytes;
  cut.resize(bytes.size() - 2);
  CHECK(error_code_of([&] { decode_parameters(cut); }) == ErrorCode::kTruncated);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK(error_code_of([&] { decode_parameters(magic); }) == ErrorCode::kVersionMismatch);
}

TEST_CASE("packing rejects graphs the network cannot read") {
  Rng rng(5);
  auto g = random_graph(rng, 5, 6);
  g.nodes[2].feature.clear();
  try {
    make_gnn_input(g);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidArgument);
    CHECK(std::string(e.what()).find("sp_id 2") != std::string::npos);
  }
  g = random_graph(rng, 5, 6);
  g.edges[0].w_sam.reset();
  CHECK(error_code_of([&] { make_gnn_input(g); }) == ErrorCode::kInvalidArgument);
  CHECK(make_gnn_input(g, false).edges[0].w == 0.0);
}

TEST_CASE("disjoint union packing offsets node indices") {
  Rng rng(6);
  const std::vector<SuperpointGraph> graphs = {random_graph(rng, 4, 6), random_graph(rng, 5, 6)};
  const auto input = make_gnn_input(graphs);
  CHECK(input.features.rows() == 9);
  CHECK(input.edges.size() == graphs[0].edges.size() + graphs[1].edges.size());
  const auto& last = input.edges.back();
  CHECK(last.u == graphs[1].edges.back().u + 4);
  CHECK(last.v == graphs[1].edges.back().v + 4);
  for (std::uint32_t i = 0; i < 4; ++i) {
    for (auto j : input.closed[i]) CHECK(j < 4);
  }
}

TEST_CASE("training fits a separable fixture and is deterministic") {
  // Two feature clusters; edges inside a cluster are positive, across are negative.
  Rng rng(7);
  std::vector<SuperpointGraph> graphs;
  for (int k = 0; k < 3; ++k) {
    SuperpointGraph g;
    for (std::uint32_t i = 0; i < 12; ++i) {
      GraphNode node{i, std::vector<float>(6)};
      for (auto& x : node.feature) x = static_cast<float>(0.2 * normal(rng));
      node.feature[i % 2 == 0 ? 0 : 1] += 2.0f;
      g.nodes.push_back(node);
    }
    for (auto [u, v] : test::random_edges(rng, 12, 0.3)) {
      const bool same = u % 2 == v % 2;
      GraphEdge e{u, v, same ? 0.6f : 0.4f, std::nullopt, std::nullopt};
      e.label = same ? EdgeLabel::kPositive : EdgeLabel::kNegative;
      if (uniform(rng) < 0.3) e.label.reset();
      g.edges.push_back(e);
    }
    graphs.push_back(g);
  }
  TrainConfig config;
  config.shape = {6, 8, 2, 8};
  config.epochs = 300;
  config.learning_rate = 1e-2;
  config.seed = 11;
  std::int32_t last_epoch = 0;
  const auto result = train(graphs, config, [&](std::int32_t epoch, double) { last_epoch = epoch; });
  CHECK(last_epoch == 300);
  REQUIRE(result.loss_history.size() == 300);
  CHECK(result.loss_history.back() < 0.5 * result.loss_history.front());

  auto g = graphs[0];
  infer(g, result.params);
  std::size_t correct = 0;
  for (const auto& e : g.edges) correct += (*e.affinity >= 0.5) == (e.u % 2 == e.v % 2);
  CHECK(correct == g.edges.size());

  CHECK(train(graphs, config).params == result.params);

  config.learning_rate = 0.0;
  config.epochs = 3;
  CHECK(train(graphs, config).params == init_parameters(config.shape, config.seed));

  config.learning_rate = 1e-2;
  config.use_edge_weights = false;
  const auto ablated = train(graphs, config);
  CHECK(ablated.params.mlp[0].w.col(16).isZero());
}

TEST_CASE("training reports divergence and bad configs") {
  Rng rng(8);
  auto g = random_graph(rng, 6, 6);
  g.nodes[0].feature[0] = std::numeric_limits<float>::infinity();
  TrainConfig config;
  config.shape = small_shape();
  config.epochs = 2;
  CHECK(error_code_of([&] { train(std::vector<SuperpointGraph>{g}, config); }) == ErrorCode::kDivergence);
  config.epochs = 0;
  CHECK(error_code_of([&] { validate_config(config); }) == ErrorCode::kInvalidArgument);
  config.epochs = 1;
  config.shape.input_dim = 7;
  CHECK(error_code_of([&] { train(std::vector<SuperpointGraph>{random_graph(rng, 6, 6)}, config); }) ==
        ErrorCode::kInvalidArgument);
}
