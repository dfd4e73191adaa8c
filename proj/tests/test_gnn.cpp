#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "l2x/checkpoint.hpp"
#include "l2x/generators.hpp"
#include "l2x/gnn.hpp"
#include "oracles.hpp"

using l2x::EdgeMask;
using l2x::Graph;
using l2x::ModelParams;
using l2x::Tensor;

namespace {

// 1-d identity GIN layer: both affine maps are [[1]] with zero bias.
l2x::GinLayerParams identity_layer() {
  l2x::GinLayerParams p;
  p.w1 = Tensor::from_data({1, 1}, {1.0}, true);
  p.b1 = Tensor::zeros({1, 1}, true);
  p.w2 = Tensor::from_data({1, 1}, {1.0}, true);
  p.b2 = Tensor::zeros({1, 1}, true);
  p.epsilon = Tensor::scalar(0.0, true);
  return p;
}

Graph two_node_graph() {
  Graph g;
  g.num_nodes = 2;
  g.edges = {{0, 1}};
  g.node_features = {1.0, 2.0};
  g.feature_dim = 1;
  return g;
}

Graph random_graph(int n, double p_edge, int feature_dim, l2x::Rng& rng) {
  Graph g;
  g.num_nodes = n;
  g.feature_dim = feature_dim;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (rng.uniform() < p_edge) g.edges.emplace_back(i, j);
    }
  }
  g.node_features.resize(static_cast<std::size_t>(n) * feature_dim);
  for (double& v : g.node_features) v = rng.uniform(-1.0, 1.0);
  g.normalize_edges();
  return g;
}

}  // namespace

TEST_CASE("gin layer with identity MLP") {
  auto g = two_node_graph();
  auto layer = identity_layer();
  auto h = l2x::node_features_tensor(g);

  SECTION("one selected edge: h' = (1+0) h_i + h_j") {
    auto out = l2x::gin_layer_forward(h, g, EdgeMask::all_of(g), layer);
    CHECK(out.data() == std::vector<double>{3.0, 3.0});
  }

  SECTION("empty mask keeps nodes isolated") {
    auto out = l2x::gin_layer_forward(h, g, EdgeMask::none_of(g), layer);
    CHECK(out.data() == std::vector<double>{1.0, 2.0});
  }

  SECTION("full overload equals mask with every edge selected") {
    auto full = l2x::gin_layer_forward(h, g, layer);
    auto masked = l2x::gin_layer_forward(h, g, EdgeMask::all_of(g), layer);
    CHECK(full.data() == masked.data());
  }

  SECTION("isolated-node semantics under a generic MLP") {
    l2x::Rng rng(31);
    auto mp = ModelParams::init(1, 4, 1, 2, 77);
    const auto& l0 = mp.downstream_layers[0];
    auto masked = l2x::gin_layer_forward(h, g, EdgeMask::none_of(g), l0);
    // each row must equal the layer applied to that node alone
    for (int v = 0; v < 2; ++v) {
      Graph solo;
      solo.num_nodes = 1;
      solo.feature_dim = 1;
      solo.node_features = {g.feature(v, 0)};
      auto out = l2x::gin_layer_forward(l2x::node_features_tensor(solo), solo, l0);
      for (std::size_t c = 0; c < out.numel(); ++c) {
        CHECK(masked.at(v, c) == out.at(0, c));
      }
    }
  }
}

TEST_CASE("upstream scores") {
  l2x::Rng rng(9);
  auto g = random_graph(8, 0.4, 3, rng);
  auto params = ModelParams::init(3, 16, 2, 2, 123);

  SECTION("zero weights give a constant score on every edge") {
    for (auto& t : params.upstream_tensors()) {
      for (double& v : const_cast<Tensor&>(t).data()) v = 0.0;
    }
    auto scores = l2x::upstream_scores(g, params);
    for (double v : scores.values) CHECK(v == scores.values[0]);
  }

  SECTION("identical embeddings score as the squared norm") {
    auto pair = two_node_graph();
    pair.node_features = {0.7, 0.7};
    auto p1 = ModelParams::init(1, 8, 1, 2, 5);
    auto h = l2x::gin_layer_forward(l2x::node_features_tensor(pair), pair,
                                    p1.upstream_layers[0]);
    double norm_sq = 0.0;
    for (std::size_t c = 0; c < h.shape()[1]; ++c) norm_sq += h.at(0, c) * h.at(0, c);
    auto scores = l2x::upstream_scores(pair, p1);
    CHECK(scores.values[0] == Catch::Approx(norm_sq).epsilon(1e-12));
  }

  SECTION("matches an independent dot product of extracted embeddings") {
    auto adjacency = l2x::dense_adjacency(g);
    Tensor h = l2x::node_features_tensor(g);
    for (int l = 0; l < params.score_layer_index; ++l) {
      h = l2x::gin_layer_forward(h, adjacency, params.upstream_layers[l]);
    }
    auto scores = l2x::upstream_scores(g, params);
    for (std::size_t k = 0; k < g.edges.size(); ++k) {
      double dot = 0.0;
      for (std::size_t c = 0; c < h.shape()[1]; ++c) {
        dot += h.at(g.edges[k].first, c) * h.at(g.edges[k].second, c);
      }
      CHECK(std::abs(scores.values[k] - dot) <= 1e-12);
    }
  }
}

TEST_CASE("downstream forward") {
  l2x::Rng rng(17);
  auto params = ModelParams::init(3, 8, 3, 2, 99);

  SECTION("full mask equals unmasked forward") {
    auto g = random_graph(10, 0.3, 3, rng);
    auto a = l2x::downstream_forward(g, EdgeMask::all_of(g), params);
    auto b = l2x::downstream_forward_dense(g, l2x::dense_adjacency(g), params);
    CHECK(a.data() == b.data());
  }

  SECTION("empty mask with identical features reduces to a single node") {
    Graph g;
    g.num_nodes = 5;
    g.feature_dim = 3;
    g.edges = {{0, 1}, {1, 2}, {2, 3}, {3, 4}};
    for (int v = 0; v < 5; ++v) {
      g.node_features.insert(g.node_features.end(), {0.3, -0.2, 0.9});
    }
    Graph solo;
    solo.num_nodes = 1;
    solo.feature_dim = 3;
    solo.node_features = {0.3, -0.2, 0.9};
    auto a = l2x::downstream_forward(g, EdgeMask::none_of(g), params);
    auto b = l2x::downstream_forward(solo, EdgeMask::all_of(solo), params);
    for (std::size_t i = 0; i < a.numel(); ++i) {
      CHECK(a.at(i) == Catch::Approx(b.at(i)).margin(1e-12));
    }
  }

  SECTION("faithfulness: masked forward equals forward on the induced subgraph") {
    for (int trial = 0; trial < 25; ++trial) {
      auto g = random_graph(9, 0.35, 3, rng);
      if (g.num_edges() == 0) continue;
      EdgeMask mask = EdgeMask::none_of(g);
      for (std::size_t k = 0; k < mask.selected.size(); ++k) {
        if (rng.uniform() < 0.5) {
          mask.selected[k] = 1;
          ++mask.count;
        }
      }
      auto sub = l2x::induced_subgraph(g, mask);
      auto lhs = l2x::downstream_forward(g, mask, params);
      auto rhs = l2x::downstream_forward(sub, EdgeMask::all_of(sub), params);
      CHECK(lhs.data() == rhs.data());  // bit-for-bit
    }
  }
}

TEST_CASE("permutation equivariance") {
  l2x::Rng rng(23);
  auto params = ModelParams::init(4, 8, 2, 3, 7);
  auto g = random_graph(9, 0.4, 4, rng);

  std::vector<int> perm(g.num_nodes);
  for (int i = 0; i < g.num_nodes; ++i) perm[i] = i;
  rng.shuffle(perm);

  Graph pg;
  pg.num_nodes = g.num_nodes;
  pg.feature_dim = g.feature_dim;
  pg.node_features.resize(g.node_features.size());
  for (int v = 0; v < g.num_nodes; ++v) {
    for (int c = 0; c < g.feature_dim; ++c) {
      pg.node_features[static_cast<std::size_t>(perm[v]) * g.feature_dim + c] = g.feature(v, c);
    }
  }
  for (const auto& e : g.edges) pg.edges.push_back(l2x::make_edge(perm[e.first], perm[e.second]));
  pg.normalize_edges();

  auto base = l2x::downstream_forward(g, EdgeMask::all_of(g), params);
  auto permuted = l2x::downstream_forward(pg, EdgeMask::all_of(pg), params);
  for (std::size_t i = 0; i < base.numel(); ++i) {
    CHECK(base.at(i) == Catch::Approx(permuted.at(i)).margin(1e-9));
  }

  auto theta = l2x::upstream_scores(g, params);
  auto ptheta = l2x::upstream_scores(pg, params);
  for (std::size_t k = 0; k < g.edges.size(); ++k) {
    const auto mapped = l2x::make_edge(perm[g.edges[k].first], perm[g.edges[k].second]);
    CHECK(theta.values[k] == Catch::Approx(ptheta.at(mapped)).margin(1e-9));
  }
}

TEST_CASE("mask gradient matches finite differences") {
  l2x::Rng rng(4242);
  auto params = ModelParams::init(3, 6, 2, 2, 11);
  auto g = random_graph(7, 0.5, 3, rng);
  REQUIRE(g.num_edges() > 0);

  auto mask = EdgeMask::all_of(g);
  auto dense = l2x::dense_adjacency(g, mask, /*requires_grad=*/true);
  auto loss = l2x::softmax_cross_entropy(l2x::downstream_forward_dense(g, dense, params), 1);
  l2x::backward(loss);
  auto analytic = l2x::edge_mask_gradient(dense.grad(), g);

  const auto n = static_cast<std::size_t>(g.num_nodes);
  const double h = 1e-5;
  for (std::size_t k = 0; k < g.edges.size(); ++k) {
    const auto [i, j] = g.edges[k];
    auto eval = [&] {
      return l2x::softmax_cross_entropy(l2x::downstream_forward_dense(g, dense, params), 1)
          .item();
    };
    auto& buf = dense.data();
    buf[i * n + j] += h;
    buf[j * n + i] += h;
    const double fp = eval();
    buf[i * n + j] -= 2 * h;
    buf[j * n + i] -= 2 * h;
    const double fm = eval();
    buf[i * n + j] += h;
    buf[j * n + i] += h;
    CHECK(oracles::rel_err(analytic[k], (fp - fm) / (2 * h)) <= 1e-4);
  }
}

TEST_CASE("empty mask never mixes node information") {
  l2x::Rng rng(55);
  auto params = ModelParams::init(3, 8, 3, 2, 21);
  auto g = random_graph(6, 0.6, 3, rng);
  auto none = l2x::dense_adjacency(g, EdgeMask::none_of(g));

  auto before = l2x::downstream_node_embeddings(g, none, params);
  Graph tweaked = g;
  for (int c = 0; c < 3; ++c) tweaked.node_features[5 * 3 + c] += 0.75;  // perturb node 5
  auto after = l2x::downstream_node_embeddings(tweaked, none, params);

  for (int v = 0; v < 5; ++v) {
    for (std::size_t c = 0; c < before.shape()[1]; ++c) {
      CHECK(before.at(v, c) == after.at(v, c));
    }
  }
}

TEST_CASE("checkpoint round trip") {
  namespace fs = std::filesystem;
  auto params = ModelParams::init(5, 12, 3, 4, 2024);
  params.score_layer_index = 2;
  const auto path = fs::temp_directory_path() / "l2x_ckpt_test.json";

  l2x::save_checkpoint(params, path, {{"note", 1}});
  auto loaded = l2x::load_checkpoint(path);
  CHECK(loaded.extra.at("note") == 1);
  CHECK(loaded.params.score_layer_index == 2);

  auto a = params.named_tensors();
  auto b = loaded.params.named_tensors();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    CHECK(a[i].second.data() == b[i].second.data());  // exact round trip
    CHECK(a[i].second.shape() == b[i].second.shape());
  }

  SECTION("shape mismatch names the tensor") {
    std::ifstream in(path);
    nlohmann::json j;
    in >> j;
    j["arch"]["hidden_dim"] = 8;  // stored tensors no longer match
    CHECK_THROWS_MATCHES(l2x::checkpoint_from_json(j), l2x::InputError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("upstream.0.w1")));
  }
  fs::remove(path);
}
