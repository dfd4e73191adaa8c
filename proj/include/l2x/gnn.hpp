#pragma once

// GIN message passing with Hadamard-masked adjacency, the upstream edge
// scorer, and the pooled classifier head. A forward pass through the dense
// mask variant is differentiable with respect to the mask itself, which is
// what the downstream-loss-to-edge gradient of I-MLE needs.

#include <cmath>
#include <string>
#include <vector>

#include "l2x/error.hpp"
#include "l2x/graph.hpp"
#include "l2x/rng.hpp"
#include "l2x/tensor.hpp"

namespace l2x {

// Binary selection over a graph's undirected edge set.
struct EdgeMask {
  const Graph* graph = nullptr;
  std::vector<std::uint8_t> selected;  // aligned with graph->edges
  int count = 0;

  static EdgeMask none_of(const Graph& g) {
    return EdgeMask{&g, std::vector<std::uint8_t>(g.edges.size(), 0), 0};
  }

  static EdgeMask all_of(const Graph& g) {
    return EdgeMask{&g, std::vector<std::uint8_t>(g.edges.size(), 1), g.num_edges()};
  }

  static EdgeMask from_edges(const Graph& g, const std::vector<Edge>& edges) {
    EdgeMask m = none_of(g);
    for (const Edge& e : edges) {
      const int idx = g.edge_index(e);
      if (idx < 0) {
        throw ContractError("mask edge (" + std::to_string(e.first) + "," +
                            std::to_string(e.second) + ") is not in the graph");
      }
      if (!m.selected[idx]) {
        m.selected[idx] = 1;
        ++m.count;
      }
    }
    return m;
  }

  int size() const { return count; }

  bool contains(Edge e) const {
    const int idx = graph->edge_index(e);
    return idx >= 0 && selected[idx];
  }

  std::vector<Edge> selected_edges() const {
    std::vector<Edge> out;
    out.reserve(count);
    for (std::size_t i = 0; i < selected.size(); ++i) {
      if (selected[i]) out.push_back(graph->edges[i]);
    }
    return out;
  }

  friend bool operator==(const EdgeMask& a, const EdgeMask& b) {
    return a.selected == b.selected;
  }
};

// Symmetric per-edge scores, materialized on existing edges only.
struct EdgeScores {
  const Graph* graph = nullptr;
  std::vector<double> values;  // aligned with graph->edges

  double at(Edge e) const {
    const int idx = graph->edge_index(e);
    if (idx < 0) {
      throw ContractError("no score for non-edge (" + std::to_string(e.first) + "," +
                          std::to_string(e.second) + ")");
    }
    return values[idx];
  }
};

// Two affine maps with a relu between, plus the learnable self-loop weight.
struct GinLayerParams {
  Tensor w1, b1, w2, b2;
  Tensor epsilon;

  static GinLayerParams init(std::size_t d_in, std::size_t d_h, std::size_t d_out, Rng& rng) {
    GinLayerParams p;
    p.w1 = glorot(d_in, d_h, rng);
    p.b1 = bias(d_in, d_h, rng);
    p.w2 = glorot(d_h, d_out, rng);
    p.b2 = bias(d_h, d_out, rng);
    p.epsilon = Tensor::scalar(0.0, true);
    return p;
  }

  static Tensor glorot(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> data(fan_in * fan_out);
    for (double& v : data) v = rng.uniform(-limit, limit);
    return Tensor::from_data({fan_in, fan_out}, std::move(data), true);
  }

  // Random bias init spreads the relu kinks over the activation range;
  // with zero biases and nonnegative inputs the first layer degenerates to
  // an affine map and constant-feature datasets never break symmetry.
  static Tensor bias(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> data(fan_out);
    for (double& v : data) v = rng.uniform(-bound, bound);
    return Tensor::from_data({1, fan_out}, std::move(data), true);
  }
};

struct MlpParams {
  Tensor w1, b1, w2, b2;

  // Zero biases here: the head sees already-diverse pooled embeddings, and
  // zero-centered logits keep an untrained model close to uniform.
  static MlpParams init(std::size_t d_in, std::size_t d_h, std::size_t d_out, Rng& rng) {
    MlpParams p;
    p.w1 = GinLayerParams::glorot(d_in, d_h, rng);
    p.b1 = Tensor::zeros({1, d_h}, true);
    p.w2 = GinLayerParams::glorot(d_h, d_out, rng);
    p.b2 = Tensor::zeros({1, d_out}, true);
    return p;
  }
};

// Upstream scorer parameters (v), downstream GNN + classifier (u). The two
// towers share the architecture but never the parameters.
struct ModelParams {
  std::vector<GinLayerParams> upstream_layers;
  std::vector<GinLayerParams> downstream_layers;
  MlpParams classifier;
  int score_layer_index = 1;  // 1-based layer whose embeddings score edges
  int feature_dim = 0;
  int hidden_dim = 0;
  int num_classes = 0;

  static ModelParams init(int feature_dim, int hidden_dim, int num_layers, int num_classes,
                          std::uint64_t seed) {
    if (feature_dim <= 0 || hidden_dim <= 0 || num_layers <= 0 || num_classes <= 0) {
      throw ContractError("ModelParams::init: dimensions must be positive");
    }
    Rng rng(derive_seed(seed, 0x1417));
    ModelParams p;
    p.feature_dim = feature_dim;
    p.hidden_dim = hidden_dim;
    p.num_classes = num_classes;
    const auto h = static_cast<std::size_t>(hidden_dim);
    for (int l = 0; l < num_layers; ++l) {
      const std::size_t d_in = l == 0 ? static_cast<std::size_t>(feature_dim) : h;
      p.upstream_layers.push_back(GinLayerParams::init(d_in, h, h, rng));
    }
    for (int l = 0; l < num_layers; ++l) {
      const std::size_t d_in = l == 0 ? static_cast<std::size_t>(feature_dim) : h;
      p.downstream_layers.push_back(GinLayerParams::init(d_in, h, h, rng));
    }
    p.classifier = MlpParams::init(h, h, static_cast<std::size_t>(num_classes), rng);
    return p;
  }

  int num_layers() const { return static_cast<int>(downstream_layers.size()); }

  std::vector<std::pair<std::string, Tensor>> named_tensors() const {
    std::vector<std::pair<std::string, Tensor>> out;
    auto push_layer = [&](const std::string& prefix, const GinLayerParams& l) {
      out.emplace_back(prefix + ".w1", l.w1);
      out.emplace_back(prefix + ".b1", l.b1);
      out.emplace_back(prefix + ".w2", l.w2);
      out.emplace_back(prefix + ".b2", l.b2);
      out.emplace_back(prefix + ".epsilon", l.epsilon);
    };
    for (std::size_t i = 0; i < upstream_layers.size(); ++i) {
      push_layer("upstream." + std::to_string(i), upstream_layers[i]);
    }
    for (std::size_t i = 0; i < downstream_layers.size(); ++i) {
      push_layer("downstream." + std::to_string(i), downstream_layers[i]);
    }
    out.emplace_back("classifier.w1", classifier.w1);
    out.emplace_back("classifier.b1", classifier.b1);
    out.emplace_back("classifier.w2", classifier.w2);
    out.emplace_back("classifier.b2", classifier.b2);
    return out;
  }

  std::vector<Tensor> all_tensors() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_tensors()) out.push_back(t);
    return out;
  }

  // Parameters of the upstream scorer h_v.
  std::vector<Tensor> upstream_tensors() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_tensors()) {
      if (name.rfind("upstream.", 0) == 0) out.push_back(t);
    }
    return out;
  }

  // Parameters of the downstream model f_u, classifier included.
  std::vector<Tensor> downstream_tensors() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_tensors()) {
      if (name.rfind("upstream.", 0) != 0) out.push_back(t);
    }
    return out;
  }

  void zero_grad() const {
    for (auto& t : all_tensors()) const_cast<Tensor&>(t).zero_grad();
  }
};

inline Tensor node_features_tensor(const Graph& g) {
  return Tensor::from_data({static_cast<std::size_t>(g.num_nodes),
                            static_cast<std::size_t>(g.feature_dim)},
                           g.node_features);
}

// Dense symmetric 0/1 adjacency over the selected edges. With
// requires_grad set, downstream losses become differentiable w.r.t. each
// entry, from which the per-edge mask gradient is assembled.
inline Tensor dense_adjacency(const Graph& g, const EdgeMask& mask, bool requires_grad = false) {
  const auto n = static_cast<std::size_t>(g.num_nodes);
  std::vector<double> data(n * n, 0.0);
  for (std::size_t k = 0; k < mask.selected.size(); ++k) {
    if (!mask.selected[k]) continue;
    const Edge& e = g.edges[k];
    data[e.first * n + e.second] = 1.0;
    data[e.second * n + e.first] = 1.0;
  }
  return Tensor::from_data({n, n}, std::move(data), requires_grad);
}

inline Tensor dense_adjacency(const Graph& g) { return dense_adjacency(g, EdgeMask::all_of(g)); }

// Per-undirected-edge total derivative: entries (i,j) and (j,i) of the
// dense mask both carry the same edge variable.
inline std::vector<double> edge_mask_gradient(const std::vector<double>& dense_grad,
                                              const Graph& g) {
  const auto n = static_cast<std::size_t>(g.num_nodes);
  if (dense_grad.size() != n * n) {
    throw DimensionError("edge_mask_gradient: buffer is not num_nodes^2");
  }
  std::vector<double> out(g.edges.size());
  for (std::size_t k = 0; k < g.edges.size(); ++k) {
    const Edge& e = g.edges[k];
    out[k] = dense_grad[e.first * n + e.second] + dense_grad[e.second * n + e.first];
  }
  return out;
}

namespace detail {

inline Tensor affine_rows(const Tensor& x, const Tensor& w, const Tensor& b) {
  auto prod = matmul(x, w);
  auto ones = Tensor::full({x.shape()[0], 1}, 1.0);
  return add(prod, matmul(ones, b));
}

inline Tensor mlp2(const Tensor& x, const Tensor& w1, const Tensor& b1, const Tensor& w2,
                   const Tensor& b2) {
  return affine_rows(relu(affine_rows(x, w1, b1)), w2, b2);
}

}  // namespace detail

// One GIN update: h_i' = MLP((1 + eps) h_i + sum_{j in N(i)} h_j), where
// the neighborhood is induced by the adjacency tensor. Nodes isolated under
// the mask keep a pure self-term.
inline Tensor gin_layer_forward(const Tensor& h, const Tensor& adjacency,
                                const GinLayerParams& p) {
  const auto& hs = h.shape();
  const auto& as = adjacency.shape();
  if (hs.size() != 2 || as.size() != 2 || as[0] != as[1] || as[0] != hs[0]) {
    throw DimensionError("gin_layer_forward: adjacency " + detail::shape_str(as) +
                         " does not match features " + detail::shape_str(hs));
  }
  auto aggregated = matmul(adjacency, h);
  auto self_scale = add(Tensor::scalar(1.0), p.epsilon);
  auto combined = add(mul(self_scale, h), aggregated);
  return detail::mlp2(combined, p.w1, p.b1, p.w2, p.b2);
}

inline Tensor gin_layer_forward(const Tensor& h, const Graph& g, const GinLayerParams& p) {
  return gin_layer_forward(h, dense_adjacency(g), p);
}

inline Tensor gin_layer_forward(const Tensor& h, const Graph& g, const EdgeMask& mask,
                                const GinLayerParams& p) {
  return gin_layer_forward(h, dense_adjacency(g, mask), p);
}

// theta_e = <h_i, h_j> for every existing undirected edge e = (i, j).
inline Tensor edge_inner_products(const Tensor& h, const std::vector<Edge>& edges) {
  const std::size_t d = h.shape()[1];
  std::vector<double> out(edges.size());
  const double* ph = h.data().data();
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const double* ri = ph + static_cast<std::size_t>(edges[k].first) * d;
    const double* rj = ph + static_cast<std::size_t>(edges[k].second) * d;
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) s += ri[c] * rj[c];
    out[k] = s;
  }
  const detail::TensorNode* nh = h.node();
  return Tensor::make_op(
      {edges.size()}, std::move(out), {h}, "edge_inner_products",
      [nh, edges, d](const std::vector<double>& g, detail::AdjointMap& adj) {
        if (!nh->requires_grad) return;
        auto& gh = detail::adjoint_slot(adj, nh);
        const double* ph = nh->data.data();
        for (std::size_t k = 0; k < edges.size(); ++k) {
          const auto i = static_cast<std::size_t>(edges[k].first) * d;
          const auto j = static_cast<std::size_t>(edges[k].second) * d;
          for (std::size_t c = 0; c < d; ++c) {
            gh[i + c] += g[k] * ph[j + c];
            gh[j + c] += g[k] * ph[i + c];
          }
        }
      });
}

// Runs the upstream tower on the full adjacency and scores each existing
// edge with the inner product of its endpoint embeddings at the scoring
// layer. Differentiable w.r.t. the upstream parameters.
inline Tensor upstream_scores_tensor(const Graph& g, const ModelParams& params) {
  if (params.score_layer_index < 1 ||
      params.score_layer_index > static_cast<int>(params.upstream_layers.size())) {
    throw ContractError("score_layer_index " + std::to_string(params.score_layer_index) +
                        " outside 1.." + std::to_string(params.upstream_layers.size()));
  }
  auto adjacency = dense_adjacency(g);
  Tensor h = node_features_tensor(g);
  for (int l = 0; l < params.score_layer_index; ++l) {
    h = gin_layer_forward(h, adjacency, params.upstream_layers[l]);
  }
  return edge_inner_products(h, g.edges);
}

inline EdgeScores upstream_scores(const Graph& g, const ModelParams& params) {
  return EdgeScores{&g, upstream_scores_tensor(g, params).data()};
}

// Final node embeddings under the masked adjacency (pre-pooling).
inline Tensor downstream_node_embeddings(const Graph& g, const Tensor& adjacency,
                                         const ModelParams& params) {
  Tensor h = node_features_tensor(g);
  for (const auto& layer : params.downstream_layers) {
    h = gin_layer_forward(h, adjacency, layer);
  }
  return h;
}

// Masked forward pass: GIN layers over the masked adjacency, mean pooling,
// classifier head. Returns unnormalized logits of shape [num_classes].
inline Tensor downstream_forward_dense(const Graph& g, const Tensor& adjacency,
                                       const ModelParams& params) {
  auto h = downstream_node_embeddings(g, adjacency, params);
  auto pooled = reshape(reduce_mean(h, 0), {1, h.shape()[1]});
  auto logits = detail::mlp2(pooled, params.classifier.w1, params.classifier.b1,
                             params.classifier.w2, params.classifier.b2);
  return reshape(logits, {logits.numel()});
}

inline Tensor downstream_forward(const Graph& g, const EdgeMask& mask, const ModelParams& params) {
  if (mask.graph != &g) {
    throw ContractError("downstream_forward: mask belongs to a different graph");
  }
  return downstream_forward_dense(g, dense_adjacency(g, mask), params);
}

// Graph whose edge set is exactly the masked selection (nodes and features
// unchanged). Forward on this graph with a full mask must match the masked
// forward on the original bit-for-bit.
inline Graph induced_subgraph(const Graph& g, const EdgeMask& mask) {
  Graph out;
  out.num_nodes = g.num_nodes;
  out.edges = mask.selected_edges();
  out.node_features = g.node_features;
  out.feature_dim = g.feature_dim;
  out.label = g.label;
  return out;
}

inline int argmax_class(const Tensor& logits) {
  int best = 0;
  for (std::size_t i = 1; i < logits.numel(); ++i) {
    if (logits.at(i) > logits.at(best)) best = static_cast<int>(i);
  }
  return best;
}

}  // namespace l2x
