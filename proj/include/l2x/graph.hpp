#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "l2x/error.hpp"
#include "l2x/rng.hpp"

namespace l2x {

// Undirected edge, stored once with first < second.
using Edge = std::pair<int, int>;

inline Edge make_edge(int a, int b) {
  if (a == b) throw FormatError("self-loop on node " + std::to_string(a));
  return a < b ? Edge{a, b} : Edge{b, a};
}

struct Graph {
  int num_nodes = 0;
  std::vector<Edge> edges;  // sorted, deduplicated, endpoints < num_nodes
  std::vector<double> node_features;  // row-major num_nodes x feature_dim
  int feature_dim = 0;
  int label = 0;
  std::optional<std::vector<Edge>> truth_mask;  // subset of edges

  int num_edges() const { return static_cast<int>(edges.size()); }

  double feature(int node, int k) const {
    return node_features[static_cast<std::size_t>(node) * feature_dim + k];
  }

  // Index into `edges`, or -1 when the pair is not an edge.
  int edge_index(Edge e) const {
    auto it = std::lower_bound(edges.begin(), edges.end(), e);
    if (it == edges.end() || *it != e) return -1;
    return static_cast<int>(it - edges.begin());
  }

  void normalize_edges() {
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    if (truth_mask) {
      std::sort(truth_mask->begin(), truth_mask->end());
      truth_mask->erase(std::unique(truth_mask->begin(), truth_mask->end()), truth_mask->end());
    }
  }

  void validate() const {
    for (const Edge& e : edges) {
      if (e.first == e.second) {
        throw FormatError("graph has a self-loop on node " + std::to_string(e.first));
      }
      if (e.first > e.second || e.first < 0 || e.second >= num_nodes) {
        throw FormatError("edge (" + std::to_string(e.first) + "," + std::to_string(e.second) +
                          ") out of range for " + std::to_string(num_nodes) + " nodes");
      }
    }
    for (std::size_t i = 1; i < edges.size(); ++i) {
      if (edges[i] == edges[i - 1]) {
        throw FormatError("duplicate edge (" + std::to_string(edges[i].first) + "," +
                          std::to_string(edges[i].second) + ")");
      }
    }
    if (node_features.size() != static_cast<std::size_t>(num_nodes) * feature_dim) {
      throw FormatError("feature matrix size does not match num_nodes x feature_dim");
    }
    if (truth_mask) {
      for (const Edge& e : *truth_mask) {
        if (edge_index(e) < 0) {
          throw FormatError("truth_mask edge (" + std::to_string(e.first) + "," +
                            std::to_string(e.second) + ") is not a graph edge");
        }
      }
    }
  }

  bool is_connected() const {
    if (num_nodes <= 1) return true;
    std::vector<std::vector<int>> adj(num_nodes);
    for (const Edge& e : edges) {
      adj[e.first].push_back(e.second);
      adj[e.second].push_back(e.first);
    }
    std::vector<char> seen(num_nodes, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int w : adj[v]) {
        if (!seen[w]) {
          seen[w] = 1;
          ++count;
          stack.push_back(w);
        }
      }
    }
    return count == num_nodes;
  }
};

inline bool operator==(const Graph& a, const Graph& b) {
  return a.num_nodes == b.num_nodes && a.edges == b.edges &&
         a.node_features == b.node_features && a.feature_dim == b.feature_dim &&
         a.label == b.label && a.truth_mask == b.truth_mask;
}

struct Splits {
  std::vector<int> train, val, test;

  bool empty() const { return train.empty() && val.empty() && test.empty(); }

  friend bool operator==(const Splits&, const Splits&) = default;
};

struct Dataset {
  std::string name;
  std::vector<Graph> graphs;
  int num_classes = 0;
  int feature_dim = 0;
  Splits splits;

  int size() const { return static_cast<int>(graphs.size()); }

  void validate() const {
    std::vector<char> used(graphs.size(), 0);
    auto check_split = [&](const std::vector<int>& idx, const char* which) {
      for (int i : idx) {
        if (i < 0 || i >= size()) {
          throw FormatError(std::string(which) + " split index " + std::to_string(i) +
                            " out of range");
        }
        if (used[i]) throw FormatError("split index " + std::to_string(i) + " appears twice");
        used[i] = 1;
      }
    };
    check_split(splits.train, "train");
    check_split(splits.val, "val");
    check_split(splits.test, "test");
    for (const Graph& g : graphs) {
      if (g.label < 0 || g.label >= num_classes) {
        throw FormatError("graph label " + std::to_string(g.label) + " out of range for " +
                          std::to_string(num_classes) + " classes");
      }
      if (g.feature_dim != feature_dim) {
        throw FormatError("graph feature dim " + std::to_string(g.feature_dim) +
                          " differs from dataset dim " + std::to_string(feature_dim));
      }
      g.validate();
    }
  }
};

inline bool operator==(const Dataset& a, const Dataset& b) {
  return a.name == b.name && a.graphs == b.graphs && a.num_classes == b.num_classes &&
         a.feature_dim == b.feature_dim && a.splits == b.splits;
}

// Shuffled fractional split; remainder goes to test.
inline Splits make_splits(int n, double train_frac, double val_frac, std::uint64_t seed) {
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed(seed, 0x5714ULL));
  rng.shuffle(order);
  const int n_train = static_cast<int>(train_frac * n);
  const int n_val = static_cast<int>(val_frac * n);
  Splits s;
  s.train.assign(order.begin(), order.begin() + n_train);
  s.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  s.test.assign(order.begin() + n_train + n_val, order.end());
  return s;
}

}  // namespace l2x
