#pragma once

// Synthetic graph-classification datasets with ground-truth explanation
// masks: planted house/cycle motifs on Barabasi-Albert trees, and a
// molecular-style carbon-ring/nitro-group proxy.

#include <cstdint>
#include <string>
#include <vector>

#include "l2x/error.hpp"
#include "l2x/graph.hpp"
#include "l2x/rng.hpp"

namespace l2x {

namespace detail {

// Preferential attachment with one edge per new node: a tree on n nodes.
inline std::vector<Edge> barabasi_albert_tree(int n, Rng& rng) {
  std::vector<Edge> edges;
  std::vector<int> endpoint_pool;  // node repeated once per incident edge
  for (int v = 1; v < n; ++v) {
    const int target = v == 1 ? 0 : endpoint_pool[rng.index(endpoint_pool.size())];
    edges.push_back(make_edge(v, target));
    endpoint_pool.push_back(v);
    endpoint_pool.push_back(target);
  }
  return edges;
}

// Uniform random recursive tree on `n` nodes, offset into a larger graph.
inline std::vector<Edge> random_tree(int n, int offset, Rng& rng) {
  std::vector<Edge> edges;
  for (int v = 1; v < n; ++v) {
    const int parent = static_cast<int>(rng.index(v));
    edges.push_back(make_edge(offset + v, offset + parent));
  }
  return edges;
}

}  // namespace detail

// 20-node BA tree plus a 5-node planted motif and one bridge edge.
// Class 0 gets a house motif (4-cycle with an apex on one side), class 1 a
// 5-cycle. The motif edges are the ground-truth mask; the bridge is shared
// by both classes and therefore excluded.
inline Dataset gen_ba2motifs(int n_graphs, std::uint64_t seed) {
  if (n_graphs % 2 != 0) {
    throw ContractError("gen_ba2motifs: n_graphs must be even, got " + std::to_string(n_graphs));
  }
  constexpr int kBaseNodes = 20;
  constexpr int kMotifNodes = 5;
  constexpr int kFeatureDim = 10;

  Dataset ds;
  ds.name = "ba2motifs";
  ds.num_classes = 2;
  ds.feature_dim = kFeatureDim;
  ds.graphs.reserve(n_graphs);

  for (int gi = 0; gi < n_graphs; ++gi) {
    Rng rng(derive_seed(seed, 0xBA2, gi));
    Graph g;
    g.num_nodes = kBaseNodes + kMotifNodes;
    g.feature_dim = kFeatureDim;
    g.label = gi % 2;
    g.edges = detail::barabasi_albert_tree(kBaseNodes, rng);

    const int m = kBaseNodes;  // first motif node
    std::vector<Edge> motif;
    if (g.label == 0) {
      // house: 4-cycle m..m+3, apex m+4 on the (m+2, m+3) side
      motif = {make_edge(m, m + 1),     make_edge(m + 1, m + 2), make_edge(m + 2, m + 3),
               make_edge(m, m + 3),     make_edge(m + 2, m + 4), make_edge(m + 3, m + 4)};
    } else {
      motif = {make_edge(m, m + 1), make_edge(m + 1, m + 2), make_edge(m + 2, m + 3),
               make_edge(m + 3, m + 4), make_edge(m, m + 4)};
    }
    g.edges.insert(g.edges.end(), motif.begin(), motif.end());

    const int bridge_base = static_cast<int>(rng.index(kBaseNodes));
    const int bridge_motif = m + static_cast<int>(rng.index(kMotifNodes));
    g.edges.push_back(make_edge(bridge_base, bridge_motif));

    g.truth_mask = motif;
    g.node_features.assign(static_cast<std::size_t>(g.num_nodes) * kFeatureDim, 0.1);
    g.normalize_edges();
    g.validate();
    ds.graphs.push_back(std::move(g));
  }
  ds.splits = make_splits(n_graphs, 0.8, 0.1, seed);
  return ds;
}

// Carbon-ring / nitro-group proxy. Every graph carries a 6-cycle of carbon
// atoms attached to a random tree; class 1 additionally has an NO2 pendant
// on the ring (N bonded to the ring, two O bonded to N). Tree atoms get
// random types so that atom counts alone do not settle the class and the
// model has to locate the ring-NO2 structure.
inline Dataset gen_ring_nitro(int n_graphs, std::uint64_t seed) {
  if (n_graphs % 2 != 0) {
    throw ContractError("gen_ring_nitro: n_graphs must be even, got " + std::to_string(n_graphs));
  }
  constexpr int kFeatureDim = 4;  // one-hot C, N, O, other
  constexpr int kCarbon = 0, kNitrogen = 1, kOxygen = 2, kOther = 3;

  Dataset ds;
  ds.name = "ring-nitro";
  ds.num_classes = 2;
  ds.feature_dim = kFeatureDim;
  ds.graphs.reserve(n_graphs);

  for (int gi = 0; gi < n_graphs; ++gi) {
    Rng rng(derive_seed(seed, 0x4102, gi));
    Graph g;
    g.label = gi % 2;
    g.feature_dim = kFeatureDim;

    const int tree_nodes = 8 + static_cast<int>(rng.index(9));  // 8..16
    std::vector<int> atom;  // per-node atom type
    std::vector<Edge> edges;
    for (int r = 0; r < 6; ++r) {
      edges.push_back(make_edge(r, (r + 1) % 6));
      atom.push_back(kCarbon);
    }
    std::vector<Edge> truth = edges;  // ring edges

    int next = 6;
    if (g.label == 1) {
      const int n_node = next++;
      const int o1 = next++;
      const int o2 = next++;
      atom.push_back(kNitrogen);
      atom.push_back(kOxygen);
      atom.push_back(kOxygen);
      const int ring_attach = static_cast<int>(rng.index(6));
      const Edge pendant[3] = {make_edge(ring_attach, n_node), make_edge(n_node, o1),
                               make_edge(n_node, o2)};
      for (const Edge& e : pendant) {
        edges.push_back(e);
        truth.push_back(e);
      }
    }

    const int tree_offset = next;
    auto tree = detail::random_tree(tree_nodes, tree_offset, rng);
    edges.insert(edges.end(), tree.begin(), tree.end());
    for (int t = 0; t < tree_nodes; ++t) atom.push_back(static_cast<int>(rng.index(4)));
    edges.push_back(make_edge(tree_offset + static_cast<int>(rng.index(tree_nodes)),
                              static_cast<int>(rng.index(6))));

    g.num_nodes = tree_offset + tree_nodes;
    g.edges = std::move(edges);
    if (g.label == 1) {
      g.truth_mask = std::move(truth);
    }
    g.node_features.assign(static_cast<std::size_t>(g.num_nodes) * kFeatureDim, 0.0);
    for (int v = 0; v < g.num_nodes; ++v) {
      g.node_features[static_cast<std::size_t>(v) * kFeatureDim + atom[v]] = 1.0;
    }
    g.normalize_edges();
    g.validate();
    ds.graphs.push_back(std::move(g));
  }
  ds.splits = make_splits(n_graphs, 0.8, 0.1, seed);
  return ds;
}

}  // namespace l2x
