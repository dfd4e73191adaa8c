#pragma once

// Parser for the TU graph-classification flat-file convention:
//   <name>_A.txt               comma-separated 1-indexed edge pairs
//   <name>_graph_indicator.txt 1-indexed graph id per node
//   <name>_graph_labels.txt    one label per graph
//   <name>_node_labels.txt     optional; one-hot encoded into features
//   <name>_truth_masks.json    optional sidecar of ground-truth edge masks

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "l2x/error.hpp"
#include "l2x/graph.hpp"

namespace l2x {

namespace detail {

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

inline long parse_int(const std::string& text, const std::string& file, std::size_t line_no) {
  std::size_t pos = 0;
  long value = 0;
  try {
    value = std::stol(text, &pos);
  } catch (const std::exception&) {
    throw FormatError(file + ":" + std::to_string(line_no) + ": expected integer, got '" + text +
                      "'");
  }
  for (; pos < text.size(); ++pos) {
    if (text[pos] != ' ') {
      throw FormatError(file + ":" + std::to_string(line_no) + ": trailing characters in '" +
                        text + "'");
    }
  }
  return value;
}

}  // namespace detail

// Loads `<root>/<name>_*.txt`, falling back to `<root>/<name>/<name>_*.txt`.
inline Dataset parse_tu_dataset(const std::filesystem::path& root, const std::string& name) {
  namespace fs = std::filesystem;
  fs::path dir = root;
  if (!fs::exists(dir / (name + "_A.txt")) && fs::exists(dir / name / (name + "_A.txt"))) {
    dir = dir / name;
  }
  const fs::path a_path = dir / (name + "_A.txt");
  const fs::path ind_path = dir / (name + "_graph_indicator.txt");
  const fs::path lab_path = dir / (name + "_graph_labels.txt");
  const fs::path node_lab_path = dir / (name + "_node_labels.txt");
  const fs::path truth_path = dir / (name + "_truth_masks.json");
  for (const fs::path* p : {&a_path, &ind_path, &lab_path}) {
    if (!fs::exists(*p)) throw InputError("missing dataset file " + p->string());
  }

  const auto indicator = detail::read_lines(ind_path);
  const auto label_lines = detail::read_lines(lab_path);
  const int num_graphs = static_cast<int>(label_lines.size());

  // Global 1-indexed node id -> (graph, local 0-based id).
  std::vector<int> node_graph(indicator.size());
  std::vector<int> node_local(indicator.size());
  std::vector<int> graph_sizes(num_graphs, 0);
  for (std::size_t i = 0; i < indicator.size(); ++i) {
    const long gid = detail::parse_int(indicator[i], ind_path.filename().string(), i + 1);
    if (gid < 1 || gid > num_graphs) {
      throw FormatError(ind_path.filename().string() + ":" + std::to_string(i + 1) +
                        ": graph id " + std::to_string(gid) + " out of range");
    }
    node_graph[i] = static_cast<int>(gid - 1);
    node_local[i] = graph_sizes[gid - 1]++;
  }

  Dataset ds;
  ds.name = name;
  ds.graphs.resize(num_graphs);
  for (int g = 0; g < num_graphs; ++g) ds.graphs[g].num_nodes = graph_sizes[g];

  // Labels remapped to contiguous 0-based classes in sorted order.
  std::vector<long> raw_labels(num_graphs);
  std::set<long> label_values;
  for (int g = 0; g < num_graphs; ++g) {
    raw_labels[g] = detail::parse_int(label_lines[g], lab_path.filename().string(), g + 1);
    label_values.insert(raw_labels[g]);
  }
  std::map<long, int> label_remap;
  for (long v : label_values) label_remap.emplace(v, static_cast<int>(label_remap.size()));
  for (int g = 0; g < num_graphs; ++g) ds.graphs[g].label = label_remap[raw_labels[g]];
  ds.num_classes = static_cast<int>(label_remap.size());

  const auto edge_lines = detail::read_lines(a_path);
  const std::string a_name = a_path.filename().string();
  std::vector<std::set<Edge>> edge_sets(num_graphs);
  for (std::size_t i = 0; i < edge_lines.size(); ++i) {
    if (edge_lines[i].empty()) continue;
    const auto comma = edge_lines[i].find(',');
    if (comma == std::string::npos) {
      throw FormatError(a_name + ":" + std::to_string(i + 1) + ": expected 'i, j'");
    }
    const long a = detail::parse_int(edge_lines[i].substr(0, comma), a_name, i + 1);
    const long b = detail::parse_int(edge_lines[i].substr(comma + 1), a_name, i + 1);
    const auto total = static_cast<long>(indicator.size());
    if (a < 1 || a > total || b < 1 || b > total) {
      throw FormatError(a_name + ":" + std::to_string(i + 1) + ": node id out of range");
    }
    if (a == b) {
      throw FormatError(a_name + ":" + std::to_string(i + 1) + ": self-loop on node " +
                        std::to_string(a));
    }
    if (node_graph[a - 1] != node_graph[b - 1]) {
      throw FormatError(a_name + ":" + std::to_string(i + 1) + ": edge joins node " +
                        std::to_string(a) + " of graph " + std::to_string(node_graph[a - 1] + 1) +
                        " with node " + std::to_string(b) + " of graph " +
                        std::to_string(node_graph[b - 1] + 1));
    }
    edge_sets[node_graph[a - 1]].insert(make_edge(node_local[a - 1], node_local[b - 1]));
  }
  for (int g = 0; g < num_graphs; ++g) {
    ds.graphs[g].edges.assign(edge_sets[g].begin(), edge_sets[g].end());
  }

  // Node labels one-hot encoded; absent file means a single constant feature.
  if (std::filesystem::exists(node_lab_path)) {
    const auto node_lines = detail::read_lines(node_lab_path);
    if (node_lines.size() != indicator.size()) {
      throw FormatError(node_lab_path.filename().string() + ": expected " +
                        std::to_string(indicator.size()) + " lines, got " +
                        std::to_string(node_lines.size()));
    }
    std::vector<long> raw(node_lines.size());
    std::set<long> values;
    for (std::size_t i = 0; i < node_lines.size(); ++i) {
      raw[i] = detail::parse_int(node_lines[i], node_lab_path.filename().string(), i + 1);
      values.insert(raw[i]);
    }
    std::map<long, int> remap;
    for (long v : values) remap.emplace(v, static_cast<int>(remap.size()));
    ds.feature_dim = static_cast<int>(remap.size());
    for (int g = 0; g < num_graphs; ++g) {
      ds.graphs[g].feature_dim = ds.feature_dim;
      ds.graphs[g].node_features.assign(
          static_cast<std::size_t>(ds.graphs[g].num_nodes) * ds.feature_dim, 0.0);
    }
    for (std::size_t i = 0; i < raw.size(); ++i) {
      Graph& g = ds.graphs[node_graph[i]];
      g.node_features[static_cast<std::size_t>(node_local[i]) * ds.feature_dim + remap[raw[i]]] =
          1.0;
    }
  } else {
    ds.feature_dim = 1;
    for (Graph& g : ds.graphs) {
      g.feature_dim = 1;
      g.node_features.assign(g.num_nodes, 1.0);
    }
  }

  if (std::filesystem::exists(truth_path)) {
    std::ifstream in(truth_path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(truth_path.filename().string() + ": " + e.what());
    }
    for (auto it = j.begin(); it != j.end(); ++it) {
      const int gi = std::stoi(it.key());
      if (gi < 0 || gi >= num_graphs) {
        throw FormatError(truth_path.filename().string() + ": graph index " + it.key() +
                          " out of range");
      }
      std::vector<Edge> mask;
      for (const auto& pair : it.value()) {
        mask.push_back(make_edge(pair.at(0).get<int>(), pair.at(1).get<int>()));
      }
      ds.graphs[gi].truth_mask = std::move(mask);
    }
  }

  for (Graph& g : ds.graphs) {
    g.normalize_edges();
    g.validate();
  }
  return ds;
}

}  // namespace l2x
