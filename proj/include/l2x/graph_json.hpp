#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "l2x/error.hpp"
#include "l2x/graph.hpp"
#include "l2x/tu_parser.hpp"

namespace l2x {

namespace detail {

inline nlohmann::json graph_to_json(const Graph& g) {
  nlohmann::json j;
  j["num_nodes"] = g.num_nodes;
  auto edges = nlohmann::json::array();
  for (const Edge& e : g.edges) edges.push_back({e.first, e.second});
  j["edges"] = std::move(edges);
  auto features = nlohmann::json::array();
  for (int v = 0; v < g.num_nodes; ++v) {
    auto row = nlohmann::json::array();
    for (int k = 0; k < g.feature_dim; ++k) row.push_back(g.feature(v, k));
    features.push_back(std::move(row));
  }
  j["features"] = std::move(features);
  j["label"] = g.label;
  if (g.truth_mask) {
    auto mask = nlohmann::json::array();
    for (const Edge& e : *g.truth_mask) mask.push_back({e.first, e.second});
    j["truth_mask"] = std::move(mask);
  }
  return j;
}

inline Graph graph_from_json(const nlohmann::json& j) {
  Graph g;
  try {
    g.num_nodes = j.at("num_nodes").get<int>();
    for (const auto& pair : j.at("edges")) {
      g.edges.push_back(make_edge(pair.at(0).get<int>(), pair.at(1).get<int>()));
    }
    const auto& features = j.at("features");
    g.feature_dim = features.empty() ? 0 : static_cast<int>(features.at(0).size());
    for (const auto& row : features) {
      if (static_cast<int>(row.size()) != g.feature_dim) {
        throw FormatError("ragged feature rows");
      }
      for (const auto& v : row) g.node_features.push_back(v.get<double>());
    }
    g.label = j.at("label").get<int>();
    if (j.contains("truth_mask")) {
      std::vector<Edge> mask;
      for (const auto& pair : j.at("truth_mask")) {
        mask.push_back(make_edge(pair.at(0).get<int>(), pair.at(1).get<int>()));
      }
      g.truth_mask = std::move(mask);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed graph JSON: ") + e.what());
  }
  g.normalize_edges();
  g.validate();
  return g;
}

}  // namespace detail

inline std::string serialize_graph_json(const Graph& g) { return detail::graph_to_json(g).dump(); }

inline Graph parse_graph_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed graph JSON: ") + e.what());
  }
  return detail::graph_from_json(j);
}

inline nlohmann::json dataset_to_json(const Dataset& ds) {
  nlohmann::json j;
  j["name"] = ds.name;
  j["num_classes"] = ds.num_classes;
  j["feature_dim"] = ds.feature_dim;
  if (!ds.splits.empty()) {
    j["splits"] = {{"train", ds.splits.train}, {"val", ds.splits.val}, {"test", ds.splits.test}};
  }
  auto graphs = nlohmann::json::array();
  for (const Graph& g : ds.graphs) graphs.push_back(detail::graph_to_json(g));
  j["graphs"] = std::move(graphs);
  return j;
}

inline Dataset dataset_from_json(const nlohmann::json& j) {
  Dataset ds;
  try {
    ds.name = j.at("name").get<std::string>();
    ds.num_classes = j.at("num_classes").get<int>();
    ds.feature_dim = j.at("feature_dim").get<int>();
    if (j.contains("splits")) {
      ds.splits.train = j["splits"].at("train").get<std::vector<int>>();
      ds.splits.val = j["splits"].at("val").get<std::vector<int>>();
      ds.splits.test = j["splits"].at("test").get<std::vector<int>>();
    }
    for (const auto& gj : j.at("graphs")) ds.graphs.push_back(detail::graph_from_json(gj));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed dataset JSON: ") + e.what());
  }
  ds.validate();
  return ds;
}

inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "dataset.json");
  if (!out) throw InputError("cannot write " + (dir / "dataset.json").string());
  out << dataset_to_json(ds).dump(1) << "\n";
}

// Accepts a dataset.json file, a directory containing one, or a TU-format
// directory (detected by `<basename>_A.txt`).
inline Dataset load_dataset(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  fs::path file = path;
  if (fs::is_directory(path)) {
    if (fs::exists(path / "dataset.json")) {
      file = path / "dataset.json";
    } else {
      const std::string name = path.filename().string();
      if (fs::exists(path / (name + "_A.txt"))) {
        return parse_tu_dataset(path, name);
      }
      throw InputError("no dataset.json or TU files under " + path.string());
    }
  }
  if (!fs::exists(file)) throw InputError("cannot open dataset " + file.string());
  std::ifstream in(file);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(file.string() + ": " + e.what());
  }
  return dataset_from_json(j);
}

}  // namespace l2x
