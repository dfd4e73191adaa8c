#pragma once

// Versioned JSON checkpoint of every parameter tensor. Values round-trip
// exactly (shortest-representation doubles), so reloading a checkpoint
// reproduces the model bit-for-bit.

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "l2x/error.hpp"
#include "l2x/gnn.hpp"

namespace l2x {

constexpr int kCheckpointVersion = 1;

inline nlohmann::json checkpoint_to_json(const ModelParams& params,
                                         const nlohmann::json& extra = nlohmann::json::object()) {
  nlohmann::json j;
  j["format_version"] = kCheckpointVersion;
  j["arch"] = {{"feature_dim", params.feature_dim},
               {"hidden_dim", params.hidden_dim},
               {"num_layers", params.num_layers()},
               {"num_classes", params.num_classes},
               {"score_layer_index", params.score_layer_index}};
  if (!extra.empty()) j["extra"] = extra;
  nlohmann::json tensors = nlohmann::json::object();
  for (const auto& [name, t] : params.named_tensors()) {
    tensors[name] = {{"shape", t.shape()}, {"data", t.data()}};
  }
  j["tensors"] = std::move(tensors);
  return j;
}

inline void save_checkpoint(const ModelParams& params, const std::filesystem::path& path,
                            const nlohmann::json& extra = nlohmann::json::object()) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(params, extra).dump(1) << "\n";
}

struct Checkpoint {
  ModelParams params;
  nlohmann::json extra;
};

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != kCheckpointVersion) {
      throw FormatError("unsupported checkpoint version " +
                        std::to_string(j["format_version"].get<int>()));
    }
    const auto& arch = j.at("arch");
    ModelParams params = ModelParams::init(
        arch.at("feature_dim").get<int>(), arch.at("hidden_dim").get<int>(),
        arch.at("num_layers").get<int>(), arch.at("num_classes").get<int>(), 0);
    params.score_layer_index = arch.at("score_layer_index").get<int>();
    const auto& tensors = j.at("tensors");
    for (auto& [name, t] : params.named_tensors()) {
      if (!tensors.contains(name)) {
        throw FormatError("checkpoint is missing tensor " + name);
      }
      const auto shape = tensors[name].at("shape").get<std::vector<std::size_t>>();
      if (shape != t.shape()) {
        throw InputError("checkpoint tensor " + name + " has shape " + detail::shape_str(shape) +
                         ", model expects " + detail::shape_str(t.shape()));
      }
      auto data = tensors[name].at("data").get<std::vector<double>>();
      if (data.size() != t.numel()) {
        throw FormatError("checkpoint tensor " + name + " has wrong element count");
      }
      const_cast<Tensor&>(t).data() = std::move(data);
    }
    Checkpoint c{std::move(params), nlohmann::json::object()};
    if (j.contains("extra")) c.extra = j["extra"];
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  }
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace l2x
