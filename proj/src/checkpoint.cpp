#include <fstream>
#include <sstream>

#include "json.hpp"
#include "vle/errors.hpp"
#include "vle/training.hpp"

namespace vle::train {
namespace {

using nlohmann::json;
constexpr const char* kFormat = "vle-forecast-checkpoint/1";

json config_json(const nn::ModelConfig& c) {
  return {{"architecture", nn::to_string(c.architecture)},
          {"n_features", c.n_features},
          {"n_classes", c.n_classes},
          {"dropout_rate", c.dropout_rate},
          {"batchnorm_eps", c.batchnorm_eps},
          {"batchnorm_momentum", c.batchnorm_momentum},
          {"init_seed", c.init_seed}};
}

nn::ModelConfig parse_config(const json& j) {
  nn::ModelConfig c;
  c.architecture = nn::parse_architecture(j.at("architecture").get<std::string>());
  c.n_features = j.at("n_features").get<std::size_t>();
  c.n_classes = j.at("n_classes").get<std::size_t>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.batchnorm_eps = j.at("batchnorm_eps").get<double>();
  c.batchnorm_momentum = j.at("batchnorm_momentum").get<double>();
  c.init_seed = j.at("init_seed").get<std::uint64_t>();
  return c;
}

}  // namespace

void save_checkpoint(const Network& net, const features::Sidecar& sidecar, const std::string& sidecar_ref,
                     const std::filesystem::path& path) {
  json layers = json::array();
  Network& mutable_net = const_cast<Network&>(net);
  for (auto& layer : mutable_net.layers()) {
    json entry = {{"kind", layer->kind()}};
    json params = json::array();
    for (nn::Parameter* p : layer->parameters()) {
      params.push_back({{"name", p->name}, {"shape", p->value.shape()}, {"values", p->value.storage()}});
    }
    entry["params"] = std::move(params);
    if (auto* bn = dynamic_cast<nn::BatchNorm*>(layer.get())) {
      entry["running_mean"] = bn->running_mean();
      entry["running_var"] = bn->running_var();
      entry["updates"] = bn->updates();
    }
    layers.push_back(std::move(entry));
  }
  const json doc = {{"format", kFormat},
                    {"config", config_json(net.config())},
                    {"layers", std::move(layers)},
                    {"sidecar_ref", sidecar_ref},
                    {"sidecar", json::parse(features::sidecar_json(sidecar))}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump() << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, std::optional<nn::Architecture> expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("Missing", "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();

  json doc;
  try {
    doc = json::parse(buf.str());
  } catch (const json::exception& e) {
    throw CheckpointError("Corrupt", path.string() + ": " + e.what());
  }

  try {
    if (doc.at("format").get<std::string>() != kFormat) {
      throw CheckpointError("Corrupt", path.string() + ": unknown format");
    }
    const nn::ModelConfig cfg = parse_config(doc.at("config"));
    if (expected && *expected != cfg.architecture) {
      throw CheckpointError("ArchitectureMismatch", "checkpoint holds " + nn::to_string(cfg.architecture) +
                                                        ", expected " + nn::to_string(*expected));
    }
    Network net = nn::build_network(cfg);
    const json& layers = doc.at("layers");
    if (layers.size() != net.layers().size()) {
      throw CheckpointError("ShapeMismatch", "layer count " + std::to_string(layers.size()) + " != " +
                                                 std::to_string(net.layers().size()));
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
      auto& layer = net.layers()[i];
      const json& entry = layers[i];
      if (entry.at("kind").get<std::string>() != layer->kind()) {
        throw CheckpointError("ShapeMismatch", "layer " + std::to_string(i) + " is " +
                                                   entry.at("kind").get<std::string>() + ", expected " + layer->kind());
      }
      const auto params = layer->parameters();
      const json& stored = entry.at("params");
      if (stored.size() != params.size()) throw CheckpointError("ShapeMismatch", "parameter count in layer " + std::to_string(i));
      for (std::size_t p = 0; p < params.size(); ++p) {
        const auto shape = stored[p].at("shape").get<nn::Shape>();
        auto values = stored[p].at("values").get<std::vector<double>>();
        if (shape != params[p]->value.shape() || values.size() != params[p]->value.size()) {
          throw CheckpointError("ShapeMismatch", "layer " + std::to_string(i) + " parameter " + params[p]->name +
                                                     " has shape " + nn::shape_string(shape) + ", expected " +
                                                     nn::shape_string(params[p]->value.shape()));
        }
        params[p]->value = nn::Tensor(shape, std::move(values));
      }
      if (auto* bn = dynamic_cast<nn::BatchNorm*>(layer.get())) {
        auto mean = entry.at("running_mean").get<std::vector<double>>();
        auto var = entry.at("running_var").get<std::vector<double>>();
        if (mean.size() != bn->channels() || var.size() != bn->channels()) {
          throw CheckpointError("ShapeMismatch", "batchnorm running statistics");
        }
        bn->running_mean() = std::move(mean);
        bn->running_var() = std::move(var);
        bn->set_updates(entry.at("updates").get<std::size_t>());
      }
    }
    features::Sidecar sidecar = features::parse_sidecar(doc.at("sidecar").dump());
    return LoadedCheckpoint{std::move(net), std::move(sidecar), doc.value("sidecar_ref", std::string())};
  } catch (const json::exception& e) {
    throw CheckpointError("Corrupt", path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError("Corrupt", path.string() + ": " + e.what());
  }
}

}  // namespace vle::train
