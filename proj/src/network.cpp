#include "vle/network.hpp"

#include <cmath>

#include "vle/errors.hpp"

namespace vle::nn {
namespace {

void init_uniform(Tensor& t, double limit, Rng& rng) {
  for (double& v : t.values()) v = rng.uniform(-limit, limit);
}

std::vector<Shape> propagate(const std::vector<std::unique_ptr<Layer>>& layers, Shape shape) {
  std::vector<Shape> shapes;
  for (const auto& layer : layers) {
    shape = layer->output_shape(shape);
    shapes.push_back(shape);
  }
  return shapes;
}

}  // namespace

Architecture parse_architecture(const std::string& name) {
  if (name == "paper_cnn") return Architecture::PaperCnn;
  if (name == "mlp_baseline") return Architecture::MlpBaseline;
  throw ConfigError("unknown architecture '" + name + "' (paper_cnn|mlp_baseline)");
}

std::string to_string(Architecture arch) {
  return arch == Architecture::PaperCnn ? "paper_cnn" : "mlp_baseline";
}

void ModelConfig::validate() const {
  if (n_features < 2) throw ConfigError("n_features must be at least 2");
  if (n_classes < 2) throw ConfigError("n_classes must be at least 2");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must be in [0, 1)");
  if (!(batchnorm_eps > 0.0)) throw ConfigError("batchnorm eps must be positive");
  if (!(batchnorm_momentum >= 0.0 && batchnorm_momentum < 1.0)) throw ConfigError("batchnorm momentum must be in [0, 1)");
}

Network::Network(ModelConfig config, std::vector<std::unique_ptr<Layer>> layers)
    : config_(config), layers_(std::move(layers)), dropout_rng_(mix_seed(config.init_seed, 1)) {
  propagate(layers_, input_shape());
}

Network::Network(const Network& other)
    : config_(other.config_), dropout_rng_(other.dropout_rng_), train_forward_ready_(other.train_forward_ready_) {
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Network& Network::operator=(const Network& other) {
  if (this != &other) *this = Network(other);
  return *this;
}

Tensor Network::forward(const Tensor& batch, Mode mode) {
  if (mode == Mode::Eval) return predict(batch);
  expect_shape(batch, {0, config_.n_features, 1}, "network input");
  Tensor x = batch;
  for (auto& layer : layers_) x = layer->forward(x, dropout_rng_);
  train_forward_ready_ = true;
  return x;
}

Tensor Network::predict(const Tensor& batch) const {
  expect_shape(batch, {0, config_.n_features, 1}, "network input");
  Tensor x = batch;
  for (const auto& layer : layers_) x = layer->infer(x);
  return x;
}

void Network::backward(const Tensor& grad_logits) {
  if (!train_forward_ready_) throw StateError("backward requires a preceding train-mode forward");
  std::size_t last = layers_.size();
  if (last > 0 && layers_.back()->kind() == "softmax") --last;
  Tensor g = grad_logits;
  for (std::size_t i = last; i-- > 0;) g = layers_[i]->backward(g);
  train_forward_ready_ = false;
}

std::vector<Parameter*> Network::parameters() {
  std::vector<Parameter*> params;
  for (auto& layer : layers_) {
    for (Parameter* p : layer->parameters()) params.push_back(p);
  }
  return params;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) {
    for (Parameter* p : layer->parameters()) n += p->value.size();
  }
  return n;
}

std::vector<Shape> Network::layer_shapes() const { return propagate(layers_, input_shape()); }

Network build_network(const ModelConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.init_seed);
  std::vector<std::unique_ptr<Layer>> layers;

  auto conv = [&](std::size_t in, std::size_t filters) {
    auto layer = std::make_unique<Conv1D>(in, filters);
    init_uniform(layer->weight().value, std::sqrt(6.0 / static_cast<double>(Conv1D::kKernel * in)), rng);
    layers.push_back(std::move(layer));
  };
  auto dense = [&](std::size_t in, std::size_t units, Activation act) {
    auto layer = std::make_unique<Dense>(in, units, act);
    const double limit = act == Activation::Relu ? std::sqrt(6.0 / static_cast<double>(in))
                                                 : std::sqrt(6.0 / static_cast<double>(in + units));
    init_uniform(layer->weight().value, limit, rng);
    layers.push_back(std::move(layer));
  };

  std::size_t flat = cfg.n_features;
  if (cfg.architecture == Architecture::PaperCnn) {
    conv(1, 16);
    layers.push_back(std::make_unique<MaxPool1D>());
    conv(16, 32);
    conv(32, 64);
    conv(64, 128);
    layers.push_back(std::make_unique<MaxPool1D>());
    conv(128, 32);
    conv(32, 16);
    layers.push_back(std::make_unique<BatchNorm>(16, cfg.batchnorm_eps, cfg.batchnorm_momentum));
    layers.push_back(std::make_unique<Flatten>());
    flat = (cfg.n_features / 2 / 2) * 16;
    dense(flat, 128, Activation::Relu);
    dense(128, 64, Activation::Relu);
    dense(64, 32, Activation::Relu);
    dense(32, 16, Activation::Relu);
    layers.push_back(std::make_unique<Dropout>(cfg.dropout_rate));
    dense(16, cfg.n_classes, Activation::None);
  } else {
    layers.push_back(std::make_unique<Flatten>());
    dense(flat, 128, Activation::Relu);
    dense(128, 64, Activation::Relu);
    dense(64, 32, Activation::Relu);
    layers.push_back(std::make_unique<Dropout>(cfg.dropout_rate));
    dense(32, cfg.n_classes, Activation::None);
  }
  layers.push_back(std::make_unique<Softmax>());
  return Network(cfg, std::move(layers));
}

}  // namespace vle::nn
