#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "vle/layers.hpp"

namespace vle::nn {

enum class Architecture { PaperCnn, MlpBaseline };

Architecture parse_architecture(const std::string& name);
std::string to_string(Architecture arch);

struct ModelConfig {
  Architecture architecture = Architecture::PaperCnn;
  std::size_t n_features = 15;
  std::size_t n_classes = 4;
  double dropout_rate = 0.3;
  double batchnorm_eps = 1e-5;
  double batchnorm_momentum = 0.9;
  std::uint64_t init_seed = 0;

  void validate() const;
};

/// Sequential stack ending in Softmax. Copyable (layers are cloned).
/// forward/backward/update must be externally serialized; `predict` is const
/// and safe to call concurrently.
class Network {
 public:
  Network(ModelConfig config, std::vector<std::unique_ptr<Layer>> layers);
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  const ModelConfig& config() const { return config_; }

  /// Input shape per sample: [n_features x 1].
  Shape input_shape() const { return {config_.n_features, 1}; }

  /// Class probabilities for a B x n_features x 1 batch. Train mode caches
  /// activations and draws dropout masks from the network's generator.
  Tensor forward(const Tensor& batch, Mode mode);

  /// Eval-mode probabilities; no state is touched.
  Tensor predict(const Tensor& batch) const;

  /// Back-propagates the gradient w.r.t. the pre-softmax logits, filling
  /// every parameter's gradient slot. Throws StateError unless the last
  /// forward ran in train mode.
  void backward(const Tensor& grad_logits);

  std::vector<Parameter*> parameters();
  std::size_t parameter_count() const;

  std::vector<std::unique_ptr<Layer>>& layers() { return layers_; }
  const std::vector<std::unique_ptr<Layer>>& layers() const { return layers_; }

  /// Per-sample output shape of every layer, in order.
  std::vector<Shape> layer_shapes() const;

  Rng& dropout_rng() { return dropout_rng_; }

 private:
  ModelConfig config_;
  std::vector<std::unique_ptr<Layer>> layers_;
  Rng dropout_rng_;
  bool train_forward_ready_ = false;
};

/// paper_cnn: Conv16 Pool Conv32 Conv64 Conv128 Pool Conv32 Conv16 BatchNorm
/// Flatten Dense128 Dense64 Dense32 Dense16 Dropout Dense4 Softmax.
/// mlp_baseline: Flatten Dense128 Dense64 Dense32 Dropout Dense4 Softmax.
/// ReLU layers are He-uniform initialized, the output layer Glorot-uniform,
/// biases zero, all drawn from a generator seeded with cfg.init_seed.
Network build_network(const ModelConfig& cfg);

}  // namespace vle::nn
