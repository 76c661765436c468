#pragma once

#include <memory>
#include <string>
#include <vector>

#include "vle/rng.hpp"
#include "vle/tensor.hpp"

namespace vle::nn {

enum class Mode { Train, Eval };

/// A learnable tensor with its gradient and Adam moment slots.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;

  Parameter() = default;
  Parameter(std::string n, Tensor v);
};

/// A layer in a sequential stack. Shapes exclude the batch dimension.
/// `forward` runs in train mode and caches what `backward` needs; `infer`
/// is eval mode and leaves the layer untouched.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string kind() const = 0;
  virtual Shape output_shape(const Shape& input) const = 0;
  virtual Tensor forward(const Tensor& x, Rng& rng) = 0;
  virtual Tensor infer(const Tensor& x) const = 0;
  /// Gradient w.r.t. the input; parameter gradients are overwritten.
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual std::vector<Parameter*> parameters() { return {}; }
  virtual std::unique_ptr<Layer> clone() const = 0;
};

enum class Activation { None, Relu };

/// Kernel-3, stride-1, same-padded 1D convolution over B x L x Cin followed
/// by ReLU. Weights are stored [kernel][in][out].
class Conv1D final : public Layer {
 public:
  static constexpr std::size_t kKernel = 3;

  Conv1D(std::size_t in_channels, std::size_t filters);

  std::string kind() const override { return "conv1d"; }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& x, Rng& rng) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv1D>(*this); }

  std::size_t in_channels() const { return in_; }
  std::size_t filters() const { return out_; }
  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  Tensor compute(const Tensor& x, std::vector<double>* patches) const;

  std::size_t in_;
  std::size_t out_;
  Parameter weight_;
  Parameter bias_;
  Shape input_shape_;
  std::vector<double> patches_;  // im2col of the last training input
  Tensor output_;
};

/// Window-2, stride-2 max pooling over the length axis; an odd trailing
/// element is dropped. Ties route gradient to the first position.
class MaxPool1D final : public Layer {
 public:
  std::string kind() const override { return "maxpool1d"; }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& x, Rng& rng) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool1D>(*this); }

 private:
  Tensor compute(const Tensor& x, std::vector<std::size_t>* argmax) const;

  Shape input_shape_;
  std::vector<std::size_t> argmax_;
};

/// Per-channel batch normalization over every axis but the last, with
/// learnable scale/shift and running statistics for eval mode.
class BatchNorm final : public Layer {
 public:
  BatchNorm(std::size_t channels, double eps = 1e-5, double momentum = 0.9);

  std::string kind() const override { return "batchnorm"; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor forward(const Tensor& x, Rng& rng) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Parameter*> parameters() override { return {&gamma_, &beta_}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<BatchNorm>(*this); }

  std::size_t channels() const { return channels_; }
  double eps() const { return eps_; }
  double momentum() const { return momentum_; }
  Parameter& gamma() { return gamma_; }
  Parameter& beta() { return beta_; }
  std::vector<double>& running_mean() { return running_mean_; }
  std::vector<double>& running_var() { return running_var_; }
  const std::vector<double>& running_mean() const { return running_mean_; }
  const std::vector<double>& running_var() const { return running_var_; }
  bool has_batch_statistics() const { return updates_ > 0; }
  void set_updates(std::size_t n) { updates_ = n; }
  std::size_t updates() const { return updates_; }

 private:
  std::size_t channels_;
  double eps_;
  double momentum_;
  Parameter gamma_;
  Parameter beta_;
  std::vector<double> running_mean_;
  std::vector<double> running_var_;
  std::size_t updates_ = 0;
  Tensor normalized_;
  std::vector<double> inv_std_;
};

/// B x L x C -> B x (L*C); element (b, l, c) lands at l*C + c.
class Flatten final : public Layer {
 public:
  std::string kind() const override { return "flatten"; }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& x, Rng& rng) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Flatten>(*this); }

 private:
  Shape input_shape_;
};

/// Fully connected layer, weights stored [in][out].
class Dense final : public Layer {
 public:
  Dense(std::size_t inputs, std::size_t units, Activation activation);

  std::string kind() const override { return activation_ == Activation::Relu ? "dense_relu" : "dense"; }
  Shape output_shape(const Shape& input) const override;
  Tensor forward(const Tensor& x, Rng& rng) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }

  std::size_t inputs() const { return in_; }
  std::size_t units() const { return out_; }
  Activation activation() const { return activation_; }
  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  Tensor compute(const Tensor& x) const;

  std::size_t in_;
  std::size_t out_;
  Activation activation_;
  Parameter weight_;
  Parameter bias_;
  Tensor input_;
  Tensor output_;
};

/// Inverted dropout: in train mode each unit is zeroed with probability
/// `rate` and survivors are scaled by 1/(1-rate); eval mode is the identity.
class Dropout final : public Layer {
 public:
  explicit Dropout(double rate);

  std::string kind() const override { return "dropout"; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor forward(const Tensor& x, Rng& rng) override;
  Tensor infer(const Tensor& x) const override { return x; }
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dropout>(*this); }

  double rate() const { return rate_; }
  const std::vector<double>& mask() const { return mask_; }

 private:
  double rate_;
  std::vector<double> mask_;
};

/// Row-wise softmax over B x K, stabilized by subtracting the row max.
class Softmax final : public Layer {
 public:
  std::string kind() const override { return "softmax"; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor forward(const Tensor& x, Rng& rng) override;
  Tensor infer(const Tensor& x) const override;
  Tensor backward(const Tensor& grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Softmax>(*this); }

 private:
  Tensor output_;
};

Tensor softmax(const Tensor& logits);

}  // namespace vle::nn
