#include "vle/layers.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>

#include "vle/errors.hpp"

namespace vle::nn {

using kernels::matmul_accumulate;
using kernels::transpose;

Parameter::Parameter(std::string n, Tensor v)
    : name(std::move(n)),
      value(std::move(v)),
      grad(value.shape()),
      adam_m(value.shape()),
      adam_v(value.shape()) {}

// ---------------------------------------------------------------- Conv1D

Conv1D::Conv1D(std::size_t in_channels, std::size_t filters)
    : in_(in_channels),
      out_(filters),
      weight_("weight", Tensor({kKernel, in_channels, filters})),
      bias_("bias", Tensor({filters})) {}

Shape Conv1D::output_shape(const Shape& input) const {
  if (input.size() != 2 || input[1] != in_) {
    throw ShapeError("conv1d expects [L x " + std::to_string(in_) + "], got " + shape_string(input));
  }
  return {input[0], out_};
}

Tensor Conv1D::compute(const Tensor& x, std::vector<double>* patches) const {
  expect_shape(x, {0, 0, in_}, "conv1d input");
  const std::size_t batch = x.dim(0), length = x.dim(1);
  const std::size_t rows = batch * length, width = kKernel * in_;

  std::vector<double> local;
  std::vector<double>& cols = patches ? *patches : local;
  cols.assign(rows * width, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t l = 0; l < length; ++l) {
      double* dst = cols.data() + (b * length + l) * width;
      for (std::size_t j = 0; j < kKernel; ++j) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(l + j) - 1;
        if (src < 0 || src >= static_cast<std::ptrdiff_t>(length)) continue;
        const double* from = x.data() + (b * length + static_cast<std::size_t>(src)) * in_;
        std::copy(from, from + in_, dst + j * in_);
      }
    }
  }

  Tensor y({batch, length, out_});
  for (std::size_t r = 0; r < rows; ++r) std::copy(bias_.value.data(), bias_.value.data() + out_, y.data() + r * out_);
  matmul_accumulate(cols.data(), weight_.value.data(), y.data(), rows, width, out_);
  for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor Conv1D::forward(const Tensor& x, Rng&) {
  input_shape_ = x.shape();
  output_ = compute(x, &patches_);
  return output_;
}

Tensor Conv1D::infer(const Tensor& x) const { return compute(x, nullptr); }

Tensor Conv1D::backward(const Tensor& grad_out) {
  if (output_.empty()) throw StateError("conv1d backward before forward");
  expect_shape(grad_out, output_.shape(), "conv1d grad");
  const std::size_t batch = input_shape_[0], length = input_shape_[1];
  const std::size_t rows = batch * length, width = kKernel * in_;

  std::vector<double> g(grad_out.storage());
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (output_[i] <= 0.0) g[i] = 0.0;
  }

  bias_.grad.fill(0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t o = 0; o < out_; ++o) bias_.grad[o] += g[r * out_ + o];

  std::vector<double> cols_t(width * rows);
  transpose(patches_.data(), cols_t.data(), rows, width);
  weight_.grad.fill(0.0);
  matmul_accumulate(cols_t.data(), g.data(), weight_.grad.data(), width, rows, out_);

  std::vector<double> w_t(out_ * width);
  transpose(weight_.value.data(), w_t.data(), width, out_);
  std::vector<double> d_cols(rows * width, 0.0);
  matmul_accumulate(g.data(), w_t.data(), d_cols.data(), rows, out_, width);

  Tensor dx(input_shape_);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t l = 0; l < length; ++l) {
      const double* src = d_cols.data() + (b * length + l) * width;
      for (std::size_t j = 0; j < kKernel; ++j) {
        const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(l + j) - 1;
        if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(length)) continue;
        double* dst = dx.data() + (b * length + static_cast<std::size_t>(pos)) * in_;
        for (std::size_t c = 0; c < in_; ++c) dst[c] += src[j * in_ + c];
      }
    }
  }
  return dx;
}

// ------------------------------------------------------------- MaxPool1D

Shape MaxPool1D::output_shape(const Shape& input) const {
  if (input.size() != 2 || input[0] < 2) throw ShapeError("maxpool1d needs [L>=2 x C], got " + shape_string(input));
  return {input[0] / 2, input[1]};
}

Tensor MaxPool1D::compute(const Tensor& x, std::vector<std::size_t>* argmax) const {
  if (x.rank() != 3 || x.dim(1) < 2) throw ShapeError("maxpool1d needs [B x L>=2 x C], got " + shape_string(x.shape()));
  const std::size_t batch = x.dim(0), length = x.dim(1), channels = x.dim(2);
  const std::size_t half = length / 2;
  Tensor y({batch, half, channels});
  if (argmax) argmax->resize(y.size());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < half; ++i) {
      for (std::size_t c = 0; c < channels; ++c) {
        const std::size_t first = (b * length + 2 * i) * channels + c;
        const std::size_t second = first + channels;
        const std::size_t pick = x[second] > x[first] ? second : first;
        const std::size_t out = (b * half + i) * channels + c;
        y[out] = x[pick];
        if (argmax) (*argmax)[out] = pick;
      }
    }
  }
  return y;
}

Tensor MaxPool1D::forward(const Tensor& x, Rng&) {
  input_shape_ = x.shape();
  return compute(x, &argmax_);
}

Tensor MaxPool1D::infer(const Tensor& x) const { return compute(x, nullptr); }

Tensor MaxPool1D::backward(const Tensor& grad_out) {
  if (input_shape_.empty()) throw StateError("maxpool1d backward before forward");
  if (grad_out.size() != argmax_.size()) throw ShapeError("maxpool1d grad size mismatch");
  Tensor dx(input_shape_);
  for (std::size_t i = 0; i < argmax_.size(); ++i) dx[argmax_[i]] += grad_out[i];
  return dx;
}

// ------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(std::size_t channels, double eps, double momentum)
    : channels_(channels),
      eps_(eps),
      momentum_(momentum),
      gamma_("gamma", Tensor({channels}, 1.0)),
      beta_("beta", Tensor({channels}, 0.0)),
      running_mean_(channels, 0.0),
      running_var_(channels, 1.0) {}

Tensor BatchNorm::forward(const Tensor& x, Rng&) {
  if (x.shape().back() != channels_) throw ShapeError("batchnorm channel mismatch: " + shape_string(x.shape()));
  const std::size_t m = x.size() / channels_;
  if (m == 0) throw ShapeError("batchnorm on empty batch");
  std::vector<double> mean(channels_, 0.0), var(channels_, 0.0);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < channels_; ++c) mean[c] += x[r * channels_ + c];
  for (double& v : mean) v /= static_cast<double>(m);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < channels_; ++c) {
      const double d = x[r * channels_ + c] - mean[c];
      var[c] += d * d;
    }
  for (double& v : var) v /= static_cast<double>(m);

  inv_std_.resize(channels_);
  for (std::size_t c = 0; c < channels_; ++c) inv_std_[c] = 1.0 / std::sqrt(var[c] + eps_);
  normalized_ = Tensor(x.shape());
  Tensor y(x.shape());
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < channels_; ++c) {
      const std::size_t i = r * channels_ + c;
      normalized_[i] = (x[i] - mean[c]) * inv_std_[c];
      y[i] = gamma_.value[c] * normalized_[i] + beta_.value[c];
    }
  for (std::size_t c = 0; c < channels_; ++c) {
    running_mean_[c] = momentum_ * running_mean_[c] + (1.0 - momentum_) * mean[c];
    running_var_[c] = momentum_ * running_var_[c] + (1.0 - momentum_) * var[c];
  }
  ++updates_;
  return y;
}

Tensor BatchNorm::infer(const Tensor& x) const {
  if (x.shape().back() != channels_) throw ShapeError("batchnorm channel mismatch: " + shape_string(x.shape()));
  if (updates_ == 0) {
    static std::atomic<bool> warned{false};
    if (!warned.exchange(true)) {
      std::cerr << "warning: batchnorm evaluated before any training step; using initial running "
                   "statistics (mean 0, var 1)\n";
    }
  }
  Tensor y(x.shape());
  const std::size_t m = x.size() / channels_;
  for (std::size_t c = 0; c < channels_; ++c) {
    const double scale = gamma_.value[c] / std::sqrt(running_var_[c] + eps_);
    const double shift = beta_.value[c] - running_mean_[c] * scale;
    for (std::size_t r = 0; r < m; ++r) y[r * channels_ + c] = x[r * channels_ + c] * scale + shift;
  }
  return y;
}

Tensor BatchNorm::backward(const Tensor& grad_out) {
  if (normalized_.empty()) throw StateError("batchnorm backward before forward");
  expect_shape(grad_out, normalized_.shape(), "batchnorm grad");
  const std::size_t m = grad_out.size() / channels_;
  std::vector<double> sum_dxhat(channels_, 0.0), sum_dxhat_xhat(channels_, 0.0);
  gamma_.grad.fill(0.0);
  beta_.grad.fill(0.0);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < channels_; ++c) {
      const std::size_t i = r * channels_ + c;
      const double dy = grad_out[i];
      gamma_.grad[c] += dy * normalized_[i];
      beta_.grad[c] += dy;
      const double dxhat = dy * gamma_.value[c];
      sum_dxhat[c] += dxhat;
      sum_dxhat_xhat[c] += dxhat * normalized_[i];
    }
  Tensor dx(grad_out.shape());
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < channels_; ++c) {
      const std::size_t i = r * channels_ + c;
      const double dxhat = grad_out[i] * gamma_.value[c];
      dx[i] = inv_std_[c] * inv_m *
              (static_cast<double>(m) * dxhat - sum_dxhat[c] - normalized_[i] * sum_dxhat_xhat[c]);
    }
  return dx;
}

// --------------------------------------------------------------- Flatten

Shape Flatten::output_shape(const Shape& input) const { return {element_count(input)}; }

Tensor Flatten::forward(const Tensor& x, Rng&) {
  input_shape_ = x.shape();
  return infer(x);
}

Tensor Flatten::infer(const Tensor& x) const {
  if (x.rank() < 2) throw ShapeError("flatten needs a batch axis");
  return x.reshaped({x.dim(0), x.size() / x.dim(0)});
}

Tensor Flatten::backward(const Tensor& grad_out) {
  if (input_shape_.empty()) throw StateError("flatten backward before forward");
  return grad_out.reshaped(input_shape_);
}

// ----------------------------------------------------------------- Dense

Dense::Dense(std::size_t inputs, std::size_t units, Activation activation)
    : in_(inputs),
      out_(units),
      activation_(activation),
      weight_("weight", Tensor({inputs, units})),
      bias_("bias", Tensor({units})) {}

Shape Dense::output_shape(const Shape& input) const {
  if (input.size() != 1 || input[0] != in_) {
    throw ShapeError("dense expects [" + std::to_string(in_) + "], got " + shape_string(input));
  }
  return {out_};
}

Tensor Dense::compute(const Tensor& x) const {
  expect_shape(x, {0, in_}, "dense input");
  const std::size_t batch = x.dim(0);
  Tensor y({batch, out_});
  for (std::size_t r = 0; r < batch; ++r) std::copy(bias_.value.data(), bias_.value.data() + out_, y.data() + r * out_);
  matmul_accumulate(x.data(), weight_.value.data(), y.data(), batch, in_, out_);
  if (activation_ == Activation::Relu) {
    for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
  }
  return y;
}

Tensor Dense::forward(const Tensor& x, Rng&) {
  input_ = x;
  output_ = compute(x);
  return output_;
}

Tensor Dense::infer(const Tensor& x) const { return compute(x); }

Tensor Dense::backward(const Tensor& grad_out) {
  if (input_.empty()) throw StateError("dense backward before forward");
  expect_shape(grad_out, output_.shape(), "dense grad");
  const std::size_t batch = input_.dim(0);
  std::vector<double> g(grad_out.storage());
  if (activation_ == Activation::Relu) {
    for (std::size_t i = 0; i < g.size(); ++i)
      if (output_[i] <= 0.0) g[i] = 0.0;
  }
  bias_.grad.fill(0.0);
  for (std::size_t r = 0; r < batch; ++r)
    for (std::size_t o = 0; o < out_; ++o) bias_.grad[o] += g[r * out_ + o];

  std::vector<double> x_t(in_ * batch);
  transpose(input_.data(), x_t.data(), batch, in_);
  weight_.grad.fill(0.0);
  matmul_accumulate(x_t.data(), g.data(), weight_.grad.data(), in_, batch, out_);

  std::vector<double> w_t(out_ * in_);
  transpose(weight_.value.data(), w_t.data(), in_, out_);
  Tensor dx({batch, in_});
  matmul_accumulate(g.data(), w_t.data(), dx.data(), batch, out_, in_);
  return dx;
}

// --------------------------------------------------------------- Dropout

Dropout::Dropout(double rate) : rate_(rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must be in [0, 1)");
}

Tensor Dropout::forward(const Tensor& x, Rng& rng) {
  mask_.resize(x.size());
  const double keep_scale = 1.0 / (1.0 - rate_);
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask_[i] = rate_ > 0.0 && rng.uniform() < rate_ ? 0.0 : keep_scale;
    y[i] = x[i] * mask_[i];
  }
  return y;
}

Tensor Dropout::backward(const Tensor& grad_out) {
  if (mask_.size() != grad_out.size()) throw StateError("dropout backward without matching forward");
  Tensor dx(grad_out.shape());
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = grad_out[i] * mask_[i];
  return dx;
}

// --------------------------------------------------------------- Softmax

Tensor softmax(const Tensor& logits) {
  expect_shape(logits, {0, 0}, "softmax input");
  const std::size_t rows = logits.dim(0), k = logits.dim(1);
  Tensor p(logits.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* z = logits.data() + r * k;
    double* out = p.data() + r * k;
    const double top = *std::max_element(z, z + k);
    double sum = 0;
    for (std::size_t j = 0; j < k; ++j) {
      out[j] = std::exp(z[j] - top);
      sum += out[j];
    }
    for (std::size_t j = 0; j < k; ++j) out[j] /= sum;
  }
  return p;
}

Tensor Softmax::forward(const Tensor& x, Rng&) {
  output_ = softmax(x);
  return output_;
}

Tensor Softmax::infer(const Tensor& x) const { return softmax(x); }

Tensor Softmax::backward(const Tensor& grad_out) {
  if (output_.empty()) throw StateError("softmax backward before forward");
  expect_shape(grad_out, output_.shape(), "softmax grad");
  const std::size_t rows = output_.dim(0), k = output_.dim(1);
  Tensor dx(output_.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    double dot = 0;
    for (std::size_t j = 0; j < k; ++j) dot += grad_out.at(r, j) * output_.at(r, j);
    for (std::size_t j = 0; j < k; ++j) dx.at(r, j) = output_.at(r, j) * (grad_out.at(r, j) - dot);
  }
  return dx;
}

}  // namespace vle::nn
