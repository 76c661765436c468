#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "vle/layers.hpp"
#include "vle/network.hpp"
#include "vle/rng.hpp"
#include "vle/training.hpp"

namespace vle::testing {

using nn::Tensor;

inline constexpr double kStep = 1e-5;
inline constexpr double kKinkMargin = 1e-4;

/// |a - n| / max(|a|, |n|, 1e-6).
inline double rel_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

inline Tensor random_tensor(const nn::Shape& shape, Rng& rng, double scale = 1.0) {
  Tensor t(shape);
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

inline double dot(const Tensor& a, const Tensor& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Central difference of f with respect to every element of `target`.
inline std::vector<double> numeric_gradient(Tensor& target, const std::function<double()>& f, double h = kStep) {
  std::vector<double> g(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double saved = target[i];
    target[i] = saved + h;
    const double up = f();
    target[i] = saved - h;
    const double down = f();
    target[i] = saved;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

inline double max_rel(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double worst = 0;
  for (std::size_t i = 0; i < analytic.size(); ++i) worst = std::max(worst, rel_error(analytic[i], numeric[i]));
  return worst;
}

/// Checks input and parameter gradients of a layer under the objective
/// sum(forward(x) * proj). The generator is restored before every forward,
/// so stochastic layers see one fixed mask.
inline double check_layer(nn::Layer& layer, Tensor x, const Tensor& proj, const Rng& rng) {
  auto objective = [&]() {
    Rng r = rng;
    return dot(layer.forward(x, r), proj);
  };
  Rng r = rng;
  layer.forward(x, r);
  const Tensor grad_in = layer.backward(proj);
  std::vector<std::vector<double>> param_grads;
  for (nn::Parameter* p : layer.parameters()) param_grads.emplace_back(p->grad.storage());

  double worst = max_rel(grad_in.storage(), numeric_gradient(x, objective));
  const auto params = layer.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    worst = std::max(worst, max_rel(param_grads[i], numeric_gradient(params[i]->value, objective)));
  }
  return worst;
}

/// Reference same-padded kernel-3 convolution before the activation.
inline Tensor conv_preactivation(nn::Conv1D& conv, const Tensor& x) {
  const std::size_t b = x.dim(0), len = x.dim(1), cin = x.dim(2), cout = conv.filters();
  Tensor z({b, len, cout});
  const Tensor& w = conv.weight().value;
  for (std::size_t s = 0; s < b; ++s)
    for (std::size_t l = 0; l < len; ++l)
      for (std::size_t o = 0; o < cout; ++o) {
        double acc = conv.bias().value[o];
        for (std::size_t k = 0; k < 3; ++k) {
          const long src = static_cast<long>(l) + static_cast<long>(k) - 1;
          if (src < 0 || src >= static_cast<long>(len)) continue;
          for (std::size_t i = 0; i < cin; ++i) acc += x.at(s, static_cast<std::size_t>(src), i) * w[(k * cin + i) * cout + o];
        }
        z.at(s, l, o) = acc;
      }
  return z;
}

inline Tensor dense_preactivation(nn::Dense& dense, const Tensor& x) {
  Tensor z({x.dim(0), dense.units()});
  for (std::size_t s = 0; s < x.dim(0); ++s)
    for (std::size_t o = 0; o < dense.units(); ++o) {
      double acc = dense.bias().value[o];
      for (std::size_t i = 0; i < dense.inputs(); ++i) acc += x.at(s, i) * dense.weight().value.at(i, o);
      z.at(s, o) = acc;
    }
  return z;
}

inline bool clear_of_kinks(const Tensor& z) {
  return std::all_of(z.values().begin(), z.values().end(), [](double v) { return std::abs(v) > kKinkMargin; });
}

/// Pairs that are both exactly zero (two clamped ReLU outputs) stay tied
/// under small perturbations and are skipped when `allow_dead` is set.
inline bool pool_clear_of_ties(const Tensor& x, bool allow_dead = false) {
  for (std::size_t s = 0; s < x.dim(0); ++s)
    for (std::size_t l = 0; l + 1 < x.dim(1); l += 2)
      for (std::size_t c = 0; c < x.dim(2); ++c) {
        const double a = x.at(s, l, c), b = x.at(s, l + 1, c);
        if (allow_dead && a == 0.0 && b == 0.0) continue;
        if (std::abs(a - b) <= kKinkMargin) return false;
      }
  return true;
}

/// True when no ReLU pre-activation or pooling pair of a train-mode pass
/// (on a copy, with the network's current dropout state) lies within the
/// kink margin.
inline bool network_clear_of_kinks(const nn::Network& net, const Tensor& batch) {
  nn::Network copy = net;
  Rng rng = copy.dropout_rng();
  Tensor x = batch;
  for (auto& layer : copy.layers()) {
    if (auto* conv = dynamic_cast<nn::Conv1D*>(layer.get())) {
      if (!clear_of_kinks(conv_preactivation(*conv, x))) return false;
    } else if (auto* dense = dynamic_cast<nn::Dense*>(layer.get())) {
      if (dense->kind() == "dense_relu" && !clear_of_kinks(dense_preactivation(*dense, x))) return false;
    } else if (dynamic_cast<nn::MaxPool1D*>(layer.get())) {
      if (!pool_clear_of_ties(x, true)) return false;
    }
    x = layer->forward(x, rng);
  }
  return true;
}

inline void randomize(nn::Layer& layer, Rng& rng, double scale = 0.5) {
  for (nn::Parameter* p : layer.parameters()) {
    for (double& v : p->value.values()) v = scale * rng.normal();
  }
}

/// Largest relative error of softmax + weighted loss with respect to the logits.
inline double check_softmax_loss(const Tensor& logits_in, const std::vector<int>& labels,
                                 const features::ClassWeights& w) {
  Tensor logits = logits_in;
  auto objective = [&]() { return train::weighted_sce_loss(nn::softmax(logits), labels, w).loss; };
  const auto analytic = train::weighted_sce_loss(nn::softmax(logits), labels, w).grad_logits;
  return max_rel(analytic.storage(), numeric_gradient(logits, objective));
}

/// End-to-end check of the loss gradient w.r.t. up to `per_tensor` randomly
/// chosen coordinates of every parameter tensor, with dropout masks pinned.
inline double check_network(nn::Network& net, const Tensor& batch, const std::vector<int>& labels,
                            const features::ClassWeights& w, std::size_t per_tensor, Rng& pick) {
  const Rng pinned = net.dropout_rng();
  auto loss_of = [&]() {
    net.dropout_rng() = pinned;
    return train::weighted_sce_loss(net.forward(batch, nn::Mode::Train), labels, w).loss;
  };
  net.dropout_rng() = pinned;
  const auto result = train::weighted_sce_loss(net.forward(batch, nn::Mode::Train), labels, w);
  net.backward(result.grad_logits);
  const auto params = net.parameters();
  std::vector<std::vector<double>> grads;
  for (auto* p : params) grads.emplace_back(p->grad.storage());
  double worst = 0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    Tensor& value = params[t]->value;
    const std::size_t n = std::min(per_tensor, value.size());
    for (std::size_t s = 0; s < n; ++s) {
      const std::size_t i = n == value.size() ? s : pick.below(value.size());
      const double saved = value[i];
      value[i] = saved + kStep;
      const double up = loss_of();
      value[i] = saved - kStep;
      const double down = loss_of();
      value[i] = saved;
      worst = std::max(worst, rel_error(grads[t][i], (up - down) / (2 * kStep)));
    }
  }
  net.dropout_rng() = pinned;
  return worst;
}

}  // namespace vle::testing
