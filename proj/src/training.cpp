#include "vle/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "vle/csv.hpp"
#include "vle/errors.hpp"

namespace vle::train {

LossResult weighted_sce_loss(const Tensor& probs, const std::vector<int>& labels, const ClassWeights& weights) {
  nn::expect_shape(probs, {labels.size(), 0}, "loss probabilities");
  const std::size_t k = probs.dim(1);
  double weight_sum = 0;
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= k) throw LabelError("label " + std::to_string(y) + " out of range");
    weight_sum += weights[y];
  }
  LossResult out{0.0, Tensor(probs.shape())};
  if (labels.empty()) return out;
  double total = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    const double w = weights[labels[i]];
    total -= w * std::log(std::max(probs.at(i, y), kLogClamp));
    for (std::size_t j = 0; j < k; ++j) {
      out.grad_logits.at(i, j) = w * (probs.at(i, j) - (j == y ? 1.0 : 0.0)) / weight_sum;
    }
  }
  out.loss = total / weight_sum;
  return out;
}

void Adam::step(const std::vector<nn::Parameter*>& params) {
  ++t_;
  const auto t = static_cast<double>(t_);
  const double correction1 = 1.0 - std::pow(hyper_.beta1, t);
  const double correction2 = 1.0 - std::pow(hyper_.beta2, t);
  for (nn::Parameter* p : params) {
    double* theta = p->value.data();
    const double* g = p->grad.data();
    double* m = p->adam_m.data();
    double* v = p->adam_v.data();
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      m[i] = hyper_.beta1 * m[i] + (1.0 - hyper_.beta1) * g[i];
      v[i] = hyper_.beta2 * v[i] + (1.0 - hyper_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      theta[i] -= hyper_.learning_rate * m_hat / (std::sqrt(v_hat) + hyper_.eps);
    }
  }
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(validation_split >= 0.0 && validation_split < 1.0)) throw ConfigError("validation_split must be in [0, 1)");
  if (!(adam.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("adam betas must be in [0, 1)");
  }
  if (!(adam.eps > 0.0)) throw ConfigError("adam eps must be positive");
  features::class_weights(class_weights.weight);
}

Tensor make_batch(const features::EncodedFrame& frame, std::span<const std::size_t> rows) {
  constexpr std::size_t f = features::kFeatureCount;
  Tensor batch({rows.size(), f, 1});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double* src = frame.values.data() + rows[i] * f;
    std::copy(src, src + f, batch.data() + i * f);
  }
  return batch;
}

std::vector<int> predict_classes(const Tensor& probs) {
  std::vector<int> out(probs.dim(0));
  const std::size_t k = probs.dim(1);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j)
      if (probs.at(i, j) > probs.at(i, best)) best = j;
    out[i] = static_cast<int>(best);
  }
  return out;
}

namespace {

struct Evaluated {
  double loss = 0;
  double accuracy = 0;
};

Evaluated evaluate_rows(const Network& net, const features::EncodedFrame& frame,
                        const std::vector<std::size_t>& rows, std::size_t batch_size) {
  Evaluated e;
  if (rows.empty()) return e;
  const ClassWeights uniform = features::class_weights(std::array{1.0, 1.0, 1.0, 1.0});
  double loss = 0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < rows.size(); start += batch_size) {
    const std::size_t end = std::min(rows.size(), start + batch_size);
    std::span<const std::size_t> chunk(rows.data() + start, end - start);
    const Tensor probs = net.predict(make_batch(frame, chunk));
    std::vector<int> labels(chunk.size());
    for (std::size_t i = 0; i < chunk.size(); ++i) labels[i] = frame.labels[chunk[i]];
    loss += weighted_sce_loss(probs, labels, uniform).loss * static_cast<double>(chunk.size());
    const auto pred = predict_classes(probs);
    for (std::size_t i = 0; i < chunk.size(); ++i) correct += pred[i] == labels[i] ? 1 : 0;
  }
  e.loss = loss / static_cast<double>(rows.size());
  e.accuracy = static_cast<double>(correct) / static_cast<double>(rows.size());
  return e;
}

}  // namespace

TrainingHistory train(Network& net, const features::EncodedFrame& frame, const TrainConfig& cfg,
                      const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (frame.rows() == 0) throw TrainError("training frame is empty");
  if (net.config().n_features != features::kFeatureCount) {
    throw TrainError("network input width " + std::to_string(net.config().n_features) + " != " +
                     std::to_string(features::kFeatureCount));
  }

  Rng rng(cfg.shuffle_seed);
  std::vector<std::size_t> order(frame.rows());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(std::span(order));
  const auto n_val = static_cast<std::size_t>(std::floor(cfg.validation_split * static_cast<double>(order.size())));
  std::vector<std::size_t> fit(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val));
  const std::vector<std::size_t> val(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());
  if (fit.empty()) throw TrainError("validation split leaves no training rows");

  Adam adam(cfg.adam);
  const auto params = net.parameters();
  TrainingHistory history;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    rng.shuffle(std::span(fit));
    double loss_sum = 0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < fit.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(fit.size(), start + cfg.batch_size);
      std::span<const std::size_t> chunk(fit.data() + start, end - start);
      std::vector<int> labels(chunk.size());
      for (std::size_t i = 0; i < chunk.size(); ++i) labels[i] = frame.labels[chunk[i]];

      const Tensor probs = net.forward(make_batch(frame, chunk), nn::Mode::Train);
      const LossResult loss = weighted_sce_loss(probs, labels, cfg.class_weights);
      net.backward(loss.grad_logits);
      adam.step(params);

      loss_sum += loss.loss * static_cast<double>(chunk.size());
      const auto pred = predict_classes(probs);
      for (std::size_t i = 0; i < chunk.size(); ++i) correct += pred[i] == labels[i] ? 1 : 0;
    }
    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(fit.size());
    record.train_accuracy = static_cast<double>(correct) / static_cast<double>(fit.size());
    const Evaluated v = evaluate_rows(net, frame, val, cfg.batch_size);
    record.val_loss = v.loss;
    record.val_accuracy = v.accuracy;
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    history.epochs.push_back(record);
    if (on_epoch) on_epoch(record);
  }
  return history;
}

void write_history_csv(const TrainingHistory& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
  char buf[160];
  for (const auto& e : history.epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.9f,%.9f,%.9f,%.9f\n", e.epoch, e.train_loss, e.train_accuracy,
                  e.val_loss, e.val_accuracy);
    out << buf;
  }
  if (!out) throw IoError("write failed: " + path.string());
}

TrainingHistory read_history_csv(const std::filesystem::path& path) {
  const csv::Table table = csv::read_file(path);
  TrainingHistory h;
  for (const auto& rec : table.rows) {
    if (rec.fields.size() != 5) throw IngestError("Parse", path.string() + ":" + std::to_string(rec.line) + ": expected 5 fields");
    EpochRecord e;
    e.epoch = std::stoul(rec.fields[0]);
    e.train_loss = std::stod(rec.fields[1]);
    e.train_accuracy = std::stod(rec.fields[2]);
    e.val_loss = std::stod(rec.fields[3]);
    e.val_accuracy = std::stod(rec.fields[4]);
    h.epochs.push_back(e);
  }
  return h;
}

}  // namespace vle::train
