#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vle/features.hpp"
#include "vle/network.hpp"

namespace vle::train {

using features::ClassWeights;
using nn::Network;
using nn::Tensor;

inline constexpr double kLogClamp = 1e-12;

struct LossResult {
  double loss = 0;
  Tensor grad_logits;  // B x K
};

/// Class-weighted sparse categorical cross-entropy:
/// -(1 / sum_i w_{y_i}) * sum_i w_{y_i} * log max(p_i[y_i], 1e-12).
/// The gradient w.r.t. the logits is w_{y_i} (p_i - onehot(y_i)) / sum w.
/// Throws LabelError for labels outside [0, K).
LossResult weighted_sce_loss(const Tensor& probs, const std::vector<int>& labels,
                             const ClassWeights& weights);

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over a parameter set; moments live in each
/// Parameter's adam_m/adam_v slots, the step counter here.
class Adam {
 public:
  explicit Adam(AdamHyper hyper = {}) : hyper_(hyper) {}

  void step(const std::vector<nn::Parameter*>& params);
  std::uint64_t steps() const { return t_; }
  const AdamHyper& hyper() const { return hyper_; }

 private:
  AdamHyper hyper_;
  std::uint64_t t_ = 0;
};

struct TrainConfig {
  std::size_t epochs = 70;
  std::size_t batch_size = 1024;
  double validation_split = 0.10;
  AdamHyper adam;
  std::uint64_t shuffle_seed = 0;
  ClassWeights class_weights;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0;
  double train_accuracy = 0;
  double val_loss = 0;
  double val_accuracy = 0;
  double seconds = 0;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
};

/// Packs frame rows into a B x 15 x 1 batch.
Tensor make_batch(const features::EncodedFrame& frame, std::span<const std::size_t> rows);

/// argmax per row, ties to the lowest index.
std::vector<int> predict_classes(const Tensor& probs);

/// Trains on `frame` (the training split). The last validation_split share
/// of one seeded shuffle is held out for per-epoch validation; each epoch
/// reshuffles the rest and runs mini-batches (final partial batch kept)
/// through forward, weighted loss, backward, and an Adam step.
/// `on_epoch`, when set, is called after each epoch.
TrainingHistory train(Network& net, const features::EncodedFrame& frame, const TrainConfig& cfg,
                      const std::function<void(const EpochRecord&)>& on_epoch = {});

void write_history_csv(const TrainingHistory& history, const std::filesystem::path& path);
TrainingHistory read_history_csv(const std::filesystem::path& path);

/// Single JSON document with config, layer shapes, flat row-major
/// parameters, batch-norm running statistics, and the preprocessing sidecar.
void save_checkpoint(const Network& net, const features::Sidecar& sidecar, const std::string& sidecar_ref,
                     const std::filesystem::path& path);

struct LoadedCheckpoint {
  Network net;
  features::Sidecar sidecar;
  std::string sidecar_ref;
};

/// Throws CheckpointError on unreadable/corrupt files, on layer or shape
/// mismatches, or when `expected` is given and differs from the stored
/// architecture.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path,
                                 std::optional<nn::Architecture> expected = std::nullopt);

}  // namespace vle::train
