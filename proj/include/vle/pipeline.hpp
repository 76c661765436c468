#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vle/config.hpp"
#include "vle/evaluation.hpp"
#include "vle/ingest.hpp"
#include "vle/synthetic.hpp"

namespace vle::app {

namespace fs = std::filesystem;

using EpochCallback = std::function<void(const train::EpochRecord&)>;

/// Loads and validates a bundle; returns the report (never throws on
/// violations, only on unreadable input).
ValidationReport cmd_validate(const fs::path& data_dir);

synth::GenerationLedger cmd_synth(const synth::SynthConfig& cfg, const fs::path& out);

/// Loads, validates (violations throw IngestError::Invalid) and preprocesses
/// a bundle, then writes features.csv and sidecar.json.
features::FeatureFrame cmd_preprocess(const fs::path& data_dir, const fs::path& out,
                                      const features::PipelineOptions& options);

std::vector<features::CorrelationEntry> cmd_correlate(const fs::path& features_file, const fs::path& out);

struct TrainOutcome {
  train::TrainingHistory history;
  fs::path checkpoint;
};

/// The frame's training split feeds train(); checkpoint.json and
/// history.csv land in `out`.
TrainOutcome cmd_train(const fs::path& features_file, config::RunSettings settings, const fs::path& out,
                       const EpochCallback& on_epoch = {});

enum class EvalRows { Test, All };

/// Scores the frame's test split (or every row) with the checkpoint. Throws
/// CheckpointError::SidecarMismatch when the frame was encoded differently.
eval::Report cmd_evaluate(const fs::path& checkpoint, const fs::path& features_file, const fs::path& out,
                          EvalRows rows = EvalRows::Test);

struct SweepRow {
  double pct = 0;
  bool ok = false;
  std::string error;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  eval::Report report;
};

/// preprocess -> train -> evaluate per percentage into `out/pct_<p>/`, then
/// sweep_summary.csv. A failing percentage is recorded and the rest go on.
std::vector<SweepRow> cmd_sweep(const fs::path& data_dir, const std::vector<double>& pcts,
                                const config::RunSettings& settings, const fs::path& out,
                                const EpochCallback& on_epoch = {});

std::string pct_dir_name(double pct);

}  // namespace vle::app
