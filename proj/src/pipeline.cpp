#include "vle/pipeline.hpp"

#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "vle/csv.hpp"
#include "vle/errors.hpp"
#include "vle/manifest.hpp"

namespace vle::app {
namespace {

using nlohmann::json;

std::string options_json(const features::PipelineOptions& o) {
  config::RunSettings s;
  s.pipeline = o;
  const json full = json::parse(config::to_json(s));
  json out = json::object();
  for (const char* key : {"seed", "duration_pct", "features", "per_student", "no_leak", "cutoff_mode", "train_frac",
                          "unregistration_fill"}) {
    out[key] = full.at(key);
  }
  return out.dump();
}

void record(const std::string& command, const std::string& config_json, std::uint64_t seed,
            std::vector<std::string> inputs, std::vector<std::string> outputs, const fs::path& out) {
  RunManifest m;
  m.run_id = make_run_id(command, seed);
  m.command = command;
  m.config_json = config_json;
  m.inputs = std::move(inputs);
  for (auto& o : outputs) o = (out / o).string();
  m.outputs = std::move(outputs);
  append_manifest(m, out);
}

std::string fixed6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

ValidationReport cmd_validate(const fs::path& data_dir) { return validate_bundle(load_bundle(data_dir)); }

synth::GenerationLedger cmd_synth(const synth::SynthConfig& cfg, const fs::path& out) {
  cfg.validate();
  const json c = {{"n_students", cfg.n_students},
                  {"n_modules", cfg.n_modules},
                  {"course_length_days", cfg.course_length_days},
                  {"class_mix", cfg.class_mix},
                  {"signal_strength", cfg.signal_strength},
                  {"seed", cfg.seed}};
  std::vector<std::string> outputs;
  for (TableId id : kAllTables) outputs.emplace_back(table_file_name(id));
  outputs.emplace_back("ledger.json");
  record("synth", c.dump(), cfg.seed, {}, outputs, out);
  return synth::generate_bundle(cfg, out);
}

features::FeatureFrame cmd_preprocess(const fs::path& data_dir, const fs::path& out,
                                      const features::PipelineOptions& options) {
  record("preprocess", options_json(options), options.seed, {data_dir.string()}, {"features.csv", "sidecar.json"}, out);
  const RawBundle bundle = load_bundle(data_dir);
  const ValidationReport report = validate_bundle(bundle);
  if (!report.ok) {
    std::string msg = std::to_string(report.violations.size()) + " violation(s); first: " + report.violations.front();
    throw IngestError("Invalid", msg);
  }
  features::FeatureFrame frame = features::build_feature_frame(bundle, options);
  features::write_feature_frame(frame, out);
  return frame;
}

std::vector<features::CorrelationEntry> cmd_correlate(const fs::path& features_file, const fs::path& out) {
  record("correlate", "{}", 0, {features_file.string()}, {"correlation.csv"}, out);
  const features::FeatureFrame frame = features::read_feature_frame(features_file);
  auto table = features::pearson_correlation(frame.data);
  features::write_correlation(table, out / "correlation.csv");
  return table;
}

TrainOutcome cmd_train(const fs::path& features_file, config::RunSettings settings, const fs::path& out,
                       const EpochCallback& on_epoch) {
  const features::FeatureFrame frame = features::read_feature_frame(features_file);
  settings.pipeline = frame.sidecar.options;
  record("train", config::to_json(settings), settings.pipeline.seed, {features_file.string()},
         {"checkpoint.json", "history.csv"}, out);

  const features::EncodedFrame train_rows = frame.data.select(frame.split.train);
  nn::Network net = nn::build_network(settings.model);
  TrainOutcome outcome;
  outcome.history = train::train(net, train_rows, settings.train, on_epoch);
  outcome.checkpoint = out / "checkpoint.json";
  train::save_checkpoint(net, frame.sidecar, fs::absolute(features_file).parent_path() / "sidecar.json",
                         outcome.checkpoint);
  train::write_history_csv(outcome.history, out / "history.csv");
  return outcome;
}

eval::Report cmd_evaluate(const fs::path& checkpoint, const fs::path& features_file, const fs::path& out,
                          EvalRows rows) {
  std::vector<std::string> outputs = {"report.json", "metrics.csv", "confusion.csv", "roc.svg"};
  for (const char* name : kClassNames) outputs.push_back(std::string("roc_") + name + ".csv");
  const fs::path history_file = checkpoint.parent_path() / "history.csv";
  const bool has_history = fs::exists(history_file);
  if (has_history) outputs.emplace_back("history.svg");

  train::LoadedCheckpoint loaded = train::load_checkpoint(checkpoint);
  const features::FeatureFrame frame = features::read_feature_frame(features_file);
  const json stored = json::parse(features::sidecar_json(loaded.sidecar));
  const json current = json::parse(features::sidecar_json(frame.sidecar));
  for (const char* key : {"feature_order", "vocabularies", "scaler"}) {
    if (stored.at(key) != current.at(key)) {
      throw CheckpointError("SidecarMismatch", std::string(key) + " of " + features_file.string() +
                                                   " differ from the checkpoint's preprocessing");
    }
  }
  if (rows == EvalRows::Test && stored != current) {
    throw CheckpointError("SidecarMismatch", features_file.string() + " was not produced by the checkpoint's preprocessing run");
  }

  json cfg = json::parse(options_json(frame.sidecar.options));
  cfg["arch"] = nn::to_string(loaded.net.config().architecture);
  cfg["rows"] = rows == EvalRows::Test ? "test" : "all";
  const std::string cfg_text = cfg.dump();
  RunManifest m;
  m.run_id = make_run_id("evaluate", frame.sidecar.options.seed);
  m.command = "evaluate";
  m.config_json = cfg_text;
  m.inputs = {checkpoint.string(), features_file.string()};
  for (auto& o : outputs) m.outputs.push_back((out / o).string());
  append_manifest(m, out);

  std::vector<std::size_t> selected;
  if (rows == EvalRows::Test) {
    selected = frame.split.test;
  } else {
    selected.resize(frame.data.rows());
    for (std::size_t i = 0; i < selected.size(); ++i) selected[i] = i;
  }
  eval::Report report = eval::evaluate(loaded.net, frame.data, selected);
  report.run_id = m.run_id;
  report.duration_pct = frame.sidecar.options.duration_pct;
  std::optional<train::TrainingHistory> history;
  if (has_history) history = train::read_history_csv(history_file);
  eval::emit_report(report, history, cfg_text, out);
  return report;
}

std::string pct_dir_name(double pct) {
  char buf[32];
  if (pct == static_cast<double>(static_cast<long>(pct))) std::snprintf(buf, sizeof buf, "pct_%03ld", static_cast<long>(pct));
  else std::snprintf(buf, sizeof buf, "pct_%07.3f", pct);
  return buf;
}

std::vector<SweepRow> cmd_sweep(const fs::path& data_dir, const std::vector<double>& pcts,
                                const config::RunSettings& settings, const fs::path& out,
                                const EpochCallback& on_epoch) {
  json cfg = json::parse(config::to_json(settings));
  cfg["pcts"] = pcts;
  std::vector<std::string> outputs = {"sweep_summary.csv"};
  for (double p : pcts) outputs.push_back(pct_dir_name(p));
  record("sweep", cfg.dump(), settings.pipeline.seed, {data_dir.string()}, outputs, out);

  std::vector<SweepRow> rows;
  for (double pct : pcts) {
    SweepRow row;
    row.pct = pct;
    const fs::path dir = out / pct_dir_name(pct);
    try {
      features::PipelineOptions options = settings.pipeline;
      options.duration_pct = pct;
      const features::FeatureFrame frame = cmd_preprocess(data_dir, dir, options);
      row.train_rows = frame.split.train.size();
      row.test_rows = frame.split.test.size();
      const TrainOutcome trained = cmd_train(dir / "features.csv", settings, dir, on_epoch);
      row.report = cmd_evaluate(trained.checkpoint, dir / "features.csv", dir);
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }

  std::ofstream summary(out / "sweep_summary.csv", std::ios::binary);
  if (!summary) throw IoError("cannot write " + (out / "sweep_summary.csv").string());
  summary << "duration_pct,status,train_rows,test_rows,accuracy,macro_precision,macro_recall,macro_f1,"
             "weighted_precision,weighted_recall,weighted_f1,micro_auc,macro_auc";
  for (const char* name : kClassNames) summary << ",f1_" << name;
  summary << ",error\n";
  for (const SweepRow& r : rows) {
    char pct[32];
    std::snprintf(pct, sizeof pct, "%g", r.pct);
    std::vector<std::string> f = {pct, r.ok ? "ok" : "failed", std::to_string(r.train_rows), std::to_string(r.test_rows)};
    if (r.ok) {
      const auto& m = r.report.metrics;
      for (double v : {m.accuracy, m.macro.precision, m.macro.recall, m.macro.f1, m.weighted.precision,
                       m.weighted.recall, m.weighted.f1, r.report.auc.micro, r.report.auc.macro}) {
        f.push_back(fixed6(v));
      }
      for (const auto& c : m.per_class) f.push_back(fixed6(c.f1));
    } else {
      f.insert(f.end(), 9 + kClassNames.size(), "");
    }
    f.push_back(r.error);
    csv::write_row(summary, f);
  }
  if (!summary) throw IoError("write failed: " + (out / "sweep_summary.csv").string());
  return rows;
}

}  // namespace vle::app
