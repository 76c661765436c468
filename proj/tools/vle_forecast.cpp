#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "vle/errors.hpp"
#include "vle/manifest.hpp"
#include "vle/pipeline.hpp"

namespace {

using namespace vle;
namespace fs = std::filesystem;

constexpr int kOk = 0;
constexpr int kDomainError = 1;
constexpr int kUsageError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::optional<std::uint64_t> env_seed() {
  const char* v = std::getenv("VLE_FORECAST_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  return config::parse_seed(v, "VLE_FORECAST_SEED");
}

std::vector<double> parse_pcts(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("--pcts: not a number: '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError("--pcts is empty");
  return out;
}

void print_epoch(const train::EpochRecord& e) {
  std::fprintf(stderr, "epoch %3zu  loss %.4f  acc %.4f  val_loss %.4f  val_acc %.4f  (%.1fs)\n", e.epoch,
               e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy, e.seconds);
}

void print_report(const eval::Report& r) {
  std::printf("%-12s %9s %9s %9s %8s\n", "class", "precision", "recall", "f1", "support");
  for (std::size_t c = 0; c < eval::K; ++c) {
    const auto& m = r.metrics.per_class[c];
    std::printf("%-12s %9.4f %9.4f %9.4f %8zu\n", kClassNames[c], m.precision, m.recall, m.f1, m.support);
  }
  std::printf("accuracy %.4f  macro-F1 %.4f  weighted-F1 %.4f  micro-AUC %.4f  macro-AUC %.4f\n", r.metrics.accuracy,
              r.metrics.macro.f1, r.metrics.weighted.f1, r.auc.micro, r.auc.macro);
}

/// Flags that mirror config-file keys; a flag given on the command line wins.
struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;

  void attach(CLI::App* cmd, const std::vector<std::string>& keys) {
    cmd->add_option("--config", config_file, "key = value config file")->check(CLI::ExistingFile);
    for (const std::string& key : keys) {
      cmd->add_option_function<std::string>("--" + key, [this, key](const std::string& v) { values[key] = v; },
                                            "override config key " + key);
    }
  }

  config::RunSettings resolve() const {
    config::RunSettings s;
    if (const auto seed = env_seed()) config::set_seed(s, *seed);
    config::KeyValues merged;
    if (!config_file.empty()) merged = config::read_file(config_file);
    for (const auto& [k, v] : values) merged[k] = v;
    config::apply(s, merged);
    return s;
  }
};

const std::vector<std::string> kPreprocessKeys = {"duration_pct", "features", "per_student", "no_leak",
                                                  "cutoff_mode", "train_frac", "unregistration_fill", "seed"};

std::vector<std::string> train_keys() {
  std::vector<std::string> keys;
  for (const std::string& k : config::known_keys()) {
    if (std::find(kPreprocessKeys.begin(), kPreprocessKeys.end(), k) == kPreprocessKeys.end() || k == "seed") {
      keys.push_back(k);
    }
  }
  return keys;
}

int run(int argc, char** argv) {
  CLI::App app{"Student outcome forecasting from VLE clickstream tables"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  std::string data_dir, out, features_file, checkpoint, arch, pcts = "5,10,20,40,60,80,100", eval_rows = "test";
  std::size_t students = 0;
  double signal = 1.0;
  std::size_t n_modules = 2;
  std::int64_t course_length = 270;
  std::optional<std::uint64_t> seed;
  bool per_student = false, no_leak = false;
  double duration_pct = 100;
  std::string feature_set = "all", cutoff_mode = "date_range";
  double train_frac = 0.7;
  std::int64_t unreg_fill = features::kDefaultUnregistrationFill;

  auto* validate = app.add_subcommand("validate", "check a bundle's schema and referential integrity");
  validate->add_option("--data-dir", data_dir, "directory with the seven CSV tables")->required();

  auto* synth = app.add_subcommand("synth", "generate a synthetic bundle with a planted class signal");
  synth->add_option("--students", students, "number of students")->required();
  synth->add_option("--signal", signal, "signal strength in [0, 1]");
  synth->add_option("--modules", n_modules, "number of modules");
  synth->add_option("--course-length", course_length, "course length in days");
  synth->add_option("--seed", seed, "generator seed");
  synth->add_option("--out", out, "output directory")->required();

  auto* preprocess = app.add_subcommand("preprocess", "build features.csv and sidecar.json from a bundle");
  preprocess->add_option("--data-dir", data_dir)->required();
  preprocess->add_option("--out", out)->required();
  preprocess->add_option("--duration-pct", duration_pct, "course share to keep, (0, 100]");
  preprocess->add_option("--features", feature_set, "demo | demo+click | demo+click+assess | all");
  preprocess->add_flag("--per-student", per_student, "one row per student");
  preprocess->add_flag("--no-leak", no_leak, "cap registration spans at the cutoff");
  preprocess->add_option("--cutoff-mode", cutoff_mode, "date_range | row_index")
      ->check(CLI::IsMember({"date_range", "row_index"}));
  preprocess->add_option("--train-frac", train_frac, "stratified train share");
  preprocess->add_option("--unregistration-fill", unreg_fill, "day used for missing unregistration dates");
  preprocess->add_option("--seed", seed, "split seed");

  auto* correlate = app.add_subcommand("correlate", "Pearson correlation of each feature with the outcome");
  correlate->add_option("--features-file", features_file)->required()->check(CLI::ExistingFile);
  correlate->add_option("--out", out)->required();

  ConfigFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "train a network on a feature frame's training split");
  train_cmd->add_option("--features-file", features_file)->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--out", out)->required();
  train_flags.attach(train_cmd, train_keys());

  auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint and write the report bundle");
  evaluate->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--features-file", features_file)->required()->check(CLI::ExistingFile);
  evaluate->add_option("--out", out)->required();
  evaluate->add_option("--rows", eval_rows, "test | all")->check(CLI::IsMember({"test", "all"}));

  ConfigFlags sweep_flags;
  auto* sweep = app.add_subcommand("sweep", "preprocess, train and evaluate at several course durations");
  sweep->add_option("--data-dir", data_dir)->required();
  sweep->add_option("--pcts", pcts, "comma-separated duration percentages");
  sweep->add_option("--out", out)->required();
  sweep_flags.attach(sweep, config::known_keys());

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsageError;
  }

  if (*validate) {
    const ValidationReport report = app::cmd_validate(data_dir);
    for (const auto& t : report.tables) {
      std::printf("%-26s %9zu rows %3zu cols %8zu missing\n", t.name.c_str(), t.rows, t.columns, t.missing_cells);
    }
    for (const auto& v : report.violations) std::printf("violation: %s\n", v.c_str());
    std::printf("%s\n", report.ok ? "ok" : "invalid");
    return report.ok ? kOk : kDomainError;
  }

  if (*synth) {
    if (!seed) seed = env_seed();
    if (!seed) throw UsageError("synth requires --seed (or VLE_FORECAST_SEED)");
    synth::SynthConfig cfg;
    cfg.n_students = students;
    cfg.n_modules = n_modules;
    cfg.course_length_days = course_length;
    cfg.signal_strength = signal;
    cfg.seed = *seed;
    const auto ledger = app::cmd_synth(cfg, out);
    std::printf("students %zu  student_vle rows %zu  oracle accuracy %.4f\n", ledger.students.size(),
                ledger.rows(TableId::StudentVle), synth::oracle_accuracy(ledger));
    return kOk;
  }

  if (*preprocess) {
    features::PipelineOptions o;
    if (!seed) seed = env_seed();
    o.seed = seed.value_or(0);
    o.duration_pct = duration_pct;
    o.feature_set = features::parse_feature_set(feature_set);
    o.per_student = per_student;
    o.no_leak = no_leak;
    o.cutoff_mode = cutoff_mode == "row_index" ? features::CutoffMode::RowIndex : features::CutoffMode::DateRange;
    o.train_frac = train_frac;
    o.unregistration_fill = unreg_fill;
    const auto frame = app::cmd_preprocess(data_dir, out, o);
    std::printf("rows %zu  train %zu  test %zu  cutoff day %g\n", frame.data.rows(), frame.split.train.size(),
                frame.split.test.size(), frame.sidecar.cutoff_date);
    return kOk;
  }

  if (*correlate) {
    for (const auto& e : app::cmd_correlate(features_file, out)) {
      std::printf("%-22s %+.6f%s\n", e.feature.c_str(), e.pearson_r, e.zero_variance ? "  (zero variance)" : "");
    }
    return kOk;
  }

  if (*train_cmd) {
    const config::RunSettings s = train_flags.resolve();
    const auto outcome = app::cmd_train(features_file, s, out, print_epoch);
    const auto& last = outcome.history.epochs.back();
    std::printf("trained %zu epochs  val_acc %.4f  checkpoint %s\n", outcome.history.epochs.size(), last.val_accuracy,
                outcome.checkpoint.string().c_str());
    return kOk;
  }

  if (*evaluate) {
    print_report(app::cmd_evaluate(checkpoint, features_file, out,
                                   eval_rows == "all" ? app::EvalRows::All : app::EvalRows::Test));
    return kOk;
  }

  if (*sweep) {
    const config::RunSettings s = sweep_flags.resolve();
    const auto rows = app::cmd_sweep(data_dir, parse_pcts(pcts), s, out, print_epoch);
    bool failed = false;
    for (const auto& r : rows) {
      if (r.ok) {
        std::printf("%6g%%  accuracy %.4f  macro-F1 %.4f  Withdrawn-F1 %.4f\n", r.pct, r.report.metrics.accuracy,
                    r.report.metrics.macro.f1, r.report.metrics.per_class[3].f1);
      } else {
        failed = true;
        std::printf("%6g%%  failed: %s\n", r.pct, r.error.c_str());
      }
    }
    return failed ? kDomainError : kOk;
  }
  return kUsageError;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kUsageError;
  } catch (const vle::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kDomainError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kDomainError;
  }
}
