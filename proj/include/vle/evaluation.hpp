#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vle/features.hpp"
#include "vle/tensor.hpp"
#include "vle/training.hpp"

namespace vle::eval {

inline constexpr std::size_t K = features::kClassCount;

struct ConfusionMatrix {
  std::array<std::array<std::size_t, K>, K> counts{};  // [true][predicted]

  std::size_t total() const;
  std::size_t support(std::size_t c) const;
  /// Each row divided by its support; rows of absent classes stay zero.
  std::array<std::array<double, K>, K> normalized() const;
};

/// Throws EvalError on a length mismatch or a class outside 0..K-1.
ConfusionMatrix confusion_matrix(const std::vector<int>& predictions, const std::vector<int>& labels);

struct ClassMetrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::size_t support = 0;
};

struct Averages {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

struct MetricsReport {
  std::array<ClassMetrics, K> per_class{};
  double accuracy = 0;
  Averages macro;
  Averages weighted;
};

/// 0/0 is taken as 0 everywhere. Throws EvalError on an empty matrix.
MetricsReport metrics_report(const ConfusionMatrix& cm);

struct RocPoint {
  double fpr = 0;
  double tpr = 0;
};

struct RocCurve {
  std::vector<RocPoint> points;
  std::vector<double> thresholds;  // one per interior point
  bool degenerate = false;         // no positives or no negatives
};

/// Binary ROC over (score, is_positive) pairs: thresholds at the distinct
/// scores in descending order, ties grouped, with (0,0) prepended and (1,1)
/// appended.
RocCurve roc_from_binary(const std::vector<double>& scores, const std::vector<bool>& positive);

/// One-vs-rest ROC for class c using column c of the probabilities.
RocCurve roc_curve(const nn::Tensor& scores, const std::vector<int>& labels, std::size_t c);

/// Trapezoidal area under the curve.
double trapezoid_auc(const RocCurve& curve);

struct AucSummary {
  std::array<std::optional<double>, K> per_class{};  // nullopt when degenerate
  std::array<RocCurve, K> curves{};
  double micro = 0;
  double macro = 0;
};

/// Micro pools all B*K one-vs-rest decisions; macro averages the defined
/// per-class AUCs. Throws EvalError if every class is degenerate.
AucSummary auc_summary(const nn::Tensor& scores, const std::vector<int>& labels);

struct Report {
  std::string run_id;
  double duration_pct = 100;
  MetricsReport metrics;
  ConfusionMatrix confusion;
  AucSummary auc;
};

/// Scores the given rows of a frame in eval mode.
Report evaluate(const nn::Network& net, const features::EncodedFrame& frame, const std::vector<std::size_t>& rows);

/// report.json, metrics.csv, confusion.csv, roc_<class>.csv, roc.svg and,
/// when a history is given, history.svg.
void emit_report(const Report& report, const std::optional<train::TrainingHistory>& history,
                 const std::string& config_json, const std::filesystem::path& out_dir);

std::string report_json(const Report& report, const std::string& config_json);

// Plot writer.
struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::optional<std::array<double, 4>> bounds;  // xmin, xmax, ymin, ymax
  bool diagonal = false;
};

std::string line_plot_svg(const PlotSpec& spec, const std::vector<Series>& series);

}  // namespace vle::eval
