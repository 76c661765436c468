#include "vle/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "vle/errors.hpp"
#include "vle/ingest.hpp"

namespace vle::eval {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

std::string fixed6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

json averages_json(const Averages& a) {
  return {{"precision", a.precision}, {"recall", a.recall}, {"f1", a.f1}};
}

}  // namespace

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts) n += std::accumulate(row.begin(), row.end(), std::size_t{0});
  return n;
}

std::size_t ConfusionMatrix::support(std::size_t c) const {
  return std::accumulate(counts[c].begin(), counts[c].end(), std::size_t{0});
}

std::array<std::array<double, K>, K> ConfusionMatrix::normalized() const {
  std::array<std::array<double, K>, K> out{};
  for (std::size_t t = 0; t < K; ++t) {
    const auto s = static_cast<double>(support(t));
    for (std::size_t p = 0; p < K; ++p) out[t][p] = ratio(static_cast<double>(counts[t][p]), s);
  }
  return out;
}

ConfusionMatrix confusion_matrix(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.size() != labels.size()) {
    throw EvalError("LengthMismatch", std::to_string(predictions.size()) + " predictions vs " +
                                          std::to_string(labels.size()) + " labels");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int t = labels[i];
    const int p = predictions[i];
    if (t < 0 || t >= static_cast<int>(K) || p < 0 || p >= static_cast<int>(K)) {
      throw EvalError("class index out of range at row " + std::to_string(i));
    }
    ++cm.counts[t][p];
  }
  return cm;
}

MetricsReport metrics_report(const ConfusionMatrix& cm) {
  const std::size_t total = cm.total();
  if (total == 0) throw EvalError("Empty", "confusion matrix has no entries");
  MetricsReport r;
  std::size_t trace = 0;
  for (std::size_t c = 0; c < K; ++c) {
    std::size_t predicted = 0;
    for (std::size_t t = 0; t < K; ++t) predicted += cm.counts[t][c];
    const std::size_t tp = cm.counts[c][c];
    trace += tp;
    ClassMetrics& m = r.per_class[c];
    m.support = cm.support(c);
    m.precision = ratio(static_cast<double>(tp), static_cast<double>(predicted));
    m.recall = ratio(static_cast<double>(tp), static_cast<double>(m.support));
    m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
  }
  r.accuracy = static_cast<double>(trace) / static_cast<double>(total);
  for (const ClassMetrics& m : r.per_class) {
    const auto w = static_cast<double>(m.support);
    r.macro.precision += m.precision;
    r.macro.recall += m.recall;
    r.macro.f1 += m.f1;
    r.weighted.precision += w * m.precision;
    r.weighted.recall += w * m.recall;
    r.weighted.f1 += w * m.f1;
  }
  const auto n = static_cast<double>(total);
  r.macro.precision /= K;
  r.macro.recall /= K;
  r.macro.f1 /= K;
  r.weighted.precision /= n;
  r.weighted.recall /= n;
  r.weighted.f1 /= n;
  return r;
}

RocCurve roc_from_binary(const std::vector<double>& scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw EvalError("LengthMismatch", "scores vs labels");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  const auto n_pos = static_cast<std::size_t>(std::count(positive.begin(), positive.end(), true));
  const std::size_t n_neg = scores.size() - n_pos;
  RocCurve curve;
  curve.degenerate = n_pos == 0 || n_neg == 0;
  const double p = static_cast<double>(n_pos);
  const double n = static_cast<double>(n_neg);

  curve.points.push_back({0.0, 0.0});
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    while (i < order.size() && scores[order[i]] == threshold) {
      if (positive[order[i]]) ++tp; else ++fp;
      ++i;
    }
    if (i == order.size()) break;
    curve.points.push_back({ratio(static_cast<double>(fp), n), ratio(static_cast<double>(tp), p)});
    curve.thresholds.push_back(threshold);
  }
  curve.points.push_back({1.0, 1.0});
  return curve;
}

RocCurve roc_curve(const nn::Tensor& scores, const std::vector<int>& labels, std::size_t c) {
  nn::expect_shape(scores, {0, K}, "roc scores");
  if (scores.dim(0) != labels.size()) throw ShapeError("roc scores: row count differs from labels");
  std::vector<double> s(labels.size());
  std::vector<bool> pos(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    s[i] = scores.at(i, c);
    pos[i] = labels[i] == static_cast<int>(c);
  }
  return roc_from_binary(s, pos);
}

double trapezoid_auc(const RocCurve& curve) {
  double area = 0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const RocPoint& a = curve.points[i - 1];
    const RocPoint& b = curve.points[i];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
  }
  return area;
}

AucSummary auc_summary(const nn::Tensor& scores, const std::vector<int>& labels) {
  AucSummary s;
  double sum = 0;
  std::size_t defined = 0;
  for (std::size_t c = 0; c < K; ++c) {
    s.curves[c] = roc_curve(scores, labels, c);
    if (!s.curves[c].degenerate) {
      s.per_class[c] = trapezoid_auc(s.curves[c]);
      sum += *s.per_class[c];
      ++defined;
    }
  }
  if (defined == 0) throw EvalError("Degenerate", "every class is degenerate; AUC undefined");
  s.macro = sum / static_cast<double>(defined);

  std::vector<double> pooled(scores.storage());
  std::vector<bool> pos(pooled.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t c = 0; c < K; ++c) pos[i * K + c] = labels[i] == static_cast<int>(c);
  }
  s.micro = trapezoid_auc(roc_from_binary(pooled, pos));
  return s;
}

Report evaluate(const nn::Network& net, const features::EncodedFrame& frame, const std::vector<std::size_t>& rows) {
  if (rows.empty()) throw EvalError("Empty", "no rows to evaluate");
  nn::Tensor probs({rows.size(), K});
  constexpr std::size_t kChunk = 4096;
  for (std::size_t start = 0; start < rows.size(); start += kChunk) {
    const std::size_t end = std::min(rows.size(), start + kChunk);
    const nn::Tensor part = net.predict(train::make_batch(frame, std::span(rows.data() + start, end - start)));
    std::copy(part.data(), part.data() + part.size(), probs.data() + start * K);
  }
  std::vector<int> labels(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) labels[i] = frame.labels[rows[i]];

  Report r;
  r.confusion = confusion_matrix(train::predict_classes(probs), labels);
  r.metrics = metrics_report(r.confusion);
  r.auc = auc_summary(probs, labels);
  return r;
}

std::string report_json(const Report& report, const std::string& config_json) {
  json per_class = json::object();
  json auc_per_class = json::object();
  for (std::size_t c = 0; c < K; ++c) {
    const ClassMetrics& m = report.metrics.per_class[c];
    per_class[kClassNames[c]] = {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}};
    auc_per_class[kClassNames[c]] = report.auc.per_class[c] ? json(*report.auc.per_class[c]) : json(nullptr);
  }
  json raw = json::array();
  json norm = json::array();
  const auto normalized = report.confusion.normalized();
  for (std::size_t t = 0; t < K; ++t) {
    raw.push_back(report.confusion.counts[t]);
    norm.push_back(normalized[t]);
  }
  const json doc = {{"run_id", report.run_id},
                    {"config", config_json.empty() ? json::object() : json::parse(config_json)},
                    {"duration_pct", report.duration_pct},
                    {"accuracy", report.metrics.accuracy},
                    {"per_class", per_class},
                    {"macro", averages_json(report.metrics.macro)},
                    {"weighted", averages_json(report.metrics.weighted)},
                    {"auc", {{"per_class", auc_per_class}, {"micro", report.auc.micro}, {"macro", report.auc.macro}}},
                    {"confusion", {{"raw", raw}, {"normalized", norm}}}};
  return doc.dump(2) + "\n";
}

void emit_report(const Report& report, const std::optional<train::TrainingHistory>& history,
                 const std::string& config_json, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  write_text(out_dir / "report.json", report_json(report, config_json));

  const MetricsReport& m = report.metrics;
  std::string metrics = "class,precision,recall,f1,support\n";
  for (std::size_t c = 0; c < K; ++c) {
    const ClassMetrics& cm = m.per_class[c];
    metrics += std::string(kClassNames[c]) + "," + fixed6(cm.precision) + "," + fixed6(cm.recall) + "," +
               fixed6(cm.f1) + "," + std::to_string(cm.support) + "\n";
  }
  const std::string total = std::to_string(report.confusion.total());
  metrics += "accuracy,,," + fixed6(m.accuracy) + "," + total + "\n";
  metrics += "macro avg," + fixed6(m.macro.precision) + "," + fixed6(m.macro.recall) + "," + fixed6(m.macro.f1) + "," + total + "\n";
  metrics += "weighted avg," + fixed6(m.weighted.precision) + "," + fixed6(m.weighted.recall) + "," +
             fixed6(m.weighted.f1) + "," + total + "\n";
  write_text(out_dir / "metrics.csv", metrics);

  std::string confusion = "matrix,true_class";
  for (const char* name : kClassNames) confusion += std::string(",") + name;
  confusion += "\n";
  const auto normalized = report.confusion.normalized();
  for (std::size_t t = 0; t < K; ++t) {
    confusion += std::string("raw,") + kClassNames[t];
    for (std::size_t p = 0; p < K; ++p) confusion += "," + std::to_string(report.confusion.counts[t][p]);
    confusion += "\n";
  }
  for (std::size_t t = 0; t < K; ++t) {
    confusion += std::string("normalized,") + kClassNames[t];
    for (std::size_t p = 0; p < K; ++p) confusion += "," + fixed6(normalized[t][p]);
    confusion += "\n";
  }
  write_text(out_dir / "confusion.csv", confusion);

  std::vector<Series> roc_series;
  for (std::size_t c = 0; c < K; ++c) {
    const RocCurve& curve = report.auc.curves[c];
    std::string text = "fpr,tpr\n";
    Series s;
    s.label = std::string(kClassNames[c]);
    s.label += report.auc.per_class[c] ? " (AUC " + fixed6(*report.auc.per_class[c]).substr(0, 6) + ")" : " (undefined)";
    for (const RocPoint& p : curve.points) {
      text += fixed6(p.fpr) + "," + fixed6(p.tpr) + "\n";
      s.x.push_back(p.fpr);
      s.y.push_back(p.tpr);
    }
    write_text(out_dir / ("roc_" + std::string(kClassNames[c]) + ".csv"), text);
    roc_series.push_back(std::move(s));
  }
  PlotSpec roc_spec{"One-vs-rest ROC", "false positive rate", "true positive rate", std::array{0.0, 1.0, 0.0, 1.0}, true};
  write_text(out_dir / "roc.svg", line_plot_svg(roc_spec, roc_series));

  if (history && !history->epochs.empty()) {
    Series tl{"train loss", {}, {}}, vl{"val loss", {}, {}}, ta{"train acc", {}, {}}, va{"val acc", {}, {}};
    for (const auto& e : history->epochs) {
      const auto x = static_cast<double>(e.epoch);
      tl.x.push_back(x); tl.y.push_back(e.train_loss);
      vl.x.push_back(x); vl.y.push_back(e.val_loss);
      ta.x.push_back(x); ta.y.push_back(e.train_accuracy);
      va.x.push_back(x); va.y.push_back(e.val_accuracy);
    }
    PlotSpec spec{"Training history", "epoch", "loss / accuracy", std::nullopt, false};
    write_text(out_dir / "history.svg", line_plot_svg(spec, {tl, vl, ta, va}));
  }
}

}  // namespace vle::eval
