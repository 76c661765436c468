#include <charconv>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "vle/csv.hpp"
#include "vle/errors.hpp"
#include "vle/features.hpp"

namespace vle::features {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double parse_double(const std::string& cell, const std::string& where) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw IngestError("Parse", where + ": not a number: '" + cell + "'");
  }
  return v;
}

std::int64_t parse_int(const std::string& cell, const std::string& where) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw IngestError("Parse", where + ": not an integer: '" + cell + "'");
  }
  return v;
}

const char* cutoff_mode_name(CutoffMode m) { return m == CutoffMode::RowIndex ? "row_index" : "date_range"; }

const std::vector<std::string>& frame_header() {
  static const std::vector<std::string> header = [] {
    std::vector<std::string> h(kFeatureNames.begin(), kFeatureNames.end());
    for (const char* extra : {"label", "id_module", "id_presentation", "id_student", "id_date"}) h.push_back(extra);
    return h;
  }();
  return header;
}

}  // namespace

std::string sidecar_json(const Sidecar& s) {
  const auto& o = s.options;
  json columns = json::object();
  for (std::size_t c = 0; c < kFeatureCount; ++c) {
    columns[kFeatureNames[c]] = {{"mean", s.scaler.mean[c]}, {"std", s.scaler.stddev[c]}, {"active", s.scaler.active[c]}};
  }
  json doc = {
      {"format", "vle-forecast-sidecar/1"},
      {"feature_order", kFeatureNames},
      {"vocabularies", s.vocabularies},
      {"scaler", columns},
      {"fill", {{"unregistration_date", o.unregistration_fill}, {"registration_date", o.registration_fill}}},
      {"duration_pct", o.duration_pct},
      {"cutoff_date", s.cutoff_date},
      {"cutoff_mode", cutoff_mode_name(o.cutoff_mode)},
      {"feature_set", to_string(o.feature_set)},
      {"per_student", o.per_student},
      {"no_leak", o.no_leak},
      {"train_frac", o.train_frac},
      {"seed", o.seed},
      {"rows", s.rows},
  };
  return doc.dump(2);
}

Sidecar parse_sidecar(const std::string& text) {
  Sidecar s;
  try {
    const json doc = json::parse(text);
    if (doc.at("feature_order").get<std::vector<std::string>>() !=
        std::vector<std::string>(kFeatureNames.begin(), kFeatureNames.end())) {
      throw ConfigError("sidecar feature order does not match this build");
    }
    s.vocabularies = doc.at("vocabularies").get<Vocabularies>();
    for (std::size_t c = 0; c < kFeatureCount; ++c) {
      const auto& col = doc.at("scaler").at(kFeatureNames[c]);
      s.scaler.mean[c] = col.at("mean").get<double>();
      s.scaler.stddev[c] = col.at("std").get<double>();
      s.scaler.active[c] = col.at("active").get<bool>();
    }
    auto& o = s.options;
    o.unregistration_fill = doc.at("fill").at("unregistration_date").get<std::int64_t>();
    o.registration_fill = doc.at("fill").at("registration_date").get<std::int64_t>();
    o.duration_pct = doc.at("duration_pct").get<double>();
    o.cutoff_mode = doc.at("cutoff_mode").get<std::string>() == "row_index" ? CutoffMode::RowIndex
                                                                            : CutoffMode::DateRange;
    o.feature_set = parse_feature_set(doc.at("feature_set").get<std::string>());
    o.per_student = doc.at("per_student").get<bool>();
    o.no_leak = doc.at("no_leak").get<bool>();
    o.train_frac = doc.at("train_frac").get<double>();
    o.seed = doc.at("seed").get<std::uint64_t>();
    s.cutoff_date = doc.at("cutoff_date").get<double>();
    s.rows = doc.at("rows").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed sidecar: ") + e.what());
  }
  return s;
}

void write_feature_frame(const FeatureFrame& frame, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  const fs::path features = dir / "features.csv";
  std::ofstream out(features, std::ios::binary);
  if (!out) throw IoError("cannot write " + features.string());
  csv::write_row(out, frame_header());
  const auto& d = frame.data;
  std::vector<std::string> cells(frame_header().size());
  for (std::size_t r = 0; r < d.rows(); ++r) {
    for (std::size_t c = 0; c < kFeatureCount; ++c) cells[c] = shortest(d.at(r, c));
    cells[kFeatureCount] = std::to_string(d.labels[r]);
    cells[kFeatureCount + 1] = d.ids[r].code_module;
    cells[kFeatureCount + 2] = d.ids[r].code_presentation;
    cells[kFeatureCount + 3] = std::to_string(d.ids[r].id_student);
    cells[kFeatureCount + 4] = std::to_string(d.ids[r].date);
    csv::write_row(out, cells);
  }
  if (!out) throw IoError("write failed: " + features.string());

  const fs::path sidecar = dir / "sidecar.json";
  std::ofstream side(sidecar, std::ios::binary);
  if (!side) throw IoError("cannot write " + sidecar.string());
  side << sidecar_json(frame.sidecar) << '\n';
  if (!side) throw IoError("write failed: " + sidecar.string());
}

FeatureFrame read_feature_frame(const fs::path& features_file) {
  const fs::path sidecar_path = features_file.parent_path() / "sidecar.json";
  if (!fs::exists(sidecar_path)) throw IoError("sidecar.json not found beside " + features_file.string());

  FeatureFrame frame;
  frame.sidecar = parse_sidecar(csv::slurp(sidecar_path));

  const std::string name = features_file.filename().string();
  const std::string text = csv::slurp(features_file);
  bool header = true;
  EncodedFrame& d = frame.data;
  csv::scan(text, name, [&](const csv::Record& rec) {
    if (header) {
      if (rec.fields != frame_header()) throw IngestError("Parse", name + ":1: unexpected header");
      header = false;
      return;
    }
    const std::string where = name + ":" + std::to_string(rec.line);
    if (rec.fields.size() != frame_header().size()) throw IngestError("Parse", where + ": wrong field count");
    for (std::size_t c = 0; c < kFeatureCount; ++c) d.values.push_back(parse_double(rec.fields[c], where));
    const auto label = parse_int(rec.fields[kFeatureCount], where);
    if (label < 0 || label >= static_cast<std::int64_t>(kClassCount)) {
      throw LabelError(where + ": label out of range");
    }
    d.labels.push_back(static_cast<int>(label));
    d.ids.push_back({rec.fields[kFeatureCount + 1], rec.fields[kFeatureCount + 2],
                     parse_int(rec.fields[kFeatureCount + 3], where),
                     parse_int(rec.fields[kFeatureCount + 4], where)});
  });
  if (header) throw IngestError("Parse", name + ": empty file");
  frame.split = stratified_split(d.labels, frame.sidecar.options.train_frac, frame.sidecar.options.seed);
  return frame;
}

void write_correlation(const std::vector<CorrelationEntry>& table, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "feature,pearson_r\n";
  char buf[64];
  for (const auto& e : table) {
    std::snprintf(buf, sizeof buf, "%.6f", e.pearson_r);
    out << e.feature << ',' << buf << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace vle::features
