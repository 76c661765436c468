#include "vle/config.hpp"

#include <charconv>
#include <sstream>

#include "json.hpp"
#include "vle/csv.hpp"
#include "vle/errors.hpp"

namespace vle::config {
namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": not a number: '" + v + "'");
  return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": not a non-negative integer: '" + v + "'");
  return out;
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": not an integer: '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": not a boolean: '" + v + "'");
}

std::array<double, features::kClassCount> to_weights(const std::string& key, const std::string& v) {
  std::array<double, features::kClassCount> w{};
  std::stringstream ss(v);
  std::string item;
  std::size_t n = 0;
  while (std::getline(ss, item, ',')) {
    if (n == w.size()) throw ConfigError(key + ": expected 4 comma-separated weights");
    w[n++] = to_double(key, std::string(trim(item)));
  }
  if (n != w.size()) throw ConfigError(key + ": expected 4 comma-separated weights");
  return w;
}

}  // namespace

KeyValues parse(std::string_view text, const std::string& source) {
  KeyValues out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("Syntax", source + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("Syntax", source + ":" + std::to_string(line_no) + ": empty key");
    out[std::string(key)] = std::string(trim(line.substr(eq + 1)));
  }
  return out;
}

KeyValues read_file(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("Missing", "config file not found: " + path.string());
  return parse(csv::slurp(path), path.string());
}

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "seed",          "duration_pct",  "features",      "per_student",      "no_leak",    "cutoff_mode",
      "train_frac",    "unregistration_fill", "arch",    "init_seed",        "dropout_rate", "epochs",
      "batch_size",    "validation_split", "learning_rate", "beta1",         "beta2",      "adam_eps",
      "shuffle_seed",  "class_weights"};
  return keys;
}

std::uint64_t parse_seed(const std::string& text, const std::string& what) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size()) throw ConfigError(what + ": not a seed: '" + text + "'");
  return v;
}

void set_seed(RunSettings& s, std::uint64_t seed) {
  s.pipeline.seed = seed;
  s.model.init_seed = mix_seed(seed, 1);
  s.train.shuffle_seed = mix_seed(seed, 2);
}

void apply(RunSettings& s, const KeyValues& values) {
  for (const auto& [key, value] : values) {
    if (std::find(known_keys().begin(), known_keys().end(), key) == known_keys().end()) {
      throw ConfigError("UnknownKey", "unknown config key '" + key + "'");
    }
  }
  for (const std::string& key : known_keys()) {
    const auto it = values.find(key);
    if (it == values.end()) continue;
    const std::string& v = it->second;
    if (key == "seed") set_seed(s, parse_seed(v, key));
    else if (key == "duration_pct") s.pipeline.duration_pct = to_double(key, v);
    else if (key == "features") s.pipeline.feature_set = features::parse_feature_set(v);
    else if (key == "per_student") s.pipeline.per_student = to_bool(key, v);
    else if (key == "no_leak") s.pipeline.no_leak = to_bool(key, v);
    else if (key == "cutoff_mode") {
      if (v == "date_range") s.pipeline.cutoff_mode = features::CutoffMode::DateRange;
      else if (v == "row_index") s.pipeline.cutoff_mode = features::CutoffMode::RowIndex;
      else throw ConfigError(key + ": expected date_range or row_index");
    }
    else if (key == "train_frac") s.pipeline.train_frac = to_double(key, v);
    else if (key == "unregistration_fill") s.pipeline.unregistration_fill = to_int(key, v);
    else if (key == "arch") s.model.architecture = nn::parse_architecture(v);
    else if (key == "init_seed") s.model.init_seed = parse_seed(v, key);
    else if (key == "dropout_rate") s.model.dropout_rate = to_double(key, v);
    else if (key == "epochs") s.train.epochs = to_size(key, v);
    else if (key == "batch_size") s.train.batch_size = to_size(key, v);
    else if (key == "validation_split") s.train.validation_split = to_double(key, v);
    else if (key == "learning_rate") s.train.adam.learning_rate = to_double(key, v);
    else if (key == "beta1") s.train.adam.beta1 = to_double(key, v);
    else if (key == "beta2") s.train.adam.beta2 = to_double(key, v);
    else if (key == "adam_eps") s.train.adam.eps = to_double(key, v);
    else if (key == "shuffle_seed") s.train.shuffle_seed = parse_seed(v, key);
    else if (key == "class_weights") s.train.class_weights = features::class_weights(to_weights(key, v));
  }
  s.model.validate();
  s.train.validate();
}

std::string to_json(const RunSettings& s) {
  const auto& p = s.pipeline;
  const auto& t = s.train;
  const nlohmann::json j = {
      {"seed", p.seed},
      {"duration_pct", p.duration_pct},
      {"features", features::to_string(p.feature_set)},
      {"per_student", p.per_student},
      {"no_leak", p.no_leak},
      {"cutoff_mode", p.cutoff_mode == features::CutoffMode::RowIndex ? "row_index" : "date_range"},
      {"train_frac", p.train_frac},
      {"unregistration_fill", p.unregistration_fill},
      {"arch", nn::to_string(s.model.architecture)},
      {"init_seed", s.model.init_seed},
      {"dropout_rate", s.model.dropout_rate},
      {"epochs", t.epochs},
      {"batch_size", t.batch_size},
      {"validation_split", t.validation_split},
      {"learning_rate", t.adam.learning_rate},
      {"beta1", t.adam.beta1},
      {"beta2", t.adam.beta2},
      {"adam_eps", t.adam.eps},
      {"shuffle_seed", t.shuffle_seed},
      {"class_weights", t.class_weights.weight}};
  return j.dump();
}

}  // namespace vle::config
