#include "vle/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>

#include "json.hpp"
#include "vle/csv.hpp"
#include "vle/errors.hpp"
#include "vle/rng.hpp"

namespace vle {
namespace {

using nlohmann::json;

json to_json(const RunManifest& m) {
  return {{"run_id", m.run_id},
          {"command", m.command},
          {"config", m.config_json.empty() ? json::object() : json::parse(m.config_json)},
          {"inputs", m.inputs},
          {"outputs", m.outputs},
          {"tool_version", m.tool_version}};
}

}  // namespace

std::string make_run_id(const std::string& command, std::uint64_t seed) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm utc{};
  gmtime_r(&now, &utc);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &utc);
  std::uint64_t h = seed;
  for (unsigned char ch : command) h = mix_seed(h, ch);
  char out[64];
  std::snprintf(out, sizeof out, "%s-%08x", stamp, static_cast<unsigned>(h & 0xffffffffu));
  return out;
}

void append_manifest(const RunManifest& manifest, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto path = dir / "manifest.json";
  json doc = {{"runs", json::array()}};
  if (std::filesystem::exists(path)) {
    try {
      doc = json::parse(csv::slurp(path));
    } catch (const json::exception& e) {
      throw IoError("existing manifest is not valid JSON: " + path.string());
    }
    if (!doc.contains("runs") || !doc["runs"].is_array()) throw IoError("malformed manifest: " + path.string());
  }
  doc["runs"].push_back(to_json(manifest));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<RunManifest> read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::vector<RunManifest> runs;
  json doc;
  try {
    doc = json::parse(csv::slurp(path));
    for (const json& r : doc.at("runs")) {
      RunManifest m;
      m.run_id = r.at("run_id").get<std::string>();
      m.command = r.at("command").get<std::string>();
      m.config_json = r.at("config").dump();
      m.inputs = r.at("inputs").get<std::vector<std::string>>();
      m.outputs = r.at("outputs").get<std::vector<std::string>>();
      m.tool_version = r.at("tool_version").get<std::string>();
      runs.push_back(std::move(m));
    }
  } catch (const json::exception& e) {
    throw IoError("malformed manifest " + path.string() + ": " + e.what());
  }
  return runs;
}

}  // namespace vle
