#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace vle {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunManifest {
  std::string run_id;
  std::string command;
  std::string config_json;  // resolved configuration, JSON object text
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string tool_version = kToolVersion;
};

/// UTC timestamp plus an 8-hex-digit hash of (seed, command).
std::string make_run_id(const std::string& command, std::uint64_t seed);

/// Appends the run to `<dir>/manifest.json`, creating the directory and the
/// file when needed. Earlier entries are preserved verbatim.
void append_manifest(const RunManifest& manifest, const std::filesystem::path& dir);

std::vector<RunManifest> read_manifest(const std::filesystem::path& dir);

}  // namespace vle
