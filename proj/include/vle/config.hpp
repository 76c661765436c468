#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "vle/features.hpp"
#include "vle/network.hpp"
#include "vle/training.hpp"

namespace vle::config {

using KeyValues = std::map<std::string, std::string>;

/// `key = value` lines; `#` starts a comment; blank lines ignored. A
/// repeated key keeps the last value. Throws ConfigError with line context.
KeyValues parse(std::string_view text, const std::string& source);
KeyValues read_file(const std::filesystem::path& path);

/// Everything a train or sweep run resolves from defaults, config file and flags.
struct RunSettings {
  features::PipelineOptions pipeline;
  train::TrainConfig train;
  nn::ModelConfig model;
};

/// Keys accepted by apply(), in documentation order.
const std::vector<std::string>& known_keys();

/// Seeds every stage from one base seed: split = seed, init = mix(seed, 1),
/// shuffle = mix(seed, 2). Keys init_seed/shuffle_seed override afterwards.
void set_seed(RunSettings& settings, std::uint64_t seed);

/// Applies keys in known_keys() order. Throws ConfigError on unknown keys or
/// malformed values.
void apply(RunSettings& settings, const KeyValues& values);

std::string to_json(const RunSettings& settings);

std::uint64_t parse_seed(const std::string& text, const std::string& what);

}  // namespace vle::config
