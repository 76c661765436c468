#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vle/ingest.hpp"

namespace vle::synth {

struct SynthConfig {
  std::size_t n_students = 1000;
  std::size_t n_modules = 2;
  std::int64_t course_length_days = 270;
  /// Class shares in label order (Distinction, Fail, Pass, Withdrawn).
  std::array<double, 4> class_mix = default_mix();
  /// 0 = no class signal, 1 = fully planted signal.
  double signal_strength = 1.0;
  std::uint64_t seed = 0;

  /// OULAD-like skew (Pass .59, Distinction .18, Fail .13, Withdrawn .09),
  /// renormalized so the shares sum to one.
  static std::array<double, 4> default_mix();
  void validate() const;
};

struct StudentLedger {
  std::int64_t id_student = 0;
  std::string code_module;
  std::string code_presentation;
  int label = 0;
  std::size_t active_days = 0;
  std::int64_t total_clicks = 0;
  std::int64_t registration_date = 0;
  std::optional<std::int64_t> unregistration_date;
};

/// What the generator emitted, for cross-checking downstream modules.
struct GenerationLedger {
  SynthConfig config;
  std::vector<StudentLedger> students;
  std::array<std::size_t, kTableCount> table_rows{};

  std::size_t rows(TableId id) const { return table_rows[static_cast<std::size_t>(id)]; }
  std::size_t total_active_days() const;
  std::int64_t total_clicks() const;
};

struct Generated {
  RawBundle bundle;
  GenerationLedger ledger;
};

/// Builds a bundle in memory. Deterministic in (config, seed).
Generated generate(const SynthConfig& config);

/// Writes the seven CSVs plus ledger.json into `out_dir`.
GenerationLedger generate_bundle(const SynthConfig& config, const std::filesystem::path& out_dir);

void write_ledger(const GenerationLedger& ledger, const std::filesystem::path& path);
GenerationLedger read_ledger(const std::filesystem::path& path);

/// Accuracy of the two-rule reference classifier: unregistration present
/// -> Withdrawn; otherwise thresholds on mean daily clicks (fit on the
/// ledger itself) separate Fail < Pass < Distinction.
double oracle_accuracy(const GenerationLedger& ledger);

}  // namespace vle::synth
