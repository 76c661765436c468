#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vle/ingest.hpp"

namespace vle::features {

inline constexpr std::size_t kFeatureCount = 15;
inline constexpr std::size_t kClassCount = 4;

/// Column positions of the model input, in frame order.
enum Column : std::size_t {
  kCodeModule,
  kCodePresentation,
  kGender,
  kRegion,
  kHighestEducation,
  kImdBand,
  kAgeBand,
  kPrevAttempts,
  kStudiedCredits,
  kDisability,
  kRegistrationDate,
  kTotalRegDays,
  kWeight,
  kDate,
  kTotalClicks,
};

inline constexpr std::array<const char*, kFeatureCount> kFeatureNames = {
    "code_module",      "code_presentation", "gender",          "region",
    "highest_education", "imd_band",         "age_band",        "num_of_prev_attempts",
    "studied_credits",  "disability",        "registration_date", "total_reg_days",
    "weight",           "date",              "total_clicks"};

/// Categorical columns, each encoded through its own sorted vocabulary.
inline constexpr std::array<Column, 8> kCategoricalColumns = {
    kCodeModule, kCodePresentation, kGender,  kRegion,
    kHighestEducation, kImdBand,    kAgeBand, kDisability};

inline constexpr std::int64_t kDefaultUnregistrationFill = 270;
inline constexpr double kMissingCategory = -1.0;

/// Label for a final_result string; throws LabelError for anything else.
int label_of(const std::string& final_result);

using PresentationKey = std::pair<std::string, std::string>;

struct DailyClicks {
  std::string code_module;
  std::string code_presentation;
  std::int64_t id_student = 0;
  std::int64_t date = 0;
  std::int64_t total_clicks = 0;
  bool operator==(const DailyClicks&) const = default;
};

/// Sums sum_click per (module, presentation, student, date); output sorted by
/// that key.
std::vector<DailyClicks> aggregate_clicks(const RawBundle& bundle);

/// Copy of the bundle with every missing unregistration_date set to `fill`.
RawBundle fill_unregistration(const RawBundle& bundle,
                              std::int64_t fill = kDefaultUnregistrationFill);

/// unregistration_date - registration_date for each registration row, in
/// table order. A missing registration_date counts as day `registration_fill`.
/// Throws RegistrationError on a missing unregistration_date (fill first) or
/// a negative duration.
std::vector<std::int64_t> derive_total_reg_days(const RawBundle& bundle,
                                                std::int64_t registration_fill = 0);

/// Mean assessments.weight per presentation (missing weights skipped).
/// Presentations listed in courses without any weight map to 0 with a warning.
std::map<PresentationKey, double> average_assessment_weight(const RawBundle& bundle);

/// One row per student-day with VLE activity. Demographics stay in the
/// shared `students` table; rows reference it by index.
struct MergedRow {
  std::uint32_t student = 0;  // index into MergedFrame::students
  std::int64_t registration_date = 0;
  std::int64_t total_reg_days = 0;
  double weight = 0;
  std::int64_t date = 0;
  std::int64_t total_clicks = 0;
};

struct MergedFrame {
  std::vector<StudentInfoRow> students;
  std::vector<MergedRow> rows;
};

/// student_info ⋈ registration ⋈ daily clicks on (module, presentation,
/// student); weight attached by presentation. Expects unregistration filled.
MergedFrame merge_tables(const RawBundle& bundle, const std::vector<DailyClicks>& daily,
                         const std::map<PresentationKey, double>& weights,
                         std::int64_t registration_fill = 0);

/// Sorted distinct values per categorical column (keyed by column name).
using Vocabularies = std::map<std::string, std::vector<std::string>>;

/// Reference from a frame row back to its source student-day.
struct RowId {
  std::string code_module;
  std::string code_presentation;
  std::int64_t id_student = 0;
  std::int64_t date = 0;
  bool operator==(const RowId&) const = default;
};

/// Row-major numeric frame with exactly kFeatureCount columns.
struct EncodedFrame {
  std::vector<double> values;  // rows() * kFeatureCount
  std::vector<int> labels;
  std::vector<RowId> ids;

  std::size_t rows() const { return labels.size(); }
  double at(std::size_t row, std::size_t col) const { return values[row * kFeatureCount + col]; }
  double& at(std::size_t row, std::size_t col) { return values[row * kFeatureCount + col]; }
  void append_row_from(const EncodedFrame& other, std::size_t row);
  EncodedFrame select(const std::vector<std::size_t>& rows) const;
};

/// Fits vocabularies on the merged frame and encodes it.
std::pair<EncodedFrame, Vocabularies> encode_categoricals(const MergedFrame& merged);

/// Encodes with previously fitted vocabularies; an unseen value throws
/// EncodeError::UnknownCategory.
EncodedFrame encode_categoricals(const MergedFrame& merged, const Vocabularies& vocabularies);

struct Scaler {
  std::array<double, kFeatureCount> mean{};
  std::array<double, kFeatureCount> stddev{};
  std::array<bool, kFeatureCount> active{};
};

/// Population mean/std per active column over `rows` of the frame.
Scaler fit_scaler(const EncodedFrame& frame, const std::vector<std::size_t>& rows,
                  const std::array<bool, kFeatureCount>& active);

/// (x - mean) / std on active columns; zero-variance and inactive columns
/// become 0.
void apply_scaler(EncodedFrame& frame, const Scaler& scaler);

struct CorrelationEntry {
  std::string feature;
  double pearson_r = 0;
  bool zero_variance = false;
};

/// Pearson r of every feature against the label, sorted by |r| descending
/// (ties keep column order). Throws CorrelationError with fewer than 2 rows.
std::vector<CorrelationEntry> pearson_correlation(const EncodedFrame& frame);

enum class CutoffMode { DateRange, RowIndex };

struct FilterResult {
  EncodedFrame frame;
  double cutoff_date = 0;
};

/// Sorts by date ascending (stable) and keeps the first `pct` percent of the
/// course. DateRange keeps rows with date <= min + pct/100 * (max - min);
/// RowIndex keeps the first ceil(pct/100 * n) sorted rows. Throws
/// FilterError::EmptySlice when nothing survives.
FilterResult temporal_filter(const EncodedFrame& frame, double pct,
                             CutoffMode mode = CutoffMode::DateRange);

/// Caps each row's registration span at the cutoff:
/// total_reg_days = max(0, min(registration + total_reg_days, cutoff) - registration).
void clamp_registration_to_cutoff(EncodedFrame& frame, double cutoff_date);

/// Collapses rows to one per student: clicks summed, date = last active day.
EncodedFrame aggregate_per_student(const EncodedFrame& frame);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Per-class seeded shuffle; round(train_frac * count) rows of each class go
/// to train. Both index lists come back sorted. Throws
/// SplitError::Degenerate when a class has fewer than 2 rows.
Split stratified_split(const std::vector<int>& labels, double train_frac, std::uint64_t seed);

struct ClassWeights {
  std::array<double, kClassCount> weight = {1.5, 1.5, 1.0, 1.0};
  double operator[](int label) const { return weight[static_cast<std::size_t>(label)]; }
};

/// Default {Distinction 1.5, Fail 1.5, Pass 1, Withdrawn 1}, or the
/// override. Throws ConfigError on a non-positive weight.
ClassWeights class_weights(const std::optional<std::array<double, kClassCount>>& override_weights = std::nullopt);

enum class FeatureSet { Demo, DemoClick, DemoClickAssess, All };

FeatureSet parse_feature_set(const std::string& name);
std::string to_string(FeatureSet set);
std::array<bool, kFeatureCount> active_columns(FeatureSet set);

struct PipelineOptions {
  double duration_pct = 100.0;
  FeatureSet feature_set = FeatureSet::All;
  bool per_student = false;
  bool no_leak = false;
  CutoffMode cutoff_mode = CutoffMode::DateRange;
  std::int64_t unregistration_fill = kDefaultUnregistrationFill;
  std::int64_t registration_fill = 0;
  double train_frac = 0.70;
  std::uint64_t seed = 0;
};

/// Everything needed to reproduce a frame's encoding at inference time.
struct Sidecar {
  Vocabularies vocabularies;
  Scaler scaler;
  PipelineOptions options;
  double cutoff_date = 0;
  std::size_t rows = 0;
};

struct FeatureFrame {
  EncodedFrame data;  // scaled values
  Sidecar sidecar;
  Split split;
};

/// The full preprocessing chain from a validated bundle to a scaled,
/// split frame.
FeatureFrame build_feature_frame(const RawBundle& bundle, const PipelineOptions& options);

// Persistence: features.csv + sidecar.json in one directory.
void write_feature_frame(const FeatureFrame& frame, const std::filesystem::path& dir);
/// Reads `features_file` and the sidecar.json beside it; the split is
/// recomputed from the sidecar's seed and train fraction.
FeatureFrame read_feature_frame(const std::filesystem::path& features_file);
void write_correlation(const std::vector<CorrelationEntry>& table, const std::filesystem::path& path);

std::string sidecar_json(const Sidecar& sidecar);
Sidecar parse_sidecar(const std::string& text);

}  // namespace vle::features
