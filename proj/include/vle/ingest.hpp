#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace vle {

struct CourseRow {
  std::string code_module;
  std::string code_presentation;
  std::int64_t module_presentation_length = 0;
  bool operator==(const CourseRow&) const = default;
};

struct AssessmentRow {
  std::string code_module;
  std::string code_presentation;
  std::int64_t id_assessment = 0;
  std::string assessment_type;
  std::optional<std::int64_t> date;
  std::optional<double> weight;
  bool operator==(const AssessmentRow&) const = default;
};

struct VleRow {
  std::int64_t id_site = 0;
  std::string code_module;
  std::string code_presentation;
  std::string activity_type;
  std::optional<std::int64_t> week_from;
  std::optional<std::int64_t> week_to;
  bool operator==(const VleRow&) const = default;
};

struct StudentInfoRow {
  std::string code_module;
  std::string code_presentation;
  std::int64_t id_student = 0;
  std::string gender;
  std::string region;
  std::string highest_education;
  std::optional<std::string> imd_band;
  std::string age_band;
  std::int64_t num_of_prev_attempts = 0;
  std::int64_t studied_credits = 0;
  std::string disability;
  std::string final_result;
  bool operator==(const StudentInfoRow&) const = default;
};

struct RegistrationRow {
  std::string code_module;
  std::string code_presentation;
  std::int64_t id_student = 0;
  std::optional<std::int64_t> registration_date;
  std::optional<std::int64_t> unregistration_date;
  bool operator==(const RegistrationRow&) const = default;
};

struct StudentAssessmentRow {
  std::int64_t id_assessment = 0;
  std::int64_t id_student = 0;
  std::optional<std::int64_t> date_submitted;
  std::int64_t is_banked = 0;
  std::optional<double> score;
  bool operator==(const StudentAssessmentRow&) const = default;
};

struct StudentVleRow {
  std::string code_module;
  std::string code_presentation;
  std::int64_t id_student = 0;
  std::int64_t id_site = 0;
  std::int64_t date = 0;
  std::int64_t sum_click = 0;
  bool operator==(const StudentVleRow&) const = default;
};

/// In-memory image of the seven OULAD tables. Immutable after load; safe to
/// share read-only.
struct RawBundle {
  std::vector<CourseRow> courses;
  std::vector<AssessmentRow> assessments;
  std::vector<VleRow> vle;
  std::vector<StudentInfoRow> student_info;
  std::vector<RegistrationRow> student_registration;
  std::vector<StudentAssessmentRow> student_assessment;
  std::vector<StudentVleRow> student_vle;
  std::string source_dir;

  /// Compares table contents; source_dir is provenance and is not compared.
  bool same_tables(const RawBundle& other) const;
};

enum class TableId {
  Courses,
  Assessments,
  Vle,
  StudentInfo,
  StudentRegistration,
  StudentAssessment,
  StudentVle,
};
inline constexpr std::size_t kTableCount = 7;

/// Canonical file name ("studentInfo.csv", ...).
const char* table_file_name(TableId id);
/// Canonical column names, in the order the writer emits them.
const std::vector<std::string>& table_columns(TableId id);
inline constexpr std::array<TableId, kTableCount> kAllTables = {
    TableId::Courses,      TableId::Assessments,         TableId::Vle,
    TableId::StudentInfo,  TableId::StudentRegistration, TableId::StudentAssessment,
    TableId::StudentVle};

/// The four outcome classes in label order.
inline constexpr std::array<const char*, 4> kClassNames = {"Distinction", "Fail", "Pass",
                                                           "Withdrawn"};

/// Reads the seven tables from `dir`. File names are matched
/// case-insensitively; extra columns are ignored with a warning on stderr.
/// Throws IngestError with variant MissingTable or Parse.
RawBundle load_bundle(const std::filesystem::path& dir);

/// Writes the seven tables using canonical names and column order.
void write_bundle(const RawBundle& bundle, const std::filesystem::path& dir);

struct TableSummary {
  std::string name;
  std::size_t rows = 0;
  std::size_t columns = 0;
  std::size_t missing_cells = 0;
  std::vector<std::pair<std::string, std::size_t>> missing_by_column;
};

struct ValidationReport {
  std::vector<TableSummary> tables;
  std::vector<std::string> violations;
  bool ok = true;
};

ValidationReport validate_bundle(const RawBundle& bundle);

std::vector<TableSummary> table_stats(const RawBundle& bundle);

}  // namespace vle
