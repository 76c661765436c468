#include "vle/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <tuple>
#include <unordered_map>

#include "vle/csv.hpp"
#include "vle/errors.hpp"

namespace vle {
namespace {

namespace fs = std::filesystem;

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool is_missing(const std::string& cell) { return cell.empty() || cell == "?"; }

std::string format_int(std::int64_t v) { return std::to_string(v); }

std::string format_real(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

template <typename T>
std::string format_opt(const std::optional<T>& v) {
  if (!v) return {};
  if constexpr (std::is_same_v<T, double>) {
    return format_real(*v);
  } else if constexpr (std::is_same_v<T, std::string>) {
    return *v;
  } else {
    return format_int(*v);
  }
}

/// Resolves canonical columns against a parsed header and converts cells.
class RowReader {
 public:
  RowReader(const std::vector<std::string>& header, const std::string& file,
            const std::vector<std::string>& columns)
      : file_(file) {
    std::unordered_map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < header.size(); ++i) position[lower(header[i])] = i;
    for (const auto& name : columns) {
      auto it = position.find(lower(name));
      if (it == position.end()) {
        throw IngestError("Parse", file + ":1:" + name + ": required column missing from header");
      }
      index_.push_back(it->second);
      position.erase(it);
    }
    for (const auto& [name, pos] : position) {
      std::cerr << "warning: " << file << ": ignoring unknown column '" << header[pos] << "'\n";
    }
    columns_ = columns;
    width_ = header.size();
  }

  void bind(const csv::Record& record) {
    if (record.fields.size() != width_) {
      throw IngestError("Parse", file_ + ":" + std::to_string(record.line) + ": expected " +
                                     std::to_string(width_) + " fields, found " +
                                     std::to_string(record.fields.size()));
    }
    record_ = &record;
  }

  const std::string& text(std::size_t col) const { return record_->fields[index_[col]]; }

  std::optional<std::string> opt_text(std::size_t col) const {
    const auto& cell = text(col);
    if (cell.empty()) return std::nullopt;
    return cell;
  }

  std::optional<std::int64_t> opt_int(std::size_t col) const {
    const auto& cell = text(col);
    if (is_missing(cell)) return std::nullopt;
    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc() || ptr != cell.data() + cell.size()) {
      // Some exports write integral columns as "12.0".
      auto real = parse_real(cell);
      if (real && *real == static_cast<double>(static_cast<std::int64_t>(*real))) {
        return static_cast<std::int64_t>(*real);
      }
      fail(col, "not an integer: '" + cell + "'");
    }
    return value;
  }

  std::int64_t req_int(std::size_t col) const {
    auto v = opt_int(col);
    if (!v) fail(col, "missing value");
    return *v;
  }

  std::optional<double> opt_real(std::size_t col) const {
    const auto& cell = text(col);
    if (is_missing(cell)) return std::nullopt;
    auto v = parse_real(cell);
    if (!v) fail(col, "not a number: '" + cell + "'");
    return v;
  }

 private:
  static std::optional<double> parse_real(const std::string& cell) {
    double value = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc() || ptr != cell.data() + cell.size()) return std::nullopt;
    return value;
  }

  [[noreturn]] void fail(std::size_t col, const std::string& what) const {
    throw IngestError("Parse", file_ + ":" + std::to_string(record_->line) + ":" + columns_[col] +
                                   ": " + what);
  }

  std::string file_;
  std::vector<std::string> columns_;
  std::vector<std::size_t> index_;
  std::size_t width_ = 0;
  const csv::Record* record_ = nullptr;
};

std::vector<std::string> cells(const CourseRow& r) {
  return {r.code_module, r.code_presentation, format_int(r.module_presentation_length)};
}
std::vector<std::string> cells(const AssessmentRow& r) {
  return {r.code_module,     r.code_presentation, format_int(r.id_assessment),
          r.assessment_type, format_opt(r.date),  format_opt(r.weight)};
}
std::vector<std::string> cells(const VleRow& r) {
  return {format_int(r.id_site), r.code_module,          r.code_presentation,
          r.activity_type,       format_opt(r.week_from), format_opt(r.week_to)};
}
std::vector<std::string> cells(const StudentInfoRow& r) {
  return {r.code_module,
          r.code_presentation,
          format_int(r.id_student),
          r.gender,
          r.region,
          r.highest_education,
          format_opt(r.imd_band),
          r.age_band,
          format_int(r.num_of_prev_attempts),
          format_int(r.studied_credits),
          r.disability,
          r.final_result};
}
std::vector<std::string> cells(const RegistrationRow& r) {
  return {r.code_module, r.code_presentation, format_int(r.id_student),
          format_opt(r.registration_date), format_opt(r.unregistration_date)};
}
std::vector<std::string> cells(const StudentAssessmentRow& r) {
  return {format_int(r.id_assessment), format_int(r.id_student), format_opt(r.date_submitted),
          format_int(r.is_banked), format_opt(r.score)};
}
std::vector<std::string> cells(const StudentVleRow& r) {
  return {r.code_module,          r.code_presentation, format_int(r.id_student),
          format_int(r.id_site), format_int(r.date),   format_int(r.sum_click)};
}

template <typename Row>
void write_table(const fs::path& dir, TableId id, const std::vector<Row>& rows) {
  const fs::path path = dir / table_file_name(id);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  csv::write_row(out, table_columns(id));
  for (const auto& row : rows) csv::write_row(out, cells(row));
  if (!out) throw IoError("write failed: " + path.string());
}

template <typename Row>
TableSummary summarize(TableId id, const std::vector<Row>& rows) {
  TableSummary s;
  s.name = table_file_name(id);
  const auto& columns = table_columns(id);
  s.columns = columns.size();
  s.rows = rows.size();
  std::vector<std::size_t> missing(columns.size(), 0);
  for (const auto& row : rows) {
    auto c = cells(row);
    for (std::size_t i = 0; i < c.size(); ++i) missing[i] += c[i].empty() ? 1 : 0;
  }
  for (std::size_t i = 0; i < columns.size(); ++i) {
    s.missing_cells += missing[i];
    s.missing_by_column.emplace_back(columns[i], missing[i]);
  }
  return s;
}

std::map<std::string, fs::path> index_directory(const fs::path& dir) {
  std::map<std::string, fs::path> files;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file()) files[lower(entry.path().filename().string())] = entry.path();
  }
  if (ec) throw IngestError("MissingTable", "cannot read directory " + dir.string());
  return files;
}

}  // namespace

const char* table_file_name(TableId id) {
  switch (id) {
    case TableId::Courses: return "courses.csv";
    case TableId::Assessments: return "assessments.csv";
    case TableId::Vle: return "vle.csv";
    case TableId::StudentInfo: return "studentInfo.csv";
    case TableId::StudentRegistration: return "studentRegistration.csv";
    case TableId::StudentAssessment: return "studentAssessment.csv";
    case TableId::StudentVle: return "studentVle.csv";
  }
  return "";
}

const std::vector<std::string>& table_columns(TableId id) {
  static const std::vector<std::string> courses = {"code_module", "code_presentation",
                                                   "module_presentation_length"};
  static const std::vector<std::string> assessments = {
      "code_module", "code_presentation", "id_assessment", "assessment_type", "date", "weight"};
  static const std::vector<std::string> vle = {"id_site",       "code_module", "code_presentation",
                                               "activity_type", "week_from",   "week_to"};
  static const std::vector<std::string> info = {
      "code_module", "code_presentation", "id_student",     "gender",
      "region",      "highest_education", "imd_band",       "age_band",
      "num_of_prev_attempts", "studied_credits", "disability", "final_result"};
  static const std::vector<std::string> registration = {
      "code_module", "code_presentation", "id_student", "date_registration", "date_unregistration"};
  static const std::vector<std::string> student_assessment = {
      "id_assessment", "id_student", "date_submitted", "is_banked", "score"};
  static const std::vector<std::string> student_vle = {
      "code_module", "code_presentation", "id_student", "id_site", "date", "sum_click"};
  switch (id) {
    case TableId::Courses: return courses;
    case TableId::Assessments: return assessments;
    case TableId::Vle: return vle;
    case TableId::StudentInfo: return info;
    case TableId::StudentRegistration: return registration;
    case TableId::StudentAssessment: return student_assessment;
    case TableId::StudentVle: return student_vle;
  }
  return courses;
}

bool RawBundle::same_tables(const RawBundle& o) const {
  return courses == o.courses && assessments == o.assessments && vle == o.vle &&
         student_info == o.student_info && student_registration == o.student_registration &&
         student_assessment == o.student_assessment && student_vle == o.student_vle;
}

RawBundle load_bundle(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw IngestError("MissingTable", "data directory not found: " + dir.string());
  }
  const auto files = index_directory(dir);

  // Resolve every file before parsing so a missing table is reported first.
  std::array<fs::path, kTableCount> paths;
  for (TableId id : kAllTables) {
    const std::string file = table_file_name(id);
    auto it = files.find(lower(file));
    if (it == files.end()) throw IngestError("MissingTable", file + " not found in " + dir.string());
    paths[static_cast<std::size_t>(id)] = it->second;
  }

  auto read = [&](TableId id, auto&& emit) {
    const std::string file = table_file_name(id);
    const std::string text = csv::slurp(paths[static_cast<std::size_t>(id)]);
    std::optional<RowReader> reader;
    csv::scan(text, file, [&](const csv::Record& rec) {
      if (!reader) {
        reader.emplace(rec.fields, file, table_columns(id));
        return;
      }
      reader->bind(rec);
      emit(*reader);
    });
    if (!reader) throw IngestError("Parse", file + ":1: missing header row");
  };

  RawBundle b;
  b.source_dir = dir.string();
  read(TableId::Courses, [&](const RowReader& r) {
    b.courses.push_back({r.text(0), r.text(1), r.req_int(2)});
  });
  read(TableId::Assessments, [&](const RowReader& r) {
    b.assessments.push_back({r.text(0), r.text(1), r.req_int(2), r.text(3), r.opt_int(4), r.opt_real(5)});
  });
  read(TableId::Vle, [&](const RowReader& r) {
    b.vle.push_back({r.req_int(0), r.text(1), r.text(2), r.text(3), r.opt_int(4), r.opt_int(5)});
  });
  read(TableId::StudentInfo, [&](const RowReader& r) {
    b.student_info.push_back({r.text(0), r.text(1), r.req_int(2), r.text(3), r.text(4), r.text(5),
                              r.opt_text(6), r.text(7), r.req_int(8), r.req_int(9), r.text(10),
                              r.text(11)});
  });
  read(TableId::StudentRegistration, [&](const RowReader& r) {
    b.student_registration.push_back({r.text(0), r.text(1), r.req_int(2), r.opt_int(3), r.opt_int(4)});
  });
  read(TableId::StudentAssessment, [&](const RowReader& r) {
    b.student_assessment.push_back({r.req_int(0), r.req_int(1), r.opt_int(2), r.req_int(3), r.opt_real(4)});
  });
  read(TableId::StudentVle, [&](const RowReader& r) {
    b.student_vle.push_back({r.text(0), r.text(1), r.req_int(2), r.req_int(3), r.req_int(4), r.req_int(5)});
  });
  return b;
}

void write_bundle(const RawBundle& b, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_table(dir, TableId::Courses, b.courses);
  write_table(dir, TableId::Assessments, b.assessments);
  write_table(dir, TableId::Vle, b.vle);
  write_table(dir, TableId::StudentInfo, b.student_info);
  write_table(dir, TableId::StudentRegistration, b.student_registration);
  write_table(dir, TableId::StudentAssessment, b.student_assessment);
  write_table(dir, TableId::StudentVle, b.student_vle);
}

std::vector<TableSummary> table_stats(const RawBundle& b) {
  return {summarize(TableId::Courses, b.courses),
          summarize(TableId::Assessments, b.assessments),
          summarize(TableId::Vle, b.vle),
          summarize(TableId::StudentInfo, b.student_info),
          summarize(TableId::StudentRegistration, b.student_registration),
          summarize(TableId::StudentAssessment, b.student_assessment),
          summarize(TableId::StudentVle, b.student_vle)};
}

ValidationReport validate_bundle(const RawBundle& b) {
  ValidationReport report;
  report.tables = table_stats(b);
  auto& v = report.violations;

  using Presentation = std::pair<std::string, std::string>;
  using Enrolment = std::tuple<std::string, std::string, std::int64_t>;

  std::set<Presentation> courses;
  for (std::size_t i = 0; i < b.courses.size(); ++i) {
    const auto& r = b.courses[i];
    if (!courses.emplace(r.code_module, r.code_presentation).second) {
      v.push_back("courses.csv row " + std::to_string(i + 2) + ": duplicate presentation (" +
                  r.code_module + ", " + r.code_presentation + ")");
    }
  }
  auto check_presentation = [&](const char* table, std::size_t i, const std::string& module,
                                const std::string& presentation) {
    if (!courses.contains({module, presentation})) {
      v.push_back(std::string(table) + " row " + std::to_string(i + 2) + ": presentation (" + module +
                  ", " + presentation + ") not in courses.csv");
    }
  };

  std::set<std::int64_t> assessment_ids;
  for (std::size_t i = 0; i < b.assessments.size(); ++i) {
    const auto& r = b.assessments[i];
    check_presentation("assessments.csv", i, r.code_module, r.code_presentation);
    assessment_ids.insert(r.id_assessment);
  }
  std::set<std::int64_t> site_ids;
  for (std::size_t i = 0; i < b.vle.size(); ++i) {
    const auto& r = b.vle[i];
    check_presentation("vle.csv", i, r.code_module, r.code_presentation);
    site_ids.insert(r.id_site);
  }

  std::set<Enrolment> enrolments;
  std::set<std::int64_t> student_ids;
  for (std::size_t i = 0; i < b.student_info.size(); ++i) {
    const auto& r = b.student_info[i];
    const std::string row = "studentInfo.csv row " + std::to_string(i + 2);
    check_presentation("studentInfo.csv", i, r.code_module, r.code_presentation);
    if (!enrolments.emplace(r.code_module, r.code_presentation, r.id_student).second) {
      v.push_back(row + ": duplicate key (" + r.code_module + ", " + r.code_presentation + ", " +
                  std::to_string(r.id_student) + ")");
    }
    student_ids.insert(r.id_student);
    if (std::find(kClassNames.begin(), kClassNames.end(), r.final_result) == kClassNames.end()) {
      v.push_back(row + ": unknown final_result '" + r.final_result + "'");
    }
  }

  auto check_enrolment = [&](const char* table, std::size_t i, const std::string& module,
                             const std::string& presentation, std::int64_t student) {
    if (!enrolments.contains({module, presentation, student})) {
      v.push_back(std::string(table) + " row " + std::to_string(i + 2) + ": student (" + module +
                  ", " + presentation + ", " + std::to_string(student) + ") not in studentInfo.csv");
    }
  };

  for (std::size_t i = 0; i < b.student_registration.size(); ++i) {
    const auto& r = b.student_registration[i];
    check_presentation("studentRegistration.csv", i, r.code_module, r.code_presentation);
    check_enrolment("studentRegistration.csv", i, r.code_module, r.code_presentation, r.id_student);
  }
  for (std::size_t i = 0; i < b.student_assessment.size(); ++i) {
    const auto& r = b.student_assessment[i];
    const std::string row = "studentAssessment.csv row " + std::to_string(i + 2);
    if (!assessment_ids.contains(r.id_assessment)) {
      v.push_back(row + ": id_assessment " + std::to_string(r.id_assessment) + " not in assessments.csv");
    }
    if (!student_ids.contains(r.id_student)) {
      v.push_back(row + ": id_student " + std::to_string(r.id_student) + " not in studentInfo.csv");
    }
  }
  for (std::size_t i = 0; i < b.student_vle.size(); ++i) {
    const auto& r = b.student_vle[i];
    check_presentation("studentVle.csv", i, r.code_module, r.code_presentation);
    check_enrolment("studentVle.csv", i, r.code_module, r.code_presentation, r.id_student);
    if (!site_ids.contains(r.id_site)) {
      v.push_back("studentVle.csv row " + std::to_string(i + 2) + ": id_site " +
                  std::to_string(r.id_site) + " not in vle.csv");
    }
  }

  report.ok = v.empty();
  return report;
}

}  // namespace vle
