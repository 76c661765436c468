#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace vle::csv {

/// One parsed record plus the 1-based line it started on.
struct Record {
  std::vector<std::string> fields;
  std::size_t line = 0;
};

struct Table {
  std::vector<std::string> header;
  std::vector<Record> rows;
};

/// Parses RFC-4180 style CSV: comma separated, double-quote quoting with ""
/// escapes, LF or CRLF line endings. A leading UTF-8 byte-order mark is
/// dropped. Blank trailing lines are ignored.
Table parse(std::string_view text, const std::string& source_name);

/// Streaming form of parse(): invokes `on_record` for every record, header
/// included, without materializing the table.
void scan(std::string_view text, const std::string& source_name,
          const std::function<void(const Record&)>& on_record);

std::string slurp(const std::filesystem::path& path);

Table read_file(const std::filesystem::path& path);

/// Quotes a field only when it contains a comma, quote, or line break.
std::string escape(std::string_view field);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace vle::csv
