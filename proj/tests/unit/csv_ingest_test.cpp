#include "doctest.h"
#include "test_support.hpp"
#include "vle/csv.hpp"
#include "vle/errors.hpp"
#include "vle/ingest.hpp"
#include "vle/synthetic.hpp"

using namespace vle;
using vle::testing::TempDir;

TEST_CASE("csv parses quotes, CRLF and a byte-order mark") {
  const auto t = csv::parse("\xEF\xBB\xBF" "a,b\r\n\"x,1\",\"say \"\"hi\"\"\"\r\n3,\r\n\r\n", "t.csv");
  REQUIRE(t.header == std::vector<std::string>{"a", "b"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0].fields == std::vector<std::string>{"x,1", "say \"hi\""});
  CHECK(t.rows[1].fields == std::vector<std::string>{"3", ""});
  CHECK(t.rows[1].line == 3);
}

TEST_CASE("csv rejects an unterminated quote") {
  try {
    csv::parse("a\n\"open\n", "bad.csv");
    FAIL("expected a parse error");
  } catch (const IngestError& e) {
    CHECK(e.kind() == "IngestError::Parse");
  }
}

TEST_CASE("csv escape and write_row round-trip") {
  std::ostringstream out;
  csv::write_row(out, {"plain", "a,b", "q\"q", ""});
  const auto t = csv::parse("h1,h2,h3,h4\n" + out.str(), "rt.csv");
  CHECK(t.rows.at(0).fields == std::vector<std::string>{"plain", "a,b", "q\"q", ""});
}

namespace {

synth::Generated small_bundle(std::size_t n = 60, std::uint64_t seed = 3) {
  synth::SynthConfig cfg;
  cfg.n_students = n;
  cfg.seed = seed;
  return synth::generate(cfg);
}

}  // namespace

TEST_CASE("bundle write then load gives identical tables") {
  TempDir dir("ingest_rt");
  const auto g = small_bundle();
  write_bundle(g.bundle, dir.path());
  const RawBundle loaded = load_bundle(dir.path());
  CHECK(loaded.same_tables(g.bundle));
  CHECK(validate_bundle(loaded).ok);
}

TEST_CASE("missing table is named") {
  TempDir dir("ingest_missing");
  write_bundle(small_bundle().bundle, dir.path());
  std::filesystem::remove(dir / "vle.csv");
  try {
    load_bundle(dir.path());
    FAIL("expected MissingTable");
  } catch (const IngestError& e) {
    CHECK(e.kind() == "IngestError::MissingTable");
    CHECK(std::string(e.what()).find("vle.csv") != std::string::npos);
  }
}

TEST_CASE("file names and headers match case-insensitively; ? counts as missing") {
  TempDir dir("ingest_case");
  write_bundle(small_bundle().bundle, dir.path());
  std::filesystem::rename(dir / "studentInfo.csv", dir / "STUDENTINFO.CSV");
  std::string reg = vle::testing::read_text(dir / "studentRegistration.csv");
  const auto nl = reg.find('\n');
  std::string header = reg.substr(0, nl);
  for (char& ch : header) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  reg = header + reg.substr(nl);
  vle::testing::write_text(dir / "studentRegistration.csv", reg);

  std::string assess = vle::testing::read_text(dir / "assessments.csv");
  const auto first_row = assess.find('\n') + 1;
  const auto row_end = assess.find('\n', first_row);
  std::string row = assess.substr(first_row, row_end - first_row);
  row = row.substr(0, row.rfind(',')) + ",?";
  assess = assess.substr(0, first_row) + row + assess.substr(row_end);
  vle::testing::write_text(dir / "assessments.csv", assess);

  const RawBundle b = load_bundle(dir.path());
  CHECK(b.student_info.size() == 60);
  CHECK_FALSE(b.assessments.front().weight.has_value());
}

TEST_CASE("malformed numeric cell reports file, line and column") {
  TempDir dir("ingest_bad");
  write_bundle(small_bundle().bundle, dir.path());
  std::string vle_text = vle::testing::read_text(dir / "studentVle.csv");
  const auto pos = vle_text.find('\n') + 1;
  vle_text.insert(pos, "AAA,2013J,1,1,abc,3\n");
  vle::testing::write_text(dir / "studentVle.csv", vle_text);
  try {
    load_bundle(dir.path());
    FAIL("expected Parse");
  } catch (const IngestError& e) {
    CHECK(e.kind() == "IngestError::Parse");
    CHECK(std::string(e.what()).find("studentVle.csv:2") != std::string::npos);
  }
}

TEST_CASE("validate_bundle reports every violation") {
  RawBundle b = small_bundle().bundle;
  b.student_info.push_back(b.student_info.front());
  b.student_info.back().final_result = "Maybe";
  b.student_vle.front().id_site = 999999;
  b.student_registration.push_back({"ZZZ", "2099J", 1, 0, std::nullopt});
  const ValidationReport r = validate_bundle(b);
  CHECK_FALSE(r.ok);
  CHECK(r.violations.size() >= 4);
}

TEST_CASE("table_stats counts missing cells") {
  const auto g = small_bundle();
  const auto stats = table_stats(g.bundle);
  REQUIRE(stats.size() == kTableCount);
  std::size_t missing_unreg = 0;
  for (const auto& r : g.bundle.student_registration) missing_unreg += r.unregistration_date ? 0 : 1;
  const auto& reg = stats[static_cast<std::size_t>(TableId::StudentRegistration)];
  CHECK(reg.rows == g.bundle.student_registration.size());
  bool found = false;
  for (const auto& [col, n] : reg.missing_by_column) {
    if (col == "date_unregistration") {
      CHECK(n == missing_unreg);
      found = true;
    }
  }
  CHECK(found);
}
