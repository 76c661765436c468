#include <cmath>
#include <map>
#include <set>
#include <span>

#include "doctest.h"
#include "test_support.hpp"
#include "vle/errors.hpp"
#include "vle/features.hpp"
#include "vle/rng.hpp"
#include "vle/synthetic.hpp"

using namespace vle;
using namespace vle::features;

namespace {

RawBundle tiny_bundle() {
  RawBundle b;
  b.courses = {{"AAA", "2013J", 268}};
  b.assessments = {{"AAA", "2013J", 1, "TMA", 20, 0.0}, {"AAA", "2013J", 2, "Exam", 200, 100.0}};
  b.vle = {{10, "AAA", "2013J", "resource", std::nullopt, std::nullopt}};
  b.student_info = {{"AAA", "2013J", 1, "M", "North", "HE", std::nullopt, "0-35", 0, 60, "N", "Pass"},
                    {"AAA", "2013J", 2, "F", "South", "A Level", "10-20%", "35-55", 1, 120, "Y", "Withdrawn"},
                    {"AAA", "2013J", 3, "F", "South", "HE", "0-10%", "0-35", 0, 30, "N", "Fail"}};
  b.student_registration = {{"AAA", "2013J", 1, -30, std::nullopt}, {"AAA", "2013J", 2, -10, 100}};
  b.student_vle = {{"AAA", "2013J", 1, 10, 5, 3},  {"AAA", "2013J", 1, 10, 5, 5}, {"AAA", "2013J", 1, 10, 7, 1},
                   {"AAA", "2013J", 1, 10, 9, 2},  {"AAA", "2013J", 2, 10, 1, 4}, {"AAA", "2013J", 3, 10, 2, 6}};
  return b;
}

synth::Generated synth_bundle(std::size_t n, std::uint64_t seed) {
  synth::SynthConfig cfg;
  cfg.n_students = n;
  cfg.seed = seed;
  return synth::generate(cfg);
}

}  // namespace

TEST_CASE("label_of maps the four outcomes in order") {
  CHECK(label_of("Distinction") == 0);
  CHECK(label_of("Fail") == 1);
  CHECK(label_of("Pass") == 2);
  CHECK(label_of("Withdrawn") == 3);
  CHECK_THROWS_AS(label_of("pass"), LabelError);
}

TEST_CASE("aggregate_clicks sums per student-day") {
  const auto daily = aggregate_clicks(tiny_bundle());
  REQUIRE(daily.size() == 5);
  CHECK(daily[0] == DailyClicks{"AAA", "2013J", 1, 5, 8});
  RawBundle empty = tiny_bundle();
  empty.student_vle.clear();
  CHECK(aggregate_clicks(empty).empty());
}

TEST_CASE("aggregate_clicks agrees with a hash-map recount") {
  const auto g = synth_bundle(300, 11);
  std::map<std::tuple<std::string, std::string, std::int64_t, std::int64_t>, std::int64_t> oracle;
  for (const auto& r : g.bundle.student_vle) oracle[{r.code_module, r.code_presentation, r.id_student, r.date}] += r.sum_click;
  const auto daily = aggregate_clicks(g.bundle);
  REQUIRE(daily.size() == oracle.size());
  for (const auto& d : daily) CHECK(oracle.at({d.code_module, d.code_presentation, d.id_student, d.date}) == d.total_clicks);
}

TEST_CASE("fill_unregistration and derive_total_reg_days") {
  const RawBundle b = tiny_bundle();
  CHECK_THROWS_AS(derive_total_reg_days(b), RegistrationError);
  const RawBundle filled = fill_unregistration(b);
  CHECK(filled.student_registration[0].unregistration_date == 270);
  CHECK(filled.student_registration[1].unregistration_date == 100);
  CHECK(derive_total_reg_days(filled) == std::vector<std::int64_t>{300, 110});

  RawBundle negative = filled;
  negative.student_registration[1].unregistration_date = -20;
  CHECK_THROWS_AS(derive_total_reg_days(negative), RegistrationError);
}

TEST_CASE("average_assessment_weight") {
  const auto w = average_assessment_weight(tiny_bundle());
  CHECK(w.at({"AAA", "2013J"}) == doctest::Approx(50.0));

  RawBundle b = tiny_bundle();
  b.courses.push_back({"BBB", "2014J", 260});
  b.assessments.push_back({"BBB", "2014J", 3, "CMA", 30, 12.5});
  b.courses.push_back({"CCC", "2014J", 260});
  const auto w2 = average_assessment_weight(b);
  CHECK(w2.at({"BBB", "2014J"}) == 12.5);
  CHECK(w2.at({"CCC", "2014J"}) == 0.0);
}

TEST_CASE("merge_tables is an inner join producing one row per active day") {
  const RawBundle b = fill_unregistration(tiny_bundle());
  const MergedFrame m = merge_tables(b, aggregate_clicks(b), average_assessment_weight(b));
  // Student 3 has clicks but no registration row.
  REQUIRE(m.rows.size() == 4);
  std::size_t student1 = 0;
  for (const auto& r : m.rows) {
    const auto& s = m.students[r.student];
    CHECK(s.id_student != 3);
    if (s.id_student == 1) {
      ++student1;
      CHECK(r.total_reg_days == 300);
      CHECK(r.registration_date == -30);
    }
    CHECK(r.weight == 50.0);
  }
  CHECK(student1 == 3);
}

TEST_CASE("encode_categoricals uses sorted vocabularies and -1 for missing") {
  const RawBundle b = fill_unregistration(tiny_bundle());
  const MergedFrame m = merge_tables(b, aggregate_clicks(b), average_assessment_weight(b));
  const auto [frame, vocab] = encode_categoricals(m);
  CHECK(vocab.at("gender") == std::vector<std::string>{"F", "M"});
  bool saw_missing = false;
  for (std::size_t i = 0; i < frame.rows(); ++i) {
    if (frame.ids[i].id_student == 1) {
      CHECK(frame.at(i, kGender) == 1.0);
      CHECK(frame.at(i, kImdBand) == kMissingCategory);
      CHECK(frame.labels[i] == 2);
      saw_missing = true;
    } else {
      CHECK(frame.at(i, kGender) == 0.0);
      CHECK(frame.labels[i] == 3);
    }
  }
  CHECK(saw_missing);

  Vocabularies narrow = vocab;
  narrow["region"] = {"North"};
  try {
    encode_categoricals(m, narrow);
    FAIL("expected UnknownCategory");
  } catch (const EncodeError& e) {
    CHECK(e.kind() == "EncodeError::UnknownCategory");
  }
}

TEST_CASE("scaler: two-point column and constant column") {
  EncodedFrame f;
  f.values.assign(2 * kFeatureCount, 5.0);
  f.values[kDate] = 1.0;
  f.values[kFeatureCount + kDate] = 3.0;
  f.labels = {0, 1};
  f.ids.resize(2);
  std::array<bool, kFeatureCount> active{};
  active.fill(true);
  const Scaler s = fit_scaler(f, {0, 1}, active);
  CHECK(s.mean[kDate] == 2.0);
  CHECK(s.stddev[kDate] == 1.0);
  apply_scaler(f, s);
  CHECK(f.at(0, kDate) == -1.0);
  CHECK(f.at(1, kDate) == 1.0);
  CHECK(f.at(0, kWeight) == 0.0);
  CHECK(f.at(1, kWeight) == 0.0);
}

TEST_CASE("pearson_correlation: identical, negated and constant features") {
  EncodedFrame f;
  const std::vector<int> labels = {0, 1, 2, 3, 1, 2};
  f.labels = labels;
  f.ids.resize(labels.size());
  f.values.assign(labels.size() * kFeatureCount, 7.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    f.at(i, kTotalRegDays) = labels[i];
    f.at(i, kDate) = -2.0 * labels[i];
    f.at(i, kGender) = static_cast<double>(i % 2);
  }
  const auto table = pearson_correlation(f);
  REQUIRE(table.size() == kFeatureCount);
  std::map<std::string, CorrelationEntry> by_name;
  for (const auto& e : table) {
    CHECK(e.pearson_r >= -1.0);
    CHECK(e.pearson_r <= 1.0);
    by_name[e.feature] = e;
  }
  CHECK(by_name["total_reg_days"].pearson_r == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(by_name["date"].pearson_r == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(by_name["weight"].pearson_r == 0.0);
  CHECK(by_name["weight"].zero_variance);
  CHECK(std::abs(table[0].pearson_r) >= std::abs(table[2].pearson_r));

  EncodedFrame one;
  one.labels = {1};
  one.ids.resize(1);
  one.values.assign(kFeatureCount, 0.0);
  CHECK_THROWS_AS(pearson_correlation(one), CorrelationError);
}

TEST_CASE("temporal_filter: identity at 100, predicate and monotonicity") {
  EncodedFrame f;
  Rng rng(5);
  for (int i = 0; i < 500; ++i) {
    f.values.resize(f.values.size() + kFeatureCount, 0.0);
    f.values[f.values.size() - kFeatureCount + kDate] = static_cast<double>(rng.between(0, 100));
    f.labels.push_back(i % 4);
    f.ids.push_back({"AAA", "2013J", i, 0});
  }
  CHECK(temporal_filter(f, 100).frame.rows() == 500);
  const auto r20 = temporal_filter(f, 20);
  for (std::size_t i = 0; i < r20.frame.rows(); ++i) CHECK(r20.frame.at(i, kDate) <= 20.0);
  std::size_t brute = 0;
  for (std::size_t i = 0; i < f.rows(); ++i) brute += f.at(i, kDate) <= 50.0 ? 1 : 0;
  CHECK(temporal_filter(f, 50).frame.rows() == brute);

  std::set<std::int64_t> ids20, ids40;
  for (const auto& id : r20.frame.ids) ids20.insert(id.id_student);
  for (const auto& id : temporal_filter(f, 40).frame.ids) ids40.insert(id.id_student);
  CHECK(std::includes(ids40.begin(), ids40.end(), ids20.begin(), ids20.end()));

  for (std::size_t i = 1; i < r20.frame.rows(); ++i) CHECK(r20.frame.at(i - 1, kDate) <= r20.frame.at(i, kDate));
  CHECK_THROWS_AS(temporal_filter(f, 0), ConfigError);
  CHECK_THROWS_AS(temporal_filter(f, 101), ConfigError);
  CHECK(temporal_filter(f, 5, CutoffMode::RowIndex).frame.rows() == 25);
}

TEST_CASE("clamp_registration_to_cutoff") {
  EncodedFrame f;
  f.values.assign(2 * kFeatureCount, 0.0);
  f.at(0, kRegistrationDate) = -30;
  f.at(0, kTotalRegDays) = 300;
  f.at(1, kRegistrationDate) = -10;
  f.at(1, kTotalRegDays) = 5;
  f.labels = {2, 3};
  f.ids.resize(2);
  clamp_registration_to_cutoff(f, 20);
  CHECK(f.at(0, kTotalRegDays) == 50);
  CHECK(f.at(1, kTotalRegDays) == 5);
}

TEST_CASE("stratified_split: 25 per class and determinism") {
  std::vector<int> labels;
  for (int c = 0; c < 4; ++c) labels.insert(labels.end(), 25, c);
  const Split s = stratified_split(labels, 0.7, 9);
  CHECK(s.train.size() + s.test.size() == 100);
  std::array<int, 4> per{};
  for (auto i : s.train) ++per[labels[i]];
  for (int n : per) CHECK((n == 17 || n == 18));
  const Split again = stratified_split(labels, 0.7, 9);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);

  CHECK_THROWS_AS(stratified_split({0, 0, 1, 1, 2, 2, 3}, 0.7, 1), SplitError);
}

TEST_CASE("stratified_split property over 1000 random frames") {
  Rng rng(123);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<int> labels;
    const std::size_t n = 8 + rng.below(200);
    for (int c = 0; c < 4; ++c) labels.insert(labels.end(), 2, c);
    while (labels.size() < n) labels.push_back(static_cast<int>(rng.below(4)));
    rng.shuffle(std::span(labels));
    const double frac = 0.5 + 0.4 * rng.uniform();
    const Split s = stratified_split(labels, frac, trial);
    std::array<double, 4> total{}, train{};
    for (int y : labels) ++total[y];
    for (auto i : s.train) ++train[labels[i]];
    std::vector<bool> seen(labels.size(), false);
    for (auto i : s.train) seen[i] = true;
    for (auto i : s.test) {
      CHECK_FALSE(seen[i]);
      seen[i] = true;
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
    for (int c = 0; c < 4; ++c) CHECK(std::abs(train[c] - frac * total[c]) <= 1.0);
  }
}

TEST_CASE("class_weights") {
  const ClassWeights d = class_weights();
  CHECK(d.weight == std::array{1.5, 1.5, 1.0, 1.0});
  CHECK(class_weights(std::array{1.0, 1.0, 1.0, 1.0}).weight == std::array{1.0, 1.0, 1.0, 1.0});
  CHECK_THROWS_AS(class_weights(std::array{1.0, 0.0, 1.0, 1.0}), ConfigError);
}

TEST_CASE("build_feature_frame: ledger row count, scaling moments, subsets") {
  const auto g = synth_bundle(400, 21);
  PipelineOptions o;
  o.seed = 4;
  const FeatureFrame ff = build_feature_frame(g.bundle, o);
  CHECK(ff.data.rows() == g.ledger.total_active_days());

  for (std::size_t c = 0; c < kFeatureCount; ++c) {
    if (ff.sidecar.scaler.stddev[c] == 0.0) continue;
    double mean = 0, sq = 0;
    for (auto i : ff.split.train) mean += ff.data.at(i, c);
    mean /= static_cast<double>(ff.split.train.size());
    for (auto i : ff.split.train) sq += (ff.data.at(i, c) - mean) * (ff.data.at(i, c) - mean);
    const double sd = std::sqrt(sq / static_cast<double>(ff.split.train.size()));
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(sd - 1.0) < 1e-9);
  }

  o.feature_set = FeatureSet::Demo;
  const FeatureFrame demo = build_feature_frame(g.bundle, o);
  for (std::size_t i = 0; i < demo.data.rows(); ++i) {
    CHECK(demo.data.at(i, kTotalClicks) == 0.0);
    CHECK(demo.data.at(i, kWeight) == 0.0);
    CHECK(demo.data.at(i, kDate) == 0.0);
  }

  o.feature_set = FeatureSet::All;
  o.per_student = true;
  const FeatureFrame per = build_feature_frame(g.bundle, o);
  std::set<std::int64_t> students;
  for (const auto& id : per.data.ids) students.insert(id.id_student);
  CHECK(per.data.rows() == students.size());
}

TEST_CASE("feature frame files round-trip") {
  vle::testing::TempDir dir("frame_rt");
  const auto g = synth_bundle(150, 8);
  PipelineOptions o;
  o.duration_pct = 40;
  o.no_leak = true;
  const FeatureFrame ff = build_feature_frame(g.bundle, o);
  write_feature_frame(ff, dir.path());
  const FeatureFrame back = read_feature_frame(dir / "features.csv");
  CHECK(back.data.values == ff.data.values);
  CHECK(back.data.labels == ff.data.labels);
  CHECK(back.data.ids == ff.data.ids);
  CHECK(back.split.train == ff.split.train);
  CHECK(sidecar_json(back.sidecar) == sidecar_json(ff.sidecar));
}
