#include "vle/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "vle/errors.hpp"
#include "vle/rng.hpp"

namespace vle::synth {
namespace {

using nlohmann::json;

constexpr int kDistinction = 0;
constexpr int kFail = 1;
constexpr int kPass = 2;
constexpr int kWithdrawn = 3;

// Planted-signal shape at signal_strength = 1. Each quantity is blended
// linearly toward its class-neutral value as the strength goes to 0.
constexpr std::array<double, 4> kClickCenter = {28.0, 7.0, 16.0, 5.0};
constexpr double kNeutralClicks = 14.0;
constexpr std::array<double, 4> kDayDensity = {0.05, 0.03, 0.045, 0.05};
constexpr double kNeutralDensity = 0.045;
constexpr double kStudentSpread = 0.20;  // log-normal sigma of a student's engagement
constexpr double kDailyJitter = 0.15;    // log-normal sigma of one day's clicks
constexpr double kRampFraction = 0.10;   // class separation grows over this share of the course
constexpr double kTypicalEducation = 0.90;

const std::vector<std::string> kGender = {"F", "M"};
const std::vector<std::string> kRegion = {"East Anglian Region", "London Region", "Scotland",
                                          "South Region", "Wales"};
const std::vector<std::string> kEducation = {"A Level or Equivalent", "HE Qualification",
                                             "Lower Than A Level", "No Formal quals",
                                             "Post Graduate Qualification"};
// Class-typical education level, indexed by label.
constexpr std::array<std::size_t, 4> kEducationOf = {1, 2, 0, 3};
const std::vector<std::string> kImdBand = {"0-10%",  "10-20%", "20-30%", "30-40%", "40-50%",
                                           "50-60%", "60-70%", "70-80%", "80-90%", "90-100%"};
const std::vector<std::string> kAgeBand = {"0-35", "35-55", "55<="};
const std::vector<std::string> kActivity = {"forumng", "homepage", "oucontent", "quiz",
                                            "resource", "subpage",  "url"};

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& items) {
  return items[rng.below(items.size())];
}

std::size_t pick_weighted(Rng& rng, std::span<const double> weights) {
  double u = rng.uniform() * std::accumulate(weights.begin(), weights.end(), 0.0);
  for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return weights.size() - 1;
}

std::string module_code(std::size_t m) {
  std::string code(3, static_cast<char>('A' + m % 26));
  if (m >= 26) code += std::to_string(m / 26);
  return code;
}

struct Presentation {
  std::string module;
  std::string presentation;
  std::vector<std::int64_t> sites;
  std::vector<std::size_t> assessments;  // indices into bundle.assessments
};

}  // namespace

std::array<double, 4> SynthConfig::default_mix() {
  std::array<double, 4> mix = {0.18, 0.13, 0.59, 0.09};
  const double total = mix[0] + mix[1] + mix[2] + mix[3];
  for (auto& m : mix) m /= total;
  return mix;
}

void SynthConfig::validate() const {
  double total = 0;
  for (double m : class_mix) {
    if (m < 0) throw ConfigError("class mix entries must be non-negative");
    total += m;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("class mix must sum to 1");
  if (signal_strength < 0 || signal_strength > 1) throw ConfigError("signal_strength must be in [0, 1]");
  if (n_modules == 0) throw ConfigError("n_modules must be at least 1");
  if (course_length_days < 20) throw ConfigError("course_length_days must be at least 20");
}

std::size_t GenerationLedger::total_active_days() const {
  std::size_t n = 0;
  for (const auto& s : students) n += s.active_days;
  return n;
}

std::int64_t GenerationLedger::total_clicks() const {
  std::int64_t n = 0;
  for (const auto& s : students) n += s.total_clicks;
  return n;
}

Generated generate(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const double s = cfg.signal_strength;
  const std::int64_t length = cfg.course_length_days;

  Generated out;
  RawBundle& b = out.bundle;
  b.source_dir = "<synthetic>";

  std::vector<Presentation> presentations;
  std::int64_t next_site = 500000;
  std::int64_t next_assessment = 1000;
  for (std::size_t m = 0; m < cfg.n_modules; ++m) {
    for (const char* code : {"2013J", "2014J"}) {
      Presentation p{module_code(m), code, {}, {}};
      b.courses.push_back({p.module, p.presentation, length});
      const std::size_t n_sites = 6 + rng.below(5);
      for (std::size_t i = 0; i < n_sites; ++i) {
        p.sites.push_back(next_site);
        b.vle.push_back({next_site++, p.module, p.presentation, pick(rng, kActivity), std::nullopt,
                         std::nullopt});
      }
      const std::size_t n_graded = 3 + presentations.size() % 3;
      for (std::size_t i = 0; i < n_graded; ++i) {
        const std::int64_t date = (length * static_cast<std::int64_t>(i + 1)) /
                                  static_cast<std::int64_t>(n_graded + 2);
        const double weight = 5.0 * static_cast<double>(rng.between(1, 6));
        p.assessments.push_back(b.assessments.size());
        b.assessments.push_back({p.module, p.presentation, next_assessment++, i % 2 ? "CMA" : "TMA",
                                 date, weight});
      }
      b.assessments.push_back({p.module, p.presentation, next_assessment++, "Exam", std::nullopt, 100.0});
      presentations.push_back(std::move(p));
    }
  }

  GenerationLedger& ledger = out.ledger;
  ledger.config = cfg;
  const double ramp_days = kRampFraction * static_cast<double>(length);

  for (std::size_t i = 0; i < cfg.n_students; ++i) {
    const Presentation& p = presentations[rng.below(presentations.size())];
    const int label = static_cast<int>(pick_weighted(rng, cfg.class_mix));
    const std::int64_t id = 100000 + static_cast<std::int64_t>(i);

    std::size_t education = rng.below(kEducation.size());
    if (rng.bernoulli(kTypicalEducation * s)) education = kEducationOf[label];
    const double repeat_rate = label == kFail ? 0.15 + 0.25 * s : 0.15;
    const std::int64_t attempts = rng.bernoulli(repeat_rate) ? rng.between(1, 2) : 0;
    std::optional<std::string> imd;
    if (!rng.bernoulli(0.03)) imd = pick(rng, kImdBand);
    const std::array<double, 3> age_weights = {0.70, 0.25, 0.05};
    StudentInfoRow info{p.module,
                        p.presentation,
                        id,
                        pick(rng, kGender),
                        pick(rng, kRegion),
                        kEducation[education],
                        imd,
                        kAgeBand[pick_weighted(rng, age_weights)],
                        attempts,
                        30 * rng.between(1, 4),
                        rng.bernoulli(0.1) ? "Y" : "N",
                        kClassNames[label]};
    b.student_info.push_back(std::move(info));

    const std::int64_t registered = rng.between(-90, 0);
    std::optional<std::int64_t> unregistered;
    if (label == kWithdrawn) {
      unregistered = rng.between(std::llround(0.05 * length), std::llround(0.60 * length));
    }
    b.student_registration.push_back({p.module, p.presentation, id, registered, unregistered});

    StudentLedger entry{id, p.module, p.presentation, label, 0, 0, registered, unregistered};

    const double center = kNeutralClicks + s * (kClickCenter[label] - kNeutralClicks);
    const double engagement = center * std::exp(kStudentSpread * rng.normal());
    const double density = kNeutralDensity + s * (kDayDensity[label] - kNeutralDensity);
    const std::int64_t last_day = unregistered.value_or(length);
    for (std::int64_t day = 0; day < last_day; ++day) {
      if (!rng.bernoulli(density)) continue;
      const double ramp = std::min(1.0, static_cast<double>(day + 1) / ramp_days);
      const double level = kNeutralClicks + ramp * (engagement - kNeutralClicks);
      const std::int64_t clicks =
          std::max<std::int64_t>(1, std::llround(level * std::exp(kDailyJitter * rng.normal())));
      // Spread the day's clicks over up to three distinct sites.
      const std::size_t pieces = 1 + rng.below(std::min<std::size_t>({3, static_cast<std::size_t>(clicks), p.sites.size()}));
      std::vector<std::int64_t> sites = p.sites;
      rng.shuffle(std::span(sites));
      std::int64_t remaining = clicks;
      for (std::size_t k = 0; k < pieces; ++k) {
        const auto left_after = static_cast<std::int64_t>(pieces - k - 1);
        const std::int64_t piece =
            k + 1 == pieces ? remaining : 1 + static_cast<std::int64_t>(rng.below(
                                                  static_cast<std::uint64_t>(remaining - left_after)));
        b.student_vle.push_back({p.module, p.presentation, id, sites[k], day, piece});
        remaining -= piece;
      }
      ++entry.active_days;
      entry.total_clicks += clicks;
    }

    constexpr std::array<double, 4> kScoreShift = {30.0, -15.0, 15.0, -5.0};
    const double mean_score = 45.0 + s * kScoreShift[static_cast<std::size_t>(label)];
    for (std::size_t a : p.assessments) {
      const auto& assessment = b.assessments[a];
      const std::int64_t due = assessment.date.value_or(length);
      if (unregistered && due >= *unregistered) continue;
      if (!rng.bernoulli(0.9)) continue;
      const double score = std::clamp(std::round(mean_score + 12.0 * rng.normal()), 0.0, 100.0);
      b.student_assessment.push_back(
          {assessment.id_assessment, id, due + rng.between(-5, 2), 0, score});
    }
    ledger.students.push_back(std::move(entry));
  }

  ledger.table_rows = {b.courses.size(),      b.assessments.size(),
                       b.vle.size(),          b.student_info.size(),
                       b.student_registration.size(), b.student_assessment.size(),
                       b.student_vle.size()};
  return out;
}

void write_ledger(const GenerationLedger& ledger, const std::filesystem::path& path) {
  json students = json::array();
  for (const auto& s : ledger.students) {
    students.push_back({{"id_student", s.id_student},
                        {"code_module", s.code_module},
                        {"code_presentation", s.code_presentation},
                        {"label", s.label},
                        {"final_result", kClassNames[static_cast<std::size_t>(s.label)]},
                        {"active_days", s.active_days},
                        {"total_clicks", s.total_clicks},
                        {"registration_date", s.registration_date},
                        {"unregistration_date", s.unregistration_date ? json(*s.unregistration_date) : json()}});
  }
  json rows = json::object();
  for (TableId id : kAllTables) rows[table_file_name(id)] = ledger.rows(id);
  const auto& c = ledger.config;
  json doc = {{"config",
               {{"n_students", c.n_students},
                {"n_modules", c.n_modules},
                {"course_length_days", c.course_length_days},
                {"class_mix", c.class_mix},
                {"signal_strength", c.signal_strength},
                {"seed", c.seed}}},
              {"table_rows", rows},
              {"students", students}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(1) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

GenerationLedger read_ledger(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  GenerationLedger ledger;
  try {
    const json doc = json::parse(in);
    const auto& c = doc.at("config");
    ledger.config.n_students = c.at("n_students").get<std::size_t>();
    ledger.config.n_modules = c.at("n_modules").get<std::size_t>();
    ledger.config.course_length_days = c.at("course_length_days").get<std::int64_t>();
    ledger.config.class_mix = c.at("class_mix").get<std::array<double, 4>>();
    ledger.config.signal_strength = c.at("signal_strength").get<double>();
    ledger.config.seed = c.at("seed").get<std::uint64_t>();
    for (TableId id : kAllTables) {
      ledger.table_rows[static_cast<std::size_t>(id)] =
          doc.at("table_rows").at(table_file_name(id)).get<std::size_t>();
    }
    for (const auto& s : doc.at("students")) {
      StudentLedger e;
      e.id_student = s.at("id_student").get<std::int64_t>();
      e.code_module = s.at("code_module").get<std::string>();
      e.code_presentation = s.at("code_presentation").get<std::string>();
      e.label = s.at("label").get<int>();
      e.active_days = s.at("active_days").get<std::size_t>();
      e.total_clicks = s.at("total_clicks").get<std::int64_t>();
      e.registration_date = s.at("registration_date").get<std::int64_t>();
      if (!s.at("unregistration_date").is_null()) {
        e.unregistration_date = s.at("unregistration_date").get<std::int64_t>();
      }
      ledger.students.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": malformed ledger: " + e.what());
  }
  return ledger;
}

GenerationLedger generate_bundle(const SynthConfig& config, const std::filesystem::path& out_dir) {
  Generated g = generate(config);
  write_bundle(g.bundle, out_dir);
  write_ledger(g.ledger, out_dir / "ledger.json");
  return g.ledger;
}

double oracle_accuracy(const GenerationLedger& ledger) {
  if (ledger.students.empty()) return 0.0;
  std::size_t correct = 0;
  std::vector<std::pair<double, int>> engaged;  // (mean daily clicks, label)
  for (const auto& s : ledger.students) {
    if (s.unregistration_date) {
      correct += s.label == kWithdrawn ? 1 : 0;
      continue;
    }
    const double mean = s.active_days ? static_cast<double>(s.total_clicks) / static_cast<double>(s.active_days) : 0.0;
    engaged.emplace_back(mean, s.label);
  }
  std::sort(engaged.begin(), engaged.end());

  // Fail below t1, Pass in [t1, t2), Distinction at or above t2. Cut points
  // only fall between distinct means; prefix counts make each O(1).
  const std::size_t n = engaged.size();
  std::vector<std::size_t> fail(n + 1, 0), pass(n + 1, 0), dist(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    fail[i + 1] = fail[i] + (engaged[i].second == kFail);
    pass[i + 1] = pass[i] + (engaged[i].second == kPass);
    dist[i + 1] = dist[i] + (engaged[i].second == kDistinction);
  }
  std::vector<std::size_t> cuts;
  for (std::size_t i = 0; i <= n; ++i) {
    if (i == 0 || i == n || engaged[i - 1].first != engaged[i].first) cuts.push_back(i);
  }
  long best = 0;
  long best_prefix = std::numeric_limits<long>::min();  // max over i <= j of fail[i] - pass[i]
  for (std::size_t j : cuts) {
    best_prefix = std::max(best_prefix, static_cast<long>(fail[j]) - static_cast<long>(pass[j]));
    const long score = best_prefix + static_cast<long>(pass[j]) + static_cast<long>(dist[n] - dist[j]);
    best = std::max(best, score);
  }
  return static_cast<double>(correct + static_cast<std::size_t>(best)) /
         static_cast<double>(ledger.students.size());
}

}  // namespace vle::synth
