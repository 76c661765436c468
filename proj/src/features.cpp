#include "vle/features.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <set>
#include <tuple>
#include <unordered_map>

#include "vle/errors.hpp"
#include "vle/rng.hpp"

namespace vle::features {
namespace {

struct EnrolmentHash {
  std::size_t operator()(const std::tuple<std::string, std::string, std::int64_t>& k) const {
    std::size_t h = std::hash<std::string>{}(std::get<0>(k));
    h = h * 31 + std::hash<std::string>{}(std::get<1>(k));
    return h * 1000003 + std::hash<std::int64_t>{}(std::get<2>(k));
  }
};

using Enrolment = std::tuple<std::string, std::string, std::int64_t>;

const std::string& categorical_value(const StudentInfoRow& s, Column col, bool& missing) {
  static const std::string empty;
  missing = false;
  switch (col) {
    case kCodeModule: return s.code_module;
    case kCodePresentation: return s.code_presentation;
    case kGender: return s.gender;
    case kRegion: return s.region;
    case kHighestEducation: return s.highest_education;
    case kImdBand:
      if (!s.imd_band) {
        missing = true;
        return empty;
      }
      return *s.imd_band;
    case kAgeBand: return s.age_band;
    case kDisability: return s.disability;
    default: break;
  }
  missing = true;
  return empty;
}

EncodedFrame encode_with(const MergedFrame& merged, const Vocabularies& vocab, bool strict) {
  // Encode each student once; rows copy the student's codes.
  std::vector<std::array<double, kCategoricalColumns.size()>> codes(merged.students.size());
  std::vector<int> labels(merged.students.size());
  for (std::size_t i = 0; i < merged.students.size(); ++i) {
    const auto& s = merged.students[i];
    labels[i] = label_of(s.final_result);
    for (std::size_t c = 0; c < kCategoricalColumns.size(); ++c) {
      const Column col = kCategoricalColumns[c];
      bool missing = false;
      const std::string& value = categorical_value(s, col, missing);
      if (missing || value.empty()) {
        codes[i][c] = kMissingCategory;
        continue;
      }
      const auto& words = vocab.at(kFeatureNames[col]);
      auto it = std::lower_bound(words.begin(), words.end(), value);
      if (it == words.end() || *it != value) {
        if (strict) {
          throw EncodeError("UnknownCategory", std::string(kFeatureNames[col]) + " = '" + value + "'");
        }
        codes[i][c] = kMissingCategory;
        continue;
      }
      codes[i][c] = static_cast<double>(it - words.begin());
    }
  }

  EncodedFrame frame;
  frame.values.resize(merged.rows.size() * kFeatureCount);
  frame.labels.resize(merged.rows.size());
  frame.ids.resize(merged.rows.size());
  for (std::size_t r = 0; r < merged.rows.size(); ++r) {
    const MergedRow& row = merged.rows[r];
    const StudentInfoRow& s = merged.students[row.student];
    for (std::size_t c = 0; c < kCategoricalColumns.size(); ++c) {
      frame.at(r, kCategoricalColumns[c]) = codes[row.student][c];
    }
    frame.at(r, kPrevAttempts) = static_cast<double>(s.num_of_prev_attempts);
    frame.at(r, kStudiedCredits) = static_cast<double>(s.studied_credits);
    frame.at(r, kRegistrationDate) = static_cast<double>(row.registration_date);
    frame.at(r, kTotalRegDays) = static_cast<double>(row.total_reg_days);
    frame.at(r, kWeight) = row.weight;
    frame.at(r, kDate) = static_cast<double>(row.date);
    frame.at(r, kTotalClicks) = static_cast<double>(row.total_clicks);
    frame.labels[r] = labels[row.student];
    frame.ids[r] = {s.code_module, s.code_presentation, s.id_student, row.date};
  }
  return frame;
}

}  // namespace

int label_of(const std::string& final_result) {
  for (std::size_t i = 0; i < kClassNames.size(); ++i) {
    if (final_result == kClassNames[i]) return static_cast<int>(i);
  }
  throw LabelError("unknown final_result '" + final_result + "'");
}

void EncodedFrame::append_row_from(const EncodedFrame& other, std::size_t row) {
  values.insert(values.end(), other.values.begin() + static_cast<std::ptrdiff_t>(row * kFeatureCount),
                other.values.begin() + static_cast<std::ptrdiff_t>((row + 1) * kFeatureCount));
  labels.push_back(other.labels[row]);
  ids.push_back(other.ids[row]);
}

EncodedFrame EncodedFrame::select(const std::vector<std::size_t>& rows) const {
  EncodedFrame out;
  out.values.reserve(rows.size() * kFeatureCount);
  out.labels.reserve(rows.size());
  out.ids.reserve(rows.size());
  for (std::size_t r : rows) out.append_row_from(*this, r);
  return out;
}

std::vector<DailyClicks> aggregate_clicks(const RawBundle& bundle) {
  std::vector<std::size_t> order(bundle.student_vle.size());
  std::iota(order.begin(), order.end(), 0);
  const auto& vle = bundle.student_vle;
  auto key = [&](std::size_t i) {
    const auto& r = vle[i];
    return std::tie(r.code_module, r.code_presentation, r.id_student, r.date);
  };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });

  std::vector<DailyClicks> out;
  for (std::size_t i : order) {
    const auto& r = vle[i];
    if (!out.empty()) {
      auto& last = out.back();
      if (last.date == r.date && last.id_student == r.id_student &&
          last.code_presentation == r.code_presentation && last.code_module == r.code_module) {
        last.total_clicks += r.sum_click;
        continue;
      }
    }
    out.push_back({r.code_module, r.code_presentation, r.id_student, r.date, r.sum_click});
  }
  return out;
}

RawBundle fill_unregistration(const RawBundle& bundle, std::int64_t fill) {
  RawBundle out = bundle;
  for (auto& r : out.student_registration) {
    if (!r.unregistration_date) r.unregistration_date = fill;
  }
  return out;
}

std::vector<std::int64_t> derive_total_reg_days(const RawBundle& bundle, std::int64_t registration_fill) {
  std::vector<std::int64_t> out;
  out.reserve(bundle.student_registration.size());
  for (std::size_t i = 0; i < bundle.student_registration.size(); ++i) {
    const auto& r = bundle.student_registration[i];
    const std::string where = "studentRegistration.csv row " + std::to_string(i + 2);
    if (!r.unregistration_date) {
      throw RegistrationError(where + ": unregistration_date missing (fill must run first)");
    }
    const std::int64_t days = *r.unregistration_date - r.registration_date.value_or(registration_fill);
    if (days < 0) {
      throw RegistrationError(where + ": negative registration span " + std::to_string(days) +
                              " for student " + std::to_string(r.id_student));
    }
    out.push_back(days);
  }
  return out;
}

std::map<PresentationKey, double> average_assessment_weight(const RawBundle& bundle) {
  std::map<PresentationKey, std::pair<double, std::size_t>> sums;
  for (const auto& a : bundle.assessments) {
    if (!a.weight) continue;
    auto& s = sums[{a.code_module, a.code_presentation}];
    s.first += *a.weight;
    s.second += 1;
  }
  std::map<PresentationKey, double> out;
  for (const auto& [key, s] : sums) out[key] = s.first / static_cast<double>(s.second);
  for (const auto& c : bundle.courses) {
    PresentationKey key{c.code_module, c.code_presentation};
    if (!out.contains(key)) {
      std::cerr << "warning: no assessment weights for (" << key.first << ", " << key.second
                << "); using 0\n";
      out[key] = 0.0;
    }
  }
  return out;
}

MergedFrame merge_tables(const RawBundle& bundle, const std::vector<DailyClicks>& daily,
                         const std::map<PresentationKey, double>& weights,
                         std::int64_t registration_fill) {
  const auto spans = derive_total_reg_days(bundle, registration_fill);
  std::unordered_map<Enrolment, std::size_t, EnrolmentHash> registration;
  for (std::size_t i = 0; i < bundle.student_registration.size(); ++i) {
    const auto& r = bundle.student_registration[i];
    registration.emplace(Enrolment{r.code_module, r.code_presentation, r.id_student}, i);
  }

  MergedFrame merged;
  // Student index for each enrolment present in both student_info and
  // registration.
  std::unordered_map<Enrolment, std::pair<std::uint32_t, std::size_t>, EnrolmentHash> joined;
  for (const auto& s : bundle.student_info) {
    Enrolment key{s.code_module, s.code_presentation, s.id_student};
    auto reg = registration.find(key);
    if (reg == registration.end()) continue;
    joined.emplace(key, std::pair{static_cast<std::uint32_t>(merged.students.size()), reg->second});
    merged.students.push_back(s);
  }

  merged.rows.reserve(daily.size());
  for (const auto& d : daily) {
    auto it = joined.find(Enrolment{d.code_module, d.code_presentation, d.id_student});
    if (it == joined.end()) continue;
    const auto& reg = bundle.student_registration[it->second.second];
    double weight = 0.0;
    if (auto w = weights.find({d.code_module, d.code_presentation}); w != weights.end()) weight = w->second;
    merged.rows.push_back({it->second.first, reg.registration_date.value_or(registration_fill),
                           spans[it->second.second], weight, d.date, d.total_clicks});
  }
  return merged;
}

std::pair<EncodedFrame, Vocabularies> encode_categoricals(const MergedFrame& merged) {
  Vocabularies vocab;
  for (Column col : kCategoricalColumns) {
    std::set<std::string> distinct;
    for (const auto& s : merged.students) {
      bool missing = false;
      const std::string& v = categorical_value(s, col, missing);
      if (!missing && !v.empty()) distinct.insert(v);
    }
    vocab[kFeatureNames[col]] = std::vector<std::string>(distinct.begin(), distinct.end());
  }
  return {encode_with(merged, vocab, false), vocab};
}

EncodedFrame encode_categoricals(const MergedFrame& merged, const Vocabularies& vocabularies) {
  for (Column col : kCategoricalColumns) {
    if (!vocabularies.contains(kFeatureNames[col])) {
      throw EncodeError("MissingVocabulary", kFeatureNames[col]);
    }
  }
  return encode_with(merged, vocabularies, true);
}

Scaler fit_scaler(const EncodedFrame& frame, const std::vector<std::size_t>& rows,
                  const std::array<bool, kFeatureCount>& active) {
  Scaler s;
  s.active = active;
  if (rows.empty()) return s;
  const double n = static_cast<double>(rows.size());
  for (std::size_t c = 0; c < kFeatureCount; ++c) {
    if (!active[c]) continue;
    double sum = 0;
    for (std::size_t r : rows) sum += frame.at(r, c);
    const double mean = sum / n;
    double ss = 0;
    for (std::size_t r : rows) {
      const double d = frame.at(r, c) - mean;
      ss += d * d;
    }
    s.mean[c] = mean;
    s.stddev[c] = std::sqrt(ss / n);
  }
  return s;
}

void apply_scaler(EncodedFrame& frame, const Scaler& scaler) {
  for (std::size_t r = 0; r < frame.rows(); ++r) {
    for (std::size_t c = 0; c < kFeatureCount; ++c) {
      double& x = frame.at(r, c);
      if (!scaler.active[c] || scaler.stddev[c] == 0.0) {
        x = 0.0;
      } else {
        x = (x - scaler.mean[c]) / scaler.stddev[c];
      }
    }
  }
}

std::vector<CorrelationEntry> pearson_correlation(const EncodedFrame& frame) {
  const std::size_t n = frame.rows();
  if (n < 2) throw CorrelationError("need at least 2 rows, got " + std::to_string(n));
  double label_mean = 0;
  for (int y : frame.labels) label_mean += y;
  label_mean /= static_cast<double>(n);
  double label_ss = 0;
  for (int y : frame.labels) label_ss += (y - label_mean) * (y - label_mean);

  std::vector<CorrelationEntry> table;
  for (std::size_t c = 0; c < kFeatureCount; ++c) {
    double mean = 0;
    for (std::size_t r = 0; r < n; ++r) mean += frame.at(r, c);
    mean /= static_cast<double>(n);
    double ss = 0, cross = 0;
    for (std::size_t r = 0; r < n; ++r) {
      const double d = frame.at(r, c) - mean;
      ss += d * d;
      cross += d * (frame.labels[r] - label_mean);
    }
    CorrelationEntry e{kFeatureNames[c], 0.0, false};
    if (ss == 0.0 || label_ss == 0.0) {
      e.zero_variance = true;
    } else {
      e.pearson_r = std::clamp(cross / std::sqrt(ss * label_ss), -1.0, 1.0);
    }
    table.push_back(std::move(e));
  }
  std::stable_sort(table.begin(), table.end(), [](const auto& a, const auto& b) {
    return std::abs(a.pearson_r) > std::abs(b.pearson_r);
  });
  return table;
}

FilterResult temporal_filter(const EncodedFrame& frame, double pct, CutoffMode mode) {
  if (!(pct > 0.0 && pct <= 100.0)) {
    throw ConfigError("duration percentage must be in (0, 100], got " + std::to_string(pct));
  }
  if (frame.rows() == 0) throw FilterError("EmptySlice", "input frame has no rows");

  std::vector<std::size_t> order(frame.rows());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return frame.at(a, kDate) < frame.at(b, kDate);
  });

  FilterResult result;
  std::size_t keep = 0;
  if (mode == CutoffMode::DateRange) {
    const double lo = frame.at(order.front(), kDate);
    const double hi = frame.at(order.back(), kDate);
    result.cutoff_date = pct == 100.0 ? hi : lo + pct / 100.0 * (hi - lo);
    while (keep < order.size() && frame.at(order[keep], kDate) <= result.cutoff_date) ++keep;
  } else {
    keep = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(order.size())));
    keep = std::min(keep, order.size());
    if (keep > 0) result.cutoff_date = frame.at(order[keep - 1], kDate);
  }
  if (keep == 0) throw FilterError("EmptySlice", "no rows at " + std::to_string(pct) + "% of the course");
  order.resize(keep);
  result.frame = frame.select(order);
  return result;
}

void clamp_registration_to_cutoff(EncodedFrame& frame, double cutoff_date) {
  for (std::size_t r = 0; r < frame.rows(); ++r) {
    const double reg = frame.at(r, kRegistrationDate);
    const double unreg = reg + frame.at(r, kTotalRegDays);
    frame.at(r, kTotalRegDays) = std::max(0.0, std::min(unreg, cutoff_date) - reg);
  }
}

EncodedFrame aggregate_per_student(const EncodedFrame& frame) {
  std::map<std::tuple<std::string, std::string, std::int64_t>, std::size_t> slot;
  EncodedFrame out;
  for (std::size_t r = 0; r < frame.rows(); ++r) {
    const RowId& id = frame.ids[r];
    auto [it, inserted] = slot.try_emplace({id.code_module, id.code_presentation, id.id_student}, out.rows());
    if (inserted) {
      out.append_row_from(frame, r);
      continue;
    }
    const std::size_t o = it->second;
    out.at(o, kTotalClicks) += frame.at(r, kTotalClicks);
    if (frame.at(r, kDate) > out.at(o, kDate)) {
      out.at(o, kDate) = frame.at(r, kDate);
      out.ids[o].date = id.date;
    }
  }
  // Order by student key for a layout independent of the input row order.
  std::vector<std::size_t> order;
  order.reserve(slot.size());
  for (const auto& [key, o] : slot) order.push_back(o);
  return out.select(order);
}

Split stratified_split(const std::vector<int>& labels, double train_frac, std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) throw ConfigError("train fraction must be in (0, 1)");
  std::array<std::vector<std::size_t>, kClassCount> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || y >= static_cast<int>(kClassCount)) throw LabelError("label out of range: " + std::to_string(y));
    by_class[static_cast<std::size_t>(y)].push_back(i);
  }
  Split split;
  Rng rng(seed);
  for (std::size_t c = 0; c < kClassCount; ++c) {
    auto& rows = by_class[c];
    if (rows.size() < 2) {
      throw SplitError("Degenerate", std::string(kClassNames[c]) + " has " + std::to_string(rows.size()) +
                                         " rows; stratification needs at least 2");
    }
    rng.shuffle(std::span(rows));
    const auto n_train = static_cast<std::size_t>(std::lround(train_frac * static_cast<double>(rows.size())));
    split.train.insert(split.train.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.test.insert(split.test.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_train), rows.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

ClassWeights class_weights(const std::optional<std::array<double, kClassCount>>& override_weights) {
  ClassWeights w;
  if (!override_weights) return w;
  for (std::size_t c = 0; c < kClassCount; ++c) {
    const double v = (*override_weights)[c];
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError("class weight for " + std::string(kClassNames[c]) + " must be positive, got " +
                        std::to_string(v));
    }
    w.weight[c] = v;
  }
  return w;
}

FeatureSet parse_feature_set(const std::string& name) {
  if (name == "demo") return FeatureSet::Demo;
  if (name == "demo+click") return FeatureSet::DemoClick;
  if (name == "demo+click+assess") return FeatureSet::DemoClickAssess;
  if (name == "all") return FeatureSet::All;
  throw ConfigError("unknown feature set '" + name + "' (demo|demo+click|demo+click+assess|all)");
}

std::string to_string(FeatureSet set) {
  switch (set) {
    case FeatureSet::Demo: return "demo";
    case FeatureSet::DemoClick: return "demo+click";
    case FeatureSet::DemoClickAssess: return "demo+click+assess";
    case FeatureSet::All: return "all";
  }
  return "all";
}

std::array<bool, kFeatureCount> active_columns(FeatureSet set) {
  std::array<bool, kFeatureCount> active{};
  for (std::size_t c = kCodeModule; c <= kDisability; ++c) active[c] = true;
  if (set == FeatureSet::Demo) return active;
  active[kDate] = active[kTotalClicks] = true;
  if (set == FeatureSet::DemoClick) return active;
  active[kWeight] = true;
  if (set == FeatureSet::DemoClickAssess) return active;
  active[kRegistrationDate] = active[kTotalRegDays] = true;
  return active;
}

FeatureFrame build_feature_frame(const RawBundle& bundle, const PipelineOptions& options) {
  const auto daily = aggregate_clicks(bundle);
  const RawBundle filled = fill_unregistration(bundle, options.unregistration_fill);
  const auto weights = average_assessment_weight(filled);
  const MergedFrame merged = merge_tables(filled, daily, weights, options.registration_fill);
  auto [encoded, vocab] = encode_categoricals(merged);
  if (encoded.rows() == 0) throw FilterError("EmptySlice", "merged frame has no rows");

  FilterResult filtered = temporal_filter(encoded, options.duration_pct, options.cutoff_mode);
  EncodedFrame frame = std::move(filtered.frame);
  if (options.no_leak) clamp_registration_to_cutoff(frame, filtered.cutoff_date);
  if (options.per_student) frame = aggregate_per_student(frame);

  FeatureFrame out;
  out.split = stratified_split(frame.labels, options.train_frac, options.seed);
  out.sidecar.vocabularies = std::move(vocab);
  out.sidecar.options = options;
  out.sidecar.cutoff_date = filtered.cutoff_date;
  out.sidecar.rows = frame.rows();
  out.sidecar.scaler = fit_scaler(frame, out.split.train, active_columns(options.feature_set));
  apply_scaler(frame, out.sidecar.scaler);
  out.data = std::move(frame);
  return out;
}

}  // namespace vle::features
