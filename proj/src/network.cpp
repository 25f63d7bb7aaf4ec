#include "tnma/network.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <map>
#include <numeric>
#include <unordered_map>

#include "tnma/error.hpp"

namespace tnma {

namespace {

std::string at_line(std::size_t line) {
  return line == 0 ? std::string{} : " (line " + std::to_string(line) + ")";
}

template <class Int>
bool parse_digits(std::string_view text, std::size_t width, Int& out) {
  if (text.size() != width) return false;
  for (char c : text)
    if (c < '0' || c > '9') return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size();
}

}  // namespace

std::string CalendarDate::iso() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year, month, day);
  return buf;
}

double CalendarDate::decimal_year() const {
  using namespace std::chrono;
  const sys_days start{std::chrono::year{year} / January / 1};
  const sys_days next{std::chrono::year{year + 1} / January / 1};
  const sys_days here{std::chrono::year{year} / std::chrono::month{month} / std::chrono::day{day}};
  const double elapsed = static_cast<double>((here - start).count());
  const double length = static_cast<double>((next - start).count());
  return year + elapsed / length;
}

PartialDate parse_partial_date(std::string_view text) {
  const auto fail = [&] { return DataError("malformed date '" + std::string(text) + "'"); };
  PartialDate out;
  const auto first = text.find('-');
  if (!parse_digits(text.substr(0, first), 4, out.year)) throw fail();
  if (first == std::string_view::npos) return out;

  const auto rest = text.substr(first + 1);
  const auto second = rest.find('-');
  unsigned month = 0;
  if (!parse_digits(rest.substr(0, second), 2, month) || month < 1 || month > 12) throw fail();
  out.month = month;
  if (second == std::string_view::npos) return out;

  unsigned day = 0;
  if (!parse_digits(rest.substr(second + 1), 2, day)) throw fail();
  const std::chrono::year_month_day ymd{std::chrono::year{out.year}, std::chrono::month{month},
                                        std::chrono::day{day}};
  if (!ymd.ok()) throw fail();
  out.day = day;
  return out;
}

CalendarDate impute_date(const PartialDate& date) {
  if (!date.month)
    throw DataError("date " + std::to_string(date.year) + " has no month; cannot impute a day");
  return CalendarDate{date.year, *date.month, date.day.value_or(15u)};
}

NetworkSummary summarize_studies(std::span<const Study> studies, std::size_t treatment_count) {
  NetworkSummary s;
  s.occurrences.assign(treatment_count, 0);
  s.pair_counts.assign(treatment_count, std::vector<std::size_t>(treatment_count, 0));

  std::vector<std::size_t> parent(treatment_count);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  const auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };

  for (const auto& study : studies) {
    for (std::size_t a = 0; a < study.arms.size(); ++a) {
      const auto ka = study.arms[a].treatment.value;
      ++s.occurrences[ka];
      for (std::size_t b = a + 1; b < study.arms.size(); ++b) {
        const auto kb = study.arms[b].treatment.value;
        ++s.pair_counts[ka][kb];
        ++s.pair_counts[kb][ka];
        parent[find(ka)] = find(kb);
      }
    }
  }

  // Components numbered in order of their lowest treatment index.
  s.component.assign(treatment_count, 0);
  std::map<std::size_t, std::size_t> label_of_root;
  for (std::size_t k = 0; k < treatment_count; ++k) {
    const auto root = find(k);
    auto [it, inserted] = label_of_root.try_emplace(root, label_of_root.size());
    s.component[k] = it->second;
  }
  s.component_count = label_of_root.size();
  return s;
}

TreatmentId select_baseline(const NetworkSummary& summary, std::optional<TreatmentId> override_id) {
  if (override_id) {
    if (override_id->value >= summary.treatment_count())
      throw DataError("baseline override names unknown treatment index " +
                      std::to_string(override_id->value));
    return *override_id;
  }
  if (summary.occurrences.empty()) throw DataError("network has no treatments");
  const auto best = std::max_element(summary.occurrences.begin(), summary.occurrences.end());
  return TreatmentId{static_cast<std::size_t>(best - summary.occurrences.begin())};
}

std::size_t Dataset::arm_count() const {
  std::size_t n = 0;
  for (const auto& s : studies_) n += s.arms.size();
  return n;
}

std::optional<TreatmentId> Dataset::find(std::string_view label) const {
  for (std::size_t k = 0; k < labels_.size(); ++k)
    if (labels_[k] == label) return TreatmentId{k};
  return std::nullopt;
}

TreatmentId Dataset::require(std::string_view label) const {
  if (auto k = find(label)) return *k;
  throw DataError("unknown treatment '" + std::string(label) + "'");
}

std::vector<double> Dataset::times_of(TreatmentId k) const {
  std::vector<double> t;
  t.reserve(occurrences_[k.value].size());
  for (const auto& occ : occurrences_[k.value]) t.push_back(studies_[occ.study].time);
  return t;
}

std::vector<RawArmRecord> Dataset::to_records() const {
  std::vector<RawArmRecord> rows;
  for (const auto& s : studies_) {
    for (const auto& arm : s.arms) {
      RawArmRecord r;
      r.study = s.key;
      r.date = PartialDate{s.date.year, s.date.month, s.date.day};
      r.treatment = labels_[arm.treatment.value];
      r.events = arm.successes;
      r.total = arm.size;
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

NetworkSummary network_summary(const Dataset& data) { return data.summary(); }

Dataset build_dataset(std::span<const RawArmRecord> records, const BuildOptions& options) {
  if (records.empty()) throw DataError("dataset is empty");

  Dataset d;
  std::unordered_map<std::string, std::size_t> study_index;
  std::unordered_map<std::string, std::size_t> treatment_index;

  for (const auto& r : records) {
    if (r.study.empty()) throw DataError("empty study key" + at_line(r.line));
    if (r.treatment.empty()) throw DataError("empty treatment label" + at_line(r.line));
    if (r.total < 1) throw DataError("arm size must be at least 1" + at_line(r.line));
    if (r.events < 0) throw DataError("events must be nonnegative" + at_line(r.line));
    if (r.events > r.total)
      throw DataError("events (" + std::to_string(r.events) + ") exceed total (" +
                      std::to_string(r.total) + ")" + at_line(r.line));

    const CalendarDate date = impute_date(r.date);
    auto [tit, new_treatment] = treatment_index.try_emplace(r.treatment, d.labels_.size());
    if (new_treatment) d.labels_.push_back(r.treatment);
    const TreatmentId k{tit->second};

    auto [sit, new_study] = study_index.try_emplace(r.study, d.studies_.size());
    if (new_study) {
      Study s;
      s.id = d.studies_.size();
      s.key = r.study;
      s.date = date;
      d.studies_.push_back(std::move(s));
    }
    Study& s = d.studies_[sit->second];
    if (s.date != date)
      throw DataError("study '" + s.key + "' has conflicting dates " + s.date.iso() + " and " +
                      date.iso() + at_line(r.line));
    for (const auto& arm : s.arms)
      if (arm.treatment == k)
        throw DataError("study '" + s.key + "' lists treatment '" + r.treatment + "' twice" +
                        at_line(r.line));
    s.arms.push_back(StudyArm{k, r.events, r.total});
  }

  for (const auto& s : d.studies_)
    if (s.arms.size() < 2) throw DataError("study '" + s.key + "' has a single arm");

  const std::size_t K = d.labels_.size();
  d.summary_ = summarize_studies(d.studies_, K);
  if (d.summary_.component_count != 1)
    throw DataError("treatment network is disconnected (" +
                    std::to_string(d.summary_.component_count) + " components)");

  std::optional<TreatmentId> override_id;
  if (options.baseline) {
    auto it = treatment_index.find(*options.baseline);
    if (it == treatment_index.end())
      throw DataError("baseline override names unknown treatment '" + *options.baseline + "'");
    override_id = TreatmentId{it->second};
  }
  d.baseline_ = select_baseline(d.summary_, override_id);

  // Study baseline: the global reference if present, else the arm whose
  // treatment is globally most common (lowest index on ties).
  for (auto& s : d.studies_) {
    std::size_t best = 0;
    for (std::size_t a = 0; a < s.arms.size(); ++a) {
      const auto ka = s.arms[a].treatment;
      const auto kb = s.arms[best].treatment;
      if (ka == d.baseline_) {
        best = a;
        break;
      }
      const auto ca = d.summary_.occurrences[ka.value];
      const auto cb = d.summary_.occurrences[kb.value];
      if (ca > cb || (ca == cb && ka < kb)) best = a;
    }
    s.baseline_arm = best;
    s.contrast_arms.clear();
    for (std::size_t a = 0; a < s.arms.size(); ++a)
      if (a != best) s.contrast_arms.push_back(a);
  }

  // Affine time normalization: earliest date -> 0, latest -> 1.
  double lo = d.studies_.front().date.decimal_year();
  double hi = lo;
  for (const auto& s : d.studies_) {
    lo = std::min(lo, s.date.decimal_year());
    hi = std::max(hi, s.date.decimal_year());
  }
  d.time_origin_ = lo;
  d.time_scale_ = hi > lo ? hi - lo : 1.0;
  double sum = 0.0;
  for (auto& s : d.studies_) {
    s.time = (s.date.decimal_year() - lo) / d.time_scale_;
    sum += s.time;
  }
  d.mean_time_ = sum / static_cast<double>(d.studies_.size());

  d.occurrences_.assign(K, {});
  d.occurrence_index_.resize(d.studies_.size());
  for (std::size_t i = 0; i < d.studies_.size(); ++i) {
    const auto& s = d.studies_[i];
    d.occurrence_index_[i].resize(s.arms.size());
    for (std::size_t a = 0; a < s.arms.size(); ++a) {
      auto& occ = d.occurrences_[s.arms[a].treatment.value];
      d.occurrence_index_[i][a] = occ.size();
      occ.push_back(Occurrence{i, a});
    }
  }
  return d;
}

}  // namespace tnma
