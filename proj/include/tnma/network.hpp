#pragma once

// Trial-level domain types: treatments, study arms, studies, and the
// comparison network they induce.

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tnma {

struct TreatmentId {
  std::size_t value = 0;
  friend constexpr auto operator<=>(TreatmentId, TreatmentId) = default;
};

/// A date as written in the input, possibly missing the day (or month).
struct PartialDate {
  int year = 0;
  std::optional<unsigned> month;
  std::optional<unsigned> day;
};

struct CalendarDate {
  int year = 0;
  unsigned month = 1;
  unsigned day = 1;

  friend constexpr auto operator<=>(const CalendarDate&, const CalendarDate&) = default;

  /// ISO 8601 `YYYY-MM-DD`.
  std::string iso() const;
  /// Year plus the elapsed fraction of that year, e.g. 2004-07-02 -> ~2004.50.
  double decimal_year() const;
};

/// Parses `YYYY-MM-DD`, `YYYY-MM` or `YYYY`. Throws DataError on malformed or
/// out-of-range components. A year-only date parses but cannot be imputed.
PartialDate parse_partial_date(std::string_view text);

/// Fills a missing day with the middle of the month (15). Rejects dates
/// without a month.
CalendarDate impute_date(const PartialDate& date);

/// One arm row as read from a data file.
struct RawArmRecord {
  std::string study;
  PartialDate date;
  std::string treatment;
  long events = 0;
  long total = 0;
  std::size_t line = 0;  // source line for diagnostics, 0 if unknown
};

struct StudyArm {
  TreatmentId treatment;
  long successes = 0;
  long size = 0;
};

struct Study {
  std::size_t id = 0;
  std::string key;
  CalendarDate date;
  double time = 0.0;  // normalized to [0, 1]
  std::vector<StudyArm> arms;  // input order
  std::size_t baseline_arm = 0;
  std::vector<std::size_t> contrast_arms;  // non-baseline arm positions, input order

  TreatmentId baseline() const { return arms[baseline_arm].treatment; }
  std::size_t contrast_count() const { return contrast_arms.size(); }
  const StudyArm& contrast_arm(std::size_t j) const { return arms[contrast_arms[j]]; }
};

struct NetworkSummary {
  std::vector<std::size_t> occurrences;              // I_k
  std::vector<std::vector<std::size_t>> pair_counts;  // symmetric K x K
  std::vector<std::size_t> component;                // component label per treatment
  std::size_t component_count = 0;

  std::size_t treatment_count() const { return occurrences.size(); }
  std::size_t pair_count(TreatmentId a, TreatmentId b) const { return pair_counts[a.value][b.value]; }
};

/// Summary over an arbitrary list of studies with treatments indexed 0..K-1.
/// Does not require the network to be connected.
NetworkSummary summarize_studies(std::span<const Study> studies, std::size_t treatment_count);

/// Most common treatment, ties to the lowest index, unless overridden.
TreatmentId select_baseline(const NetworkSummary& summary,
                            std::optional<TreatmentId> override_id = std::nullopt);

/// Where treatment k appears: study index and arm position within it.
struct Occurrence {
  std::size_t study = 0;
  std::size_t arm = 0;
};

struct BuildOptions {
  std::optional<std::string> baseline;  // label of the global reference treatment
};

class Dataset;
Dataset build_dataset(std::span<const RawArmRecord> records, const BuildOptions& options = {});

/// Immutable validated arm-level dataset.
class Dataset {
 public:
  std::span<const Study> studies() const { return studies_; }
  const Study& study(std::size_t i) const { return studies_[i]; }
  std::size_t study_count() const { return studies_.size(); }
  std::size_t treatment_count() const { return labels_.size(); }
  std::size_t arm_count() const;

  const std::string& label(TreatmentId k) const { return labels_[k.value]; }
  std::span<const std::string> labels() const { return labels_; }
  std::optional<TreatmentId> find(std::string_view label) const;
  /// Like find() but throws DataError naming the unknown label.
  TreatmentId require(std::string_view label) const;

  TreatmentId baseline() const { return baseline_; }
  const NetworkSummary& summary() const { return summary_; }

  double time_origin() const { return time_origin_; }
  double time_scale() const { return time_scale_; }
  double mean_time() const { return mean_time_; }
  double to_calendar(double normalized) const { return time_origin_ + time_scale_ * normalized; }
  double to_normalized(double calendar) const { return (calendar - time_origin_) / time_scale_; }

  std::span<const Occurrence> occurrences(TreatmentId k) const { return occurrences_[k.value]; }
  /// Normalized study times at which treatment k occurs, in study order.
  std::vector<double> times_of(TreatmentId k) const;
  /// Position of (study, arm) within occurrences(treatment of that arm).
  std::size_t occurrence_index(std::size_t study, std::size_t arm) const {
    return occurrence_index_[study][arm];
  }

  /// Rows reproducing this dataset, in study then arm order, with full ISO dates.
  std::vector<RawArmRecord> to_records() const;

 private:
  friend Dataset build_dataset(std::span<const RawArmRecord>, const BuildOptions&);
  Dataset() = default;

  std::vector<Study> studies_;
  std::vector<std::string> labels_;
  TreatmentId baseline_;
  NetworkSummary summary_;
  double time_origin_ = 0.0;
  double time_scale_ = 1.0;
  double mean_time_ = 0.0;
  std::vector<std::vector<Occurrence>> occurrences_;
  std::vector<std::vector<std::size_t>> occurrence_index_;
};

/// Summary of a validated dataset (equal to dataset.summary()).
NetworkSummary network_summary(const Dataset& data);

}  // namespace tnma
