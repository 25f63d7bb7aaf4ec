#pragma once

// Batch pipeline: CSV ingestion, analysis runs and report files.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tnma/model.hpp"
#include "tnma/network.hpp"
#include "tnma/posterior.hpp"
#include "tnma/sampler.hpp"
#include "tnma/simgen.hpp"

namespace tnma {

inline constexpr const char* kCsvHeader = "study,date,treatment,events,total";
inline constexpr int kSummaryFormatVersion = 1;
inline constexpr double kRhatThreshold = 1.05;

/// Reads arm rows. The first line must equal kCsvHeader exactly (a UTF-8 BOM
/// and trailing CR are tolerated). Row errors carry the 1-based line number.
std::vector<RawArmRecord> read_records(std::istream& in);
Dataset ingest(const std::filesystem::path& path, const BuildOptions& options = {});

void write_dataset_csv(const Dataset& data, std::ostream& out);
void write_dataset_csv(const Dataset& data, const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same double.
std::string format_number(double x);

struct RunConfig {
  std::filesystem::path input;
  ModelKind model = ModelKind::TBNMA;
  std::optional<std::string> baseline;
  std::vector<std::string> time_varying;
  SamplerConfig sampler;
  std::filesystem::path out_dir = ".";
  std::size_t grid_size = 101;
  int format_version = kSummaryFormatVersion;
  bool write_samples = false;

  /// Throws UsageError on an invalid combination.
  void validate() const;
};

struct Analysis {
  ModelSpec spec;
  PosteriorSamples samples;
  std::vector<ScalarDiagnostic> diagnostics;
  std::vector<EndOfPeriodEffect> end_of_period;
  std::vector<EffectCurve> curves;
  std::vector<std::string> warnings;
};

/// Treatments that get a curve: the time-varying labels if any were given,
/// else every non-baseline treatment.
std::vector<TreatmentId> curve_treatments(const Dataset& data, const ModelSpec& spec,
                                          std::span<const std::string> time_varying_labels);

/// One message per monitored scalar whose split R-hat is not below
/// kRhatThreshold, or a single message when R-hat cannot be computed.
std::vector<std::string> convergence_warnings(const PosteriorSamples& samples,
                                              std::span<const ScalarDiagnostic> diagnostics);

/// Fits one model in memory.
Analysis analyze(const Dataset& data, const RunConfig& config);

nlohmann::ordered_json summary_json(const Dataset& data, const RunConfig& config, const Analysis& analysis);
void write_curves_csv(const Dataset& data, std::span<const EffectCurve> curves, std::ostream& out);
void write_samples_csv(const Analysis& analysis, const Dataset& data, std::ostream& out);

/// ingest + analyze, then writes summary.json, curves.csv and optionally samples.csv
/// into config.out_dir.
Analysis run_analysis(const RunConfig& config);

struct SimStudyConfig {
  std::filesystem::path skeleton;
  std::optional<std::filesystem::path> out_dir;
  std::uint64_t seed = 1;
  SamplerConfig sampler;
  std::size_t grid_size = 101;
  std::string target = "VAN";
  std::optional<std::string> reference = std::string("LIN");
  std::vector<Scenario> scenarios = default_scenarios();
};

struct SimRun {
  std::string scenario;
  ModelKind model = ModelKind::BNMA;
  std::vector<double> grid;  // normalized
  std::vector<double> truth;
  EffectCurve curve;
  double rmse = 0.0;      // posterior-mean curve vs truth over the grid
  double coverage = 0.0;  // fraction of grid points inside the 95% band
  double mean_width = 0.0;
  std::vector<ScalarDiagnostic> diagnostics;
  std::vector<std::string> rhat_failures;  // monitored scalars with R-hat >= 1.05 or undefined
};

struct SimStudyReport {
  std::vector<SimRun> runs;  // scenario-major, models in bnma, meta, tbnma order
  std::vector<std::pair<std::string, std::vector<ComparisonRow>>> comparisons;  // per scenario

  const SimRun& find(std::string_view scenario, ModelKind model) const;
  nlohmann::ordered_json to_json() const;
};

/// Runs every scenario under BNMA, Meta-BNMA and tBNMA, with the target
/// treatment time-varying in the latter two. Writes simstudy.json, the
/// simulated datasets and per-run curves when out_dir is set.
SimStudyReport run_simstudy(const Dataset& skeleton, const SimStudyConfig& config);
SimStudyReport run_simstudy(const SimStudyConfig& config);

}  // namespace tnma
