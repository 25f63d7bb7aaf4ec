#include "tnma/app.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "tnma/error.hpp"

namespace tnma {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

long parse_count(std::string_view text, const char* field, std::size_t line) {
  long v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size() || text.empty())
    throw DataError("line " + std::to_string(line) + ": " + field + " '" + std::string(text) +
                    "' is not an integer");
  return v;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path.string());
  return out;
}

ordered_json optional_number(const std::optional<double>& v) {
  if (v && std::isfinite(*v)) return *v;
  return nullptr;
}

ordered_json effect_json(const EffectSummary& s) {
  return {{"mean", s.mean},
          {"q025", s.q025},
          {"q50", s.q50},
          {"q975", s.q975},
          {"prob_inferior", s.prob_negative},
          {"prob_superior", s.prob_positive}};
}

ordered_json rows_json(std::span<const ComparisonRow> rows) {
  ordered_json out = ordered_json::array();
  for (const auto& r : rows)
    out.push_back({{"treatment", r.treatment},
                   {"model", r.model},
                   {"mean", r.mean},
                   {"q025", r.q025},
                   {"q975", r.q975},
                   {"width", r.width}});
  return out;
}

}  // namespace

std::string format_number(double x) {
  if (std::isnan(x)) return "NA";
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
  return std::string(buf, end);
}

std::vector<RawArmRecord> read_records(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("input is empty; expected header '" + std::string(kCsvHeader) + "'");
  std::string_view header = line;
  if (header.starts_with("\xEF\xBB\xBF")) header.remove_prefix(3);
  if (header.ends_with('\r')) header.remove_suffix(1);
  if (header != kCsvHeader)
    throw DataError("line 1: expected header '" + std::string(kCsvHeader) + "', found '" + std::string(header) + "'");

  std::vector<RawArmRecord> records;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 5)
      throw DataError("line " + std::to_string(number) + ": expected 5 fields, found " +
                      std::to_string(fields.size()));
    RawArmRecord r;
    r.line = number;
    r.study = std::string(trim(fields[0]));
    r.treatment = std::string(trim(fields[2]));
    if (r.study.empty()) throw DataError("line " + std::to_string(number) + ": empty study id");
    if (r.treatment.empty()) throw DataError("line " + std::to_string(number) + ": empty treatment");
    try {
      r.date = parse_partial_date(trim(fields[1]));
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(number) + ": " + e.what());
    }
    r.events = parse_count(trim(fields[3]), "events", number);
    r.total = parse_count(trim(fields[4]), "total", number);
    if (r.events < 0) throw DataError("line " + std::to_string(number) + ": events must be nonnegative");
    if (r.total < 1) throw DataError("line " + std::to_string(number) + ": total must be positive");
    if (r.events > r.total)
      throw DataError("line " + std::to_string(number) + ": events (" + std::to_string(r.events) +
                      ") exceed total (" + std::to_string(r.total) + ")");
    records.push_back(std::move(r));
  }
  return records;
}

Dataset ingest(const fs::path& path, const BuildOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const auto records = read_records(in);
  return build_dataset(records, options);
}

void write_dataset_csv(const Dataset& data, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const auto& r : data.to_records())
    out << r.study << ',' << impute_date(r.date).iso() << ',' << r.treatment << ',' << r.events << ','
        << r.total << '\n';
}

void write_dataset_csv(const Dataset& data, const fs::path& path) {
  auto out = open_output(path);
  write_dataset_csv(data, out);
}

void RunConfig::validate() const {
  sampler.validate();
  if (model != ModelKind::BNMA && time_varying.empty())
    throw UsageError(std::string(to_string(model)) + " needs at least one time-varying treatment");
  if (grid_size < 2) throw UsageError("grid size must be at least 2");
  if (format_version != kSummaryFormatVersion)
    throw UsageError("unsupported report format version " + std::to_string(format_version));
}

std::vector<TreatmentId> curve_treatments(const Dataset& data, const ModelSpec& spec,
                                          std::span<const std::string> time_varying_labels) {
  std::vector<TreatmentId> out;
  if (!time_varying_labels.empty()) {
    for (const auto& l : time_varying_labels) out.push_back(data.require(l));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  } else {
    for (std::size_t k = 0; k < data.treatment_count(); ++k)
      if (TreatmentId{k} != spec.baseline) out.push_back(TreatmentId{k});
  }
  return out;
}

std::vector<std::string> convergence_warnings(const PosteriorSamples& samples,
                                              std::span<const ScalarDiagnostic> diagnostics) {
  if (samples.chains.size() < 2 || samples.retained_per_chain() < 4)
    return {"split R-hat needs at least two chains with four retained draws each"};
  std::vector<std::string> out;
  for (const auto& d : diagnostics) {
    if (!d.rhat)
      out.push_back("split R-hat for " + d.name + " is undefined (chains are constant)");
    else if (!(*d.rhat < kRhatThreshold))
      out.push_back("split R-hat for " + d.name + " is " + format_number(*d.rhat) + ", above " +
                    format_number(kRhatThreshold));
  }
  return out;
}

Analysis analyze(const Dataset& data, const RunConfig& config) {
  config.validate();
  std::optional<TreatmentId> baseline;
  if (config.baseline) baseline = data.require(*config.baseline);

  Analysis a;
  a.spec = ModelSpec::make(data, config.model, config.time_varying, baseline);
  a.samples = run(data, a.spec, config.sampler);
  a.diagnostics = diagnose(a.samples, data, a.spec);
  a.end_of_period = end_of_period_effects(a.samples, a.spec, data);

  const auto grid = default_grid(config.grid_size);
  for (TreatmentId k : curve_treatments(data, a.spec, config.time_varying))
    a.curves.push_back(effect_curve(a.samples, a.spec, data, k, grid));

  a.warnings = convergence_warnings(a.samples, a.diagnostics);
  return a;
}

ordered_json summary_json(const Dataset& data, const RunConfig& config, const Analysis& a) {
  ordered_json j;
  j["format"] = "tnma-summary";
  j["version"] = config.format_version;

  ordered_json tv = ordered_json::array();
  for (TreatmentId k : a.spec.time_varying_set()) tv.push_back(data.label(k));
  j["config"] = {{"input", config.input.generic_string()},
                 {"model", std::string(to_string(config.model))},
                 {"baseline", data.label(a.spec.baseline)},
                 {"time_varying", tv},
                 {"chains", config.sampler.n_chains},
                 {"iters", config.sampler.n_iter},
                 {"burnin", config.sampler.burn_in},
                 {"thin", config.sampler.thin},
                 {"grid", config.grid_size},
                 {"effect_update", config.sampler.effect_update == EffectUpdate::Gibbs ? "gibbs" : "random-walk"}};
  j["seed"] = config.sampler.seed;

  j["dataset"] = {{"studies", data.study_count()},
                  {"treatments", data.treatment_count()},
                  {"arms", data.arm_count()},
                  {"time_origin", data.time_origin()},
                  {"time_scale", data.time_scale()},
                  {"end_of_period", data.to_calendar(1.0)}};

  ordered_json eop = ordered_json::array();
  for (const auto& e : a.end_of_period) {
    ordered_json row = {{"treatment", e.label}};
    row.update(effect_json(e.summary));
    eop.push_back(std::move(row));
  }
  j["end_of_period"] = std::move(eop);

  ordered_json windows = ordered_json::array();
  for (const auto& c : a.curves) {
    ordered_json w = ordered_json::array();
    for (const auto& [lo, hi] : exclusion_windows(c)) w.push_back({lo, hi});
    windows.push_back({{"treatment", data.label(c.treatment)}, {"windows", std::move(w)}});
  }
  j["exclusion_windows"] = std::move(windows);

  ordered_json scalars = ordered_json::array();
  for (const auto& d : a.diagnostics)
    scalars.push_back({{"name", d.name},
                       {"mean", d.mean},
                       {"sd", d.sd},
                       {"rhat", optional_number(d.rhat)},
                       {"ess", optional_number(d.ess)}});

  ordered_json blocks = ordered_json::array();
  if (!a.samples.chains.empty()) {
    const auto& first = a.samples.chains.front().blocks;
    for (std::size_t b = 0; b < first.size(); ++b) {
      if (std::isnan(first[b].target)) continue;
      ordered_json rates = ordered_json::array();
      for (const auto& c : a.samples.chains) rates.push_back(c.blocks[b].acceptance_rate);
      blocks.push_back({{"name", first[b].name}, {"target", first[b].target}, {"acceptance_rate", rates}});
    }
  }
  j["diagnostics"] = {{"rhat_threshold", kRhatThreshold}, {"scalars", scalars}, {"blocks", blocks}};
  j["warnings"] = a.warnings;
  return j;
}

void write_curves_csv(const Dataset& data, std::span<const EffectCurve> curves, std::ostream& out) {
  out << "treatment,time,mean,q025,q50,q975\n";
  for (const auto& c : curves)
    for (std::size_t j = 0; j < c.times.size(); ++j)
      out << data.label(c.treatment) << ',' << format_number(c.times[j]) << ',' << format_number(c.mean[j]) << ','
          << format_number(c.q025[j]) << ',' << format_number(c.q50[j]) << ',' << format_number(c.q975[j])
          << '\n';
}

void write_samples_csv(const Analysis& a, const Dataset& data, std::ostream& out) {
  const auto scalars = monitored_scalars(data, a.spec);
  out << "chain,draw";
  for (const auto& s : scalars) out << ',' << s.name;
  out << '\n';
  for (std::size_t c = 0; c < a.samples.chains.size(); ++c) {
    const auto& draws = a.samples.chains[c].draws;
    for (std::size_t i = 0; i < draws.size(); ++i) {
      out << c << ',' << i;
      for (const auto& s : scalars) out << ',' << format_number(s.extract(draws[i]));
      out << '\n';
    }
  }
}

Analysis run_analysis(const RunConfig& config) {
  config.validate();
  BuildOptions options;
  options.baseline = config.baseline;
  const Dataset data = ingest(config.input, options);
  Analysis a = analyze(data, config);

  fs::create_directories(config.out_dir);
  {
    auto out = open_output(config.out_dir / "summary.json");
    out << summary_json(data, config, a).dump(2) << '\n';
  }
  {
    auto out = open_output(config.out_dir / "curves.csv");
    write_curves_csv(data, a.curves, out);
  }
  if (config.write_samples) {
    auto out = open_output(config.out_dir / "samples.csv");
    write_samples_csv(a, data, out);
  }
  return a;
}

const SimRun& SimStudyReport::find(std::string_view scenario, ModelKind model) const {
  for (const auto& r : runs)
    if (r.scenario == scenario && r.model == model) return r;
  throw UsageError("no simulation run for " + std::string(scenario) + "/" + std::string(to_string(model)));
}

ordered_json SimStudyReport::to_json() const {
  ordered_json j;
  j["format"] = "tnma-simstudy";
  j["version"] = kSummaryFormatVersion;
  ordered_json rs = ordered_json::array();
  for (const auto& r : runs) {
    ordered_json max_rhat = nullptr;
    double worst = 0.0;
    for (const auto& d : r.diagnostics)
      if (d.rhat) worst = std::max(worst, *d.rhat);
    if (!r.diagnostics.empty()) max_rhat = worst;
    rs.push_back({{"scenario", r.scenario},
                  {"model", std::string(to_string(r.model))},
                  {"rmse", r.rmse},
                  {"coverage", r.coverage},
                  {"mean_width", r.mean_width},
                  {"max_rhat", max_rhat},
                  {"rhat_failures", r.rhat_failures}});
  }
  j["runs"] = std::move(rs);
  ordered_json cmp = ordered_json::object();
  for (const auto& [scenario, rows] : comparisons) cmp[scenario] = rows_json(rows);
  j["comparisons"] = std::move(cmp);
  return j;
}

SimStudyReport run_simstudy(const Dataset& skeleton, const SimStudyConfig& config) {
  if (config.grid_size < 2) throw UsageError("grid size must be at least 2");
  if (config.out_dir) fs::create_directories(*config.out_dir);

  const ModelKind kinds[] = {ModelKind::BNMA, ModelKind::MetaBNMA, ModelKind::TBNMA};
  const std::vector<std::string> varying = {config.target};
  const auto grid = default_grid(config.grid_size);

  SimStudyReport report;
  for (std::size_t s = 0; s < config.scenarios.size(); ++s) {
    Scenario scenario = config.scenarios[s];
    scenario.target = config.target;
    scenario.reference = config.reference;
    scenario.seed = mcmc::chain_seed(config.seed, s);
    const SimulatedData sim = generate(skeleton, scenario);
    const Dataset& data = sim.data;
    const TreatmentId target = data.require(config.target);
    if (config.out_dir) write_dataset_csv(data, *config.out_dir / ("data_" + scenario.name + ".csv"));

    std::vector<double> truth(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) truth[g] = sim.truth.effect(target, grid[g]);

    std::vector<PosteriorSamples> samples;
    std::vector<ModelSpec> specs;
    samples.reserve(3);
    for (std::size_t m = 0; m < 3; ++m) {
      SamplerConfig sc = config.sampler;
      sc.seed = mcmc::chain_seed(config.seed, 1000 + 3 * s + m);
      const ModelSpec spec = ModelSpec::make(
          data, kinds[m], kinds[m] == ModelKind::BNMA ? std::vector<std::string>{} : varying, data.baseline());
      samples.push_back(run(data, spec, sc));
      specs.push_back(spec);

      SimRun r;
      r.scenario = scenario.name;
      r.model = kinds[m];
      r.grid = grid;
      r.truth = truth;
      r.curve = effect_curve(samples.back(), spec, data, target, grid);
      double sq = 0.0, width = 0.0;
      std::size_t covered = 0;
      for (std::size_t g = 0; g < grid.size(); ++g) {
        const double err = r.curve.mean[g] - truth[g];
        sq += err * err;
        width += r.curve.q975[g] - r.curve.q025[g];
        covered += r.curve.q025[g] <= truth[g] && truth[g] <= r.curve.q975[g];
      }
      const double n = static_cast<double>(grid.size());
      r.rmse = std::sqrt(sq / n);
      r.coverage = static_cast<double>(covered) / n;
      r.mean_width = width / n;
      r.diagnostics = diagnose(samples.back(), data, spec);
      for (const auto& d : r.diagnostics)
        if (!d.rhat || !(*d.rhat < kRhatThreshold)) r.rhat_failures.push_back(d.name);

      if (config.out_dir) {
        auto out = open_output(*config.out_dir /
                               ("curves_" + scenario.name + "_" + std::string(to_string(kinds[m])) + ".csv"));
        out << "treatment,time,mean,q025,q50,q975,truth\n";
        for (std::size_t g = 0; g < grid.size(); ++g)
          out << config.target << ',' << format_number(r.curve.times[g]) << ',' << format_number(r.curve.mean[g])
              << ',' << format_number(r.curve.q025[g]) << ',' << format_number(r.curve.q50[g]) << ','
              << format_number(r.curve.q975[g]) << ',' << format_number(truth[g]) << '\n';
      }
      report.runs.push_back(std::move(r));
    }

    std::vector<ModelRun> runs;
    for (std::size_t m = 0; m < 3; ++m) runs.push_back({std::string(to_string(kinds[m])), &samples[m], specs[m]});
    report.comparisons.emplace_back(scenario.name, compare_models(runs, data));
  }

  if (config.out_dir) {
    auto out = open_output(*config.out_dir / "simstudy.json");
    out << report.to_json().dump(2) << '\n';
  }
  return report;
}

SimStudyReport run_simstudy(const SimStudyConfig& config) {
  return run_simstudy(ingest(config.skeleton), config);
}

}  // namespace tnma
