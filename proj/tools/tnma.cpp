// tnma: batch front-end for time-varying network meta-analysis.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>

#include <CLI11.hpp>

#include "tnma/app.hpp"
#include "tnma/error.hpp"

namespace {

struct SamplerFlags {
  std::size_t chains = 4;
  std::size_t iters = 20000;
  std::size_t burnin = 10000;
  std::size_t thin = 10;
  std::uint64_t seed = 1;
  std::string effect_update = "gibbs";
  bool quiet = false;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--chains", chains, "Number of chains")->capture_default_str();
    cmd.add_option("--iters", iters, "Iterations per chain, burn-in included")->capture_default_str();
    cmd.add_option("--burnin", burnin, "Burn-in iterations")->capture_default_str();
    cmd.add_option("--thin", thin, "Keep every n-th post-burn-in draw")->capture_default_str();
    cmd.add_option("--seed", seed, "Random seed")->capture_default_str();
    cmd.add_option("--effect-update", effect_update, "Effect parameter update: gibbs or random-walk")
        ->check(CLI::IsMember({"gibbs", "random-walk"}))
        ->capture_default_str();
    cmd.add_flag("--quiet,-q", quiet, "No progress output");
  }

  tnma::SamplerConfig config() const {
    tnma::SamplerConfig c;
    c.n_chains = chains;
    c.n_iter = iters;
    c.burn_in = burnin;
    c.thin = thin;
    c.seed = seed;
    c.effect_update = effect_update == "gibbs" ? tnma::EffectUpdate::Gibbs : tnma::EffectUpdate::RandomWalk;
    if (!quiet) {
      auto mutex = std::make_shared<std::mutex>();
      c.progress = [mutex](const tnma::mcmc::Progress& p) {
        std::lock_guard lock(*mutex);
        std::fprintf(stderr, "chain %zu: %zu/%zu\n", p.chain, p.iteration, p.total);
      };
    }
    return c;
  }
};

std::vector<std::string> split_labels(const std::string& list) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const auto comma = list.find(',', start);
    const auto end = comma == std::string::npos ? list.size() : comma;
    if (end > start) out.push_back(list.substr(start, end - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

void print_network(const tnma::Dataset& data) {
  const auto& summary = data.summary();
  std::cout << "studies: " << data.study_count() << "\ntreatments: " << data.treatment_count()
            << "\narms: " << data.arm_count() << "\nbaseline: " << data.label(data.baseline())
            << "\nperiod: " << tnma::format_number(data.to_calendar(0.0)) << " to "
            << tnma::format_number(data.to_calendar(1.0)) << "\n\ntreatment,arms\n";
  for (std::size_t k = 0; k < data.treatment_count(); ++k)
    std::cout << data.label(tnma::TreatmentId{k}) << ',' << summary.occurrences[k] << '\n';
  std::cout << "\npair,studies\n";
  for (std::size_t a = 0; a < data.treatment_count(); ++a)
    for (std::size_t b = a + 1; b < data.treatment_count(); ++b)
      if (const auto n = summary.pair_count(tnma::TreatmentId{a}, tnma::TreatmentId{b}); n > 0)
        std::cout << data.label(tnma::TreatmentId{a}) << '-' << data.label(tnma::TreatmentId{b}) << ',' << n << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian network meta-analysis with time-varying treatment effects"};
  app.require_subcommand(1);

  // run
  auto* run_cmd = app.add_subcommand("run", "Fit one model and write summary.json and curves.csv");
  tnma::RunConfig run_config;
  std::string model = "tbnma", time_varying, baseline;
  SamplerFlags run_flags;
  run_cmd->add_option("input", run_config.input, "Arm-level CSV")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--model", model, "bnma, meta or tbnma")
      ->check(CLI::IsMember({"bnma", "meta", "tbnma"}))
      ->capture_default_str();
  run_cmd->add_option("--baseline", baseline, "Global baseline treatment label");
  run_cmd->add_option("--time-varying", time_varying, "Comma-separated time-varying treatment labels");
  run_cmd->add_option("--grid", run_config.grid_size, "Curve grid points")->capture_default_str();
  run_cmd->add_option("--out", run_config.out_dir, "Output directory")->capture_default_str();
  run_cmd->add_flag("--samples", run_config.write_samples, "Also write samples.csv");
  run_flags.add_to(*run_cmd);

  // simstudy
  auto* sim_cmd = app.add_subcommand("simstudy", "Three scenarios under all three models on a skeleton network");
  tnma::SimStudyConfig sim_config;
  std::string reference = "LIN";
  std::size_t sim_grid = 101;
  std::string sim_out = "simstudy";
  SamplerFlags sim_flags;
  sim_cmd->add_option("skeleton", sim_config.skeleton, "Arm-level CSV whose design is reused")
      ->required()
      ->check(CLI::ExistingFile);
  sim_cmd->add_option("--target", sim_config.target, "Treatment given the time-varying effect")->capture_default_str();
  sim_cmd->add_option("--reference", reference, "Baseline for the generated data")->capture_default_str();
  sim_cmd->add_option("--grid", sim_grid, "Curve grid points")->capture_default_str();
  sim_cmd->add_option("--out", sim_out, "Output directory")->capture_default_str();
  sim_flags.add_to(*sim_cmd);

  // summarize
  auto* sum_cmd = app.add_subcommand("summarize", "Describe a network: arms per treatment and pairwise study counts");
  std::filesystem::path sum_input;
  std::string sum_baseline;
  sum_cmd->add_option("input", sum_input, "Arm-level CSV")->required()->check(CLI::ExistingFile);
  sum_cmd->add_option("--baseline", sum_baseline, "Global baseline treatment label");

  // simulate
  auto* gen_cmd = app.add_subcommand("simulate", "Generate one synthetic dataset on a skeleton network");
  std::filesystem::path gen_input, gen_out;
  std::string scenario = "sigmoid", gen_target = "VAN", gen_reference = "LIN";
  std::uint64_t gen_seed = 1;
  long arm_size = 0;
  gen_cmd->add_option("skeleton", gen_input, "Arm-level CSV whose design is reused")->required()->check(CLI::ExistingFile);
  gen_cmd->add_option("--scenario", scenario, "constant, quadratic or sigmoid")
      ->check(CLI::IsMember({"constant", "quadratic", "sigmoid"}))
      ->capture_default_str();
  gen_cmd->add_option("--target", gen_target)->capture_default_str();
  gen_cmd->add_option("--reference", gen_reference)->capture_default_str();
  gen_cmd->add_option("--arm-size", arm_size, "Fixed arm size (default: the skeleton's)");
  gen_cmd->add_option("--seed", gen_seed)->capture_default_str();
  gen_cmd->add_option("--out", gen_out, "Output CSV (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*run_cmd) {
      const auto kind = tnma::parse_model_kind(model);
      run_config.model = *kind;
      if (!baseline.empty()) run_config.baseline = baseline;
      run_config.time_varying = split_labels(time_varying);
      run_config.sampler = run_flags.config();
      const auto analysis = tnma::run_analysis(run_config);
      for (const auto& w : analysis.warnings) std::cerr << "warning: " << w << '\n';
      std::cout << "wrote " << (run_config.out_dir / "summary.json").string() << '\n';
    } else if (*sim_cmd) {
      sim_config.reference = reference;
      sim_config.grid_size = sim_grid;
      sim_config.out_dir = sim_out;
      sim_config.sampler = sim_flags.config();
      sim_config.seed = sim_flags.seed;
      const auto report = tnma::run_simstudy(sim_config);
      std::cout << "scenario,model,rmse,coverage,mean_width,rhat_failures\n";
      for (const auto& r : report.runs)
        std::cout << r.scenario << ',' << tnma::to_string(r.model) << ',' << tnma::format_number(r.rmse) << ','
                  << tnma::format_number(r.coverage) << ',' << tnma::format_number(r.mean_width) << ','
                  << r.rhat_failures.size() << '\n';
    } else if (*sum_cmd) {
      tnma::BuildOptions options;
      if (!sum_baseline.empty()) options.baseline = sum_baseline;
      print_network(tnma::ingest(sum_input, options));
    } else if (*gen_cmd) {
      const tnma::Dataset skeleton = tnma::ingest(gen_input);
      tnma::Scenario s;
      for (const auto& d : tnma::default_scenarios())
        if (d.name == scenario) s = d;
      s.target = gen_target;
      s.reference = gen_reference;
      s.seed = gen_seed;
      if (arm_size > 0) s.arm_size = arm_size;
      const auto sim = tnma::generate(skeleton, s);
      if (gen_out.empty()) {
        tnma::write_dataset_csv(sim.data, std::cout);
      } else {
        tnma::write_dataset_csv(sim.data, gen_out);
      }
    }
  } catch (const tnma::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const tnma::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const tnma::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
