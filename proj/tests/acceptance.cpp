// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// gating criterion fails. Criterion 7 needs the original trial data and runs
// only when TNMA_MRSA_DATA points at it; it never gates.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "oracles.hpp"
#include "tnma/app.hpp"
#include "tnma/diagnostics.hpp"
#include "tnma/kernels.hpp"
#include "tnma/model.hpp"
#include "toy_model.hpp"

using namespace tnma;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  enum Status { Pass, Fail, Skip } status = Fail;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double x, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tnma_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// 1. Conditional-product contrast prior versus the joint normal.
Outcome multi_arm_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::normal_distribution<double> z;
  std::uniform_int_distribution<int> arms_dist(2, 4);
  std::uniform_real_distribution<double> s2_dist(0.01, 4.0);
  const char* labels[] = {"A", "B", "C", "D", "E"};
  double worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    // One study on a random subset of treatments; B is the global baseline,
    // so studies without B exercise non-baseline study references.
    std::vector<int> pick{0, 1, 2, 3, 4};
    std::shuffle(pick.begin(), pick.end(), rng);
    const int m = arms_dist(rng);
    std::vector<RawArmRecord> recs;
    for (int a = 0; a < m; ++a) {
      RawArmRecord r;
      r.study = "S";
      r.date = PartialDate{2000, 1, 1};
      r.treatment = labels[pick[static_cast<std::size_t>(a)]];
      r.events = 1;
      r.total = 10;
      recs.push_back(r);
    }
    const bool has_b = std::find(pick.begin(), pick.begin() + m, 1) != pick.begin() + m;
    const Dataset d = build_dataset(recs, has_b ? BuildOptions{"B"} : BuildOptions{});
    const auto spec = ModelSpec::make(d, ModelKind::BNMA, std::vector<std::string>{});
    ParamState p = ParamState::zeros(d, spec);
    for (auto k : p.d.free_treatments()) p.d[k] = z(rng);
    p.sigma2 = s2_dist(rng);
    const Study& s = d.study(0);
    Eigen::VectorXd x(static_cast<Eigen::Index>(s.contrast_count()));
    Eigen::VectorXd mean(x.size());
    for (std::size_t j = 0; j < s.contrast_count(); ++j) {
      p.delta[0][j] = 2.0 * z(rng);
      x[static_cast<Eigen::Index>(j)] = p.delta[0][j];
      mean[static_cast<Eigen::Index>(j)] = p.d[s.contrast_arm(j).treatment] - p.d[s.baseline()];
    }
    const double expected = oracle::mvn_logpdf(x, mean, oracle::contrast_covariance(s.contrast_count(), p.sigma2));
    worst = std::max(worst, std::abs(delta_logprior(d, spec, p, 0) - expected));
  }
  const double secs = seconds_since(t0);
  const bool ok = worst <= 1e-8 && secs < 5.0;
  return {ok ? Outcome::Pass : Outcome::Fail,
          "1000 studies, max |diff| " + fmt(worst) + ", " + fmt(secs, 3) + " s"};
}

// 2. Summed kernel is symmetric PSD and factorizes within the jitter ladder.
Outcome kernel_correctness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> size(1, 20);
  double worst_asym = 0.0, min_eig = 0.0, max_jitter = 0.0;
  int failures = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    // Amplitudes spread over several orders of magnitude, some exactly zero.
    const auto amp = [&] { return unit(rng) < 0.15 ? 0.0 : std::exp(std::log(10.0) * (4 * unit(rng) - 3)); };
    const KernelParams p{amp(), amp(), amp(), amp(), std::exp(std::log(10.0) * (4 * unit(rng) - 2))};
    std::vector<double> t(static_cast<std::size_t>(size(rng)));
    for (auto& v : t) v = unit(rng) < 0.1 && &v != t.data() ? t.front() : unit(rng);  // some repeated times
    const Eigen::MatrixXd k = kernel_matrix(p, t);
    worst_asym = std::max(worst_asym, (k - k.transpose()).cwiseAbs().maxCoeff());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(oracle::kernel(p.psi, p.s_b, p.s_l, p.phi, p.rho, t));
    min_eig = std::min(min_eig, eig.eigenvalues().minCoeff());
    if (p.psi == 0 && p.s_b == 0 && p.s_l == 0 && p.phi == 0) continue;  // the zero matrix has no factor
    try {
      const CovarianceMatrix c(k);
      max_jitter = std::max(max_jitter, c.jitter());
    } catch (const NumericalError&) {
      ++failures;
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = worst_asym == 0.0 && min_eig >= -1e-10 && failures == 0 && max_jitter <= 1e-6 && secs < 10.0;
  return {ok ? Outcome::Pass : Outcome::Fail,
          "asymmetry " + fmt(worst_asym) + ", min eigenvalue " + fmt(min_eig) + ", max jitter " + fmt(max_jitter) +
              ", factorization failures " + std::to_string(failures) + ", " + fmt(secs, 3) + " s"};
}

// 3. GP conditioning versus explicit inverses, and exact interpolation.
Outcome gp_oracle() {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> z;
  double worst = 0.0;
  for (int rep = 0; rep < 500; ++rep) {
    const KernelParams p{0.1 + unit(rng), unit(rng), unit(rng), 0.1 + unit(rng), 0.2 + 5 * unit(rng)};
    std::vector<double> train(1 + rep % 15), query(1 + rep % 7);
    for (auto& v : train) v = unit(rng);
    for (auto& v : query) v = unit(rng);
    std::vector<double> y(train.size());
    for (auto& v : y) v = z(rng);
    const double level = z(rng);
    const auto got = gp_condition(train, y, level, p, query);
    const auto want = oracle::gp_condition(p.psi, p.s_b, p.s_l, p.phi, p.rho, train,
                                           Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size())),
                                           level, query);
    worst = std::max({worst, (got.mean - want.mean).cwiseAbs().maxCoeff(), (got.cov - want.cov).cwiseAbs().maxCoeff()});
  }

  double interp_mean = 0.0, interp_var = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const KernelParams p{0.0, unit(rng), unit(rng), 0.2 + unit(rng), 0.5 + 3 * unit(rng)};
    std::vector<double> train(2 + rep % 10);
    for (std::size_t i = 0; i < train.size(); ++i) train[i] = (static_cast<double>(i) + 0.5 * unit(rng)) / static_cast<double>(train.size());
    std::vector<double> y(train.size());
    for (auto& v : y) v = z(rng);
    const auto g = gp_condition(train, y, 0.0, p, train);
    for (std::size_t i = 0; i < train.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      interp_mean = std::max(interp_mean, std::abs(g.mean[ii] - y[i]));
      interp_var = std::max(interp_var, std::abs(g.cov(ii, ii)));
    }
  }
  const bool ok = worst <= 1e-8 && interp_var <= 1e-8 && interp_mean <= 1e-6;
  return {ok ? Outcome::Pass : Outcome::Fail,
          "500 instances, max |diff| " + fmt(worst) + "; psi=0 interpolation: max |mean - y| " + fmt(interp_mean) +
              ", max var " + fmt(interp_var)};
}

// 4. Random-walk block on a conjugate posterior.
Outcome sampler_calibration() {
  const auto t0 = Clock::now();
  const auto model = toy::NormalMean::make(25, 404);
  const tnma::mcmc::ChainSettings settings{2000 + 1250 * 10, 2000, 10, 50};
  const Traces t = toy::sample(model, 4, settings, 404);
  std::vector<double> draws;
  for (const auto& c : t) draws.insert(draws.end(), c.begin(), c.end());
  const double n = static_cast<double>(draws.size());
  double m = 0.0;
  for (double x : draws) m += x;
  m /= n;
  double v = 0.0;
  for (double x : draws) v += (x - m) * (x - m);
  v /= n - 1.0;

  const double ess = effective_sample_size(t).value_or(1.0);
  const double mcse_mean = std::sqrt(model.post_var() / ess);
  const double mcse_var = model.post_var() * std::sqrt(2.0 / ess);
  const double ks = oracle::ks_normal(draws, model.post_mean(), model.post_var());
  const double secs = seconds_since(t0);
  const double zm = std::abs(m - model.post_mean()) / mcse_mean;
  const double zv = std::abs(v - model.post_var()) / mcse_var;
  const bool ok = draws.size() == 5000 && zm < 3 && zv < 3 && ks < 0.05 && secs < 60;
  return {ok ? Outcome::Pass : Outcome::Fail,
          std::to_string(draws.size()) + " draws, mean off by " + fmt(zm, 3) + " MCSE, variance off by " + fmt(zv, 3) +
              " MCSE, KS " + fmt(ks, 3) + ", ESS " + fmt(ess, 5) + ", " + fmt(secs, 3) + " s"};
}

// 5 and 6 share one simulation study with the default sampler settings.
struct SimOutcomes {
  Outcome recovery, convergence;
};

SimOutcomes simulation_study() {
  const auto t0 = Clock::now();
  SimStudyConfig config;
  config.skeleton = oracle::data_file("mrsa_skeleton.csv");
  config.out_dir = scratch("simstudy");
  const SimStudyReport r = run_simstudy(config);
  const double secs = seconds_since(t0);

  const auto& sb = r.find("sigmoid", ModelKind::BNMA);
  const auto& sm = r.find("sigmoid", ModelKind::MetaBNMA);
  const auto& st = r.find("sigmoid", ModelKind::TBNMA);
  const auto& cb = r.find("constant", ModelKind::BNMA);
  const auto& cm = r.find("constant", ModelKind::MetaBNMA);
  const auto& ct = r.find("constant", ModelKind::TBNMA);
  const auto& qm = r.find("quadratic", ModelKind::MetaBNMA);
  const auto& qt = r.find("quadratic", ModelKind::TBNMA);

  const bool sigmoid_ok = st.coverage >= 0.9 && st.rmse < sm.rmse && st.rmse < sb.rmse;
  const bool constant_ok = cb.coverage >= 0.9 && cm.coverage >= 0.9 && ct.coverage >= 0.9 && ct.mean_width >= cb.mean_width;
  const bool quadratic_ok = qt.rmse < qm.rmse;
  const bool time_ok = secs < 15 * 60;

  std::string detail = "sigmoid: tbnma coverage " + fmt(st.coverage, 3) + ", rmse tbnma/meta/bnma " + fmt(st.rmse, 3) +
                       "/" + fmt(sm.rmse, 3) + "/" + fmt(sb.rmse, 3) + "; constant: coverage " + fmt(cb.coverage, 3) +
                       "/" + fmt(cm.coverage, 3) + "/" + fmt(ct.coverage, 3) + ", width tbnma " + fmt(ct.mean_width, 3) +
                       " vs bnma " + fmt(cb.mean_width, 3) + "; quadratic: rmse tbnma " + fmt(qt.rmse, 3) + " vs meta " +
                       fmt(qm.rmse, 3) + "; 9 runs in " + fmt(secs, 4) + " s";

  std::size_t failures = 0, monitored = 0;
  double worst = 0.0;
  std::string failing;
  for (const auto& run : r.runs) {
    monitored += run.diagnostics.size();
    failures += run.rhat_failures.size();
    for (const auto& name : run.rhat_failures) failing += " " + run.scenario + "/" + std::string(to_string(run.model)) + ":" + name;
    for (const auto& d : run.diagnostics)
      if (d.rhat) worst = std::max(worst, *d.rhat);
  }

  // Failures must reach the report: feed deliberately unmixed chains through
  // the same warning path that fills summary.json.
  bool surfaced = false;
  {
    Scenario s = default_scenarios()[0];
    s.reference = "LIN";
    const auto sim = generate(ingest(config.skeleton), s);
    RunConfig rc;
    rc.model = ModelKind::BNMA;
    rc.sampler.n_chains = 2;
    rc.sampler.n_iter = 80;
    rc.sampler.burn_in = 40;
    rc.sampler.thin = 1;
    Analysis a;
    a.spec = ModelSpec::make(sim.data, ModelKind::BNMA, std::vector<std::string>{});
    a.samples = tnma::run(sim.data, a.spec, rc.sampler);
    for (auto& draw : a.samples.chains[1].draws) draw.sigma2 += 10.0;
    a.diagnostics = diagnose(a.samples, sim.data, a.spec);
    a.warnings = convergence_warnings(a.samples, a.diagnostics);
    const auto j = summary_json(sim.data, rc, a);
    for (const auto& w : j["warnings"]) surfaced = surfaced || w.get<std::string>().find("sigma2") != std::string::npos;
  }

  SimOutcomes out;
  out.recovery = {sigmoid_ok && constant_ok && quadratic_ok && time_ok ? Outcome::Pass : Outcome::Fail, detail};
  out.convergence = {failures == 0 && surfaced ? Outcome::Pass : Outcome::Fail,
                     std::to_string(monitored) + " monitored scalars over 9 runs, max split R-hat " + fmt(worst) +
                         ", failures " + std::to_string(failures) + failing +
                         (surfaced ? "; injected failure reported in summary.json" : "; injected failure NOT reported")};
  return out;
}

// 7. Real-data headline, only with the original data supplied.
Outcome real_data() {
  const char* path = std::getenv("TNMA_MRSA_DATA");
  if (path == nullptr || *path == '\0')
    return {Outcome::Skip, "data-dependent and non-gating; set TNMA_MRSA_DATA to an arm-level CSV to run"};
  RunConfig base;
  base.input = path;
  base.baseline = "LIN";
  base.time_varying = {"VAN"};
  base.out_dir = scratch("real");
  const Dataset d = ingest(base.input, BuildOptions{"LIN"});
  const TreatmentId van = d.require("VAN");
  std::string detail;
  double p_bnma = 0, p_meta = 0, p_tbnma = 0;
  std::vector<std::pair<double, double>> windows;
  for (auto kind : {ModelKind::BNMA, ModelKind::MetaBNMA, ModelKind::TBNMA}) {
    RunConfig c = base;
    c.model = kind;
    const Analysis a = analyze(d, c);
    const double p = effect_at_time(a.samples, a.spec, d, van, 1.0).prob_negative;
    (kind == ModelKind::BNMA ? p_bnma : kind == ModelKind::MetaBNMA ? p_meta : p_tbnma) = p;
    if (kind == ModelKind::TBNMA) windows = exclusion_windows(a.curves.front());
  }
  bool overlaps = false;
  std::string w;
  for (const auto& [lo, hi] : windows) {
    overlaps = overlaps || (lo <= 2008.0 && hi >= 2002.0);
    w += " [" + fmt(lo, 6) + ", " + fmt(hi, 6) + "]";
  }
  const bool ok = p_bnma >= 0.95 && p_meta >= 0.95 && p_tbnma >= 0.6 && p_tbnma <= 0.9 && overlaps;
  return {ok ? Outcome::Pass : Outcome::Fail,
          "non-gating; P(VAN inferior at end) bnma " + fmt(p_bnma, 3) + ", meta " + fmt(p_meta, 3) + ", tbnma " +
              fmt(p_tbnma, 3) + "; tbnma exclusion windows" + (w.empty() ? " none" : w)};
}

// 8. Repeated invocations produce identical bytes.
Outcome determinism() {
  Scenario s = default_scenarios()[2];
  s.reference = "LIN";
  s.seed = 808;
  const fs::path dir = scratch("determinism");
  const auto skeleton = ingest(oracle::data_file("mrsa_skeleton.csv"));
  write_dataset_csv(generate(skeleton, s).data, dir / "sim_a.csv");
  write_dataset_csv(generate(skeleton, s).data, dir / "sim_b.csv");
  bool same = slurp(dir / "sim_a.csv") == slurp(dir / "sim_b.csv");
  std::string detail = "simulated dataset";

  for (auto kind : {ModelKind::BNMA, ModelKind::MetaBNMA, ModelKind::TBNMA}) {
    std::vector<fs::path> outs;
    for (std::size_t threads : {1u, 3u}) {
      RunConfig c;
      c.input = dir / "sim_a.csv";
      c.model = kind;
      c.baseline = "LIN";
      if (kind != ModelKind::BNMA) c.time_varying = {"VAN"};
      c.sampler.n_iter = 2000;
      c.sampler.burn_in = 1000;
      c.sampler.thin = 5;
      c.sampler.seed = 88;
      c.sampler.max_threads = threads;
      c.write_samples = true;
      c.out_dir = dir / (std::string(to_string(kind)) + "_" + std::to_string(threads));
      run_analysis(c);
      outs.push_back(c.out_dir);
    }
    for (const char* f : {"summary.json", "curves.csv", "samples.csv"})
      same = same && slurp(outs[0] / f) == slurp(outs[1] / f) && !slurp(outs[0] / f).empty();
  }
  detail += ", summary.json, curves.csv, samples.csv for 3 models across 1 and 3 threads";

  SimStudyConfig sc;
  sc.sampler.n_chains = 2;
  sc.sampler.n_iter = 600;
  sc.sampler.burn_in = 300;
  sc.sampler.thin = 3;
  sc.grid_size = 21;
  for (const char* name : {"a", "b"}) {
    sc.out_dir = dir / (std::string("simstudy_") + name);
    run_simstudy(skeleton, sc);
  }
  for (const auto& entry : fs::directory_iterator(dir / "simstudy_a"))
    same = same && slurp(entry.path()) == slurp(dir / "simstudy_b" / entry.path().filename());
  detail += ", simulation study outputs";
  return {same ? Outcome::Pass : Outcome::Fail, (same ? "identical bytes: " : "bytes differ: ") + detail};
}

}  // namespace

int main() {
  bool ok = true;
  const auto report = [&](int id, const char* name, const Outcome& o, bool gating = true) {
    const char* tag = o.status == Outcome::Pass ? "PASS" : o.status == Outcome::Skip ? "SKIP" : "FAIL";
    std::printf("criterion %d %-28s %s  %s\n", id, name, tag, o.detail.c_str());
    std::fflush(stdout);
    if (gating && o.status == Outcome::Fail) ok = false;
  };
  const auto guarded = [](const std::function<Outcome()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      return Outcome{Outcome::Fail, std::string("exception: ") + e.what()};
    }
  };

  report(1, "multi-arm oracle", guarded(multi_arm_oracle));
  report(2, "kernel correctness", guarded(kernel_correctness));
  report(3, "GP conditioning oracle", guarded(gp_oracle));
  report(4, "sampler calibration", guarded(sampler_calibration));
  SimOutcomes sim;
  try {
    sim = simulation_study();
  } catch (const std::exception& e) {
    sim.recovery = sim.convergence = Outcome{Outcome::Fail, std::string("exception: ") + e.what()};
  }
  report(5, "simulation study", sim.recovery);
  report(6, "convergence gate", sim.convergence);
  report(7, "real-data headline", guarded(real_data), false);
  report(8, "determinism", guarded(determinism));
  return ok ? 0 : 1;
}
