#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "tnma/app.hpp"
#include "tnma/error.hpp"
#include "tnma/posterior.hpp"
#include "tnma/sampler.hpp"
#include "tnma/simgen.hpp"

using namespace tnma;

namespace {

const SimulatedData& sigmoid_data() {
  static const SimulatedData sim = [] {
    Scenario s = default_scenarios()[2];
    s.reference = "LIN";
    s.seed = 21;
    return generate(ingest(oracle::data_file("mrsa_skeleton.csv")), s);
  }();
  return sim;
}

SamplerConfig short_config(std::uint64_t seed = 3) {
  SamplerConfig c;
  c.n_chains = 2;
  c.n_iter = 3000;
  c.burn_in = 1500;
  c.thin = 5;
  c.seed = seed;
  return c;
}

std::vector<double> all_draws(const PosteriorSamples& s, const ScalarExtractor& f) {
  std::vector<double> out;
  s.for_each_draw([&](const ParamState& p) { out.push_back(f(p)); });
  return out;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("sampler configuration is validated", "[sampler]") {
  SamplerConfig c;
  c.validate();
  c.burn_in = c.n_iter;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = SamplerConfig{};
  c.n_chains = 0;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = SamplerConfig{};
  c.target_vector = 1.0;
  CHECK_THROWS_AS(c.validate(), UsageError);
}

TEST_CASE("initial states lie inside the support", "[sampler]") {
  const Dataset& d = sigmoid_data().data;
  const std::vector<std::string> van{"VAN"};
  for (auto kind : {ModelKind::BNMA, ModelKind::MetaBNMA, ModelKind::TBNMA}) {
    const auto spec = ModelSpec::make(d, kind, kind == ModelKind::BNMA ? std::vector<std::string>{} : van);
    mcmc::Rng rng(1);
    const ParamState a = initial_state(d, spec, rng);
    const ParamState b = initial_state(d, spec, rng);
    CHECK(std::isfinite(log_posterior(d, a, spec)));
    CHECK(a.d[d.require("VAN")] != b.d[d.require("VAN")]);
  }
}

TEST_CASE("monitored scalars cover effects, variance and hyperparameters", "[sampler]") {
  const Dataset& d = sigmoid_data().data;
  const std::vector<std::string> van{"VAN"};
  const auto names = [&](ModelKind kind) {
    std::vector<std::string> out;
    for (const auto& m : monitored_scalars(d, ModelSpec::make(d, kind, van))) out.push_back(m.name);
    return out;
  };
  const auto b = names(ModelKind::BNMA);
  CHECK(b.size() == d.treatment_count());  // 18 effects and sigma2
  CHECK(std::find(b.begin(), b.end(), "d[LIN]") == b.end());
  CHECK(std::find(b.begin(), b.end(), "sigma2") != b.end());
  const auto m = names(ModelKind::MetaBNMA);
  CHECK(std::find(m.begin(), m.end(), "beta[VAN]") != m.end());
  const auto t = names(ModelKind::TBNMA);
  CHECK(t.size() == d.treatment_count() + 5);
  CHECK(std::find(t.begin(), t.end(), "log_rho[VAN]") != t.end());
}

TEST_CASE("runs are reproducible and independent of thread count", "[sampler]") {
  const Dataset& d = sigmoid_data().data;
  const auto spec = ModelSpec::make(d, ModelKind::TBNMA, std::vector<std::string>{"VAN"});
  SamplerConfig c = short_config();
  c.n_iter = 600;
  c.burn_in = 300;
  c.max_threads = 1;
  const auto a = run(d, spec, c);
  c.max_threads = 2;
  const auto b = run(d, spec, c);
  const auto van = d.require("VAN");
  const auto f = [van](const ParamState& p) { return p.d[van] + p.kernel[van.value].phi + p.sigma2; };
  CHECK(all_draws(a, f) == all_draws(b, f));
  CHECK(a.chains[0].seed != a.chains[1].seed);

  c.seed = 4;
  CHECK(all_draws(run(d, spec, c), f) != all_draws(a, f));
}

TEST_CASE("adaptation reaches the acceptance targets", "[sampler]") {
  const Dataset& d = sigmoid_data().data;
  const auto spec = ModelSpec::make(d, ModelKind::TBNMA, std::vector<std::string>{"VAN"});
  const auto s = run(d, spec, short_config());
  for (const auto& chain : s.chains)
    for (const auto& b : chain.blocks) {
      if (std::isnan(b.target)) continue;
      INFO(b.name);
      CHECK(std::abs(b.acceptance_rate - b.target) < 0.2);
    }
}

TEST_CASE("joint Gibbs and random-walk effect updates target the same posterior", "[sampler]") {
  const Dataset& d = sigmoid_data().data;
  const auto van = d.require("VAN");
  for (auto kind : {ModelKind::MetaBNMA, ModelKind::TBNMA}) {
    const auto spec = ModelSpec::make(d, kind, std::vector<std::string>{"VAN"});
    SamplerConfig g = short_config(8);
    g.n_chains = 2;
    g.n_iter = 12000;
    g.burn_in = 4000;
    SamplerConfig rw = g;
    rw.effect_update = EffectUpdate::RandomWalk;
    const auto a = run(d, spec, g);
    const auto b = run(d, spec, rw);
    for (const auto& m : monitored_scalars(d, spec)) {
      if (m.name.rfind("d[", 0) != 0 && m.name.rfind("beta", 0) != 0) continue;
      const auto x = all_draws(a, m.extract), y = all_draws(b, m.extract);
      const double se = std::sqrt(1.0 / *ess(a, m.extract) + 1.0 / *ess(b, m.extract));
      double sd = 0.0;
      for (double v : x) sd += (v - mean(x)) * (v - mean(x));
      sd = std::sqrt(sd / static_cast<double>(x.size()));
      INFO(to_string(kind) << " " << m.name);
      CHECK(std::abs(mean(x) - mean(y)) < 5.0 * sd * se + 1e-3);
    }
    // The end-of-period effect summarizes the same posterior either way.
    const double ea = effect_at_time(a, spec, d, van, 1.0).mean;
    const double eb = effect_at_time(b, spec, d, van, 1.0).mean;
    CHECK(std::abs(ea - eb) < 0.15);
  }
}

TEST_CASE("BNMA recovers constant effects from large trials", "[sampler]") {
  Scenario s = default_scenarios()[0];
  s.reference = "LIN";
  s.seed = 5;
  s.arm_size = 2000;
  s.sigma2 = 0.01;
  const auto sim = generate(ingest(oracle::data_file("mrsa_skeleton.csv")), s);
  const auto spec = ModelSpec::make(sim.data, ModelKind::BNMA, std::vector<std::string>{});
  const auto post = run(sim.data, spec, short_config());
  const auto van = sim.data.require("VAN");
  const auto e = effect_at_time(post, spec, sim.data, van, 0.5);
  CHECK(e.q025 < 0.4);
  CHECK(e.q975 > 0.4);
  CHECK(e.mean == Catch::Approx(0.4).margin(0.1));
  for (const auto& dg : diagnose(post, sim.data, spec)) {
    INFO(dg.name);
    CHECK(dg.rhat.has_value());
  }
}
