#include <catch2/catch_amalgamated.hpp>

#include <numeric>

#include "oracles.hpp"
#include "tnma/diagnostics.hpp"
#include "tnma/error.hpp"
#include "tnma/mcmc.hpp"
#include "toy_model.hpp"

using namespace tnma;
using namespace tnma::mcmc;

namespace {

std::vector<double> flatten(const Traces& t) {
  std::vector<double> out;
  for (const auto& c : t) out.insert(out.end(), c.begin(), c.end());
  return out;
}

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double var_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

Traces iid_normal(std::size_t chains, std::size_t n, std::uint64_t seed, double shift_last = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Traces t(chains, std::vector<double>(n));
  for (std::size_t c = 0; c < chains; ++c)
    for (auto& x : t[c]) x = z(rng) + (c + 1 == chains ? shift_last : 0.0);
  return t;
}

}  // namespace

TEST_CASE("chain settings and seeds", "[mcmc]") {
  CHECK(ChainSettings{100, 50, 10, 50}.retained() == 5);
  CHECK_THROWS_AS((ChainSettings{100, 100, 1, 50}.validate()), UsageError);
  CHECK_THROWS_AS((ChainSettings{100, 10, 0, 50}.validate()), UsageError);
  CHECK(chain_seed(1, 0) != chain_seed(1, 1));
  CHECK(chain_seed(1, 0) != chain_seed(2, 0));
  CHECK(chain_seed(7, 3) == chain_seed(7, 3));
}

TEST_CASE("adaptive scale moves toward the target and freezes", "[mcmc]") {
  AdaptiveScale s(1.0, 0.44);
  for (int i = 0; i < 50; ++i) s.record(false);
  s.end_window();
  CHECK(s.value() < 1.0);
  const double shrunk = s.value();
  for (int i = 0; i < 50; ++i) s.record(true);
  s.end_window();
  CHECK(s.value() > shrunk);
  s.freeze();
  CHECK(std::isnan(s.acceptance_rate()));
  const double frozen = s.value();
  for (int i = 0; i < 50; ++i) s.record(i % 2 == 0);
  s.end_window();
  CHECK(s.value() == frozen);
  CHECK(s.acceptance_rate() == 0.5);
}

TEST_CASE("scalar random walk recovers a conjugate posterior", "[mcmc]") {
  const auto model = toy::NormalMean::make(20, 4);
  const Traces t = toy::sample(model, 4, ChainSettings{8000, 2000, 4, 50}, 17);
  const auto draws = flatten(t);
  const double ess = *effective_sample_size(t);
  const double sd = std::sqrt(model.post_var());
  CHECK(std::abs(mean_of(draws) - model.post_mean()) < 4 * sd / std::sqrt(ess));
  CHECK(var_of(draws) == Catch::Approx(model.post_var()).epsilon(0.1));
  CHECK(*split_rhat(t) < 1.02);
}

TEST_CASE("vector random walk and Gibbs blocks on a bivariate normal", "[mcmc]") {
  // Target: independent N(1, 0.5) and N(-2, 2); the vector walk moves both,
  // a Gibbs block then redraws the second coordinate exactly.
  struct S {
    std::array<double, 2> x{0.0, 0.0};
  };
  const auto logd = [](const S& s) {
    return -0.5 * (s.x[0] - 1.0) * (s.x[0] - 1.0) / 0.5 - 0.5 * (s.x[1] + 2.0) * (s.x[1] + 2.0) / 2.0;
  };
  const ChainSettings settings{12000, 2000, 2, 50};
  const auto set = run_chains<std::array<double, 2>>(4, 5, settings, 0, [&](std::size_t, Rng& rng) {
    BlockList<S> blocks;
    blocks.push_back(std::make_unique<VectorRandomWalk<S>>(
        "x", [](S& s) { return std::span<double>(s.x); }, logd, 0.5, 0.23));
    blocks.push_back(std::make_unique<GibbsBlock<S>>("x1", [](S& s, Rng& r) {
      std::normal_distribution<double> z(-2.0, std::sqrt(2.0));
      s.x[1] = z(r);
    }));
    auto chain = run_chain(S{}, blocks, settings, rng, [](const S& s) { return s.x; });
    return chain;
  });
  const auto first = flatten(set.trace([](const auto& d) { return d[0]; }));
  const auto second = flatten(set.trace([](const auto& d) { return d[1]; }));
  CHECK(mean_of(first) == Catch::Approx(1.0).margin(0.05));
  CHECK(var_of(first) == Catch::Approx(0.5).epsilon(0.1));
  CHECK(mean_of(second) == Catch::Approx(-2.0).margin(0.05));
  CHECK(var_of(second) == Catch::Approx(2.0).epsilon(0.1));

  const auto& reports = set.chains.front().blocks;
  REQUIRE(reports.size() == 2);
  CHECK(reports[0].acceptance_rate == Catch::Approx(0.23).margin(0.1));
  CHECK(std::isnan(reports[1].acceptance_rate));
}

TEST_CASE("parallel_map is independent of the worker count", "[mcmc]") {
  const auto task = [](std::size_t j) {
    Rng rng(chain_seed(99, j));
    return std::uniform_real_distribution<double>()(rng);
  };
  CHECK(parallel_map<double>(8, 1, task) == parallel_map<double>(8, 4, task));
  CHECK_THROWS_AS(parallel_map<int>(3, 2, [](std::size_t j) -> int {
                    if (j == 1) throw NumericalError("boom");
                    return 0;
                  }),
                  NumericalError);
}

TEST_CASE("split R-hat and ESS on reference chains", "[diagnostics]") {
  const Traces iid = iid_normal(4, 2000, 1);
  CHECK(*split_rhat(iid) == Catch::Approx(1.0).margin(0.01));
  CHECK(*effective_sample_size(iid) == Catch::Approx(8000).epsilon(0.15));

  CHECK(*split_rhat(iid_normal(4, 2000, 2, 2.0)) > 1.2);

  // AR(1) with coefficient r: ESS / N -> (1 - r) / (1 + r).
  const double r = 0.8;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  Traces ar(4, std::vector<double>(20000));
  for (auto& c : ar) {
    double x = z(rng) / std::sqrt(1 - r * r);
    for (auto& v : c) {
      x = r * x + z(rng);
      v = x;
    }
  }
  const double expected = 80000.0 * (1 - r) / (1 + r);
  CHECK(*effective_sample_size(ar) == Catch::Approx(expected).epsilon(0.15));
  CHECK(*split_rhat(ar) < 1.01);

  // A trend within each chain inflates split R-hat.
  Traces trend(2, std::vector<double>(400));
  for (auto& c : trend)
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = static_cast<double>(i) / 100.0 + 0.1 * z(rng);
  CHECK(*split_rhat(trend) > 1.5);

  CHECK_FALSE(split_rhat(Traces(3, std::vector<double>(10, 1.0))).has_value());
  CHECK_FALSE(effective_sample_size(Traces(3, std::vector<double>(10, 1.0))).has_value());
  CHECK_THROWS(split_rhat(Traces(1, std::vector<double>(10, 1.0))));
  CHECK_THROWS(split_rhat(Traces{{1, 2, 3, 4}, {1, 2, 3}}));
}
