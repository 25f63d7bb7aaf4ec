#pragma once

// Model-agnostic Metropolis-within-Gibbs machinery: adaptive random-walk and
// Gibbs blocks over an arbitrary chain state, a single-chain driver with
// burn-in adaptation, and a multi-chain runner.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tnma/error.hpp"

namespace tnma::mcmc {

using Rng = std::mt19937_64;

struct ChainSettings {
  std::size_t n_iter = 20000;
  std::size_t burn_in = 10000;
  std::size_t thin = 10;
  std::size_t adapt_window = 50;

  void validate() const {
    if (thin < 1) throw UsageError("thin must be at least 1");
    if (burn_in >= n_iter) throw UsageError("burn-in must be smaller than the iteration count");
    if (adapt_window < 1) throw UsageError("adaptation window must be at least 1");
  }
  std::size_t retained() const { return (n_iter - burn_in) / thin; }
};

/// Derives an independent stream seed for one chain from the run seed.
inline std::uint64_t chain_seed(std::uint64_t seed, std::size_t chain) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chain), 0x6a09e667u};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

/// Proposal scale tuned on a log scale toward a target acceptance rate at
/// the end of each adaptation window, then frozen.
class AdaptiveScale {
 public:
  AdaptiveScale(double initial, double target) : log_scale_(std::log(initial)), target_(target) {}

  double value() const { return std::exp(log_scale_); }
  double target() const { return target_; }
  bool frozen() const { return frozen_; }

  void record(bool accepted) {
    ++window_n_;
    window_acc_ += accepted;
    ++total_n_;
    total_acc_ += accepted;
  }

  void end_window() {
    if (frozen_ || window_n_ == 0) return;
    ++batches_;
    const double rate = static_cast<double>(window_acc_) / static_cast<double>(window_n_);
    const double gain = std::min(1.0, 3.0 / std::sqrt(static_cast<double>(batches_)));
    log_scale_ += gain * (rate - target_);
    window_n_ = window_acc_ = 0;
  }

  /// Stops adaptation and restarts the acceptance counters.
  void freeze() {
    frozen_ = true;
    window_n_ = window_acc_ = total_n_ = total_acc_ = 0;
  }

  /// Acceptance rate since freeze(), or since construction if never frozen.
  double acceptance_rate() const {
    return total_n_ == 0 ? std::numeric_limits<double>::quiet_NaN()
                         : static_cast<double>(total_acc_) / static_cast<double>(total_n_);
  }

 private:
  double log_scale_;
  double target_;
  bool frozen_ = false;
  std::size_t batches_ = 0;
  std::size_t window_n_ = 0, window_acc_ = 0;
  std::size_t total_n_ = 0, total_acc_ = 0;
};

/// Metropolis accept step on log densities; -inf proposals are always rejected.
inline bool metropolis_accept(double log_ratio, Rng& rng) {
  if (std::isnan(log_ratio)) return false;
  if (log_ratio >= 0) return true;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  return std::log(unif(rng)) < log_ratio;
}

template <class State>
class Block {
 public:
  explicit Block(std::string name) : name_(std::move(name)) {}
  virtual ~Block() = default;

  const std::string& name() const { return name_; }
  virtual void update(State& state, Rng& rng) = 0;
  /// Non-null for Metropolis blocks with a tunable proposal.
  virtual AdaptiveScale* adaptive() { return nullptr; }

 private:
  std::string name_;
};

template <class State>
using BlockList = std::vector<std::unique_ptr<Block<State>>>;

/// Random-walk Metropolis on one scalar, optionally on the log scale (with
/// the Jacobian of the log transform).
template <class State>
class ScalarRandomWalk final : public Block<State> {
 public:
  using Access = std::function<double&(State&)>;
  using LogDensity = std::function<double(const State&)>;

  ScalarRandomWalk(std::string name, Access access, LogDensity log_density, double initial_scale,
                   double target, bool log_scale = false)
      : Block<State>(std::move(name)),
        access_(std::move(access)),
        log_density_(std::move(log_density)),
        scale_(initial_scale, target),
        log_scale_(log_scale) {}

  void update(State& state, Rng& rng) override {
    double& x = access_(state);
    const double old = x;
    const double current = log_density_(state) + (log_scale_ ? std::log(old) : 0.0);
    const double step = scale_.value() * normal_(rng);
    x = log_scale_ ? old * std::exp(step) : old + step;
    const double proposed = log_density_(state) + (log_scale_ ? std::log(x) : 0.0);
    const bool accepted = metropolis_accept(proposed - current, rng);
    if (!accepted) x = old;
    scale_.record(accepted);
  }

  AdaptiveScale* adaptive() override { return &scale_; }

 private:
  Access access_;
  LogDensity log_density_;
  AdaptiveScale scale_;
  bool log_scale_;
  std::normal_distribution<double> normal_;
};

/// Joint random-walk Metropolis on a vector block. The step is
/// scale * shape(state, z) with z standard normal; shape must not depend on
/// the block's own coordinates so the proposal stays symmetric.
template <class State>
class VectorRandomWalk final : public Block<State> {
 public:
  using Access = std::function<std::span<double>(State&)>;
  using LogDensity = std::function<double(const State&)>;
  using Shape = std::function<Eigen::VectorXd(const State&, const Eigen::VectorXd&)>;

  VectorRandomWalk(std::string name, Access access, LogDensity log_density, double initial_scale,
                   double target, Shape shape = {})
      : Block<State>(std::move(name)),
        access_(std::move(access)),
        log_density_(std::move(log_density)),
        shape_(std::move(shape)),
        scale_(initial_scale, target) {}

  void update(State& state, Rng& rng) override {
    std::span<double> x = access_(state);
    if (x.empty()) return;
    const double current = log_density_(state);
    old_.assign(x.begin(), x.end());
    Eigen::VectorXd z(static_cast<Eigen::Index>(x.size()));
    for (auto& v : z) v = normal_(rng);
    if (shape_) z = shape_(state, z);
    const double s = scale_.value();
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += s * z[static_cast<Eigen::Index>(i)];
    const double proposed = log_density_(state);
    const bool accepted = metropolis_accept(proposed - current, rng);
    if (!accepted) std::copy(old_.begin(), old_.end(), x.begin());
    scale_.record(accepted);
  }

  AdaptiveScale* adaptive() override { return &scale_; }

 private:
  Access access_;
  LogDensity log_density_;
  Shape shape_;
  AdaptiveScale scale_;
  std::normal_distribution<double> normal_;
  std::vector<double> old_;
};

/// Exact draw from a full conditional.
template <class State>
class GibbsBlock final : public Block<State> {
 public:
  using Draw = std::function<void(State&, Rng&)>;
  GibbsBlock(std::string name, Draw draw) : Block<State>(std::move(name)), draw_(std::move(draw)) {}
  void update(State& state, Rng& rng) override { draw_(state, rng); }

 private:
  Draw draw_;
};

struct BlockReport {
  std::string name;
  double acceptance_rate = std::numeric_limits<double>::quiet_NaN();  // NaN for Gibbs blocks
  double target = std::numeric_limits<double>::quiet_NaN();
  double scale_at_burn_in_end = std::numeric_limits<double>::quiet_NaN();
  double final_scale = std::numeric_limits<double>::quiet_NaN();
};

template <class Draw>
struct Chain {
  std::uint64_t seed = 0;
  std::vector<Draw> draws;
  std::vector<BlockReport> blocks;
};

struct Progress {
  std::size_t chain = 0;
  std::size_t iteration = 0;
  std::size_t total = 0;
};
/// Called every 1000 iterations, possibly from several chain threads at once.
using ProgressHook = std::function<void(const Progress&)>;

/// Runs one chain: every block updates once per iteration; proposal scales
/// adapt every settings.adapt_window iterations during burn-in and are frozen
/// afterwards. Every thin-th post-burn-in state is projected and kept.
template <class State, class Project>
auto run_chain(State state, BlockList<State>& blocks, const ChainSettings& settings, Rng& rng,
               Project project, const ProgressHook& progress = {}, std::size_t chain_index = 0) {
  using Draw = std::decay_t<decltype(project(state))>;
  settings.validate();
  Chain<Draw> chain;
  chain.draws.reserve(settings.retained());
  std::vector<double> scale_at_freeze(blocks.size(), std::numeric_limits<double>::quiet_NaN());

  for (std::size_t iter = 0; iter < settings.n_iter; ++iter) {
    if (iter == settings.burn_in) {
      for (std::size_t b = 0; b < blocks.size(); ++b)
        if (auto* a = blocks[b]->adaptive()) {
          a->freeze();
          scale_at_freeze[b] = a->value();
        }
    }
    for (auto& block : blocks) block->update(state, rng);

    if (iter < settings.burn_in && (iter + 1) % settings.adapt_window == 0)
      for (auto& block : blocks)
        if (auto* a = block->adaptive()) a->end_window();

    if (iter >= settings.burn_in && (iter - settings.burn_in + 1) % settings.thin == 0)
      chain.draws.push_back(project(state));
    if (progress && (iter + 1) % 1000 == 0) progress(Progress{chain_index, iter + 1, settings.n_iter});
  }

  for (std::size_t b = 0; b < blocks.size(); ++b) {
    BlockReport r;
    r.name = blocks[b]->name();
    if (auto* a = blocks[b]->adaptive()) {
      r.acceptance_rate = a->acceptance_rate();
      r.target = a->target();
      r.scale_at_burn_in_end = scale_at_freeze[b];
      r.final_scale = a->value();
    }
    chain.blocks.push_back(std::move(r));
  }
  return chain;
}

template <class Draw>
struct ChainSet {
  ChainSettings settings;
  std::uint64_t seed = 0;
  std::vector<Chain<Draw>> chains;

  std::size_t retained_per_chain() const { return chains.empty() ? 0 : chains.front().draws.size(); }
  std::size_t total_draws() const {
    std::size_t n = 0;
    for (const auto& c : chains) n += c.draws.size();
    return n;
  }

  /// chains x draws matrix of a scalar summary.
  template <class Extract>
  std::vector<std::vector<double>> trace(Extract&& extract) const {
    std::vector<std::vector<double>> out;
    out.reserve(chains.size());
    for (const auto& c : chains) {
      auto& row = out.emplace_back();
      row.reserve(c.draws.size());
      for (const auto& d : c.draws) row.push_back(extract(d));
    }
    return out;
  }

  /// Every draw of every chain, chain-major.
  template <class F>
  void for_each_draw(F&& f) const {
    for (const auto& c : chains)
      for (const auto& d : c.draws) f(d);
  }
};

/// Worker count for chain-level parallelism: explicit cap, else the
/// TNMA_THREADS environment variable, else hardware concurrency.
inline std::size_t worker_count(std::size_t jobs, std::size_t max_threads) {
  std::size_t cap = max_threads;
  if (cap == 0) {
    if (const char* env = std::getenv("TNMA_THREADS")) {
      char* end = nullptr;
      const long v = std::strtol(env, &end, 10);
      if (end != env && v > 0) cap = static_cast<std::size_t>(v);
    }
  }
  if (cap == 0) cap = std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(cap, jobs));
}

/// Runs `jobs` independent tasks on a small thread pool; results are stored
/// by index so the output never depends on scheduling. The first exception
/// (lowest index) is rethrown after all workers join.
template <class Result, class Task>
std::vector<Result> parallel_map(std::size_t jobs, std::size_t max_threads, Task task) {
  std::vector<Result> results(jobs);
  std::vector<std::exception_ptr> errors(jobs);
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t j = next++; j < jobs; j = next++) {
      try {
        results[j] = task(j);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };
  const std::size_t workers = worker_count(jobs, max_threads);
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

/// Runs n_chains chains; make_chain(chain_index, rng) builds and runs one
/// chain from a generator seeded with chain_seed(seed, chain_index).
template <class Draw, class MakeChain>
ChainSet<Draw> run_chains(std::size_t n_chains, std::uint64_t seed, const ChainSettings& settings,
                          std::size_t max_threads, MakeChain make_chain) {
  if (n_chains < 1) throw UsageError("at least one chain is required");
  settings.validate();
  ChainSet<Draw> set;
  set.settings = settings;
  set.seed = seed;
  set.chains = parallel_map<Chain<Draw>>(n_chains, max_threads, [&](std::size_t c) {
    const std::uint64_t s = chain_seed(seed, c);
    Rng rng(s);
    Chain<Draw> chain = make_chain(c, rng);
    chain.seed = s;
    return chain;
  });
  return set;
}

}  // namespace tnma::mcmc
