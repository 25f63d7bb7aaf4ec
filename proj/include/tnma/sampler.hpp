#pragma once

// Native MCMC for the three network meta-analysis models.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tnma/diagnostics.hpp"
#include "tnma/mcmc.hpp"
#include "tnma/model.hpp"

namespace tnma {

/// How the treatment-effect parameters (d_1k, slopes, latent series) move.
enum class EffectUpdate {
  Gibbs,       // one joint draw from their Gaussian full conditional
  RandomWalk,  // scalar random walks on d_1k and slopes, prior-shaped joint walk on latent series
};

struct SamplerConfig {
  std::size_t n_chains = 4;
  std::size_t n_iter = 20000;
  std::size_t burn_in = 10000;
  std::size_t thin = 10;
  std::uint64_t seed = 1;
  std::size_t adapt_window = 50;
  double target_scalar = 0.44;
  double target_vector = 0.23;
  EffectUpdate effect_update = EffectUpdate::Gibbs;
  std::size_t max_threads = 0;  // 0: TNMA_THREADS, else hardware concurrency
  mcmc::ProgressHook progress;

  void validate() const;
  mcmc::ChainSettings chain_settings() const;
};

using PosteriorSamples = mcmc::ChainSet<ParamState>;

/// Draws posterior samples. Deterministic in (data, spec, config) regardless
/// of thread scheduling. Throws NumericalError if no finite starting point
/// is found in 100 attempts.
PosteriorSamples run(const Dataset& data, const ModelSpec& spec, const SamplerConfig& config);

/// Starting state for one chain: empirical baseline logits for mu, zero
/// effects, unit variances, kernel amplitudes 0.1 and rho 1, each perturbed
/// by a chain-specific draw so chains start apart.
ParamState initial_state(const Dataset& data, const ModelSpec& spec, mcmc::Rng& rng);

using ScalarExtractor = std::function<double(const ParamState&)>;

struct MonitoredScalar {
  std::string name;
  ScalarExtractor extract;
};

/// d_1k for every non-baseline treatment, sigma2, slopes (Meta-BNMA) and log
/// kernel hyperparameters (tBNMA).
std::vector<MonitoredScalar> monitored_scalars(const Dataset& data, const ModelSpec& spec);

std::optional<double> split_rhat(const PosteriorSamples& samples, const ScalarExtractor& summary);
std::optional<double> ess(const PosteriorSamples& samples, const ScalarExtractor& summary);

struct ScalarDiagnostic {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  std::optional<double> rhat;  // nullopt: degenerate chains
  std::optional<double> ess;
};

std::vector<ScalarDiagnostic> diagnose(const PosteriorSamples& samples, const Dataset& data,
                                       const ModelSpec& spec);

}  // namespace tnma
