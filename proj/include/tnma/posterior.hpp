#pragma once

// Posterior predictive summaries of relative treatment effects d_1k^t.
//
// Sign convention: d_1k is the log-odds of success (cure) under k minus that
// under the baseline, so positive values mean k is more effective and the
// event "k is less effective than the baseline" is d_1k^t < 0.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tnma/model.hpp"
#include "tnma/sampler.hpp"

namespace tnma {

struct EffectSummary {
  double mean = 0.0;
  double q025 = 0.0;
  double q50 = 0.0;
  double q975 = 0.0;
  double prob_negative = 0.0;  // P(d < 0)
  double prob_positive = 0.0;  // P(d > 0)
};

struct EffectCurve {
  TreatmentId treatment;
  std::vector<double> times;  // calendar years
  std::vector<double> mean, q025, q50, q975;
};

struct EndOfPeriodEffect {
  TreatmentId treatment;
  std::string label;
  EffectSummary summary;
};

/// Default seed for predictive GP draws, derived from the sampler seed.
std::uint64_t predictive_seed(const PosteriorSamples& samples);

/// Type-7 (linear interpolation) sample quantile of unsorted values.
double quantile(std::vector<double> values, double prob);
EffectSummary summarize(std::span<const double> draws);

/// One predictive draw of d_1k^t per retained posterior draw, chain-major.
/// t is normalized time. For a tBNMA time-varying treatment each draw comes
/// from the GP conditional given that draw's latent series and hyperparameters.
std::vector<double> effect_draws(const PosteriorSamples& samples, const ModelSpec& spec,
                                 const Dataset& data, TreatmentId k, double t);
std::vector<double> effect_draws(const PosteriorSamples& samples, const ModelSpec& spec,
                                 const Dataset& data, TreatmentId k, double t, std::uint64_t seed);

EffectSummary effect_at_time(const PosteriorSamples& samples, const ModelSpec& spec,
                             const Dataset& data, TreatmentId k, double t);
EffectSummary effect_at_time(const PosteriorSamples& samples, const ModelSpec& spec,
                             const Dataset& data, TreatmentId k, double t, std::uint64_t seed);

/// Pointwise posterior predictive band over an increasing normalized grid,
/// reported in calendar years.
EffectCurve effect_curve(const PosteriorSamples& samples, const ModelSpec& spec, const Dataset& data,
                         TreatmentId k, std::span<const double> grid);
EffectCurve effect_curve(const PosteriorSamples& samples, const ModelSpec& spec, const Dataset& data,
                         TreatmentId k, std::span<const double> grid, std::uint64_t seed);

/// n equally spaced normalized times covering [0, 1].
std::vector<double> default_grid(std::size_t n = 101);

/// P(k is less effective than the baseline at t) = P(d_1k^t < 0).
double inferiority_probability(const PosteriorSamples& samples, const ModelSpec& spec,
                               const Dataset& data, TreatmentId k, double t);

/// d_1k^T at the end of the observed period (normalized time 1) for every treatment.
std::vector<EndOfPeriodEffect> end_of_period_effects(const PosteriorSamples& samples,
                                                     const ModelSpec& spec, const Dataset& data);

/// Closed calendar intervals where a curve's 95% band excludes zero.
std::vector<std::pair<double, double>> exclusion_windows(const EffectCurve& curve);

struct ModelRun {
  std::string label;
  const PosteriorSamples* samples = nullptr;
  ModelSpec spec;
};

struct ComparisonRow {
  std::string treatment;
  std::string model;
  double mean = 0.0;
  double q025 = 0.0;
  double q975 = 0.0;
  double width = 0.0;
};

/// End-of-period effects per treatment and model, ordered by treatment index
/// then model label. Throws UsageError if the runs disagree on the baseline.
std::vector<ComparisonRow> compare_models(std::span<const ModelRun> runs, const Dataset& data);

}  // namespace tnma
