#include "tnma/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "tnma/error.hpp"

namespace tnma {

namespace {

/// draws[g][s]: predictive draw s at grid point g.
std::vector<std::vector<double>> grid_draws(const PosteriorSamples& samples, const ModelSpec& spec,
                                            const Dataset& data, TreatmentId k,
                                            std::span<const double> grid, std::uint64_t seed) {
  if (k.value >= data.treatment_count()) throw DataError("unknown treatment index " + std::to_string(k.value));
  std::vector<std::vector<double>> out(grid.size());
  for (auto& g : out) g.reserve(samples.total_draws());

  const bool gp = spec.kind == ModelKind::TBNMA && spec.varies(k);
  const auto times = data.times_of(k);
  std::size_t s = 0;
  samples.for_each_draw([&](const ParamState& p) {
    if (k == spec.baseline) {
      for (auto& g : out) g.push_back(0.0);
    } else if (!spec.varies(k)) {
      for (auto& g : out) g.push_back(p.d[k]);
    } else if (!gp) {
      for (std::size_t j = 0; j < grid.size(); ++j)
        out[j].push_back(p.d[k] + p.beta[k.value] * (grid[j] - data.mean_time()));
    } else {
      const KernelParams& kp = p.kernel[k.value];
      const CovarianceMatrix cov = build_covariance(kp, times);
      const GpMarginals m = gp_condition_marginals(times, p.d_latent[k.value], p.d[k], kp, cov, grid);
      mcmc::Rng rng(mcmc::chain_seed(seed, s));
      std::normal_distribution<double> normal;
      for (std::size_t j = 0; j < grid.size(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        out[j].push_back(m.mean[jj] + std::sqrt(m.var[jj]) * normal(rng));
      }
    }
    ++s;
  });
  return out;
}

}  // namespace

std::uint64_t predictive_seed(const PosteriorSamples& samples) {
  return samples.seed ^ 0x9e3779b97f4a7c15ULL;
}

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

EffectSummary summarize(std::span<const double> draws) {
  if (draws.empty()) throw std::invalid_argument("no draws to summarize");
  EffectSummary s;
  std::vector<double> v(draws.begin(), draws.end());
  std::sort(v.begin(), v.end());
  double sum = 0.0;
  std::size_t neg = 0, pos = 0;
  for (double x : v) {
    sum += x;
    neg += x < 0;
    pos += x > 0;
  }
  const double n = static_cast<double>(v.size());
  s.mean = sum / n;
  const auto q = [&](double prob) {
    const double h = (n - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  s.q025 = q(0.025);
  s.q50 = q(0.5);
  s.q975 = q(0.975);
  s.prob_negative = static_cast<double>(neg) / n;
  s.prob_positive = static_cast<double>(pos) / n;
  return s;
}

std::vector<double> effect_draws(const PosteriorSamples& samples, const ModelSpec& spec,
                                 const Dataset& data, TreatmentId k, double t, std::uint64_t seed) {
  const double grid[] = {t};
  return std::move(grid_draws(samples, spec, data, k, grid, seed).front());
}

std::vector<double> effect_draws(const PosteriorSamples& samples, const ModelSpec& spec,
                                 const Dataset& data, TreatmentId k, double t) {
  return effect_draws(samples, spec, data, k, t, predictive_seed(samples));
}

EffectSummary effect_at_time(const PosteriorSamples& samples, const ModelSpec& spec,
                             const Dataset& data, TreatmentId k, double t, std::uint64_t seed) {
  return summarize(effect_draws(samples, spec, data, k, t, seed));
}

EffectSummary effect_at_time(const PosteriorSamples& samples, const ModelSpec& spec,
                             const Dataset& data, TreatmentId k, double t) {
  return effect_at_time(samples, spec, data, k, t, predictive_seed(samples));
}

EffectCurve effect_curve(const PosteriorSamples& samples, const ModelSpec& spec, const Dataset& data,
                         TreatmentId k, std::span<const double> grid, std::uint64_t seed) {
  if (grid.empty()) throw UsageError("effect curve grid is empty");
  for (std::size_t j = 1; j < grid.size(); ++j)
    if (!(grid[j] > grid[j - 1])) throw UsageError("effect curve grid must be strictly increasing");

  const auto draws = grid_draws(samples, spec, data, k, grid, seed);
  EffectCurve c;
  c.treatment = k;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const EffectSummary s = summarize(draws[j]);
    c.times.push_back(data.to_calendar(grid[j]));
    c.mean.push_back(s.mean);
    c.q025.push_back(s.q025);
    c.q50.push_back(s.q50);
    c.q975.push_back(s.q975);
  }
  return c;
}

EffectCurve effect_curve(const PosteriorSamples& samples, const ModelSpec& spec, const Dataset& data,
                         TreatmentId k, std::span<const double> grid) {
  return effect_curve(samples, spec, data, k, grid, predictive_seed(samples));
}

std::vector<double> default_grid(std::size_t n) {
  if (n < 2) return {0.0};
  std::vector<double> g(n);
  for (std::size_t j = 0; j < n; ++j) g[j] = static_cast<double>(j) / static_cast<double>(n - 1);
  return g;
}

double inferiority_probability(const PosteriorSamples& samples, const ModelSpec& spec,
                               const Dataset& data, TreatmentId k, double t) {
  return effect_at_time(samples, spec, data, k, t).prob_negative;
}

std::vector<EndOfPeriodEffect> end_of_period_effects(const PosteriorSamples& samples,
                                                     const ModelSpec& spec, const Dataset& data) {
  std::vector<EndOfPeriodEffect> out;
  for (std::size_t k = 0; k < data.treatment_count(); ++k) {
    const TreatmentId id{k};
    out.push_back({id, data.label(id), effect_at_time(samples, spec, data, id, 1.0)});
  }
  return out;
}

std::vector<std::pair<double, double>> exclusion_windows(const EffectCurve& curve) {
  std::vector<std::pair<double, double>> out;
  bool open = false;
  for (std::size_t j = 0; j < curve.times.size(); ++j) {
    const bool excludes = curve.q975[j] < 0.0 || curve.q025[j] > 0.0;
    if (excludes && !open) {
      out.emplace_back(curve.times[j], curve.times[j]);
      open = true;
    } else if (excludes) {
      out.back().second = curve.times[j];
    } else {
      open = false;
    }
  }
  return out;
}

std::vector<ComparisonRow> compare_models(std::span<const ModelRun> runs, const Dataset& data) {
  if (runs.empty()) return {};
  for (const auto& r : runs) {
    if (r.spec.baseline != runs.front().spec.baseline)
      throw UsageError("compared runs use different baselines");
    if (r.samples == nullptr) throw UsageError("compared run '" + r.label + "' has no samples");
  }
  std::vector<const ModelRun*> order;
  for (const auto& r : runs) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(),
                   [](const ModelRun* a, const ModelRun* b) { return a->label < b->label; });

  std::vector<ComparisonRow> rows;
  for (std::size_t k = 0; k < data.treatment_count(); ++k) {
    const TreatmentId id{k};
    for (const ModelRun* r : order) {
      const EffectSummary s = effect_at_time(*r->samples, r->spec, data, id, 1.0);
      rows.push_back({data.label(id), r->label, s.mean, s.q025, s.q975, s.q975 - s.q025});
    }
  }
  return rows;
}

}  // namespace tnma
