#include "tnma/simgen.hpp"

#include <cmath>
#include <random>

#include "tnma/error.hpp"
#include "tnma/mcmc.hpp"

namespace tnma {

double SigmoidShape::operator()(double t) const { return a + h / (1.0 + std::exp(-r * (t - t_mid))); }

double evaluate(const EffectShape& shape, double t) {
  return std::visit([t](const auto& s) { return s(t); }, shape);
}

std::string shape_name(const EffectShape& shape) {
  struct Name {
    std::string operator()(const ConstantShape&) const { return "constant"; }
    std::string operator()(const QuadraticShape&) const { return "quadratic"; }
    std::string operator()(const SigmoidShape&) const { return "sigmoid"; }
  };
  return std::visit(Name{}, shape);
}

void Scenario::validate() const {
  const bool finite = std::visit(
      [](const auto& s) {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, ConstantShape>) return std::isfinite(s.level);
        else if constexpr (std::is_same_v<std::decay_t<decltype(s)>, QuadraticShape>)
          return std::isfinite(s.a) && std::isfinite(s.b) && std::isfinite(s.t0);
        else
          return std::isfinite(s.a) && std::isfinite(s.h) && std::isfinite(s.r) && std::isfinite(s.t_mid);
      },
      shape);
  if (!finite) throw UsageError("scenario '" + name + "' has non-finite shape parameters");
  if (arm_size && *arm_size < 10) throw UsageError("scenario arm size must be at least 10");
  if (!(sigma2 >= 0) || !(sigma_mu >= 0) || !(other_effect_var >= 0))
    throw UsageError("scenario variances must be nonnegative");
}

double GroundTruth::effect(TreatmentId k, double t) const {
  if (k == reference) return 0.0;
  if (k == target) return evaluate(curve, t);
  return constant_effect[k.value];
}

SimulatedData generate(const Dataset& skeleton, const Scenario& scenario) {
  scenario.validate();
  if (!skeleton.find(scenario.target))
    throw DataError("target treatment '" + scenario.target + "' is absent from the skeleton");
  const std::string reference_label = scenario.reference.value_or(skeleton.label(skeleton.baseline()));
  if (reference_label == scenario.target) throw UsageError("target treatment cannot be the reference");

  // Study baselines follow the reference, so contrasts line up with the
  // returned dataset.
  const Dataset design = build_dataset(skeleton.to_records(), BuildOptions{reference_label});
  const TreatmentId target = design.require(scenario.target);
  const TreatmentId reference = design.baseline();

  mcmc::Rng rng(mcmc::chain_seed(scenario.seed, 0));
  std::normal_distribution<double> normal;

  GroundTruth truth;
  truth.target = target;
  truth.reference = reference;
  truth.curve = scenario.shape;
  truth.constant_effect.assign(design.treatment_count(), 0.0);
  for (std::size_t k = 0; k < design.treatment_count(); ++k) {
    const double draw = std::sqrt(scenario.other_effect_var) * normal(rng);
    if (TreatmentId{k} != reference && TreatmentId{k} != target) truth.constant_effect[k] = draw;
  }

  std::vector<RawArmRecord> records;
  for (const Study& study : design.studies()) {
    const double mu = scenario.m_mu + scenario.sigma_mu * normal(rng);
    const double base_effect = truth.effect(study.baseline(), study.time);
    const std::size_t q = study.contrast_count();

    std::vector<double> means(q), delta(q);
    double resid_sum = 0.0;
    for (std::size_t j = 0; j < q; ++j) {
      // Sequential conditionals of the exchangeable multi-arm normal.
      means[j] = truth.effect(study.contrast_arm(j).treatment, study.time) - base_effect;
      const double jj = static_cast<double>(j + 1);
      const double cond_mean = means[j] + resid_sum / jj;
      const double cond_var = (jj + 1.0) / (2.0 * jj) * scenario.sigma2;
      delta[j] = cond_mean + std::sqrt(cond_var) * normal(rng);
      resid_sum += delta[j] - means[j];
    }

    std::vector<double> probs(study.arms.size());
    probs[study.baseline_arm] = 1.0 / (1.0 + std::exp(-mu));
    for (std::size_t j = 0; j < q; ++j) probs[study.contrast_arms[j]] = 1.0 / (1.0 + std::exp(-(mu + delta[j])));

    for (std::size_t a = 0; a < study.arms.size(); ++a) {
      const long n = scenario.arm_size.value_or(study.arms[a].size);
      std::binomial_distribution<long> binom(n, probs[a]);
      RawArmRecord r;
      r.study = study.key;
      r.date = PartialDate{study.date.year, study.date.month, study.date.day};
      r.treatment = design.label(study.arms[a].treatment);
      r.events = binom(rng);
      r.total = n;
      records.push_back(std::move(r));
    }

    truth.mu.push_back(mu);
    truth.delta_mean.push_back(std::move(means));
    truth.delta.push_back(std::move(delta));
    truth.prob.push_back(std::move(probs));
  }

  return SimulatedData{build_dataset(records, BuildOptions{reference_label}), std::move(truth)};
}

std::vector<Scenario> default_scenarios() {
  std::vector<Scenario> out(3);
  out[0].name = "constant";
  out[0].shape = ConstantShape{0.4};
  out[1].name = "quadratic";
  out[1].shape = QuadraticShape{0.0, 1.6, 0.5};
  out[2].name = "sigmoid";
  out[2].shape = SigmoidShape{-0.4, 1.2, 12.0, 0.5};
  return out;
}

}  // namespace tnma
