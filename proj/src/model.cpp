#include "tnma/model.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "tnma/error.hpp"

namespace tnma {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

void check_shape(const Dataset& data, const ParamState& state) {
  if (state.mu.size() != data.study_count() || state.delta.size() != data.study_count() ||
      state.d.size() != data.treatment_count())
    throw std::invalid_argument("parameter state does not match the dataset dimensions");
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::BNMA: return "bnma";
    case ModelKind::MetaBNMA: return "meta";
    case ModelKind::TBNMA: return "tbnma";
  }
  return "unknown";
}

std::optional<ModelKind> parse_model_kind(std::string_view text) {
  if (text == "bnma") return ModelKind::BNMA;
  if (text == "meta") return ModelKind::MetaBNMA;
  if (text == "tbnma") return ModelKind::TBNMA;
  return std::nullopt;
}

ModelSpec ModelSpec::make(const Dataset& data, ModelKind kind,
                          std::span<const std::string> time_varying_labels,
                          std::optional<TreatmentId> baseline) {
  ModelSpec spec;
  spec.kind = kind;
  spec.baseline = baseline.value_or(data.baseline());
  if (spec.baseline.value >= data.treatment_count())
    throw DataError("baseline index out of range");
  spec.time_varying.assign(data.treatment_count(), false);
  for (const auto& label : time_varying_labels) {
    const TreatmentId k = data.require(label);
    if (k == spec.baseline)
      throw UsageError("baseline treatment '" + label + "' cannot be time-varying");
    spec.time_varying[k.value] = true;
  }
  return spec;
}

std::vector<TreatmentId> ModelSpec::time_varying_set() const {
  std::vector<TreatmentId> out;
  if (kind == ModelKind::BNMA) return out;
  for (std::size_t k = 0; k < time_varying.size(); ++k)
    if (time_varying[k]) out.push_back(TreatmentId{k});
  return out;
}

std::vector<FreeTreatment> BasicEffects::free_treatments() const {
  std::vector<FreeTreatment> out;
  for (std::size_t k = 0; k < values_.size(); ++k)
    if (TreatmentId{k} != baseline_) out.push_back(FreeTreatment(TreatmentId{k}));
  return out;
}

ParamState ParamState::zeros(const Dataset& data, const ModelSpec& spec) {
  ParamState s;
  const std::size_t K = data.treatment_count();
  s.mu.assign(data.study_count(), 0.0);
  s.delta.resize(data.study_count());
  for (std::size_t i = 0; i < data.study_count(); ++i)
    s.delta[i].assign(data.study(i).contrast_count(), 0.0);
  s.d = BasicEffects(K, spec.baseline);
  s.d_latent.assign(K, {});
  s.beta.assign(K, 0.0);
  s.kernel.assign(K, KernelParams{0.1, 0.1, 0.1, 0.1, 1.0});
  if (spec.kind == ModelKind::TBNMA)
    for (auto k : spec.time_varying_set()) s.d_latent[k.value].assign(data.occurrences(k).size(), 0.0);
  return s;
}

double logit_prob(double mu, double delta, bool baseline_arm) {
  const double eta = baseline_arm ? mu : mu + delta;
  return 1.0 / (1.0 + std::exp(-eta));
}

double log_binomial_pmf(long successes, long size, double p) {
  const double y = static_cast<double>(successes), n = static_cast<double>(size);
  const double log_choose = std::lgamma(n + 1) - std::lgamma(y + 1) - std::lgamma(n - y + 1);
  double out = log_choose;
  if (successes > 0) out += y * std::log(p);
  if (successes < size) out += (n - y) * std::log1p(-p);
  return out;
}

double log_binomial_pmf_logit(long successes, long size, double logit) {
  const double y = static_cast<double>(successes), n = static_cast<double>(size);
  const double log_choose = std::lgamma(n + 1) - std::lgamma(y + 1) - std::lgamma(n - y + 1);
  return log_choose + y * logit - n * softplus(logit);
}

double study_log_likelihood(const Study& study, double mu, std::span<const double> delta) {
  double ll = 0.0;
  const auto& base = study.arms[study.baseline_arm];
  ll += log_binomial_pmf_logit(base.successes, base.size, mu);
  for (std::size_t j = 0; j < study.contrast_count(); ++j) {
    const auto& arm = study.contrast_arm(j);
    ll += log_binomial_pmf_logit(arm.successes, arm.size, mu + delta[j]);
  }
  return ll;
}

double log_likelihood(const Dataset& data, const ParamState& state) {
  check_shape(data, state);
  double ll = 0.0;
  for (std::size_t i = 0; i < data.study_count(); ++i)
    ll += study_log_likelihood(data.study(i), state.mu[i], state.delta[i]);
  return ll;
}

double treatment_effect(const Dataset& data, const ModelSpec& spec, const ParamState& state,
                        std::size_t study, TreatmentId k) {
  if (k == spec.baseline) return 0.0;
  if (!spec.varies(k)) return state.d[k];
  const Study& s = data.study(study);
  if (spec.kind == ModelKind::MetaBNMA)
    return state.d[k] + state.beta[k.value] * (s.time - data.mean_time());

  for (std::size_t a = 0; a < s.arms.size(); ++a)
    if (s.arms[a].treatment == k) return state.d_latent[k.value][data.occurrence_index(study, a)];
  throw std::invalid_argument("treatment " + data.label(k) + " does not occur in study " + s.key);
}

double consistency_mean(const Dataset& data, const ModelSpec& spec, const ParamState& state,
                        std::size_t study, TreatmentId k) {
  const TreatmentId b = data.study(study).baseline();
  if (k == b) return 0.0;
  return treatment_effect(data, spec, state, study, k) - treatment_effect(data, spec, state, study, b);
}

double contrast_logprior(std::span<const double> delta, std::span<const double> means, double sigma2) {
  double lp = 0.0;
  double resid_sum = 0.0;
  for (std::size_t idx = 0; idx < delta.size(); ++idx) {
    const double j = static_cast<double>(idx + 1);
    const double mean = means[idx] + resid_sum / j;
    const double var = (j + 1.0) / (2.0 * j) * sigma2;
    lp += log_normal_pdf(delta[idx], mean, var);
    resid_sum += delta[idx] - means[idx];
  }
  return lp;
}

double delta_logprior(const Dataset& data, const ModelSpec& spec, const ParamState& state,
                      std::size_t study) {
  const Study& s = data.study(study);
  const std::size_t q = s.contrast_count();
  double means[16];
  std::vector<double> heap;
  std::span<double> m(means, q);
  if (q > std::size(means)) {
    heap.resize(q);
    m = heap;
  }
  for (std::size_t j = 0; j < q; ++j)
    m[j] = consistency_mean(data, spec, state, study, s.contrast_arm(j).treatment);
  return contrast_logprior(state.delta[study], m, state.sigma2);
}

double kernel_log_prior(const KernelParams& p, const PriorConfig& prior) {
  if (!p.valid() || p.phi <= 0) return kNegInf;
  return log_half_normal_pdf(p.psi, prior.half_normal_var) +
         log_half_normal_pdf(p.s_b, prior.half_normal_var) +
         log_half_normal_pdf(p.s_l, prior.half_normal_var) +
         log_inv_gamma_pdf(p.phi * p.phi, prior.ig_shape, prior.ig_scale) + std::log(2.0 * p.phi) +
         log_gamma_pdf(p.rho, prior.gamma_shape, prior.gamma_rate);
}

std::optional<std::string> support_violation(const ParamState& state, const ModelSpec& spec) {
  const auto positive = [](double v) { return std::isfinite(v) && v > 0; };
  if (!positive(state.sigma2)) return "sigma2 must be positive";
  if (!positive(state.sigma2_mu)) return "sigma2_mu must be positive";
  if (!positive(state.sigma2_d)) return "sigma2_d must be positive";
  if (!std::isfinite(state.m_mu) || !std::isfinite(state.m_d)) return "non-finite hyper-mean";
  if (spec.kind == ModelKind::TBNMA) {
    for (auto k : spec.time_varying_set()) {
      const auto& p = state.kernel[k.value];
      if (!(p.psi >= 0) || !(p.s_b >= 0) || !(p.s_l >= 0))
        return "kernel amplitudes must be nonnegative for treatment " + std::to_string(k.value);
      if (!positive(p.phi)) return "phi must be positive for treatment " + std::to_string(k.value);
      if (!positive(p.rho)) return "rho must be positive for treatment " + std::to_string(k.value);
    }
  }
  return std::nullopt;
}

double log_prior(const ParamState& state, const ModelSpec& spec, const Dataset& data) {
  check_shape(data, state);
  if (support_violation(state, spec)) return kNegInf;
  const PriorConfig& pr = spec.prior;

  double lp = 0.0;
  for (double mu : state.mu) lp += log_normal_pdf(mu, state.m_mu, state.sigma2_mu);
  for (auto k : state.d.free_treatments()) lp += log_normal_pdf(state.d[k.id()], state.m_d, state.sigma2_d);
  lp += log_normal_pdf(state.m_mu, 0.0, pr.normal_var);
  lp += log_normal_pdf(state.m_d, 0.0, pr.normal_var);
  lp += log_inv_gamma_pdf(state.sigma2, pr.ig_shape, pr.ig_scale);
  lp += log_inv_gamma_pdf(state.sigma2_mu, pr.ig_shape, pr.ig_scale);
  lp += log_inv_gamma_pdf(state.sigma2_d, pr.ig_shape, pr.ig_scale);

  if (spec.kind == ModelKind::MetaBNMA)
    for (auto k : spec.time_varying_set()) lp += log_normal_pdf(state.beta[k.value], 0.0, pr.slope_var);

  if (spec.kind == ModelKind::TBNMA) {
    for (auto k : spec.time_varying_set()) {
      const auto& latent = state.d_latent[k.value];
      const auto times = data.times_of(k);
      if (latent.size() != times.size())
        throw std::invalid_argument("latent series length does not match occurrences of treatment");
      try {
        const CovarianceMatrix cov = build_covariance(state.kernel[k.value], times);
        const Eigen::Map<const Eigen::VectorXd> x(latent.data(), static_cast<Eigen::Index>(latent.size()));
        lp += mvn_logpdf(x, Eigen::VectorXd::Constant(x.size(), state.d[k]), cov);
      } catch (const NumericalError&) {
        return kNegInf;
      }
      lp += kernel_log_prior(state.kernel[k.value], pr);
    }
  }
  return lp;
}

double log_posterior(const Dataset& data, const ParamState& state, const ModelSpec& spec) {
  const double prior = log_prior(state, spec, data);
  if (prior == kNegInf) return kNegInf;
  double lp = prior + log_likelihood(data, state);
  for (std::size_t i = 0; i < data.study_count(); ++i) lp += delta_logprior(data, spec, state, i);
  return lp;
}

double log_normal_pdf(double x, double mean, double var) {
  const double r = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + r * r / var);
}

double log_inv_gamma_pdf(double x, double shape, double scale) {
  if (!(x > 0)) return kNegInf;
  return shape * std::log(scale) - std::lgamma(shape) - (shape + 1.0) * std::log(x) - scale / x;
}

double log_gamma_pdf(double x, double shape, double rate) {
  if (!(x > 0)) return kNegInf;
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double log_half_normal_pdf(double x, double var) {
  if (x < 0) return kNegInf;
  return std::log(2.0) + log_normal_pdf(x, 0.0, var);
}

}  // namespace tnma
