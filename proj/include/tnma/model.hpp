#pragma once

// Log-posterior of the arm-based random-effects network meta-analysis in its
// three variants: constant effects (BNMA), linear time meta-regression
// (Meta-BNMA), and Gaussian-process time-varying effects (tBNMA).

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tnma/kernels.hpp"
#include "tnma/network.hpp"

namespace tnma {

enum class ModelKind { BNMA, MetaBNMA, TBNMA };

/// "bnma", "meta", "tbnma"
std::string_view to_string(ModelKind kind);
std::optional<ModelKind> parse_model_kind(std::string_view text);

/// Prior constants. Normal and half-normal entries are variances.
struct PriorConfig {
  double normal_var = 10000.0;       // m_mu, m_d
  double half_normal_var = 10000.0;  // psi, s_b, s_l
  double ig_shape = 1.0;             // sigma2, sigma2_mu, sigma2_d, phi^2
  double ig_scale = 1.0;
  double gamma_shape = 1.0;  // rho
  double gamma_rate = 1.0;
  double slope_var = 100.0;  // Meta-BNMA slopes
};

struct ModelSpec {
  ModelKind kind = ModelKind::BNMA;
  TreatmentId baseline;
  std::vector<bool> time_varying;  // per treatment; ignored by BNMA
  PriorConfig prior;

  /// Validates that the baseline is not time-varying and every label exists.
  static ModelSpec make(const Dataset& data, ModelKind kind,
                        std::span<const std::string> time_varying_labels,
                        std::optional<TreatmentId> baseline = std::nullopt);

  bool varies(TreatmentId k) const {
    return kind != ModelKind::BNMA && k.value < time_varying.size() && time_varying[k.value];
  }
  std::vector<TreatmentId> time_varying_set() const;
};

/// Opaque index of a non-baseline treatment; only BasicEffects hands these out.
class FreeTreatment {
 public:
  TreatmentId id() const { return id_; }

 private:
  friend class BasicEffects;
  explicit FreeTreatment(TreatmentId id) : id_(id) {}
  TreatmentId id_;
};

/// Basic parameters d_1k with the baseline pinned at zero. Reads are by
/// treatment; writes need a FreeTreatment, which cannot name the baseline.
class BasicEffects {
 public:
  BasicEffects() = default;
  BasicEffects(std::size_t treatment_count, TreatmentId baseline)
      : values_(treatment_count, 0.0), baseline_(baseline) {}

  double operator[](TreatmentId k) const { return values_[k.value]; }
  double& operator[](FreeTreatment k) { return values_[k.id().value]; }

  std::optional<FreeTreatment> free(TreatmentId k) const {
    if (k == baseline_ || k.value >= values_.size()) return std::nullopt;
    return FreeTreatment(k);
  }
  std::vector<FreeTreatment> free_treatments() const;

  std::size_t size() const { return values_.size(); }
  TreatmentId baseline() const { return baseline_; }

 private:
  std::vector<double> values_;
  TreatmentId baseline_;
};

/// One point in parameter space. Per-treatment vectors are indexed by
/// treatment; entries a model does not use keep their defaults.
struct ParamState {
  std::vector<double> mu;                       // per study
  std::vector<std::vector<double>> delta;       // per study, per contrast arm
  BasicEffects d;                               // d_1k
  std::vector<std::vector<double>> d_latent;    // tBNMA, per occurrence of k
  std::vector<double> beta;                     // Meta-BNMA slopes
  std::vector<KernelParams> kernel;             // tBNMA hyperparameters
  double sigma2 = 1.0;
  double m_mu = 0.0;
  double sigma2_mu = 1.0;
  double m_d = 0.0;
  double sigma2_d = 1.0;

  /// Correctly shaped state with every free value at zero (variances 1,
  /// kernel amplitudes 0.1, rho 1).
  static ParamState zeros(const Dataset& data, const ModelSpec& spec);
};

/// Success probability of an arm under the logit link.
double logit_prob(double mu, double delta, bool baseline_arm);

double log_binomial_pmf(long successes, long size, double p);
/// Same, parameterized by the logit to stay accurate for extreme probabilities.
double log_binomial_pmf_logit(long successes, long size, double logit);

double study_log_likelihood(const Study& study, double mu, std::span<const double> delta);
double log_likelihood(const Dataset& data, const ParamState& state);

/// d_1k at the time of study i under the model's time structure; zero for the baseline.
double treatment_effect(const Dataset& data, const ModelSpec& spec, const ParamState& state,
                        std::size_t study, TreatmentId k);

/// d_{b_i,k} = effect(k) - effect(b_i), both at t_i.
double consistency_mean(const Dataset& data, const ModelSpec& spec, const ParamState& state,
                        std::size_t study, TreatmentId k);

/// Multi-arm random-effects density written as a chain of univariate
/// conditionals; means[j] is the consistency mean of contrast j.
double contrast_logprior(std::span<const double> delta, std::span<const double> means, double sigma2);

double delta_logprior(const Dataset& data, const ModelSpec& spec, const ParamState& state,
                      std::size_t study);

/// Prior density of one treatment's kernel hyperparameters in (psi, s_b, s_l,
/// phi, rho) coordinates; phi^2 carries the inverse-gamma law.
double kernel_log_prior(const KernelParams& params, const PriorConfig& prior);

/// Names the first out-of-support parameter, if any.
std::optional<std::string> support_violation(const ParamState& state, const ModelSpec& spec);

/// Returns -infinity when support_violation() is non-empty.
double log_prior(const ParamState& state, const ModelSpec& spec, const Dataset& data);

double log_posterior(const Dataset& data, const ParamState& state, const ModelSpec& spec);

// Scalar log-densities shared by the model and the sampler.
double log_normal_pdf(double x, double mean, double var);
double log_inv_gamma_pdf(double x, double shape, double scale);
double log_gamma_pdf(double x, double shape, double rate);
double log_half_normal_pdf(double x, double var);

}  // namespace tnma
