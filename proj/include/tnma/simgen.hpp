#pragma once

// Synthetic outcomes on an existing network skeleton with a known
// time-varying effect injected on one target treatment.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tnma/network.hpp"

namespace tnma {

struct ConstantShape {
  double level = 0.4;
  double operator()(double) const { return level; }
};

/// a + b (t - t0)^2
struct QuadraticShape {
  double a = 0.0;
  double b = 1.6;
  double t0 = 0.5;
  double operator()(double t) const { return a + b * (t - t0) * (t - t0); }
};

/// a + h / (1 + exp(-r (t - t_mid)))
struct SigmoidShape {
  double a = -0.4;
  double h = 1.2;
  double r = 12.0;
  double t_mid = 0.5;
  double operator()(double t) const;
};

using EffectShape = std::variant<ConstantShape, QuadraticShape, SigmoidShape>;

/// Curve value at normalized time t.
double evaluate(const EffectShape& shape, double t);
std::string shape_name(const EffectShape& shape);

struct Scenario {
  std::string name;
  EffectShape shape;
  std::string target = "VAN";            // treatment whose effect varies
  std::optional<std::string> reference;  // effects are relative to this; default: dataset baseline
  double sigma2 = 0.04;                  // true contrast heterogeneity
  double m_mu = 1.0;                     // study effects ~ N(m_mu, sigma_mu^2)
  double sigma_mu = 0.5;
  double other_effect_var = 0.25;        // non-target constants ~ N(0, other_effect_var)
  std::optional<long> arm_size;          // default: the skeleton's arm sizes
  std::uint64_t seed = 1;

  void validate() const;
};

struct GroundTruth {
  TreatmentId target;
  TreatmentId reference;
  EffectShape curve;
  std::vector<double> constant_effect;        // per treatment; reference 0, target unused
  std::vector<double> mu;                     // per study
  std::vector<std::vector<double>> delta_mean;  // consistency means used for delta
  std::vector<std::vector<double>> delta;       // realized contrasts
  std::vector<std::vector<double>> prob;        // per study, per arm (input order)

  /// True d_1k at normalized time t.
  double effect(TreatmentId k, double t) const;
};

struct SimulatedData {
  Dataset data;
  GroundTruth truth;
};

/// Redraws every arm's successes on the skeleton's studies, arms, and dates.
/// Deterministic in (skeleton, scenario).
SimulatedData generate(const Dataset& skeleton, const Scenario& scenario);

/// Constant (c = 0.4), quadratic (a = 0, b = 1.6, t0 = 0.5) and sigmoid
/// (a = -0.4, h = 1.2, r = 12, t_mid = 0.5) effects on normalized time.
std::vector<Scenario> default_scenarios();

}  // namespace tnma
