#pragma once

// Gaussian-process covariance for a treatment's latent effect series:
// white noise + linear + Matern-1/2 (Ornstein-Uhlenbeck), with Cholesky-backed
// multivariate normal density, sampling, and conditioning.

#include <random>
#include <span>

#include <Eigen/Dense>

namespace tnma {

struct KernelParams {
  double psi = 0.0;  // white-noise amplitude
  double s_b = 0.0;  // linear bias amplitude
  double s_l = 0.0;  // linear slope amplitude
  double phi = 0.0;  // Matern amplitude
  double rho = 1.0;  // Matern inverse length-scale
  static constexpr double nu = 0.5;

  bool valid() const { return psi >= 0 && s_b >= 0 && s_l >= 0 && phi >= 0 && rho > 0; }
};

/// Jitter ladder tried in order until the Cholesky factorization succeeds.
inline constexpr double kJitterLadder[] = {0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6};

/// Symmetric positive-definite matrix with its lower Cholesky factor.
/// The factor satisfies L L^T = matrix() + jitter() * I.
class CovarianceMatrix {
 public:
  /// Factorizes with the jitter ladder; throws NumericalError if every rung fails.
  explicit CovarianceMatrix(Eigen::MatrixXd matrix);

  /// Wraps an existing factor without jitter; matrix() becomes L L^T.
  static CovarianceMatrix from_cholesky(Eigen::MatrixXd lower);

  Eigen::Index dim() const { return matrix_.rows(); }
  const Eigen::MatrixXd& matrix() const { return matrix_; }
  const Eigen::MatrixXd& cholesky() const { return lower_; }
  double jitter() const { return jitter_; }

  /// log det(matrix + jitter I).
  double log_det() const;
  /// L^{-1} v
  Eigen::VectorXd whiten(const Eigen::VectorXd& v) const;
  /// (matrix + jitter I)^{-1} v
  Eigen::VectorXd solve(const Eigen::VectorXd& v) const;

 private:
  CovarianceMatrix() = default;
  Eigen::MatrixXd matrix_;
  Eigen::MatrixXd lower_;
  double jitter_ = 0.0;
};

Eigen::MatrixXd k_white(const KernelParams& params, Eigen::Index n);
Eigen::MatrixXd k_linear(const KernelParams& params, std::span<const double> times);
Eigen::MatrixXd k_matern12(const KernelParams& params, std::span<const double> times);

/// Cross-covariance between two time sets from the linear and Matern parts;
/// white noise is observation-level and never correlates distinct points.
Eigen::MatrixXd k_cross(const KernelParams& params, std::span<const double> rows,
                        std::span<const double> cols);

/// Summed kernel matrix without factorization.
Eigen::MatrixXd kernel_matrix(const KernelParams& params, std::span<const double> times);

/// K_W + K_L + K_M, factorized with adaptive jitter.
CovarianceMatrix build_covariance(const KernelParams& params, std::span<const double> times);

double mvn_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const CovarianceMatrix& cov);

/// mean + L z with z ~ N(0, I).
template <class Rng>
Eigen::VectorXd mvn_sample(const Eigen::VectorXd& mean, const CovarianceMatrix& cov, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
  return mean + cov.cholesky().triangularView<Eigen::Lower>() * z;
}

struct GpPrediction {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

struct GpMarginals {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;
};

/// Conditional law of the latent series at query times given its values at
/// training times. The mean function is the constant mean_level.
GpPrediction gp_condition(std::span<const double> train_times, std::span<const double> train_values,
                          double mean_level, const KernelParams& params,
                          std::span<const double> query_times);

/// As gp_condition, but only pointwise variances; reuses a factorization of
/// the training covariance.
GpMarginals gp_condition_marginals(std::span<const double> train_times,
                                   std::span<const double> train_values, double mean_level,
                                   const KernelParams& params, const CovarianceMatrix& train_cov,
                                   std::span<const double> query_times);

}  // namespace tnma
