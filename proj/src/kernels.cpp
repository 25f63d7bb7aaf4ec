#include "tnma/kernels.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "tnma/error.hpp"

namespace tnma {

CovarianceMatrix::CovarianceMatrix(Eigen::MatrixXd matrix) : matrix_(std::move(matrix)) {
  if (matrix_.rows() != matrix_.cols()) throw std::invalid_argument("covariance must be square");
  const Eigen::Index n = matrix_.rows();
  for (double jitter : kJitterLadder) {
    Eigen::LLT<Eigen::MatrixXd> llt(matrix_ + jitter * Eigen::MatrixXd::Identity(n, n));
    if (llt.info() != Eigen::Success) continue;
    Eigen::MatrixXd lower = llt.matrixL();
    // LLT only fails on non-positive pivots; a tiny positive pivot can still
    // leave a non-finite factor.
    if (!lower.allFinite()) continue;
    lower_ = std::move(lower);
    jitter_ = jitter;
    return;
  }
  throw NumericalError("covariance is not positive definite after jitter " +
                       std::to_string(kJitterLadder[std::size(kJitterLadder) - 1]));
}

CovarianceMatrix CovarianceMatrix::from_cholesky(Eigen::MatrixXd lower) {
  CovarianceMatrix c;
  c.matrix_ = lower * lower.transpose();
  c.lower_ = std::move(lower);
  return c;
}

double CovarianceMatrix::log_det() const {
  return 2.0 * lower_.diagonal().array().log().sum();
}

Eigen::VectorXd CovarianceMatrix::whiten(const Eigen::VectorXd& v) const {
  return lower_.triangularView<Eigen::Lower>().solve(v);
}

Eigen::VectorXd CovarianceMatrix::solve(const Eigen::VectorXd& v) const {
  Eigen::VectorXd w = whiten(v);
  lower_.transpose().triangularView<Eigen::Upper>().solveInPlace(w);
  return w;
}

Eigen::MatrixXd k_white(const KernelParams& params, Eigen::Index n) {
  return params.psi * params.psi * Eigen::MatrixXd::Identity(n, n);
}

Eigen::MatrixXd k_linear(const KernelParams& params, std::span<const double> times) {
  return k_cross(KernelParams{0.0, params.s_b, params.s_l, 0.0, 1.0}, times, times);
}

Eigen::MatrixXd k_matern12(const KernelParams& params, std::span<const double> times) {
  return k_cross(KernelParams{0.0, 0.0, 0.0, params.phi, params.rho}, times, times);
}

Eigen::MatrixXd k_cross(const KernelParams& params, std::span<const double> rows,
                        std::span<const double> cols) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto m = static_cast<Eigen::Index>(cols.size());
  const double sb2 = params.s_b * params.s_b;
  const double sl2 = params.s_l * params.s_l;
  const double phi2 = params.phi * params.phi;
  Eigen::MatrixXd k(n, m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < n; ++i) {
      const double ti = rows[i], tj = cols[j];
      k(i, j) = sb2 + sl2 * ti * tj + phi2 * std::exp(-params.rho * std::abs(ti - tj));
    }
  return k;
}

Eigen::MatrixXd kernel_matrix(const KernelParams& params, std::span<const double> times) {
  Eigen::MatrixXd k = k_cross(params, times, times);
  k.diagonal().array() += params.psi * params.psi;
  // Mirror the lower triangle so the result is bitwise symmetric.
  k.triangularView<Eigen::StrictlyUpper>() = k.transpose();
  return k;
}

CovarianceMatrix build_covariance(const KernelParams& params, std::span<const double> times) {
  if (times.empty()) throw std::invalid_argument("build_covariance: empty time vector");
  return CovarianceMatrix(kernel_matrix(params, times));
}

double mvn_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const CovarianceMatrix& cov) {
  if (x.size() != mean.size() || x.size() != cov.dim())
    throw std::invalid_argument("mvn_logpdf: dimension mismatch (x " + std::to_string(x.size()) +
                                ", mean " + std::to_string(mean.size()) + ", cov " +
                                std::to_string(cov.dim()) + ")");
  const double n = static_cast<double>(x.size());
  const Eigen::VectorXd w = cov.whiten(x - mean);
  return -0.5 * n * std::log(2.0 * std::numbers::pi) - 0.5 * cov.log_det() - 0.5 * w.squaredNorm();
}

GpPrediction gp_condition(std::span<const double> train_times, std::span<const double> train_values,
                          double mean_level, const KernelParams& params,
                          std::span<const double> query_times) {
  if (train_times.empty()) throw std::invalid_argument("gp_condition: no training times");
  if (train_times.size() != train_values.size())
    throw std::invalid_argument("gp_condition: times and values differ in length");
  const CovarianceMatrix train = build_covariance(params, train_times);

  const Eigen::Map<const Eigen::VectorXd> y(train_values.data(),
                                            static_cast<Eigen::Index>(train_values.size()));
  const Eigen::VectorXd resid = y.array() - mean_level;
  const Eigen::MatrixXd cross = k_cross(params, train_times, query_times);
  // V = L^{-1} K_*
  const Eigen::MatrixXd v = train.cholesky().triangularView<Eigen::Lower>().solve(cross);

  GpPrediction out;
  out.mean = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(query_times.size()), mean_level) +
             v.transpose() * train.whiten(resid);
  out.cov = kernel_matrix(params, query_times) - v.transpose() * v;
  return out;
}

GpMarginals gp_condition_marginals(std::span<const double> train_times,
                                   std::span<const double> train_values, double mean_level,
                                   const KernelParams& params, const CovarianceMatrix& train_cov,
                                   std::span<const double> query_times) {
  const Eigen::Map<const Eigen::VectorXd> y(train_values.data(),
                                            static_cast<Eigen::Index>(train_values.size()));
  const Eigen::VectorXd white = train_cov.whiten(y.array() - mean_level);
  const Eigen::MatrixXd v = train_cov.cholesky().triangularView<Eigen::Lower>().solve(
      k_cross(params, train_times, query_times));

  const double prior_var = params.psi * params.psi + params.s_b * params.s_b + params.phi * params.phi;
  const double sl2 = params.s_l * params.s_l;
  GpMarginals out;
  out.mean = (v.transpose() * white).array() + mean_level;
  out.var.resize(static_cast<Eigen::Index>(query_times.size()));
  for (Eigen::Index j = 0; j < out.var.size(); ++j) {
    const double t = query_times[j];
    out.var[j] = std::max(0.0, prior_var + sl2 * t * t - v.col(j).squaredNorm());
  }
  return out;
}

}  // namespace tnma
