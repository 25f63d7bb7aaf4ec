#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "oracles.hpp"
#include "tnma/error.hpp"
#include "tnma/kernels.hpp"

using namespace tnma;

TEST_CASE("component kernels on small inputs", "[kernels]") {
  const KernelParams unit{1.0, 1.0, 1.0, 1.0, 1.0};
  CHECK(k_white(unit, 3).isApprox(Eigen::MatrixXd::Identity(3, 3)));
  CHECK(k_white(KernelParams{}, 2).isZero());
  CHECK(k_white(KernelParams{2.0, 0, 0, 0, 1}, 1)(0, 0) == 4.0);

  const std::vector<double> zero{0.0};
  CHECK(kernel_matrix(unit, zero)(0, 0) == Catch::Approx(3.0));

  const std::vector<double> t{0.0, 0.5};
  const Eigen::MatrixXd lin = k_linear(KernelParams{0, 1.0, 2.0, 0, 1}, t);
  CHECK(lin(0, 0) == Catch::Approx(1.0));
  CHECK(lin(1, 1) == Catch::Approx(1.0 + 4.0 * 0.25));
  const Eigen::MatrixXd ou = k_matern12(KernelParams{0, 0, 0, 1.5, 2.0}, t);
  CHECK(ou(0, 1) == Catch::Approx(2.25 * std::exp(-1.0)));
  CHECK(ou(1, 1) == Catch::Approx(2.25));

  const KernelParams white_only{1.0, 0, 0, 0, 1};
  CHECK(kernel_matrix(white_only, std::vector<double>{0.1, 0.2, 0.3, 0.9}).isApprox(Eigen::MatrixXd::Identity(4, 4)));
}

TEST_CASE("kernel_matrix equals the dense entrywise oracle", "[kernels]") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> amp(0.0, 2.0), unit(0.0, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    const KernelParams p{amp(rng), amp(rng), amp(rng), amp(rng), 0.1 + 5 * unit(rng)};
    std::vector<double> t(1 + rep % 12);
    for (auto& x : t) x = unit(rng);
    const Eigen::MatrixXd k = kernel_matrix(p, t);
    CHECK((k - oracle::kernel(p.psi, p.s_b, p.s_l, p.phi, p.rho, t)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(k.isApprox(k_white(p, k.rows()) + k_linear(p, t) + k_matern12(p, t)));
  }
}

TEST_CASE("covariance factorization, log density and jitter", "[kernels]") {
  Eigen::MatrixXd a(2, 2);
  a << 2.0, 0.5, 0.5, 1.0;
  const CovarianceMatrix c(a);
  CHECK(c.jitter() == 0.0);
  CHECK((c.cholesky() * c.cholesky().transpose() - a).norm() < 1e-14);
  CHECK(c.log_det() == Catch::Approx(std::log(a.determinant())));

  Eigen::VectorXd x(2), m(2);
  x << 0.3, -1.2;
  m << 0.1, 0.4;
  CHECK(mvn_logpdf(x, m, c) == Catch::Approx(oracle::mvn_logpdf(x, m, a)).epsilon(1e-12));
  CHECK_THROWS_AS(mvn_logpdf(Eigen::VectorXd::Zero(3), m, c), std::invalid_argument);

  // Rank-deficient: two identical times under a pure bias kernel need jitter.
  const CovarianceMatrix singular = build_covariance(KernelParams{0, 1.0, 0, 0, 1}, std::vector<double>{0.2, 0.2});
  CHECK(singular.jitter() > 0.0);
  CHECK(singular.jitter() <= 1e-6);

  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(CovarianceMatrix(bad), NumericalError);
}

TEST_CASE("mvn_sample reproduces the target covariance", "[kernels]") {
  Eigen::MatrixXd a(2, 2);
  a << 1.0, 0.6, 0.6, 2.0;
  const CovarianceMatrix c(a);
  std::mt19937_64 rng(3);
  const Eigen::VectorXd mean = Eigen::Vector2d(1.0, -1.0);
  const int n = 40000;
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  Eigen::Matrix2d outer = Eigen::Matrix2d::Zero();
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd z = mvn_sample(mean, c, rng);
    sum += z;
    outer += (z - mean) * (z - mean).transpose();
  }
  CHECK((sum / n - mean).cwiseAbs().maxCoeff() < 0.03);
  CHECK(((outer / n) - a).cwiseAbs().maxCoeff() < 0.06);
}

TEST_CASE("gp_condition special cases", "[kernels]") {
  const std::vector<double> train{0.1, 0.4, 0.8};
  const std::vector<double> y{0.5, -0.2, 1.0};

  SECTION("white noise only: prediction falls back to the mean level") {
    const KernelParams p{0.7, 0, 0, 0, 1};
    const auto g = gp_condition(train, y, 0.3, p, std::vector<double>{0.6});
    CHECK(g.mean[0] == Catch::Approx(0.3));
    CHECK(g.cov(0, 0) == Catch::Approx(0.49));
  }
  SECTION("noise-free kernel interpolates the training values") {
    const KernelParams p{0.0, 0.3, 0.5, 1.0, 2.0};
    const auto g = gp_condition(train, y, 0.0, p, train);
    for (int i = 0; i < 3; ++i) {
      CHECK(g.mean[i] == Catch::Approx(y[static_cast<std::size_t>(i)]).margin(1e-8));
      CHECK(std::abs(g.cov(i, i)) <= 1e-8);
    }
  }
  SECTION("marginals agree with the full prediction") {
    const KernelParams p{0.2, 0.3, 0.5, 1.0, 2.0};
    const std::vector<double> q{0.0, 0.5, 1.0};
    const auto g = gp_condition(train, y, 0.1, p, q);
    const auto m = gp_condition_marginals(train, y, 0.1, p, build_covariance(p, train), q);
    CHECK((g.mean - m.mean).norm() < 1e-12);
    CHECK((g.cov.diagonal() - m.var).norm() < 1e-12);
  }
  CHECK_THROWS_AS(gp_condition({}, {}, 0.0, KernelParams{1, 0, 0, 0, 1}, train), std::invalid_argument);
  CHECK_THROWS_AS(gp_condition(train, std::vector<double>{1.0}, 0.0, KernelParams{1, 0, 0, 0, 1}, train),
                  std::invalid_argument);
}
