#include "plume/numerics.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace plume;

namespace {

// Loop-based sample covariance with 1/(n-1).
Eigen::MatrixXd naive_covariance(const Eigen::MatrixXd& x) {
  const Eigen::Index p = x.rows(), n = x.cols();
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(p);
  for (Eigen::Index j = 0; j < n; ++j) mu += x.col(j);
  mu /= static_cast<double>(n);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index a = 0; a < p; ++a)
      for (Eigen::Index b = 0; b < p; ++b) c(a, b) += (x(a, j) - mu(a)) * (x(b, j) - mu(b));
  return c / static_cast<double>(n - 1);
}

}  // namespace

TEST_CASE("sample covariance matches a loop oracle") {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd x = testutil::gaussian_matrix(rng, 4, 30);
  const Eigen::MatrixXd c = sample_covariance(x, sample_mean(x));
  CHECK((c - naive_covariance(x)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("quantile interpolates linearly") {
  CHECK(quantile({3, 1, 2}, 0.5) == 2.0);
  CHECK(quantile({1, 2, 3, 4}, 0.5) == doctest::Approx(2.5));
  CHECK(quantile({10, 20}, 0.25) == doctest::Approx(12.5));
  CHECK(quantile({7}, 0.9) == 7.0);
  CHECK_THROWS(quantile({}, 0.5));
  CHECK_THROWS(quantile({1.0}, 1.5));
}

TEST_CASE("fit_cov uses the median eigenvalue as ridge and inverts the shifted covariance") {
  std::mt19937_64 rng(2);
  Eigen::MatrixXd x = testutil::gaussian_matrix(rng, 5, 200);
  x.row(0) *= 3.0;
  const CovModel m = fit_cov(x);
  const Eigen::MatrixXd c = naive_covariance(x);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
  std::vector<double> ev(eig.eigenvalues().data(), eig.eigenvalues().data() + 5);
  std::sort(ev.begin(), ev.end());
  CHECK(m.ridge() == doctest::Approx(ev[2]).epsilon(1e-10));
  const Eigen::MatrixXd shifted = c + m.ridge() * Eigen::MatrixXd::Identity(5, 5);
  CHECK((m.precision() * shifted - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(m.log_det() == doctest::Approx(std::log(shifted.determinant())).epsilon(1e-10));
  for (Eigen::Index k = 1; k < 5; ++k) CHECK(m.eigenvalues()(k - 1) >= m.eigenvalues()(k));
}

TEST_CASE("fit_cov ridge makes rank-deficient samples invertible") {
  std::mt19937_64 rng(3);
  // 3 spectra in 6 bands: rank 2 covariance, 90th-percentile eigenvalue > 0.
  const Eigen::MatrixXd x = testutil::gaussian_matrix(rng, 6, 3);
  const CovModel m = fit_cov(x, 90.0);
  CHECK(m.ridge() > 0.0);
  CHECK(m.precision().allFinite());
  CHECK(fit_cov(x, 50.0).ridge() < 1e-12 * m.eigenvalues()(0));
  CHECK_THROWS(fit_cov(x.leftCols(1)));
}

TEST_CASE("CovModel sorts a supplied eigensystem") {
  const Eigen::VectorXd mu = Eigen::VectorXd::Zero(2);
  const CovModel m = CovModel::from_eigensystem(mu, Eigen::Vector2d(1.0, 4.0), Eigen::Matrix2d::Identity(), 0.0);
  CHECK(m.eigenvalues()(0) == 4.0);
  CHECK(m.eigenvectors()(1, 0) == 1.0);
  CHECK(m.precision()(0, 0) == doctest::Approx(1.0));
  CHECK(m.precision()(1, 1) == doctest::Approx(0.25));
  CHECK_THROWS(CovModel::from_eigensystem(mu, Eigen::Vector2d(1.0, 0.0), Eigen::Matrix2d::Identity(), 0.0));
}

TEST_CASE("PCA recovers an exactly low-dimensional cloud") {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd frame = testutil::gaussian_matrix(rng, 8, 2);
  const Eigen::MatrixXd coeffs = testutil::gaussian_matrix(rng, 2, 40);
  Eigen::MatrixXd x = frame * coeffs;
  x.colwise() += Eigen::VectorXd::LinSpaced(8, 1.0, 2.0);
  const SubspaceModel s = fit_pca(x, 2);
  CHECK((s.basis().transpose() * s.basis() - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  for (Eigen::Index j = 0; j < x.cols(); ++j) CHECK(s.residual_sq(x.col(j)) < 1e-20 * (1.0 + x.col(j).squaredNorm()));
  const SubspaceModel one = fit_pca(x, 1);
  double r1 = 0;
  for (Eigen::Index j = 0; j < x.cols(); ++j) r1 += one.residual_sq(x.col(j));
  CHECK(r1 > 0.0);
  CHECK_THROWS(fit_pca(x.leftCols(2), 2));
  CHECK_THROWS(fit_pca(Eigen::MatrixXd::Ones(3, 4), 1));
  CHECK(fit_pca(x, 0).dimension() == 0);
}

TEST_CASE("PCA with fewer points than bands matches the covariance route") {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd x = testutil::gaussian_matrix(rng, 20, 6);
  const SubspaceModel s = fit_pca(x, 3);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(naive_covariance(x));
  const Eigen::MatrixXd top = eig.eigenvectors().rightCols(3);
  // Same subspace: projectors agree.
  const Eigen::MatrixXd p1 = s.basis() * s.basis().transpose();
  const Eigen::MatrixXd p2 = top * top.transpose();
  CHECK((p1 - p2).cwiseAbs().maxCoeff() < 1e-9);
  const SubspaceModel c = fit_pca_completed(x.leftCols(2), 4);
  CHECK(c.dimension() == 4);
}

TEST_CASE("principal_components reports captured variance") {
  std::mt19937_64 rng(6);
  Eigen::MatrixXd x = testutil::gaussian_matrix(rng, 4, 500);
  x.row(2) *= 5.0;
  const PcaDecomposition pca = principal_components(x, 4);
  CHECK(pca.variances.sum() == doctest::Approx(pca.total_variance).epsilon(1e-10));
  CHECK(std::abs(pca.basis(2, 0)) > 0.99);
}

TEST_CASE("least squares agrees with the normal equations") {
  std::mt19937_64 rng(7);
  const Eigen::MatrixXd a = testutil::gaussian_matrix(rng, 30, 4);
  const Eigen::VectorXd b = testutil::gaussian_matrix(rng, 30, 1);
  const Eigen::VectorXd beta = solve_ls(a, b);
  const Eigen::VectorXd normal = (a.transpose() * a).ldlt().solve(a.transpose() * b);
  CHECK((beta - normal).cwiseAbs().maxCoeff() < 1e-10);
  CHECK_THROWS(solve_ls(a.leftCols(3).transpose(), b.head(3)));
}

TEST_CASE("orthonormal_basis drops dependent columns") {
  Eigen::MatrixXd a(3, 3);
  a << 1, 2, 0, 0, 0, 1, 0, 0, 0;
  const Eigen::MatrixXd q = orthonormal_basis(a);
  CHECK(q.cols() == 2);
  CHECK((q.transpose() * q - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(orthonormal_basis(Eigen::MatrixXd::Zero(3, 2)).cols() == 0);
}

TEST_CASE("PLS with full components equals ordinary least squares with intercept") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd x = testutil::gaussian_matrix(rng, 40, 5);
    const Eigen::VectorXd y = testutil::gaussian_matrix(rng, 40, 1);
    const PlsrModel m = fit_plsr(x, y, 5);
    Eigen::MatrixXd design(40, 6);
    design << x, Eigen::VectorXd::Ones(40);
    const Eigen::VectorXd ols = (design.transpose() * design).ldlt().solve(design.transpose() * y);
    CHECK((m.coefficients - ols.head(5)).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(m.intercept == doctest::Approx(ols(5)).epsilon(1e-8));
    CHECK(predict_plsr(m, x.row(0).transpose()) == doctest::Approx((design.row(0) * ols)(0)).epsilon(1e-8));
  }
}

TEST_CASE("PLS edge cases") {
  std::mt19937_64 rng(9);
  const Eigen::MatrixXd x = testutil::gaussian_matrix(rng, 10, 3);
  const PlsrModel flat = fit_plsr(x, Eigen::VectorXd::Constant(10, 2.5), 2);
  CHECK(flat.coefficients.isZero());
  CHECK(flat.intercept == 2.5);
  CHECK_THROWS(fit_plsr(x, Eigen::VectorXd::Ones(10), 0));
  CHECK_THROWS(fit_plsr(x.topRows(2), Eigen::VectorXd::Ones(2), 2));
  // Exactly linear response is explained by one component.
  const Eigen::VectorXd y = x.col(0) * 2.0 + Eigen::VectorXd::Constant(10, 1.0);
  const PlsrModel lin = fit_plsr(x.leftCols(1), y, 1);
  CHECK(lin.coefficients(0) == doctest::Approx(2.0));
  CHECK(lin.intercept == doctest::Approx(1.0));
}

TEST_CASE("KDE uses Silverman bandwidth and matches the sum formula") {
  std::mt19937_64 rng(10);
  std::normal_distribution<double> n(0.0, 2.0);
  std::vector<double> s(300);
  for (auto& v : s) v = n(rng);
  const Kde1D k = fit_kde(s);
  double mean = 0;
  for (double v : s) mean += v;
  mean /= 300.0;
  double ss = 0;
  for (double v : s) ss += (v - mean) * (v - mean);
  const double sigma = std::sqrt(ss / 299.0);
  CHECK(k.bandwidth() == doctest::Approx(1.06 * sigma * std::pow(300.0, -0.2)).epsilon(1e-12));
  for (double t : {-5.0, -1.0, 0.0, 0.3, 4.0}) {
    double sum = 0;
    for (double v : s) sum += std::exp(-0.5 * std::pow((t - v) / k.bandwidth(), 2));
    const double oracle = sum / (300.0 * k.bandwidth() * std::sqrt(2.0 * std::numbers::pi));
    CHECK(eval_kde(k, t) == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(log_eval_kde(k, t) == doctest::Approx(std::log(oracle)).epsilon(1e-10));
  }
}

TEST_CASE("log KDE stays finite far from the samples") {
  const Kde1D k({0.0, 1.0}, 0.1);
  CHECK(eval_kde(k, 100.0) == 0.0);
  const double far = log_eval_kde(k, 100.0);
  CHECK(std::isfinite(far));
  const double analytic = -0.5 * std::pow(99.0 / 0.1, 2) - std::log(2 * 0.1) - 0.5 * std::log(2 * std::numbers::pi);
  CHECK(far == doctest::Approx(analytic).epsilon(1e-12));
  const Kde1D single = fit_kde(std::vector<double>{3.0});
  CHECK(single.bandwidth() > 0.0);
  CHECK(std::isfinite(log_eval_kde(single, 3.0)));
}
