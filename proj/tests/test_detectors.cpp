#include "plume/detectors.hpp"
#include "test_util.hpp"

#include <doctest.h>

using namespace plume;

namespace {

CovModel identity_cov(Eigen::Index p) {
  return CovModel::from_covariance(Eigen::VectorXd::Zero(p), Eigen::MatrixXd::Identity(p, p), 0.0);
}

SignatureSet sig(const Eigen::MatrixXd& s) {
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < s.cols(); ++j) names.push_back("s" + std::to_string(j));
  return SignatureSet(s, names);
}

Eigen::VectorXd e(Eigen::Index p, Eigen::Index i) { return Eigen::VectorXd::Unit(p, i); }

// Direct formula with an explicit inverse, N = 1.
double nmf_oracle(const Eigen::VectorXd& x, const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma,
                  const Eigen::VectorXd& s) {
  const Eigen::MatrixXd inv = sigma.inverse();
  const Eigen::VectorXd xt = x - mu;
  const double num = std::pow(s.dot(inv * xt), 2);
  return num / (s.dot(inv * s) * xt.dot(inv * xt));
}

// Projection residuals via normal-equation projectors.
double nss_oracle(const Eigen::VectorXd& xt, const Eigen::MatrixXd& b, const Eigen::MatrixXd& s) {
  const Eigen::Index p = xt.size();
  const Eigen::MatrixXd i = Eigen::MatrixXd::Identity(p, p);
  const Eigen::MatrixXd pb = i - b * (b.transpose() * b).inverse() * b.transpose();
  Eigen::MatrixXd a(p, s.cols() + b.cols());
  a << s, b;
  const Eigen::MatrixXd pa = i - a * (a.transpose() * a).inverse() * a.transpose();
  const double eps = 1e-12 * xt.squaredNorm();
  return ((pb * xt).squaredNorm() + eps) / ((pa * xt).squaredNorm() + eps);
}

Eigen::MatrixXd random_orthonormal(std::mt19937_64& rng, Eigen::Index p, Eigen::Index d) {
  return orthonormal_basis(testutil::gaussian_matrix(rng, p, d));
}

}  // namespace

TEST_CASE("NMF hand examples") {
  const CovModel id = identity_cov(3);
  const SignatureSet s = sig(e(3, 0));
  CHECK(nmf_score(Eigen::Vector3d(2, 0, 0), id, s) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(nmf_score(Eigen::Vector3d(0, 1, 0), id, s) == 0.0);

  const CovModel diag = CovModel::from_covariance(Eigen::Vector2d(1, 1), Eigen::Vector2d(1, 4).asDiagonal(), 0.0);
  const double v = nmf_score(Eigen::Vector2d(2, 3), diag, sig(Eigen::Vector2d(1, 1)));
  CHECK(std::abs(v - 0.9) <= 1e-12);
}

TEST_CASE("NMF at the mean falls back to zero") {
  const CovModel id = identity_cov(3);
  CHECK(nmf_score(Eigen::Vector3d::Zero(), id, sig(e(3, 0))) == 0.0);
}

TEST_CASE("NMF rejects collinear signatures") {
  Eigen::MatrixXd s(3, 2);
  s << 1, 2, 0, 0, 1, 2;
  CHECK_THROWS_AS(NmfScorer(identity_cov(3), sig(s)), std::invalid_argument);
  CHECK_THROWS(nmf_score(Eigen::Vector2d(1, 1), identity_cov(3), sig(e(3, 0))));
}

TEST_CASE("NMF agrees with the explicit formula on random inputs") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 50; ++t) {
    const Eigen::MatrixXd g = testutil::gaussian_matrix(rng, 5, 5);
    const Eigen::MatrixXd sigma = g * g.transpose() + 0.1 * Eigen::MatrixXd::Identity(5, 5);
    const Eigen::VectorXd mu = testutil::gaussian_matrix(rng, 5, 1);
    const Eigen::VectorXd s = testutil::gaussian_matrix(rng, 5, 1);
    const Eigen::VectorXd x = testutil::gaussian_matrix(rng, 5, 1);
    const CovModel cov = CovModel::from_covariance(mu, sigma, 0.0);
    CHECK(nmf_score(x, cov, sig(s)) == doctest::Approx(nmf_oracle(x, mu, sigma, s)).epsilon(1e-9));
  }
}

TEST_CASE("multi-signature NMF is a whitened projection ratio") {
  std::mt19937_64 rng(12);
  const Eigen::MatrixXd g = testutil::gaussian_matrix(rng, 6, 6);
  const Eigen::MatrixXd sigma = g * g.transpose() + Eigen::MatrixXd::Identity(6, 6);
  const CovModel cov = CovModel::from_covariance(Eigen::VectorXd::Zero(6), sigma, 0.0);
  const Eigen::MatrixXd s = testutil::gaussian_matrix(rng, 6, 2);
  const Eigen::VectorXd x = testutil::gaussian_matrix(rng, 6, 1);
  const Eigen::MatrixXd inv = sigma.inverse();
  const Eigen::RowVectorXd left = x.transpose() * inv * s;
  const double oracle = (left * (s.transpose() * inv * s).inverse() * left.transpose())(0) / x.dot(inv * x);
  CHECK(nmf_score(x, cov, sig(s)) == doctest::Approx(oracle).epsilon(1e-10));
  // A spectrum inside span(S) scores 1.
  CHECK(nmf_score(s * Eigen::Vector2d(0.3, -2.0), cov, sig(s)) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("NSS hand examples") {
  const SubspaceModel sub(Eigen::VectorXd::Zero(3), e(3, 0));
  const SignatureSet s = sig(e(3, 1));
  CHECK(nss_score(e(3, 2), sub, s) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(nss_score(e(3, 1) + e(3, 2), sub, s) == doctest::Approx(2.0).epsilon(1e-11));
  CHECK(nss_score(3.0 * e(3, 0), sub, s) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(nss_score(Eigen::Vector3d::Zero(), sub, s) == 1.0);
}

TEST_CASE("NSS matches normal-equation projectors") {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 30; ++t) {
    const Eigen::MatrixXd b = random_orthonormal(rng, 8, 3);
    const Eigen::MatrixXd s = testutil::gaussian_matrix(rng, 8, 2);
    const Eigen::VectorXd mu = testutil::gaussian_matrix(rng, 8, 1);
    const Eigen::VectorXd x = testutil::gaussian_matrix(rng, 8, 1);
    const double v = nss_score(x, SubspaceModel(mu, b), sig(s));
    CHECK(v == doctest::Approx(nss_oracle(x - mu, b, s)).epsilon(1e-8));
  }
}

TEST_CASE("NSS rejects rank-deficient [S B]") {
  const SubspaceModel sub(Eigen::VectorXd::Zero(3), e(3, 0));
  CHECK_THROWS_AS(ProjectionScorer(sub, sig(2.0 * e(3, 0))), std::invalid_argument);
  const SubspaceModel wide(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
  CHECK_THROWS(ProjectionScorer(wide, sig(Eigen::Vector2d(1, 1))));
}

TEST_CASE("LC hand examples and sign flag") {
  const Eigen::VectorXd mu = Eigen::Vector3d(1, 2, 3);
  const SubspaceModel sub(mu, e(3, 0));
  const SignatureSet s = sig(e(3, 1));
  CHECK(lc_score(mu + 2.0 * e(3, 1), sub, s) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(lc_score(mu, sub, s) == 0.0);
  CHECK(lc_score(mu - 0.5 * e(3, 1), sub, s, PlumeSign::Positive) == 0.0);
  CHECK(lc_score(mu - 0.5 * e(3, 1), sub, s, PlumeSign::Negative) == doctest::Approx(0.5));
}

TEST_CASE("multi-signature LC returns clamped coefficients and their maximum") {
  std::mt19937_64 rng(14);
  const Eigen::MatrixXd b = random_orthonormal(rng, 7, 2);
  const Eigen::MatrixXd s = testutil::gaussian_matrix(rng, 7, 3);
  const Eigen::VectorXd mu = testutil::gaussian_matrix(rng, 7, 1);
  const Eigen::VectorXd x = mu + s * Eigen::Vector3d(0.5, -1.0, 2.0) + b * Eigen::Vector2d(3, 4);
  const SubspaceModel sub(mu, b);
  const Eigen::VectorXd c = lc_coefficients(x, sub, sig(s));
  CHECK(c(0) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(c(1) == 0.0);
  CHECK(c(2) == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(lc_score(x, sub, sig(s)) == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(lc_coefficients(x, sub, sig(s), PlumeSign::Negative)(1) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("scorer objects agree with the free functions") {
  std::mt19937_64 rng(15);
  const Eigen::MatrixXd data = testutil::gaussian_matrix(rng, 6, 50);
  const CovModel cov = fit_cov(data);
  const SubspaceModel sub = fit_pca(data, 2);
  const SignatureSet s = sig(testutil::gaussian_matrix(rng, 6, 1));
  const NmfScorer nmf(cov, s);
  const ProjectionScorer proj(sub, s);
  for (Eigen::Index j = 0; j < 10; ++j) {
    CHECK(nmf(data.col(j)) == nmf_score(data.col(j), cov, s));
    CHECK(proj.nss(data.col(j)) == nss_score(data.col(j), sub, s));
    CHECK(proj.lc(data.col(j), PlumeSign::Negative) == lc_score(data.col(j), sub, s, PlumeSign::Negative));
  }
}

TEST_CASE("detector names parse") {
  CHECK(parse_detector_kind("nmf") == DetectorKind::NMF);
  CHECK(parse_detector_kind("nss") == DetectorKind::NSS);
  CHECK(parse_detector_kind("lc") == DetectorKind::LC);
  CHECK(to_string(DetectorKind::NSS) == "nss");
  CHECK_THROWS(parse_detector_kind("rx"));
}

TEST_CASE("property: NMF bounded and invariant") {
  std::mt19937_64 rng(16);
  std::uniform_real_distribution<double> scale(-5.0, 5.0);
  for (int t = 0; t < 200; ++t) {
    const Eigen::Index p = 4;
    const Eigen::MatrixXd g = testutil::gaussian_matrix(rng, p, p);
    const Eigen::MatrixXd sigma = g * g.transpose() + 0.05 * Eigen::MatrixXd::Identity(p, p);
    const Eigen::VectorXd mu = testutil::gaussian_matrix(rng, p, 1);
    const Eigen::VectorXd s = testutil::gaussian_matrix(rng, p, 1);
    const Eigen::VectorXd xt = testutil::gaussian_matrix(rng, p, 1);
    const CovModel cov = CovModel::from_covariance(mu, sigma, 0.0);
    const double base = nmf_score(mu + xt, cov, sig(s));
    CHECK(base >= 0.0);
    CHECK(base <= 1.0);
    double c = scale(rng);
    if (std::abs(c) < 0.1) c = 0.1;
    CHECK(std::abs(nmf_score(mu + c * xt, cov, sig(s)) - base) < 1e-8);
    CHECK(std::abs(nmf_score(mu + xt, cov, sig(c * s)) - base) < 1e-8);
    Eigen::MatrixXd m = testutil::gaussian_matrix(rng, p, p) + 3.0 * Eigen::MatrixXd::Identity(p, p);
    const CovModel moved = CovModel::from_covariance(m * mu, m * sigma * m.transpose(), 0.0);
    CHECK(std::abs(nmf_score(m * (mu + xt), moved, sig(m * s)) - base) < 1e-8);
  }
}

TEST_CASE("property: NSS at least one and background-shift invariant") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 200; ++t) {
    const Eigen::MatrixXd b = random_orthonormal(rng, 6, 2);
    const Eigen::MatrixXd s = testutil::gaussian_matrix(rng, 6, 1);
    const SubspaceModel sub(testutil::gaussian_matrix(rng, 6, 1), b);
    const Eigen::VectorXd x = testutil::gaussian_matrix(rng, 6, 1);
    const double v = nss_score(x, sub, sig(s));
    CHECK(v >= 1.0);
    const Eigen::VectorXd shifted = x + b * testutil::gaussian_matrix(rng, 2, 1);
    CHECK(std::abs(nss_score(shifted, sub, sig(s)) - v) < 1e-8 * std::max(1.0, v));
  }
}

TEST_CASE("property: LC recovers noiseless abundance") {
  std::mt19937_64 rng(18);
  std::uniform_real_distribution<double> amount(0.0, 3.0);
  for (int t = 0; t < 200; ++t) {
    const Eigen::MatrixXd b = random_orthonormal(rng, 6, 2);
    const Eigen::VectorXd s = testutil::gaussian_matrix(rng, 6, 1);
    const Eigen::VectorXd mu = testutil::gaussian_matrix(rng, 6, 1);
    const double g = amount(rng);
    const Eigen::VectorXd x = mu + g * s + b * testutil::gaussian_matrix(rng, 2, 1);
    CHECK(std::abs(lc_score(x, SubspaceModel(mu, b), sig(s)) - g) < 1e-8);
  }
}
