#include "plume/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace plume {

namespace {

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw std::invalid_argument(std::string(what) + " contains non-finite values");
}

// Eigen's solver returns ascending order; flip to descending and clamp the
// round-off negatives of a PSD matrix to zero.
void eigen_descending(const Eigen::MatrixXd& sym, Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  values = solver.eigenvalues().reverse().cwiseMax(0.0);
  vectors = solver.eigenvectors().rowwise().reverse();
}

// Top `dimension` principal directions of the centered columns of `centered`.
Eigen::MatrixXd principal_directions(const Eigen::MatrixXd& centered, std::size_t dimension,
                                     Eigen::VectorXd* variances) {
  const Eigen::Index p = centered.rows();
  const Eigen::Index n = centered.cols();
  const auto d = static_cast<Eigen::Index>(dimension);
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  if (n >= p || d > n) {
    eigen_descending(centered * centered.transpose() / static_cast<double>(std::max<Eigen::Index>(n - 1, 1)),
                     values, vectors);
    if (variances) *variances = values.head(d);
    return vectors.leftCols(d);
  }
  // Fewer points than bands: work on the n x n Gram matrix.
  Eigen::VectorXd gram_values;
  Eigen::MatrixXd gram_vectors;
  eigen_descending(centered.transpose() * centered, gram_values, gram_vectors);
  Eigen::MatrixXd basis(p, d);
  Eigen::Index filled = 0;
  const double tol = 1e-12 * std::max(gram_values(0), 1e-300);
  for (Eigen::Index k = 0; k < d && gram_values(k) > tol; ++k) {
    basis.col(k) = centered * gram_vectors.col(k) / std::sqrt(gram_values(k));
    ++filled;
  }
  if (filled < d) {
    // Complete with directions orthogonal to what we have.
    Eigen::MatrixXd full;
    eigen_descending(centered * centered.transpose(), values, full);
    for (Eigen::Index k = filled; k < d; ++k) basis.col(k) = full.col(k);
  }
  if (variances) {
    *variances = gram_values.head(d).cwiseMax(0.0) / static_cast<double>(std::max<Eigen::Index>(n - 1, 1));
  }
  // Re-orthonormalize to remove accumulated round-off.
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(p, d);
  for (Eigen::Index k = 0; k < d; ++k)
    if (q.col(k).dot(basis.col(k)) < 0) q.col(k) = -q.col(k);
  return q;
}

}  // namespace

CovModel CovModel::from_eigensystem(Eigen::VectorXd mean, Eigen::VectorXd eigenvalues,
                                    Eigen::MatrixXd eigenvectors, double ridge) {
  const Eigen::Index p = mean.size();
  if (eigenvalues.size() != p || eigenvectors.rows() != p || eigenvectors.cols() != p)
    throw std::invalid_argument("eigensystem dimensions do not match the mean");
  if (!(ridge >= 0.0)) throw std::invalid_argument("ridge must be nonnegative");
  require_finite(mean, "mean");
  require_finite(eigenvalues, "eigenvalues");
  require_finite(eigenvectors, "eigenvectors");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return eigenvalues(a) > eigenvalues(b); });

  CovModel m;
  m.mean_ = std::move(mean);
  m.eigenvalues_.resize(p);
  m.eigenvectors_.resize(p, p);
  for (Eigen::Index k = 0; k < p; ++k) {
    m.eigenvalues_(k) = std::max(eigenvalues(order[static_cast<std::size_t>(k)]), 0.0);
    m.eigenvectors_.col(k) = eigenvectors.col(order[static_cast<std::size_t>(k)]);
  }
  m.ridge_ = ridge;

  const Eigen::ArrayXd shifted = m.eigenvalues_.array() + ridge;
  if ((shifted <= 0.0).any())
    throw std::invalid_argument("covariance is singular and ridge is zero; precision undefined");
  m.precision_ = m.eigenvectors_ * shifted.inverse().matrix().asDiagonal() * m.eigenvectors_.transpose();
  m.precision_ = 0.5 * (m.precision_ + m.precision_.transpose());
  m.log_det_ = shifted.log().sum();
  return m;
}

CovModel CovModel::from_covariance(Eigen::VectorXd mean, const Eigen::MatrixXd& covariance, double ridge) {
  require_finite(covariance, "covariance");
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  eigen_descending(0.5 * (covariance + covariance.transpose()), values, vectors);
  return from_eigensystem(std::move(mean), std::move(values), std::move(vectors), ridge);
}

SubspaceModel::SubspaceModel(Eigen::VectorXd mean, Eigen::MatrixXd basis)
    : mean_(std::move(mean)), basis_(std::move(basis)) {
  if (basis_.rows() != mean_.size()) throw std::invalid_argument("basis rows must equal the band count");
  if (basis_.cols() > basis_.rows()) throw std::invalid_argument("subspace dimension exceeds band count");
  require_finite(mean_, "subspace mean");
  require_finite(basis_, "subspace basis");
  if (basis_.cols() > 0) {
    const Eigen::MatrixXd gram = basis_.transpose() * basis_;
    const double err = (gram - Eigen::MatrixXd::Identity(basis_.cols(), basis_.cols())).cwiseAbs().maxCoeff();
    if (err > 1e-10) throw std::invalid_argument("subspace basis is not orthonormal");
  }
}

double SubspaceModel::residual_sq(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const Eigen::VectorXd centered = x - mean_;
  if (basis_.cols() == 0) return centered.squaredNorm();
  const Eigen::VectorXd coeffs = basis_.transpose() * centered;
  return (centered - basis_ * coeffs).squaredNorm();
}

Kde1D::Kde1D(std::vector<double> samples, double bandwidth)
    : samples_(std::move(samples)), bandwidth_(bandwidth) {
  if (samples_.empty()) throw std::invalid_argument("KDE needs at least one sample");
  if (!(bandwidth_ > 0.0) || !std::isfinite(bandwidth_)) throw std::invalid_argument("KDE bandwidth must be positive");
  std::sort(samples_.begin(), samples_.end());
}

Eigen::VectorXd sample_mean(const Eigen::MatrixXd& spectra) { return spectra.rowwise().mean(); }

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& spectra, const Eigen::VectorXd& mean) {
  const Eigen::MatrixXd centered = spectra.colwise() - mean;
  const double denom = static_cast<double>(std::max<Eigen::Index>(spectra.cols() - 1, 1));
  Eigen::MatrixXd cov = centered * centered.transpose() / denom;
  return 0.5 * (cov + cov.transpose());
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty set");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile level must lie in [0, 1]");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, q);
}

CovModel fit_cov(const Eigen::MatrixXd& spectra, double delta_percentile) {
  if (spectra.cols() < 2) throw std::invalid_argument("fit_cov needs at least 2 spectra");
  if (!(delta_percentile >= 0.0 && delta_percentile <= 100.0))
    throw std::invalid_argument("delta percentile must lie in [0, 100]");
  require_finite(spectra, "spectra");
  Eigen::VectorXd mean = sample_mean(spectra);
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
  eigen_descending(sample_covariance(spectra, mean), values, vectors);
  const double ridge =
      quantile(std::vector<double>(values.data(), values.data() + values.size()), delta_percentile / 100.0);
  return CovModel::from_eigensystem(std::move(mean), std::move(values), std::move(vectors), ridge);
}

SubspaceModel fit_pca(const Eigen::MatrixXd& spectra, std::size_t dimension) {
  require_finite(spectra, "spectra");
  const auto p = static_cast<std::size_t>(spectra.rows());
  const auto count = static_cast<std::size_t>(spectra.cols());
  if (count == 0) throw std::invalid_argument("fit_pca needs at least one spectrum");
  if (dimension > std::min(p, count - 1))
    throw std::invalid_argument("PCA dimension " + std::to_string(dimension) + " exceeds min(p, count-1)");
  Eigen::VectorXd mean = sample_mean(spectra);
  if (dimension == 0) return SubspaceModel(std::move(mean), Eigen::MatrixXd(spectra.rows(), 0));
  const Eigen::MatrixXd centered = spectra.colwise() - mean;
  if (centered.cwiseAbs().maxCoeff() == 0.0)
    throw std::invalid_argument("degenerate input: all spectra identical");
  return SubspaceModel(std::move(mean), principal_directions(centered, dimension, nullptr));
}

SubspaceModel fit_pca_completed(const Eigen::MatrixXd& spectra, std::size_t dimension) {
  if (spectra.cols() == 0) throw std::invalid_argument("fit_pca needs at least one spectrum");
  if (dimension > static_cast<std::size_t>(spectra.rows()))
    throw std::invalid_argument("PCA dimension exceeds band count");
  Eigen::VectorXd mean = sample_mean(spectra);
  if (dimension == 0) return SubspaceModel(std::move(mean), Eigen::MatrixXd(spectra.rows(), 0));
  const Eigen::MatrixXd centered = spectra.colwise() - mean;
  return SubspaceModel(std::move(mean), principal_directions(centered, dimension, nullptr));
}

PcaDecomposition principal_components(const Eigen::MatrixXd& spectra, std::size_t max_dim) {
  if (spectra.cols() == 0) throw std::invalid_argument("PCA needs at least one spectrum");
  if (max_dim > static_cast<std::size_t>(spectra.rows()))
    throw std::invalid_argument("PCA dimension exceeds band count");
  PcaDecomposition out;
  out.mean = sample_mean(spectra);
  const Eigen::MatrixXd centered = spectra.colwise() - out.mean;
  out.total_variance =
      centered.squaredNorm() / static_cast<double>(std::max<Eigen::Index>(spectra.cols() - 1, 1));
  if (max_dim == 0) {
    out.basis.resize(spectra.rows(), 0);
    out.variances.resize(0);
    return out;
  }
  out.basis = principal_directions(centered, max_dim, &out.variances);
  return out;
}

Eigen::VectorXd solve_ls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  require_finite(a, "design matrix");
  require_finite(b, "response");
  if (a.rows() != b.size()) throw std::invalid_argument("solve_ls: row count mismatch");
  if (a.cols() > a.rows()) throw std::invalid_argument("solve_ls: more unknowns than equations");
  if (a.cols() == 0) return Eigen::VectorXd(0);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(a);
  return cod.solve(b);
}

Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& a, double rel_tol) {
  if (a.cols() == 0) return Eigen::MatrixXd(a.rows(), 0);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  const double tol = rel_tol * std::max(s(0), 1e-300);
  Eigen::Index rank = 0;
  while (rank < s.size() && s(rank) > tol) ++rank;
  if (s(0) == 0.0) rank = 0;
  return svd.matrixU().leftCols(rank);
}

PlsrModel fit_plsr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int components) {
  require_finite(x, "predictors");
  require_finite(y, "responses");
  const Eigen::Index q = x.rows();
  const Eigen::Index p = x.cols();
  if (y.size() != q) throw std::invalid_argument("fit_plsr: response length differs from row count");
  if (components < 1 || q <= components)
    throw std::invalid_argument("fit_plsr needs q > l >= 1");

  const Eigen::RowVectorXd x_mean = x.colwise().mean();
  const double y_mean = y.mean();
  Eigen::MatrixXd xr = x.rowwise() - x_mean;
  Eigen::VectorXd yr = y.array() - y_mean;

  PlsrModel model;
  model.coefficients = Eigen::VectorXd::Zero(p);
  model.intercept = y_mean;
  model.components = 0;

  const double y_scale = yr.norm();
  if (y_scale == 0.0) return model;  // constant response

  const double x_scale = xr.norm();
  const double w0_scale = (xr.transpose() * yr).norm();
  Eigen::MatrixXd weights(p, components);
  Eigen::MatrixXd loadings(p, components);
  Eigen::VectorXd y_loadings(components);

  int extracted = 0;
  for (int a = 0; a < components; ++a) {
    if (xr.norm() <= 1e-10 * x_scale)
      throw std::invalid_argument("fit_plsr: component " + std::to_string(a + 1) +
                                  " exceeds the predictor rank (deflated predictors vanish)");
    Eigen::VectorXd w = xr.transpose() * yr;
    const double w_norm = w.norm();
    // Response already explained by earlier components: further factors
    // carry no covariance and are not extracted.
    if (w_norm <= 1e-12 * w0_scale) break;
    w /= w_norm;
    const Eigen::VectorXd t = xr * w;
    const double tt = t.squaredNorm();
    if (tt == 0.0)
      throw std::invalid_argument("fit_plsr: component " + std::to_string(a + 1) + " has a zero score vector");
    const Eigen::VectorXd load = xr.transpose() * t / tt;
    const double c = yr.dot(t) / tt;
    xr -= t * load.transpose();
    yr -= c * t;
    weights.col(a) = w;
    loadings.col(a) = load;
    y_loadings(a) = c;
    ++extracted;
  }

  if (extracted > 0) {
    const Eigen::MatrixXd w = weights.leftCols(extracted);
    const Eigen::MatrixXd pw = loadings.leftCols(extracted).transpose() * w;
    model.coefficients = w * pw.lu().solve(y_loadings.head(extracted));
  }
  if (!model.coefficients.allFinite()) throw std::runtime_error("fit_plsr produced non-finite coefficients");
  model.intercept = y_mean - x_mean.dot(model.coefficients);
  model.components = extracted;
  return model;
}

double predict_plsr(const PlsrModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != model.coefficients.size()) throw std::invalid_argument("predict_plsr: dimension mismatch");
  return model.coefficients.dot(x) + model.intercept;
}

Kde1D fit_kde(std::span<const double> samples) {
  if (samples.empty()) throw std::invalid_argument("fit_kde needs at least one sample");
  const double n = static_cast<double>(samples.size());
  double sigma = 0.0;
  if (samples.size() > 1) {
    const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : samples) ss += (v - mean) * (v - mean);
    sigma = std::sqrt(ss / (n - 1.0));
  }
  const double silverman = 1.06 * sigma * std::pow(n, -0.2);
  const double h = std::max(silverman, 1e-6 * (1.0 + std::abs(sigma)));
  return Kde1D(std::vector<double>(samples.begin(), samples.end()), h);
}

double eval_kde(const Kde1D& model, double t) {
  const double h = model.bandwidth();
  double sum = 0.0;
  for (double s : model.samples()) {
    const double z = (t - s) / h;
    sum += std::exp(-0.5 * z * z);
  }
  return sum / (static_cast<double>(model.samples().size()) * h * std::sqrt(2.0 * std::numbers::pi));
}

double log_eval_kde(const Kde1D& model, double t) {
  // Terms more than exp(-kCutoff) below the largest one are dropped; with
  // at most ~1e7 samples that changes the sum by < 1e-19 relative.
  constexpr double kCutoff = 60.0;
  const auto& s = model.samples();
  const double h = model.bandwidth();
  const auto it = std::lower_bound(s.begin(), s.end(), t);
  double dmin = std::numeric_limits<double>::infinity();
  if (it != s.end()) dmin = std::min(dmin, *it - t);
  if (it != s.begin()) dmin = std::min(dmin, t - *(it - 1));
  const double zmin2 = (dmin / h) * (dmin / h);

  const double reach = h * std::sqrt(2.0 * kCutoff + zmin2);
  const auto lo = std::lower_bound(s.begin(), it, t - reach);
  const auto hi = std::upper_bound(it, s.end(), t + reach);
  const Eigen::Map<const Eigen::ArrayXd> window(&*lo, static_cast<Eigen::Index>(hi - lo));
  const double sum = (-0.5 * (((window - t) / h).square() - zmin2)).exp().sum();
  return std::log(sum) - 0.5 * zmin2 - std::log(static_cast<double>(s.size()) * h) -
         0.5 * std::log(2.0 * std::numbers::pi);
}

}  // namespace plume
