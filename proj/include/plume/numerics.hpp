#pragma once

// Dense numerics shared by the detectors: regularized covariance models, PCA
// subspaces, least squares, PLS1 regression and Gaussian KDE.
//
// Spectra sets are passed as p x count matrices (one spectrum per column).

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace plume {

// Mean plus eigensystem of a sample covariance with ridge delta. The
// precision is assembled as sum_k q_k q_k^T / (lambda_k + delta).
class CovModel {
 public:
  CovModel() = default;

  // Eigenvalues are sorted descending (with their vectors) on construction.
  static CovModel from_eigensystem(Eigen::VectorXd mean, Eigen::VectorXd eigenvalues,
                                   Eigen::MatrixXd eigenvectors, double ridge);
  static CovModel from_covariance(Eigen::VectorXd mean, const Eigen::MatrixXd& covariance, double ridge);

  std::size_t bands() const { return static_cast<std::size_t>(mean_.size()); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  const Eigen::MatrixXd& eigenvectors() const { return eigenvectors_; }
  double ridge() const { return ridge_; }
  const Eigen::MatrixXd& precision() const { return precision_; }

  // sum_k log(lambda_k + delta)
  double log_det() const { return log_det_; }

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd eigenvectors_;
  double ridge_ = 0.0;
  Eigen::MatrixXd precision_;
  double log_det_ = 0.0;
};

// Affine subspace: mean plus orthonormal basis (p x d, d may be 0).
class SubspaceModel {
 public:
  SubspaceModel() = default;
  SubspaceModel(Eigen::VectorXd mean, Eigen::MatrixXd basis);

  std::size_t bands() const { return static_cast<std::size_t>(mean_.size()); }
  std::size_t dimension() const { return static_cast<std::size_t>(basis_.cols()); }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& basis() const { return basis_; }

  // ||(I - B B^T)(x - mu)||^2
  double residual_sq(const Eigen::Ref<const Eigen::VectorXd>& x) const;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd basis_;
};

struct PlsrModel {
  Eigen::VectorXd coefficients;
  double intercept = 0.0;
  int components = 0;
};

class Kde1D {
 public:
  Kde1D() = default;
  Kde1D(std::vector<double> samples, double bandwidth);

  const std::vector<double>& samples() const { return samples_; }  // ascending
  double bandwidth() const { return bandwidth_; }

 private:
  std::vector<double> samples_;
  double bandwidth_ = 1.0;
};

Eigen::VectorXd sample_mean(const Eigen::MatrixXd& spectra);
// 1/(count-1) normalization.
Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& spectra, const Eigen::VectorXd& mean);

// Linear-interpolation quantile (position q*(n-1) in the ascending order);
// `q` in [0, 1]. Copies and sorts.
double quantile(std::vector<double> values, double q);
double quantile_sorted(std::span<const double> sorted, double q);

CovModel fit_cov(const Eigen::MatrixXd& spectra, double delta_percentile = 50.0);

SubspaceModel fit_pca(const Eigen::MatrixXd& spectra, std::size_t dimension);

// Like fit_pca but without the rank checks: when fewer than `dimension`
// directions carry variance the basis is completed with null-space
// eigenvectors. Used where clusters can shrink below d+1 members.
SubspaceModel fit_pca_completed(const Eigen::MatrixXd& spectra, std::size_t dimension);

struct PcaDecomposition {
  Eigen::VectorXd mean;
  Eigen::MatrixXd basis;      // p x max_dim, orthonormal
  Eigen::VectorXd variances;  // variance captured by each basis column
  double total_variance = 0.0;
};

// Top `max_dim` principal directions (completed like fit_pca_completed).
PcaDecomposition principal_components(const Eigen::MatrixXd& spectra, std::size_t max_dim);

// Minimum-norm least-squares solution of A beta ~ b.
Eigen::VectorXd solve_ls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b);

// Orthonormal basis for the column space of `a` (rank by relative tolerance).
Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& a, double rel_tol = 1e-10);

// PLS1 via NIPALS. `x` is q x p (one observation per row).
PlsrModel fit_plsr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int components);
double predict_plsr(const PlsrModel& model, const Eigen::Ref<const Eigen::VectorXd>& x);

// Gaussian KDE with Silverman bandwidth 1.06 sigma n^(-1/5), floored at
// 1e-6 (1 + |sigma|).
Kde1D fit_kde(std::span<const double> samples);
double eval_kde(const Kde1D& model, double t);
// log of eval_kde, computed stably so far-field points stay finite.
double log_eval_kde(const Kde1D& model, double t);

}  // namespace plume
