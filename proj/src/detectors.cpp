#include "plume/detectors.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace plume {

std::string_view to_string(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::NMF: return "nmf";
    case DetectorKind::NSS: return "nss";
    case DetectorKind::LC: return "lc";
  }
  return "?";
}

DetectorKind parse_detector_kind(std::string_view name) {
  if (name == "nmf" || name == "ace") return DetectorKind::NMF;
  if (name == "nss") return DetectorKind::NSS;
  if (name == "lc") return DetectorKind::LC;
  throw std::invalid_argument("unknown detector '" + std::string(name) + "'");
}

NmfScorer::NmfScorer(const CovModel& cov, const SignatureSet& signatures)
    : mean_(cov.mean()), precision_(cov.precision()) {
  if (signatures.bands() != cov.bands()) throw std::invalid_argument("signature/model band count mismatch");
  const Eigen::MatrixXd& s = signatures.matrix();
  whitened_sig_ = cov.precision() * s;
  const Eigen::MatrixXd gram = s.transpose() * whitened_sig_;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (gram + gram.transpose()));
  const double hi = eig.eigenvalues().maxCoeff();
  const double lo = eig.eigenvalues().minCoeff();
  if (!(hi > 0.0) || lo <= 1e-12 * hi)
    throw std::invalid_argument("S^T Sigma^-1 S is singular: signatures are collinear");
  gram_inv_ = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  precision_trace_ = cov.precision().trace();
}

double NmfScorer::operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const Eigen::VectorXd centered = x - mean_;
  const double quad = centered.dot(precision_ * centered);
  if (quad <= 1e-12 * precision_trace_ * centered.squaredNorm()) return 0.0;
  const Eigen::VectorXd proj = whitened_sig_.transpose() * centered;
  double score = 0.0;
  if (proj.size() == 1) {
    score = proj(0) * proj(0) * gram_inv_(0, 0) / quad;
  } else {
    score = proj.dot(gram_inv_ * proj) / quad;
  }
  return std::clamp(score, 0.0, 1.0);
}

ProjectionScorer::ProjectionScorer(const SubspaceModel& subspace, const SignatureSet& signatures)
    : mean_(subspace.mean()),
      background_basis_(subspace.basis()),
      plumes_(static_cast<Eigen::Index>(signatures.count())) {
  if (signatures.bands() != subspace.bands()) throw std::invalid_argument("signature/model band count mismatch");
  const Eigen::Index p = static_cast<Eigen::Index>(subspace.bands());
  const Eigen::Index d = static_cast<Eigen::Index>(subspace.dimension());
  Eigen::MatrixXd a(p, plumes_ + d);
  a << signatures.matrix(), subspace.basis();
  if (a.cols() > p) throw std::invalid_argument("[S B] has more columns than bands");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < a.cols()) throw std::invalid_argument("[S B] is rank deficient");
  target_background_basis_ = qr.householderQ() * Eigen::MatrixXd::Identity(p, a.cols());
  // (A^T A)^-1 A^T through the QR factors.
  const Eigen::MatrixXd pinv = qr.solve(Eigen::MatrixXd::Identity(p, p));
  coefficient_map_ = pinv.topRows(plumes_);
}

double ProjectionScorer::nss(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const Eigen::VectorXd centered = x - mean_;
  const Eigen::MatrixXd& b = background_basis_;
  Eigen::VectorXd background_residual = centered;
  if (b.cols() > 0) background_residual -= b * (b.transpose() * centered);
  const Eigen::VectorXd target_residual =
      centered - target_background_basis_ * (target_background_basis_.transpose() * centered);
  const double norm2 = centered.squaredNorm();
  const double eps = norm2 > 0.0 ? 1e-12 * norm2 : 1e-300;
  return (background_residual.squaredNorm() + eps) / (target_residual.squaredNorm() + eps);
}

Eigen::VectorXd ProjectionScorer::lc_coefficients(const Eigen::Ref<const Eigen::VectorXd>& x,
                                                  PlumeSign sign) const {
  const Eigen::VectorXd beta = coefficient_map_ * (x - mean_);
  const double s = static_cast<double>(static_cast<int>(sign));
  return (s * beta).cwiseMax(0.0);
}

double ProjectionScorer::lc(const Eigen::Ref<const Eigen::VectorXd>& x, PlumeSign sign) const {
  return lc_coefficients(x, sign).maxCoeff();
}

double nmf_score(const Eigen::Ref<const Eigen::VectorXd>& x, const CovModel& cov, const SignatureSet& signatures) {
  if (static_cast<std::size_t>(x.size()) != cov.bands()) throw std::invalid_argument("spectrum length mismatch");
  return NmfScorer(cov, signatures)(x);
}

double nss_score(const Eigen::Ref<const Eigen::VectorXd>& x, const SubspaceModel& subspace,
                 const SignatureSet& signatures) {
  if (static_cast<std::size_t>(x.size()) != subspace.bands()) throw std::invalid_argument("spectrum length mismatch");
  return ProjectionScorer(subspace, signatures).nss(x);
}

Eigen::VectorXd lc_coefficients(const Eigen::Ref<const Eigen::VectorXd>& x, const SubspaceModel& subspace,
                                const SignatureSet& signatures, PlumeSign sign) {
  if (static_cast<std::size_t>(x.size()) != subspace.bands()) throw std::invalid_argument("spectrum length mismatch");
  return ProjectionScorer(subspace, signatures).lc_coefficients(x, sign);
}

double lc_score(const Eigen::Ref<const Eigen::VectorXd>& x, const SubspaceModel& subspace,
                const SignatureSet& signatures, PlumeSign sign) {
  return lc_coefficients(x, subspace, signatures, sign).maxCoeff();
}

}  // namespace plume
