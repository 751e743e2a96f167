#pragma once

// Per-spectrum plume detection statistics for a known signature set:
// normalized matched filter (NMF / ACE), subspace GLRT (NSS) and the clamped
// least-squares linear coefficient (LC).

#include "plume/cube_io.hpp"
#include "plume/numerics.hpp"

#include <optional>
#include <string_view>

namespace plume {

enum class DetectorKind { NMF, NSS, LC };

std::string_view to_string(DetectorKind kind);
DetectorKind parse_detector_kind(std::string_view name);

// Abundance sign for LC: +1 scores positive coefficients, -1 negative ones
// (emissive vs absorptive plume convention).
enum class PlumeSign { Positive = 1, Negative = -1 };

double nmf_score(const Eigen::Ref<const Eigen::VectorXd>& x, const CovModel& cov, const SignatureSet& signatures);

double nss_score(const Eigen::Ref<const Eigen::VectorXd>& x, const SubspaceModel& subspace,
                 const SignatureSet& signatures);

// Clamped per-signature coefficients max(sign * beta_i, 0), i < N.
Eigen::VectorXd lc_coefficients(const Eigen::Ref<const Eigen::VectorXd>& x, const SubspaceModel& subspace,
                                const SignatureSet& signatures, PlumeSign sign = PlumeSign::Positive);
// Scalar LC score: the single clamped coefficient, or the maximum over plumes.
double lc_score(const Eigen::Ref<const Eigen::VectorXd>& x, const SubspaceModel& subspace,
                const SignatureSet& signatures, PlumeSign sign = PlumeSign::Positive);

// Per-model precomputation, reused across all pixels scored against the same
// background component. Scores are identical to the free functions above.
class NmfScorer {
 public:
  NmfScorer(const CovModel& cov, const SignatureSet& signatures);
  double operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd precision_;
  Eigen::MatrixXd whitened_sig_;  // Sigma^-1 S  (p x N)
  Eigen::MatrixXd gram_inv_;      // (S^T Sigma^-1 S)^-1
  double precision_trace_;
};

class ProjectionScorer {
 public:
  ProjectionScorer(const SubspaceModel& subspace, const SignatureSet& signatures);
  double nss(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::VectorXd lc_coefficients(const Eigen::Ref<const Eigen::VectorXd>& x, PlumeSign sign) const;
  double lc(const Eigen::Ref<const Eigen::VectorXd>& x, PlumeSign sign) const;

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd background_basis_;
  Eigen::Index plumes_;
  Eigen::MatrixXd target_background_basis_;  // orthonormal basis of span([S B])
  Eigen::MatrixXd coefficient_map_;          // (A^T A)^-1 A^T, first N rows
};

}  // namespace plume
