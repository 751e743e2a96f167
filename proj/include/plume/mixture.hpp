#pragma once

// K-component background mixtures (Gaussian or affine-subspace), hard
// assignment of spectra to components, and mixture detectors that delegate
// to the single-model statistic of the assigned component.

#include "plume/detectors.hpp"
#include "plume/numerics.hpp"

#include <json.hpp>

#include <cstdint>
#include <variant>
#include <vector>

namespace plume {

struct GaussianComponent {
  double weight = 1.0;
  CovModel model;
};

struct SubspaceComponent {
  double weight = 1.0;
  SubspaceModel model;
};

class GaussianMixture {
 public:
  GaussianMixture() = default;
  explicit GaussianMixture(std::vector<GaussianComponent> components);

  std::size_t size() const { return components_.size(); }
  std::size_t bands() const { return components_.front().model.bands(); }
  const GaussianComponent& operator[](std::size_t j) const { return components_[j]; }
  const std::vector<GaussianComponent>& components() const { return components_; }

 private:
  std::vector<GaussianComponent> components_;
};

class SubspaceMixture {
 public:
  SubspaceMixture() = default;
  explicit SubspaceMixture(std::vector<SubspaceComponent> components);

  std::size_t size() const { return components_.size(); }
  std::size_t bands() const { return components_.front().model.bands(); }
  std::size_t dimension() const { return components_.front().model.dimension(); }
  const SubspaceComponent& operator[](std::size_t j) const { return components_[j]; }
  const std::vector<SubspaceComponent>& components() const { return components_; }

 private:
  std::vector<SubspaceComponent> components_;
};

using BackgroundModel = std::variant<GaussianMixture, SubspaceMixture>;

enum class ModelKind { Gaussian, Subspace };
ModelKind parse_model_kind(std::string_view name);
std::string_view to_string(ModelKind kind);

struct SubspaceFitTrace {
  int iterations = 0;
  // Total squared residual after each parameter refit; non-increasing.
  std::vector<double> objective;
};

// Seeded K-means++ initialization followed by Lloyd iterations; the
// covariance of each final cluster is fit with fit_cov.
GaussianMixture fit_gaussian_mixture(const Eigen::MatrixXd& spectra, std::size_t components, std::uint64_t seed,
                                     int max_iter = 100, double delta_percentile = 50.0);

// K-subspaces: K-means++ partition, then alternate per-cluster PCA and
// reassignment by orthogonal residual.
SubspaceMixture fit_subspace_mixture(const Eigen::MatrixXd& spectra, std::size_t components, std::size_t dimension,
                                     std::uint64_t seed, int max_iter = 100, SubspaceFitTrace* trace = nullptr);

// Plain K-means labels (used by the fits above and by GMRA splitting).
std::vector<std::size_t> kmeans_labels(const Eigen::MatrixXd& points, std::size_t clusters, std::uint64_t seed,
                                       int max_iter);

std::size_t assign(const Eigen::Ref<const Eigen::VectorXd>& x, const GaussianMixture& model);
std::size_t assign(const Eigen::Ref<const Eigen::VectorXd>& x, const SubspaceMixture& model);
std::size_t assign(const Eigen::Ref<const Eigen::VectorXd>& x, const BackgroundModel& model);

// Precomputed per-component detectors for scoring many spectra against one
// mixture. Construction validates detector/model compatibility.
class MixtureScorer {
 public:
  MixtureScorer(const BackgroundModel& model, const SignatureSet& signatures, DetectorKind kind,
                PlumeSign sign = PlumeSign::Positive);

  std::size_t assign(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  double score(const Eigen::Ref<const Eigen::VectorXd>& x) const;

 private:
  BackgroundModel model_;
  DetectorKind kind_;
  PlumeSign sign_;
  std::vector<NmfScorer> nmf_;
  std::vector<ProjectionScorer> projection_;
};

double mix_score(const Eigen::Ref<const Eigen::VectorXd>& x, const BackgroundModel& model,
                 const SignatureSet& signatures, DetectorKind kind, PlumeSign sign = PlumeSign::Positive);

// Everything needed to refit the same background model on new spectra.
struct ModelSpec {
  ModelKind kind = ModelKind::Gaussian;
  std::size_t components = 3;
  std::size_t dimension = 2;  // subspace models only
  std::uint64_t seed = 42;
  int max_iter = 100;
  double delta_percentile = 50.0;  // Gaussian models only
};

BackgroundModel fit_background(const Eigen::MatrixXd& spectra, const ModelSpec& spec);
// Smallest spectrum count the spec can be fit on: K * (d + 2), d = 0 for
// Gaussian models.
std::size_t minimum_fit_size(const ModelSpec& spec);

struct DetectionSpec {
  DetectorKind detector = DetectorKind::NMF;
  PlumeSign sign = PlumeSign::Positive;
  ModelSpec model;
};

// Scores every column of `spectra`; `threads` = 0 uses all hardware threads.
std::vector<double> score_spectra(const Eigen::MatrixXd& spectra, const MixtureScorer& scorer, unsigned threads = 1);

nlohmann::json to_json(const BackgroundModel& model);
BackgroundModel background_from_json(const nlohmann::json& j);

}  // namespace plume
