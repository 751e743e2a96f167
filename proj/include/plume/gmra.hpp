#pragma once

// Multiscale density model for anomaly detection: a binary 2-means tree
// over training spectra with local PCA planes per node (scaling bases) and
// parent-to-child wavelet pieces, product KDEs over scaling coefficients
// plus a residual-norm KDE per node, and a validation-selected scale.

#include "plume/cube_io.hpp"
#include "plume/numerics.hpp"

#include <cstdint>
#include <filesystem>
#include <limits>
#include <vector>

namespace plume {

struct GmraNode {
  static constexpr std::size_t none = std::numeric_limits<std::size_t>::max();

  std::size_t depth = 0;
  std::size_t parent = none;
  std::vector<std::size_t> children;
  Eigen::VectorXd center;
  Eigen::MatrixXd basis;         // scaling basis Phi (p x d)
  Eigen::VectorXd translation;   // wavelet translation w (zero at the root)
  Eigen::MatrixXd wavelet_basis; // Psi (p x d'), empty at the root
  std::vector<std::size_t> members;  // training column indices, ascending

  bool leaf() const { return children.empty(); }
  std::size_t dimension() const { return static_cast<std::size_t>(basis.cols()); }
};

struct GmraBuildConfig {
  std::size_t min_leaf = 12;
  double dim_rule = 0.75;
  std::size_t max_dim = 10;
  std::uint64_t seed = 42;
  int kmeans_iter = 100;

  void validate() const;
};

struct GmraCoefficients {
  std::size_t node = 0;
  Eigen::VectorXd coefficients;
  double residual = 0.0;
};

class GmraTree {
 public:
  GmraTree() = default;
  explicit GmraTree(std::vector<GmraNode> nodes);

  const std::vector<GmraNode>& nodes() const { return nodes_; }
  const GmraNode& node(std::size_t id) const { return nodes_[id]; }
  std::size_t bands() const { return static_cast<std::size_t>(nodes_.front().center.size()); }
  // Deepest populated scale; scales run 0..max_scale().
  std::size_t max_scale() const { return max_scale_; }

  // Nodes at depth j plus leaves from shallower depths, ascending ids.
  std::vector<std::size_t> scale_nodes(std::size_t j) const;
  // Node reached by descending to the nearest child center, stopping at
  // depth j or a leaf.
  std::size_t route(const Eigen::Ref<const Eigen::VectorXd>& x, std::size_t j) const;
  GmraCoefficients transform(const Eigen::Ref<const Eigen::VectorXd>& x, std::size_t j) const;
  GmraCoefficients project(const Eigen::Ref<const Eigen::VectorXd>& x, std::size_t node) const;

 private:
  std::vector<GmraNode> nodes_;
  std::size_t max_scale_ = 0;
};

GmraTree build_gmra(const Eigen::MatrixXd& training, const GmraBuildConfig& config);

// Mean of ||x - c - Phi Phi^T (x - c)||^2 over training points, each taken at
// its member node of scale j.
double reconstruction_error(const GmraTree& tree, const Eigen::MatrixXd& training, std::size_t j);

struct NodeDensity {
  double weight = 0.0;
  std::vector<Kde1D> coordinates;
  Kde1D residual;
};

class GmraDensityModel {
 public:
  GmraDensityModel() = default;
  GmraDensityModel(GmraTree tree, std::size_t scale, std::vector<NodeDensity> densities,
                   std::vector<double> validation_loglik, std::vector<double> training_scores);

  const GmraTree& tree() const { return tree_; }
  std::size_t selected_scale() const { return scale_; }
  const std::vector<std::size_t>& scale_nodes() const { return scale_nodes_; }
  // Indexed by node id; only nodes of the selected scale are populated.
  const NodeDensity& density(std::size_t node) const { return densities_[node]; }
  const std::vector<NodeDensity>& densities() const { return densities_; }
  // Mean validation log-likelihood per scale (NaN for skipped scales).
  const std::vector<double>& validation_loglik() const { return validation_loglik_; }
  // log_likelihood of the training points, ascending.
  const std::vector<double>& training_scores() const { return training_scores_; }

 private:
  GmraTree tree_;
  std::size_t scale_ = 0;
  std::vector<std::size_t> scale_nodes_;
  std::vector<NodeDensity> densities_;
  std::vector<double> validation_loglik_;
  std::vector<double> training_scores_;
};

inline constexpr double kLogLikelihoodFloor = -1e6;

// Log-likelihood of x under the per-node densities of scale j.
double scale_log_likelihood(const Eigen::Ref<const Eigen::VectorXd>& x, const GmraTree& tree,
                            const std::vector<NodeDensity>& densities, std::size_t j);

GmraDensityModel fit_density(const GmraTree& tree, const Eigen::MatrixXd& training,
                             const Eigen::MatrixXd& validation);

struct GmraFitConfig {
  GmraBuildConfig build;
  double validation_fraction = 0.1;
};

// Seeded hold-out split, tree build and density fit in one call.
GmraDensityModel fit_gmra_model(const Eigen::MatrixXd& spectra, const GmraFitConfig& config);

double log_likelihood(const Eigen::Ref<const Eigen::VectorXd>& x, const GmraDensityModel& model);

// Monte Carlo sample set drawn once from the model; probabilities for many
// query points and radii reuse it.
class GmraSampler {
 public:
  GmraSampler(const GmraDensityModel& model, std::size_t samples, std::uint64_t seed);
  double ball_probability(const Eigen::Ref<const Eigen::VectorXd>& x, double radius) const;
  const Eigen::MatrixXd& samples() const { return samples_; }

 private:
  Eigen::MatrixXd samples_;
};

double ball_probability(const Eigen::Ref<const Eigen::VectorXd>& x, double radius, const GmraDensityModel& model,
                        std::size_t samples, std::uint64_t seed);

struct AnomalyConfig {
  enum class Rule { LogLikelihoodCutoff, TrainingQuantile, BallProbability };
  Rule rule = Rule::TrainingQuantile;
  double loglik_cutoff = 0.0;
  double eta = 0.01;              // training-score quantile
  double radius = 0.0;            // ball rule
  std::size_t mc_samples = 1000;  // ball rule
  double probability_cutoff = 0.01;  // ball rule
  std::uint64_t seed = 42;

  void validate() const;
};

struct AnomalyResult {
  ScoreMap scores;  // log-likelihood, or ball probability under the ball rule
  PlumeMask mask;   // score < cutoff
  double cutoff = 0.0;
};

AnomalyResult detect_anomalies(const HyperCube& frame, const GmraDensityModel& model, const AnomalyConfig& config,
                               unsigned threads = 1);

// Writes `<base>.gmra.json` (manifest and node table) and `<base>.gmra.bin`
// (little-endian float64 payload).
void save_gmra(const GmraDensityModel& model, const std::filesystem::path& base);
GmraDensityModel load_gmra(const std::filesystem::path& base);

}  // namespace plume
