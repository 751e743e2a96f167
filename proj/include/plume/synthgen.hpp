#pragma once

// Seeded synthetic scenes: Gaussian regions, scaled-subspace regions,
// Poisson-spiked background, two-plume scenes and a multi-frame movie for
// anomaly detection, all built on bundled analytic reference spectra.

#include "plume/cube_io.hpp"
#include "plume/mixture.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace plume {

struct ReferenceSpectra {
  std::vector<double> wavenumbers;
  Eigen::MatrixXd means;  // p x 3: sky, mountain, ground
  SignatureSet signatures;  // s1, s2
};

// Sky < mountain < ground radiance at every band, max(ground) = 1. The two
// signatures are absorption bands normalized to unit peak times `amplitude`.
ReferenceSpectra reference_spectra(std::size_t bands = 68, double amplitude = 2.0);

struct Scene {
  Eigen::MatrixXd spectra;  // p x count, grouped by label
  std::vector<int> labels;
  std::vector<std::string> label_names;
  std::vector<int> plume_labels;
  std::vector<double> wavenumbers;
  SignatureSet signatures;
  // Generating parameters per background region (columns): means and
  // per-band noise standard deviations.
  Eigen::MatrixXd true_means;
  Eigen::MatrixXd true_sigmas;
};

struct SceneSpec {
  ReferenceSpectra reference = reference_spectra();
  std::vector<std::size_t> counts;  // per label; empty selects the default counts
  double noise_low = 0.002;   // per-band sigma bounds, multiples of max(ground)
  double noise_high = 0.008;
  double g_mean = -0.01;
  double g_std = 0.001;
  double c_std = 0.01;        // subspace scene scale factor
  double eps_scale = 0.005;   // subspace scene sigma_eps spread, times max(ground)
  double poisson_rate = 0.005;
};

Scene gen_gaussian_scene(const SceneSpec& spec, std::uint64_t seed);
Scene gen_subspace_scene(const SceneSpec& spec, std::uint64_t seed);
Scene gen_poisson_scene(const SceneSpec& spec, std::uint64_t seed);
Scene gen_two_plume_scene(const SceneSpec& spec, std::uint64_t seed);

// Experiment names: gauss, subspace, poisson, twoplume.
Scene gen_scene(const std::string& experiment, const SceneSpec& spec, std::uint64_t seed);
bool is_experiment(const std::string& name);

// Background models built from a scene's generating parameters instead of
// fitted ones. Gaussian components use the true means and diagonal
// covariances with a percentile ridge; subspace components are the lines
// through the origin spanned by each region mean. The single-model variants
// average the region means (and covariances).
GaussianMixture true_gaussian_mixture(const Scene& scene, double delta_percentile = 50.0);
GaussianMixture true_single_gaussian(const Scene& scene, double delta_percentile = 50.0);
SubspaceMixture true_subspace_mixture(const Scene& scene);
SubspaceMixture true_single_subspace(const Scene& scene);

struct PackedScene {
  HyperCube cube;
  PlumeMask mask;
  std::vector<int> labels;  // row-major, aligned with the cube
};

// Row-major reshape; cols = 0 picks the largest divisor of the count that is
// at most its square root.
PackedScene pack_scene(const Scene& scene, std::size_t cols = 0);

struct MovieSpec {
  std::size_t frames = 3;
  std::size_t rows = 128;
  std::size_t cols = 320;
  std::size_t bands = 120;
  std::size_t clean_frames = 1;  // leading frames without plume
  double noise = 0.002;
  double temperature_jitter = 3.0;
  double c_std = 0.01;
  double plume_g = -0.04;
  double plume_g_std = 0.005;
  double plume_radius = 18.0;  // pixels
};

struct Movie {
  std::vector<HyperCube> frames;
  std::vector<PlumeMask> masks;
  SignatureSet signatures;
};

Movie gen_movie(const MovieSpec& spec, std::uint64_t seed);

}  // namespace plume
