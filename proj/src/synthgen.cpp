#include "plume/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace plume {

namespace {

constexpr double kSecondRadiation = 1.4388;  // cm K
constexpr double kLowWavenumber = 820.0;
constexpr double kHighWavenumber = 1250.0;
constexpr double kRegionTemperature[3] = {240.0, 275.0, 300.0};

double planck(double nu, double temperature) {
  return nu * nu * nu / std::expm1(kSecondRadiation * nu / temperature);
}

double bump(double nu, double center, double width) {
  const double z = (nu - center) / width;
  return std::exp(-0.5 * z * z);
}

// Unnormalized radiance of a region at temperature offset dt. The sky carries
// an emission band that overlaps the first signature.
double region_radiance(double nu, int region, double dt) {
  const double t = kRegionTemperature[region] + dt;
  double v = planck(nu, t);
  if (region == 0) v += 0.6 * planck(1040.0, t) * bump(nu, 1040.0, 25.0);
  if (region == 1) v *= 1.0 - 0.08 * bump(nu, 930.0, 40.0);
  return v;
}

std::vector<double> axis(std::size_t bands) {
  if (bands == 0) throw std::invalid_argument("band count must be positive");
  std::vector<double> out(bands);
  for (std::size_t j = 0; j < bands; ++j)
    out[j] = bands == 1 ? kLowWavenumber
                        : kLowWavenumber + (kHighWavenumber - kLowWavenumber) * static_cast<double>(j) /
                                               static_cast<double>(bands - 1);
  return out;
}

double normalizer(const std::vector<double>& nu) {
  double peak = 0.0;
  for (double v : nu) peak = std::max(peak, region_radiance(v, 2, 0.0));
  return peak;
}

class Draw {
 public:
  explicit Draw(std::uint64_t seed) : rng_(seed) {}
  double normal(double mean, double sd) { return mean + sd * unit_(rng_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
  int poisson(double rate) { return rate > 0.0 ? std::poisson_distribution<int>(rate)(rng_) : 0; }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> unit_{0.0, 1.0};
};

std::vector<std::size_t> resolve_counts(const SceneSpec& spec, std::vector<std::size_t> defaults) {
  if (spec.counts.empty()) return defaults;
  if (spec.counts.size() != defaults.size()) throw std::invalid_argument("scene counts have the wrong length");
  return spec.counts;
}

Scene start_scene(const SceneSpec& spec, const std::vector<std::size_t>& counts, std::vector<std::string> names,
                  std::vector<int> plume_labels) {
  std::size_t total = 0;
  for (auto c : counts) total += c;
  if (total == 0) throw std::invalid_argument("scene has no spectra");
  Scene s;
  s.spectra.resize(spec.reference.means.rows(), static_cast<Eigen::Index>(total));
  s.labels.reserve(total);
  s.label_names = std::move(names);
  s.plume_labels = std::move(plume_labels);
  s.wavenumbers = spec.reference.wavenumbers;
  s.signatures = spec.reference.signatures;
  return s;
}

void push(Scene& s, const Eigen::VectorXd& x, int label) {
  s.spectra.col(static_cast<Eigen::Index>(s.labels.size())) = x;
  s.labels.push_back(label);
}

Eigen::VectorXd gaussian_draw(Draw& draw, const Eigen::VectorXd& mean, const Eigen::VectorXd& sigma) {
  Eigen::VectorXd x(mean.size());
  for (Eigen::Index j = 0; j < mean.size(); ++j) x(j) = draw.normal(mean(j), sigma(j));
  return x;
}

// Per-region diagonal sigmas, each band uniform in [low a, high a].
std::vector<Eigen::VectorXd> region_sigmas(Draw& draw, const SceneSpec& spec, double a) {
  std::vector<Eigen::VectorXd> out;
  for (int r = 0; r < 3; ++r) {
    Eigen::VectorXd sigma(spec.reference.means.rows());
    for (Eigen::Index j = 0; j < sigma.size(); ++j) sigma(j) = draw.uniform(spec.noise_low * a, spec.noise_high * a);
    out.push_back(std::move(sigma));
  }
  return out;
}

void record_truth(Scene& s, const Eigen::MatrixXd& means, const std::vector<Eigen::VectorXd>& sigmas) {
  s.true_means = means;
  s.true_sigmas.resize(means.rows(), static_cast<Eigen::Index>(sigmas.size()));
  for (std::size_t r = 0; r < sigmas.size(); ++r) s.true_sigmas.col(static_cast<Eigen::Index>(r)) = sigmas[r];
}

}  // namespace

ReferenceSpectra reference_spectra(std::size_t bands, double amplitude) {
  ReferenceSpectra ref;
  ref.wavenumbers = axis(bands);
  const double scale = normalizer(ref.wavenumbers);
  const auto p = static_cast<Eigen::Index>(bands);
  ref.means.resize(p, 3);
  Eigen::MatrixXd sig(p, 2);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double nu = ref.wavenumbers[static_cast<std::size_t>(j)];
    for (int r = 0; r < 3; ++r) ref.means(j, r) = region_radiance(nu, r, 0.0) / scale;
    sig(j, 0) = amplitude * bump(nu, 1030.0, 15.0);
    sig(j, 1) = amplitude * bump(nu, 1150.0, 20.0);
  }
  ref.signatures = SignatureSet(std::move(sig), {"s1", "s2"}, ref.wavenumbers);
  return ref;
}

Scene gen_gaussian_scene(const SceneSpec& spec, std::uint64_t seed) {
  const auto counts = resolve_counts(spec, {5000, 5000, 4000, 1000});
  Scene s = start_scene(spec, counts, {"sky", "mountain", "ground", "plume"}, {3});
  Draw draw(seed);
  const Eigen::MatrixXd& mu = spec.reference.means;
  const double a = mu.col(2).maxCoeff();
  const auto sigma = region_sigmas(draw, spec, a);
  record_truth(s, mu, sigma);
  const Eigen::VectorXd sig = spec.reference.signatures.matrix().col(0);
  for (int r = 0; r < 3; ++r)
    for (std::size_t k = 0; k < counts[static_cast<std::size_t>(r)]; ++k) push(s, gaussian_draw(draw, mu.col(r), sigma[static_cast<std::size_t>(r)]), r);
  for (std::size_t k = 0; k < counts[3]; ++k) {
    const double g = draw.normal(spec.g_mean, spec.g_std);
    push(s, g * sig + gaussian_draw(draw, mu.col(2), sigma[2]), 3);
  }
  return s;
}

Scene gen_subspace_scene(const SceneSpec& spec, std::uint64_t seed) {
  const auto counts = resolve_counts(spec, {5000, 5000, 4000, 1000});
  Scene s = start_scene(spec, counts, {"sky", "mountain", "ground", "plume"}, {3});
  Draw draw(seed);
  const Eigen::MatrixXd& mu = spec.reference.means;
  const double a = mu.col(2).maxCoeff();
  Eigen::VectorXd sigma(mu.rows());
  // sigma_eps,j ~ N(0, eps_scale a); only its square enters as the variance.
  for (Eigen::Index j = 0; j < sigma.size(); ++j) sigma(j) = std::abs(draw.normal(0.0, spec.eps_scale * a));
  record_truth(s, mu, {sigma, sigma, sigma});
  const Eigen::VectorXd sig = spec.reference.signatures.matrix().col(0);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(mu.rows());
  for (int r = 0; r < 4; ++r) {
    const int region = std::min(r, 2);
    for (std::size_t k = 0; k < counts[static_cast<std::size_t>(r)]; ++k) {
      const double c = draw.normal(1.0, spec.c_std);
      Eigen::VectorXd x = c * mu.col(region) + gaussian_draw(draw, zero, sigma);
      if (r == 3) x += draw.normal(spec.g_mean, spec.g_std) * sig;
      push(s, x, r);
    }
  }
  return s;
}

Scene gen_poisson_scene(const SceneSpec& spec, std::uint64_t seed) {
  const auto counts = resolve_counts(spec, {10000, 1000});
  Scene s = start_scene(spec, counts, {"background", "plume"}, {1});
  Draw draw(seed);
  const Eigen::VectorXd mu = spec.reference.means.rowwise().mean();
  const double b = mu.maxCoeff();
  record_truth(s, mu, {Eigen::VectorXd::Constant(mu.size(), b * std::sqrt(spec.poisson_rate))});
  const Eigen::VectorXd sig = spec.reference.signatures.matrix().col(0);
  for (int r = 0; r < 2; ++r) {
    for (std::size_t k = 0; k < counts[static_cast<std::size_t>(r)]; ++k) {
      Eigen::VectorXd x = mu;
      for (Eigen::Index j = 0; j < x.size(); ++j) x(j) += b * draw.poisson(spec.poisson_rate);
      if (r == 1) x += draw.normal(spec.g_mean, spec.g_std) * sig;
      push(s, x, r);
    }
  }
  return s;
}

Scene gen_two_plume_scene(const SceneSpec& spec, std::uint64_t seed) {
  const auto counts = resolve_counts(spec, {5000, 5000, 5000, 1000, 1000, 100});
  if (spec.reference.signatures.count() < 2) throw std::invalid_argument("two-plume scene needs two signatures");
  Scene s = start_scene(spec, counts, {"sky", "mountain", "ground", "plume1", "plume2", "plume12"}, {3, 4, 5});
  Draw draw(seed);
  const Eigen::MatrixXd& mu = spec.reference.means;
  const double a = mu.col(2).maxCoeff();
  const auto sigma = region_sigmas(draw, spec, a);
  record_truth(s, mu, sigma);
  const Eigen::MatrixXd& sig = spec.reference.signatures.matrix();
  for (int r = 0; r < 3; ++r)
    for (std::size_t k = 0; k < counts[static_cast<std::size_t>(r)]; ++k) push(s, gaussian_draw(draw, mu.col(r), sigma[static_cast<std::size_t>(r)]), r);
  for (int r = 3; r < 6; ++r) {
    for (std::size_t k = 0; k < counts[static_cast<std::size_t>(r)]; ++k) {
      Eigen::VectorXd x = Eigen::VectorXd::Zero(mu.rows());
      if (r != 4) x += draw.normal(spec.g_mean, spec.g_std) * sig.col(0);
      if (r != 3) x += draw.normal(spec.g_mean, spec.g_std) * sig.col(1);
      push(s, x + gaussian_draw(draw, mu.col(2), sigma[2]), r);
    }
  }
  return s;
}

namespace {

CovModel diagonal_model(const Eigen::VectorXd& mean, const Eigen::VectorXd& variance, double delta_percentile) {
  const std::vector<double> values(variance.data(), variance.data() + variance.size());
  const double ridge = quantile(values, delta_percentile / 100.0);
  return CovModel::from_covariance(mean, variance.asDiagonal().toDenseMatrix(), ridge);
}

SubspaceComponent line_through_origin(const Eigen::VectorXd& direction, double weight) {
  Eigen::MatrixXd basis = direction.normalized();
  return {weight, SubspaceModel(Eigen::VectorXd::Zero(direction.size()), std::move(basis))};
}

}  // namespace

GaussianMixture true_gaussian_mixture(const Scene& scene, double delta_percentile) {
  const auto k = scene.true_means.cols();
  std::vector<GaussianComponent> comps;
  for (Eigen::Index r = 0; r < k; ++r)
    comps.push_back({1.0 / static_cast<double>(k),
                     diagonal_model(scene.true_means.col(r), scene.true_sigmas.col(r).array().square().matrix(),
                                    delta_percentile)});
  return GaussianMixture(std::move(comps));
}

GaussianMixture true_single_gaussian(const Scene& scene, double delta_percentile) {
  const Eigen::VectorXd mean = scene.true_means.rowwise().mean();
  const Eigen::VectorXd variance = scene.true_sigmas.array().square().rowwise().mean();
  return GaussianMixture({{1.0, diagonal_model(mean, variance, delta_percentile)}});
}

SubspaceMixture true_subspace_mixture(const Scene& scene) {
  const auto k = scene.true_means.cols();
  std::vector<SubspaceComponent> comps;
  for (Eigen::Index r = 0; r < k; ++r)
    comps.push_back(line_through_origin(scene.true_means.col(r), 1.0 / static_cast<double>(k)));
  return SubspaceMixture(std::move(comps));
}

SubspaceMixture true_single_subspace(const Scene& scene) {
  return SubspaceMixture({line_through_origin(scene.true_means.rowwise().mean(), 1.0)});
}

bool is_experiment(const std::string& name) {
  return name == "gauss" || name == "subspace" || name == "poisson" || name == "twoplume";
}

Scene gen_scene(const std::string& experiment, const SceneSpec& spec, std::uint64_t seed) {
  if (experiment == "gauss") return gen_gaussian_scene(spec, seed);
  if (experiment == "subspace") return gen_subspace_scene(spec, seed);
  if (experiment == "poisson") return gen_poisson_scene(spec, seed);
  if (experiment == "twoplume") return gen_two_plume_scene(spec, seed);
  throw std::invalid_argument("unknown experiment '" + experiment + "'");
}

PackedScene pack_scene(const Scene& scene, std::size_t cols) {
  const auto total = static_cast<std::size_t>(scene.spectra.cols());
  if (cols == 0) {
    cols = 1;
    for (std::size_t d = 1; d * d <= total; ++d)
      if (total % d == 0) cols = d;
  }
  if (total % cols != 0) throw std::invalid_argument("spectrum count is not divisible by the column count");
  PackedScene out;
  out.cube = HyperCube(total / cols, cols, scene.wavenumbers, scene.spectra);
  std::vector<std::uint8_t> mask(total);
  for (std::size_t i = 0; i < total; ++i)
    mask[i] = std::find(scene.plume_labels.begin(), scene.plume_labels.end(), scene.labels[i]) !=
                      scene.plume_labels.end()
                  ? 1
                  : 0;
  out.mask = PlumeMask(total / cols, cols, std::move(mask));
  out.labels = scene.labels;
  return out;
}

Movie gen_movie(const MovieSpec& spec, std::uint64_t seed) {
  if (spec.frames == 0 || spec.rows == 0 || spec.cols == 0) throw std::invalid_argument("movie must be non-empty");
  if (spec.clean_frames > spec.frames) throw std::invalid_argument("more clean frames than frames");
  const ReferenceSpectra ref = reference_spectra(spec.bands);
  const double scale = normalizer(ref.wavenumbers);
  const auto p = static_cast<Eigen::Index>(spec.bands);
  const Eigen::VectorXd sig = ref.signatures.matrix().col(0);
  Draw draw(seed);

  // Region layout with wavy boundaries, shared by all frames.
  std::vector<int> region(spec.rows * spec.cols);
  for (std::size_t r = 0; r < spec.rows; ++r) {
    for (std::size_t c = 0; c < spec.cols; ++c) {
      const double x = static_cast<double>(c);
      const double sky_edge = 0.31 * static_cast<double>(spec.rows) + 6.0 * std::sin(2.0 * std::numbers::pi * x / 160.0);
      const double ground_edge =
          0.62 * static_cast<double>(spec.rows) + 10.0 * std::sin(2.0 * std::numbers::pi * x / 90.0 + 1.0);
      const double y = static_cast<double>(r);
      region[r * spec.cols + c] = y < sky_edge ? 0 : (y < ground_edge ? 1 : 2);
    }
  }

  Movie movie;
  movie.signatures = ref.signatures;
  for (std::size_t f = 0; f < spec.frames; ++f) {
    const bool plume = f >= spec.clean_frames;
    const double step = static_cast<double>(f - std::min(f, spec.clean_frames));
    const double pr = 0.8 * static_cast<double>(spec.rows);
    const double pc = 0.25 * static_cast<double>(spec.cols) + step * 0.15 * static_cast<double>(spec.cols);
    Eigen::MatrixXd spectra(p, static_cast<Eigen::Index>(spec.rows * spec.cols));
    std::vector<std::uint8_t> mask(spec.rows * spec.cols, 0);
    for (std::size_t i = 0; i < region.size(); ++i) {
      const double dt = draw.uniform(-spec.temperature_jitter, spec.temperature_jitter);
      const double c = draw.normal(1.0, spec.c_std);
      auto col = spectra.col(static_cast<Eigen::Index>(i));
      for (Eigen::Index j = 0; j < p; ++j)
        col(j) = c * region_radiance(ref.wavenumbers[static_cast<std::size_t>(j)], region[i], dt) / scale +
                 draw.normal(0.0, spec.noise);
      if (plume) {
        const double dr = static_cast<double>(i / spec.cols) - pr;
        const double dc = static_cast<double>(i % spec.cols) - pc;
        if (dr * dr + dc * dc <= spec.plume_radius * spec.plume_radius) {
          col += draw.normal(spec.plume_g, spec.plume_g_std) * sig;
          mask[i] = 1;
        }
      }
    }
    movie.frames.emplace_back(spec.rows, spec.cols, ref.wavenumbers, std::move(spectra));
    movie.masks.emplace_back(spec.rows, spec.cols, std::move(mask));
  }
  return movie;
}

}  // namespace plume
