#include "plume/enhance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace plume {

namespace {

void check_fraction(double v, const char* name) {
  if (!(v > 0.0 && v < 1.0)) throw std::invalid_argument(std::string(name) + " must lie in (0, 1)");
}

void check_aligned(const HyperCube& cube, const ScoreMap& scores) {
  if (scores.rows() != cube.rows() || scores.cols() != cube.cols())
    throw std::invalid_argument("score map does not match the cube dimensions");
}

// k-th smallest value (1-based) without reordering the input.
double order_statistic(const std::vector<double>& values, std::size_t rank) {
  std::vector<double> copy = values;
  std::nth_element(copy.begin(), copy.begin() + static_cast<std::ptrdiff_t>(rank - 1), copy.end());
  return copy[rank - 1];
}

Eigen::MatrixXd gather_columns(const Eigen::MatrixXd& spectra, const std::vector<std::size_t>& idx) {
  Eigen::MatrixXd out(spectra.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k)
    out.col(static_cast<Eigen::Index>(k)) = spectra.col(static_cast<Eigen::Index>(idx[k]));
  return out;
}

}  // namespace

void EnhanceConfig::validate() const {
  if (!(outlier_fraction >= 0.0 && outlier_fraction < 1.0))
    throw std::invalid_argument("outlier fraction must lie in [0, 1)");
  check_fraction(tau1, "tau1");
  check_fraction(tau2, "tau2");
  check_fraction(tau3, "tau3");
  if (!(tau2 + tau3 < 1.0)) throw std::invalid_argument("tau2 + tau3 must be below 1");
  if (resample_rounds < 0) throw std::invalid_argument("resample rounds must be >= 0");
  if (plsr_components < 0) throw std::invalid_argument("PLSR components must be >= 0");
}

std::size_t order_rank(double tau, std::size_t total) {
  if (total == 0) throw std::invalid_argument("order statistic of an empty set");
  // The small offset keeps tau*total that is integral up to rounding from
  // stepping to the next rank.
  const double raw = std::ceil(tau * static_cast<double>(total) - 1e-9);
  const auto rank = static_cast<std::size_t>(std::max(raw, 1.0));
  return std::min(rank, total);
}

OutlierSplit remove_outliers(const HyperCube& cube, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw std::invalid_argument("outlier fraction must lie in [0, 1)");
  const std::size_t total = cube.pixels();
  const auto drop = static_cast<std::size_t>(std::max(0.0, std::ceil(fraction * static_cast<double>(total) - 1e-9)));
  const Eigen::VectorXd magnitude = cube.spectra().colwise().squaredNorm().transpose();
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  // Largest magnitude first; among equals the higher index goes first so the
  // lower index is kept.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ma = magnitude(static_cast<Eigen::Index>(a));
    const double mb = magnitude(static_cast<Eigen::Index>(b));
    if (ma != mb) return ma > mb;
    return a > b;
  });
  std::vector<bool> removed(total, false);
  for (std::size_t k = 0; k < drop && k < total; ++k) removed[order[k]] = true;
  OutlierSplit split;
  for (std::size_t i = 0; i < total; ++i) (removed[i] ? split.removed : split.kept).push_back(i);
  return split;
}

std::vector<std::size_t> resample_selection(const ScoreMap& scores, double tau1) {
  check_fraction(tau1, "tau1");
  const std::size_t total = scores.size();
  const double delta1 = order_statistic(scores.values(), order_rank(tau1, total));
  const std::size_t rows = scores.rows();
  const std::size_t cols = scores.cols();
  std::vector<bool> chosen(total, false);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (scores.at(r, c) > delta1) continue;
      chosen[r * cols + c] = true;
      if (r > 0) chosen[(r - 1) * cols + c] = true;
      if (r + 1 < rows) chosen[(r + 1) * cols + c] = true;
      if (c > 0) chosen[r * cols + c - 1] = true;
      if (c + 1 < cols) chosen[r * cols + c + 1] = true;
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < total; ++i)
    if (chosen[i]) out.push_back(i);
  return out;
}

ScoreMap resample_enhance(const HyperCube& cube, const ScoreMap& scores, const SignatureSet& signatures, double tau1,
                          const DetectionSpec& spec, unsigned threads) {
  check_aligned(cube, scores);
  const auto selection = resample_selection(scores, tau1);
  if (selection.size() < minimum_fit_size(spec.model))
    throw std::runtime_error("resampling selection has " + std::to_string(selection.size()) +
                             " pixels, fewer than the model needs");
  const BackgroundModel model = fit_background(gather_columns(cube.spectra(), selection), spec.model);
  const MixtureScorer scorer(model, signatures, spec.detector, spec.sign);
  return ScoreMap(cube.rows(), cube.cols(), score_spectra(cube.spectra(), scorer, threads));
}

std::vector<std::size_t> plsr_selection(const ScoreMap& scores, double tau2, double tau3) {
  check_fraction(tau2, "tau2");
  check_fraction(tau3, "tau3");
  const std::size_t total = scores.size();
  const double delta2 = order_statistic(scores.values(), order_rank(tau2, total));
  const double delta3 = order_statistic(scores.values(), order_rank(1.0 - tau3, total));
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < total; ++i)
    if (scores.at(i) <= delta2 || scores.at(i) >= delta3) out.push_back(i);
  return out;
}

ScoreMap plsr_enhance(const HyperCube& cube, const ScoreMap& scores, double tau2, double tau3, int components,
                      PlsrModel* fitted) {
  check_aligned(cube, scores);
  if (components < 1) throw std::invalid_argument("PLSR needs at least one component");
  const auto selection = plsr_selection(scores, tau2, tau3);
  if (selection.size() < static_cast<std::size_t>(components) + 2)
    throw std::runtime_error("PLSR selection has fewer than l + 2 pixels");

  Eigen::MatrixXd x(static_cast<Eigen::Index>(selection.size()), static_cast<Eigen::Index>(cube.bands()));
  Eigen::VectorXd y(x.rows());
  for (std::size_t k = 0; k < selection.size(); ++k) {
    x.row(static_cast<Eigen::Index>(k)) = cube.spectrum(selection[k]).transpose();
    y(static_cast<Eigen::Index>(k)) = scores.at(selection[k]);
  }
  if (y.maxCoeff() == y.minCoeff()) {
    if (fitted) *fitted = PlsrModel{Eigen::VectorXd::Zero(x.cols()), y(0), 0};
    return scores;
  }
  const PlsrModel model = fit_plsr(x, y, components);
  const Eigen::VectorXd predicted =
      (cube.spectra().transpose() * model.coefficients).array() + model.intercept;
  if (fitted) *fitted = model;
  return ScoreMap(cube.rows(), cube.cols(), std::vector<double>(predicted.data(), predicted.data() + predicted.size()));
}

}  // namespace plume
