#pragma once

// Score enhancement: magnitude-based outlier removal, resampling
// enhancement (refit on confident background plus 4-neighbors) and PLSR
// enhancement (regress scores on spectra over the two tails).

#include "plume/cube_io.hpp"
#include "plume/mixture.hpp"

#include <vector>

namespace plume {

struct EnhanceConfig {
  double outlier_fraction = 0.01;
  double tau1 = 0.2;
  double tau2 = 0.15;
  double tau3 = 0.15;
  int resample_rounds = 0;
  // 0 disables the PLSR stage.
  int plsr_components = 0;

  void validate() const;
};

struct OutlierSplit {
  std::vector<std::size_t> kept;     // ascending pixel indices
  std::vector<std::size_t> removed;  // ascending pixel indices
};

OutlierSplit remove_outliers(const HyperCube& cube, double fraction);

// 1-based rank ceil(tau * total), clamped to [1, total].
std::size_t order_rank(double tau, std::size_t total);

// B = {T <= delta1} plus its 4-neighbors, ascending pixel indices.
std::vector<std::size_t> resample_selection(const ScoreMap& scores, double tau1);

ScoreMap resample_enhance(const HyperCube& cube, const ScoreMap& scores, const SignatureSet& signatures, double tau1,
                          const DetectionSpec& spec, unsigned threads = 1);

// A2 u A3 = {T <= delta2} u {T >= delta3}, ascending pixel indices.
std::vector<std::size_t> plsr_selection(const ScoreMap& scores, double tau2, double tau3);

ScoreMap plsr_enhance(const HyperCube& cube, const ScoreMap& scores, double tau2, double tau3, int components,
                      PlsrModel* fitted = nullptr);

}  // namespace plume
