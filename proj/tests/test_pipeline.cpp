#include "plume/pipeline.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace plume;

namespace {

const Eigen::Index kBands = 10;

// Frames sharing `seed` share the background distribution; `draw` picks the
// pixel noise.
HyperCube background_frame(std::uint64_t seed, std::size_t m, std::size_t n, std::uint64_t draw = 0) {
  std::mt19937_64 rng(seed);
  const Eigen::MatrixXd mix = testutil::gaussian_matrix(rng, kBands, kBands, 0.3);
  if (draw != 0) rng.seed(draw);
  Eigen::MatrixXd s = mix * testutil::gaussian_matrix(rng, kBands, static_cast<Eigen::Index>(m * n));
  s.colwise() += Eigen::VectorXd::LinSpaced(kBands, 5.0, 8.0);
  return HyperCube(m, n, testutil::iota_axis(kBands), s);
}

SignatureSet signature() {
  Eigen::VectorXd s = Eigen::VectorXd::Zero(kBands);
  s.segment(3, 3) << 0.5, 1.0, 0.5;
  return SignatureSet(s, {"gas"});
}

}  // namespace

TEST_CASE("single cube, K = 1, no enhancement equals NMF under fit_cov of kept spectra") {
  const HyperCube cube = background_frame(1, 12, 10);
  PipelineConfig cfg;
  cfg.detection.model.components = 1;
  const auto out = run_pipeline({cube}, signature(), cfg);
  REQUIRE(out.size() == 1);
  const OutlierSplit split = remove_outliers(cube, cfg.enhance.outlier_fraction);
  Eigen::MatrixXd kept(kBands, static_cast<Eigen::Index>(split.kept.size()));
  for (std::size_t k = 0; k < split.kept.size(); ++k) kept.col(static_cast<Eigen::Index>(k)) = cube.spectrum(split.kept[k]);
  const CovModel cov = fit_cov(kept);
  for (std::size_t i = 0; i < cube.pixels(); ++i)
    CHECK(std::abs(out[0].at(i) - nmf_score(cube.spectrum(i), cov, signature())) < 1e-12);
}

TEST_CASE("pipeline output is deterministic and finite") {
  const HyperCube cube = background_frame(2, 15, 15);
  PipelineConfig cfg;
  cfg.enhance.resample_rounds = 1;
  cfg.enhance.plsr_components = 3;
  const auto a = run_pipeline({cube}, signature(), cfg);
  const auto b = run_pipeline({cube}, signature(), cfg);
  CHECK(a[0].values() == b[0].values());
  for (double v : a[0].values()) CHECK(std::isfinite(v));
  cfg.threads = 3;
  CHECK(run_pipeline({cube}, signature(), cfg)[0].values() == a[0].values());
}

TEST_CASE("scenario II flags an injected plume and fits only on training frames") {
  const std::size_t m = 20, n = 20;
  std::vector<HyperCube> frames{background_frame(3, m, n), background_frame(3, m, n)};
  HyperCube third = background_frame(3, m, n, 99);
  Eigen::MatrixXd s = third.spectra();
  std::set<std::size_t> plume;
  for (std::size_t r = 8; r < 12; ++r)
    for (std::size_t c = 8; c < 12; ++c) {
      plume.insert(r * n + c);
      s.col(static_cast<Eigen::Index>(r * n + c)) += 4.0 * signature().matrix().col(0);
    }
  frames.emplace_back(m, n, third.wavenumbers(), s);

  PipelineConfig cfg;
  cfg.scenario = Scenario::Movie;
  cfg.training_frames = {0, 1};
  cfg.detection.model.components = 2;
  std::set<std::size_t> read;
  PipelineHooks hooks;
  hooks.on_fit_read = [&](std::size_t f) { read.insert(f); };
  StageTimings timings;
  const auto out = run_pipeline(frames, signature(), cfg, &hooks, &timings);
  REQUIRE(out.size() == 3);
  CHECK(read == std::set<std::size_t>{0, 1});
  CHECK(timings.count("fit") == 1);
  CHECK(timings.count("detect") == 1);

  std::vector<double> sorted = out[2].values();
  std::sort(sorted.begin(), sorted.end());
  const double top_decile = sorted[sorted.size() * 9 / 10];
  for (auto i : plume) CHECK(out[2].at(i) >= top_decile);
}

TEST_CASE("pipeline rejects mismatched frames and bad configs") {
  const HyperCube a = background_frame(5, 6, 6);
  const HyperCube b = background_frame(5, 6, 5);
  PipelineConfig movie;
  movie.scenario = Scenario::Movie;
  movie.training_frames = {0};
  CHECK_THROWS(run_pipeline({a, b}, signature(), movie));
  CHECK_THROWS(run_pipeline({a}, signature(), movie));
  movie.training_frames = {5};
  CHECK_THROWS(run_pipeline({a, a}, signature(), movie));
  PipelineConfig single;
  CHECK_THROWS(run_pipeline({a, a}, signature(), single));
  CHECK_THROWS(run_pipeline({a}, SignatureSet(Eigen::VectorXd::Ones(3), {"x"}), single));
}
