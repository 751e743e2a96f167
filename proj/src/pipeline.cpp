#include "plume/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>
#include <string>

namespace plume {

namespace {

class StageClock {
 public:
  StageClock(StageTimings* sink, std::string name)
      : sink_(sink), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  ~StageClock() {
    if (!sink_) return;
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start_;
    (*sink_)[name_] += elapsed.count();
  }

 private:
  StageTimings* sink_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

void check_frames(const std::vector<HyperCube>& frames, const SignatureSet& signatures) {
  if (frames.empty()) throw std::invalid_argument("no frames to process");
  const HyperCube& first = frames.front();
  for (const auto& f : frames) {
    if (f.rows() != first.rows() || f.cols() != first.cols() || f.bands() != first.bands())
      throw std::invalid_argument("frames differ in shape");
    if (f.wavenumbers() != first.wavenumbers()) throw std::invalid_argument("frames differ in wavenumbers");
  }
  if (signatures.bands() != first.bands()) throw std::invalid_argument("signatures do not match the band count");
}

Eigen::MatrixXd kept_spectra(const HyperCube& cube, double outlier_fraction) {
  const OutlierSplit split = remove_outliers(cube, outlier_fraction);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(cube.bands()), static_cast<Eigen::Index>(split.kept.size()));
  for (std::size_t k = 0; k < split.kept.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = cube.spectrum(split.kept[k]);
  return out;
}

}  // namespace

void PipelineConfig::validate(std::size_t frame_count) const {
  enhance.validate();
  if (detection.model.components == 0) throw std::invalid_argument("K must be at least 1");
  if (scenario == Scenario::SingleCube) {
    if (frame_count != 1) throw std::invalid_argument("scenario I takes exactly one cube");
    return;
  }
  if (training_frames.empty()) throw std::invalid_argument("scenario II needs at least one training frame");
  if (frame_count <= training_frames.size())
    throw std::invalid_argument("scenario II needs more frames than training frames");
  for (auto f : training_frames)
    if (f >= frame_count) throw std::invalid_argument("training frame index out of range");
}

std::vector<ScoreMap> run_pipeline(const std::vector<HyperCube>& frames, const SignatureSet& signatures,
                                   const PipelineConfig& config, const PipelineHooks* hooks, StageTimings* timings) {
  check_frames(frames, signatures);
  config.validate(frames.size());
  const DetectionSpec& spec = config.detection;
  const auto notify = [&](std::size_t frame) {
    if (hooks && hooks->on_fit_read) hooks->on_fit_read(frame);
  };

  if (config.scenario == Scenario::SingleCube) {
    const HyperCube& cube = frames.front();
    BackgroundModel model;
    {
      StageClock clock(timings, "fit");
      notify(0);
      model = fit_background(kept_spectra(cube, config.enhance.outlier_fraction), spec.model);
    }
    ScoreMap scores;
    {
      StageClock clock(timings, "detect");
      const MixtureScorer scorer(model, signatures, spec.detector, spec.sign);
      scores = ScoreMap(cube.rows(), cube.cols(), score_spectra(cube.spectra(), scorer, config.threads));
    }
    for (int round = 0; round < config.enhance.resample_rounds; ++round) {
      StageClock clock(timings, "resample");
      scores = resample_enhance(cube, scores, signatures, config.enhance.tau1, spec, config.threads);
    }
    if (config.enhance.plsr_components > 0) {
      StageClock clock(timings, "plsr");
      scores = plsr_enhance(cube, scores, config.enhance.tau2, config.enhance.tau3, config.enhance.plsr_components);
    }
    return {std::move(scores)};
  }

  BackgroundModel model;
  {
    StageClock clock(timings, "fit");
    std::vector<Eigen::MatrixXd> parts;
    Eigen::Index total = 0;
    for (auto f : config.training_frames) {
      notify(f);
      parts.push_back(kept_spectra(frames[f], config.enhance.outlier_fraction));
      total += parts.back().cols();
    }
    Eigen::MatrixXd training(static_cast<Eigen::Index>(frames.front().bands()), total);
    Eigen::Index offset = 0;
    for (const auto& part : parts) {
      training.middleCols(offset, part.cols()) = part;
      offset += part.cols();
    }
    model = fit_background(training, spec.model);
  }
  StageClock clock(timings, "detect");
  const MixtureScorer scorer(model, signatures, spec.detector, spec.sign);
  std::vector<ScoreMap> out;
  for (const auto& frame : frames)
    out.emplace_back(frame.rows(), frame.cols(), score_spectra(frame.spectra(), scorer, config.threads));
  return out;
}

}  // namespace plume
