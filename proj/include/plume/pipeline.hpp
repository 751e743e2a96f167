#pragma once

// End-to-end detection: fit a background mixture on one cube (scenario I)
// or on clean training frames of a movie (scenario II), then score every
// spectrum of every frame.

#include "plume/enhance.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace plume {

enum class Scenario { SingleCube = 1, Movie = 2 };

struct PipelineConfig {
  Scenario scenario = Scenario::SingleCube;
  // Scenario II training frames (0-based indices into the frame list).
  std::vector<std::size_t> training_frames{0, 1};
  DetectionSpec detection;
  EnhanceConfig enhance;
  unsigned threads = 1;

  void validate(std::size_t frame_count) const;
};

struct PipelineHooks {
  // Called once per frame whose pixels are read while fitting the model.
  std::function<void(std::size_t frame)> on_fit_read;
};

// Wall-clock seconds per stage, keyed by stage name.
using StageTimings = std::map<std::string, double>;

std::vector<ScoreMap> run_pipeline(const std::vector<HyperCube>& frames, const SignatureSet& signatures,
                                   const PipelineConfig& config, const PipelineHooks* hooks = nullptr,
                                   StageTimings* timings = nullptr);

}  // namespace plume
