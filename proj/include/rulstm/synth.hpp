// Copyright 2026 The rulstm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#ifndef RULSTM_SYNTH_HPP_
#define RULSTM_SYNTH_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "rulstm/dataio.hpp"
#include "rulstm/vocabulary.hpp"

namespace rulstm {

// Synthetic action videos for exercising the pipeline without real data.
//
// Each video is a sequence of frames at 1/alpha frames per second laid out as
//
//   [gap] [window] [action] [gap] [window] [action] ... [gap]
//
// where the window is the `window_steps` frames preceding an action. Every
// action class owns one prototype per modality. A frame carries class
// evidence r in [0, 1]:
//
//   window frame n frames before the start:  r = ((W + 1 - n) / W)^ramp_power
//   k-th frame inside the action (0-based):  r = floor + (1 - floor)(k + 1)/len
//   gap frames:                              r = 0
//
// Dense modalities emit r * prototype + noise * N(0, 1). Object modalities
// emit detections: each of the action's objects is detected with probability
// r and score U(0.5, 1), plus false positives (expected `noise` per frame,
// score U(0, 0.5)); features are the bag of objects. With probability
// `corruption`, a (sample, modality) pair is replaced by pure noise over its
// window and action and flagged in synth_meta.json.
struct SynthModality {
  enum class Kind { dense, objects };

  std::string name;
  std::size_t dim = 16;
  Kind kind = Kind::dense;
  double noise = -1.0;       // < 0: use SynthConfig::noise
  double corruption = -1.0;  // < 0: use SynthConfig::corruption

  bool operator==(const SynthModality&) const = default;
};

struct SynthConfig {
  std::size_t num_verbs = 5;
  std::size_t num_nouns = 6;
  std::size_t num_actions = 10;
  std::vector<SynthModality> modalities = {
      {"rgb", 16, SynthModality::Kind::dense},
      {"flow", 16, SynthModality::Kind::dense},
      {"obj", 24, SynthModality::Kind::objects},
  };
  std::size_t train_samples = 2000;
  std::size_t val_samples = 500;
  std::size_t actions_per_video = 20;

  double alpha = 0.25;
  std::size_t window_steps = 14;
  double action_duration = 2.0;  // seconds
  double gap = 1.0;              // seconds

  double signal = 1.0;  // prototype standard deviation
  double noise = 1.0;
  double ramp_power = 2.0;
  double in_action_floor = 0.3;
  double corruption = 0.0;
  std::size_t objects_per_action = 2;
  std::size_t many_shot_threshold = 10;
  std::uint64_t seed = 0;

  // Throws ConfigError naming the offending field.
  void validate() const;
  double modality_noise(std::size_t m) const;
  double modality_corruption(std::size_t m) const;
  // Frame rate 1/alpha as a reduced fraction.
  std::pair<std::uint32_t, std::uint32_t> fps_fraction() const;

  nlohmann::json to_json() const;
  // Missing keys keep their defaults; unknown keys are errors.
  static SynthConfig from_json(const nlohmann::json& j);
  bool operator==(const SynthConfig&) const = default;
};

struct SynthDataset {
  Vocabulary vocabulary;
  std::vector<SampleRecord> manifest;  // train rows first, then val
  std::vector<std::string> train_videos;
  std::vector<std::string> val_videos;
  FeatureStore features;
  // Raw detections per object modality, keyed by modality name.
  std::map<std::string, std::vector<DetectionRecord>> detections;
  // corrupted[m][row] for modality m and manifest row.
  std::vector<std::vector<bool>> corrupted;
  // Per-modality class prototypes (num_actions x dim); object modalities hold
  // 0/1 indicators of each action's objects.
  std::vector<Matrix> prototypes;
};

SynthDataset synth_generate(const SynthConfig& config);

// Writes the layout read by DataDirectory plus detections/<modality>.jsonl.
void write_synth(const SynthDataset& data, const SynthConfig& config,
                 const std::filesystem::path& dir);

}  // namespace rulstm

#endif  // RULSTM_SYNTH_HPP_
