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


#ifndef RULSTM_MODEL_IO_HPP_
#define RULSTM_MODEL_IO_HPP_

#include <filesystem>

#include "json.hpp"
#include "rulstm/checkpoint.hpp"
#include "rulstm/model.hpp"
#include "rulstm/nn.hpp"

namespace rulstm {

// Parameter blocks are stored under their block names (e.g.
// "rgb.rolling.weight"); optimizer velocities under "optimizer.velocity/<name>".
// Metadata holds {"model": <description>, "optimizer": {...}, "training": {...}}.
inline constexpr const char* kVelocityPrefix = "optimizer.velocity/";

Checkpoint make_checkpoint(const FusionModel& model, const SgdMomentum* optimizer = nullptr,
                           const nlohmann::json& training = nlohmann::json::object());

struct LoadedModel {
  FusionModel model;
  SgdMomentum optimizer;
  nlohmann::json training = nlohmann::json::object();
};

LoadedModel model_from_checkpoint(const Checkpoint& ckpt);

void save_model(const std::filesystem::path& path, const FusionModel& model,
                const SgdMomentum* optimizer = nullptr,
                const nlohmann::json& training = nlohmann::json::object());
LoadedModel load_model(const std::filesystem::path& path);

// Model description file: the JSON form of ModelConfig.
void write_model_description(const std::filesystem::path& path, const ModelConfig& config);
ModelConfig read_model_description(const std::filesystem::path& path);

}  // namespace rulstm

#endif  // RULSTM_MODEL_IO_HPP_
