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


#include "rulstm/model_io.hpp"

#include <fstream>

#include "rulstm/errors.hpp"

namespace rulstm {

using nlohmann::json;

Checkpoint make_checkpoint(const FusionModel& model, const SgdMomentum* optimizer,
                           const json& training) {
  Checkpoint ckpt;
  for (const auto& [name, m] : const_blocks(model.params)) ckpt.blocks.emplace_back(name, *m);
  json opt = json::object();
  if (optimizer != nullptr) {
    opt = {{"type", "sgd_momentum"},
           {"learning_rate", optimizer->learning_rate},
           {"momentum", optimizer->momentum}};
    for (const auto& [name, v] : optimizer->velocity) {
      ckpt.blocks.emplace_back(kVelocityPrefix + name, v);
    }
  }
  ckpt.metadata = {{"model", model.config.to_json()}, {"optimizer", opt}, {"training", training}};
  return ckpt;
}

LoadedModel model_from_checkpoint(const Checkpoint& ckpt) {
  if (!ckpt.metadata.contains("model")) throw IoError("checkpoint has no model description");
  const ModelConfig config = ModelConfig::from_json(ckpt.metadata.at("model"));
  Rng unused(0);
  LoadedModel loaded{FusionModel::initialize(config, unused), {}, json::object()};
  for (auto& [name, m] : mutable_blocks(loaded.model.params)) {
    const Matrix* stored = ckpt.find(name);
    if (stored == nullptr) throw IoError("checkpoint is missing block " + name);
    if (stored->rows() != m->rows() || stored->cols() != m->cols()) {
      throw IoError("checkpoint block " + name + " has the wrong shape");
    }
    *m = *stored;
  }
  const json& opt = ckpt.metadata.value("optimizer", json::object());
  loaded.optimizer.learning_rate = opt.value("learning_rate", loaded.optimizer.learning_rate);
  loaded.optimizer.momentum = opt.value("momentum", loaded.optimizer.momentum);
  const std::string prefix = kVelocityPrefix;
  for (const auto& [name, m] : ckpt.blocks) {
    if (name.rfind(prefix, 0) == 0) loaded.optimizer.velocity[name.substr(prefix.size())] = m;
  }
  loaded.training = ckpt.metadata.value("training", json::object());
  return loaded;
}

void save_model(const std::filesystem::path& path, const FusionModel& model,
                const SgdMomentum* optimizer, const json& training) {
  write_checkpoint(path, make_checkpoint(model, optimizer, training));
}

LoadedModel load_model(const std::filesystem::path& path) {
  return model_from_checkpoint(read_checkpoint(path));
}

void write_model_description(const std::filesystem::path& path, const ModelConfig& config) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << config.to_json().dump(2) << '\n';
}

ModelConfig read_model_description(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return ModelConfig::from_json(j);
}

}  // namespace rulstm
