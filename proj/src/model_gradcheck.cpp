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


#include "rulstm/model_gradcheck.hpp"

#include "rulstm/errors.hpp"

namespace rulstm {

ModelConfig gradcheck_toy_config() {
  ModelConfig c;
  c.modalities = {{"rgb", 8}, {"flow", 8}, {"obj", 6}};
  c.hidden = 16;
  c.num_actions = 4;
  c.timeline = {0.25, 2, 3};
  c.fusion = FusionStrategy::matt;
  return c;
}

GradcheckReport check_model_gradients(const ModelConfig& config, const ModelGradcheckOptions& options) {
  config.validate();
  if (options.samples == 0) throw ConfigError("gradcheck: samples must be positive");
  Rng rng(options.seed);
  FusionModel model = FusionModel::initialize(config, rng);
  for_each_block(model.params, "", [&](const std::string&, Matrix& m) {
    for (double& v : m.data()) v += rng.uniform(-options.perturbation, options.perturbation);
  });

  std::vector<std::vector<Matrix>> inputs;
  std::vector<std::size_t> labels;
  const auto rows = static_cast<std::size_t>(config.timeline.total_steps());
  for (std::size_t i = 0; i < options.samples; ++i) {
    std::vector<Matrix> x;
    for (const auto& m : config.modalities) {
      Matrix f(rows, m.dim);
      for (double& v : f.data()) v = rng.uniform(-1.0, 1.0);
      x.push_back(std::move(f));
    }
    inputs.push_back(std::move(x));
    labels.push_back(static_cast<std::size_t>(rng.uniform_int(config.num_actions)));
  }
  const double n = static_cast<double>(options.samples);
  const ForwardOptions fo{options.mode, Phase::eval, nullptr};

  ModelParams grads = zeros_like(model.params);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    ModelTape tape;
    const PredictionTimeline tl = forward(model, inputs[i], fo, &tape);
    auto d = anticipation_loss_gradient(tl, labels[i]);
    for (auto& v : d) {
      for (double& x : v) x /= n;
    }
    backward(model, tape, tl, d, grads);
  }

  if (!options.fault_block.empty()) {
    bool found = false;
    for_each_block(grads, "", [&](const std::string& name, Matrix& m) {
      if (name != options.fault_block || m.empty()) return;
      found = true;
      for (double& v : m.data()) v = v * 1.05 + 1e-3;
    });
    if (!found) throw ConfigError("gradcheck: no parameter block named '" + options.fault_block + "'");
  }

  auto loss = [&] {
    double total = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      total += anticipation_loss(forward(model, inputs[i], fo), labels[i]);
    }
    return total / n;
  };
  const auto params = mutable_blocks(model.params);
  const auto analytic = const_blocks(grads);
  return gradcheck(loss, params, analytic, options.check);
}

}  // namespace rulstm
