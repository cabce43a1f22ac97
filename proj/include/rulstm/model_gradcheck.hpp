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


#ifndef RULSTM_MODEL_GRADCHECK_HPP_
#define RULSTM_MODEL_GRADCHECK_HPP_

#include <cstdint>
#include <string>

#include "rulstm/gradcheck.hpp"
#include "rulstm/model.hpp"

namespace rulstm {

struct ModelGradcheckOptions {
  UnrollMode mode = UnrollMode::anticipation;
  std::uint64_t seed = 0;
  std::size_t samples = 2;  // the loss is averaged over this many random inputs
  double perturbation = 0.3;  // added to every parameter, biases included
  GradcheckOptions check;
  // Corrupts the analytic gradient of this block (negative control).
  std::string fault_block;
};

// Three modalities D = 8/8/6, H = 16, K = 4, S_enc = 2, S_ant = 3, MATT.
ModelConfig gradcheck_toy_config();

// Finite-difference check of the full fused model in the eval phase.
GradcheckReport check_model_gradients(const ModelConfig& config, const ModelGradcheckOptions& options);

}  // namespace rulstm

#endif  // RULSTM_MODEL_GRADCHECK_HPP_
