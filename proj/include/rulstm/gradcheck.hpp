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


#ifndef RULSTM_GRADCHECK_HPP_
#define RULSTM_GRADCHECK_HPP_

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rulstm/tensor.hpp"

namespace rulstm {

struct GradcheckOptions {
  double tolerance = 1e-4;
  double step = 1e-5;
  // Relative error is |a - n| / max(|a|, |n|, denominator_floor); the floor
  // keeps entries whose true gradient is ~0 from dominating on roundoff.
  double denominator_floor = 1e-6;
};

struct BlockCheck {
  std::string name;
  std::size_t entries = 0;
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

struct GradcheckReport {
  std::vector<BlockCheck> blocks;
  double tolerance = 0.0;

  double max_relative_error() const;
  bool passed() const { return max_relative_error() < tolerance; }
};

double relative_error(double analytic, double numeric, double floor);

// Central finite differences of loss() against the analytic gradient of each
// block. loss() must read the parameter matrices through the pointers given,
// and must be deterministic: it is called twice up front and a mismatch
// throws NonDeterminismError.
GradcheckReport gradcheck(const std::function<double()>& loss,
                          std::span<const std::pair<std::string, Matrix*>> params,
                          std::span<const std::pair<std::string, const Matrix*>> analytic,
                          const GradcheckOptions& options = {});

}  // namespace rulstm

#endif  // RULSTM_GRADCHECK_HPP_
