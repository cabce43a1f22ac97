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


#include "rulstm/timeline.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "rulstm/errors.hpp"

namespace rulstm {

void TimelineSpec::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("timeline.alpha must be > 0");
  if (s_enc < 0) throw ConfigError("timeline.s_enc must be >= 0");
  if (s_ant < 1) throw ConfigError("timeline.s_ant must be >= 1");
}

int unroll_count(const TimelineSpec& spec, int t) {
  if (t < spec.first_anticipation_step() || t > spec.total_steps()) {
    throw std::out_of_range("step " + std::to_string(t) + " is outside the anticipation stage [" +
                            std::to_string(spec.first_anticipation_step()) + ", " +
                            std::to_string(spec.total_steps()) + "]");
  }
  return spec.total_steps() + 1 - t;
}

double anticipation_time(const TimelineSpec& spec, int t) {
  return spec.alpha * unroll_count(spec, t);
}

double observation_time(const TimelineSpec& spec, int t) { return spec.alpha * t; }

double step_time(const TimelineSpec& spec, double action_start, int t) {
  if (t < 1 || t > spec.total_steps()) {
    throw std::out_of_range("step " + std::to_string(t) + " outside [1, " +
                            std::to_string(spec.total_steps()) + "]");
  }
  return action_start - spec.alpha * (spec.total_steps() + 1 - t);
}

std::vector<double> anticipation_times(const TimelineSpec& spec) {
  std::vector<double> out;
  for (int t = spec.first_anticipation_step(); t <= spec.total_steps(); ++t) {
    out.push_back(anticipation_time(spec, t));
  }
  return out;
}

int step_for_anticipation_time(const TimelineSpec& spec, double seconds) {
  int best = spec.first_anticipation_step();
  double best_gap = std::abs(anticipation_time(spec, best) - seconds);
  for (int t = best + 1; t <= spec.total_steps(); ++t) {
    const double gap = std::abs(anticipation_time(spec, t) - seconds);
    if (gap < best_gap) {
      best = t;
      best_gap = gap;
    }
  }
  return best;
}

}  // namespace rulstm
