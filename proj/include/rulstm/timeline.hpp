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


#ifndef RULSTM_TIMELINE_HPP_
#define RULSTM_TIMELINE_HPP_

#include <cstddef>
#include <vector>

namespace rulstm {

// Sequential processing scheme: one snippet every `alpha` seconds, first
// `s_enc` steps encode only, the last `s_ant` steps also predict. Steps are
// numbered 1..S as in the usual presentation of the scheme.
struct TimelineSpec {
  double alpha = 0.25;
  int s_enc = 6;
  int s_ant = 8;

  int total_steps() const { return s_enc + s_ant; }
  int first_anticipation_step() const { return s_enc + 1; }

  // Throws ConfigError naming the field when a value is out of range.
  void validate() const;

  bool operator==(const TimelineSpec&) const = default;
};

// Number of U-LSTM iterations at step t: S + 1 - t. Throws std::out_of_range
// when t is not an anticipation step.
int unroll_count(const TimelineSpec& spec, int t);

// alpha * unroll_count(t).
double anticipation_time(const TimelineSpec& spec, int t);

// alpha * t.
double observation_time(const TimelineSpec& spec, int t);

// Absolute time of snippet t for an action starting at action_start:
// action_start - alpha * (S + 1 - t). Valid for 1 <= t <= S.
double step_time(const TimelineSpec& spec, double action_start, int t);

// Anticipation times of the prediction steps, in step order (largest first).
std::vector<double> anticipation_times(const TimelineSpec& spec);

// Step whose anticipation time is closest to `seconds`; ties go to the
// earlier step.
int step_for_anticipation_time(const TimelineSpec& spec, double seconds);

}  // namespace rulstm

#endif  // RULSTM_TIMELINE_HPP_
