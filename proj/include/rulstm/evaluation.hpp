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


#ifndef RULSTM_EVALUATION_HPP_
#define RULSTM_EVALUATION_HPP_

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rulstm/dataio.hpp"
#include "rulstm/model.hpp"
#include "rulstm/tensor.hpp"
#include "rulstm/timeline.hpp"
#include "rulstm/vocabulary.hpp"

namespace rulstm {

// Predictions of one model for one sample. `scores` holds the fused action
// scores of every prediction step. In anticipation mode step i is time-step
// s_enc + 1 + i; in early recognition step i has seen (i + 1) / N of the
// action.
struct EvalRecord {
  std::string id;
  std::size_t verb = 0;
  std::size_t noun = 0;
  std::size_t action = 0;
  TimelineSpec spec;
  Task task = Task::anticipation;
  std::vector<Vector> scores;
  std::vector<Vector> weights;  // fusion weights per step; may be empty
  std::vector<bool> corrupted;  // per modality; may be empty

  std::size_t num_steps() const { return scores.size(); }
  double anticipation_time(std::size_t i) const;
  double observation_ratio(std::size_t i) const;  // percent
};

EvalRecord make_eval_record(const Sample& sample, const PredictionTimeline& timeline, Task task);

// True iff `truth` is among the k highest scores. Equal scores rank the
// lower class id first.
bool topk_hit(std::span<const double> scores, std::size_t truth, std::size_t k);

struct ScoredLabel {
  std::span<const double> scores;
  std::size_t truth = 0;
};

struct RecallResult {
  std::optional<double> percent;  // empty when no listed class has samples
  std::size_t classes = 0;        // classes averaged
  std::size_t excluded = 0;       // listed classes without samples
};

// Unweighted mean over `classes` (ascending id order) of per-class Top-k
// recall, 100 * sum(recall_c) / classes.
RecallResult mean_topk_recall(std::span<const ScoredLabel> items, std::size_t k,
                              std::span<const std::size_t> classes);

// Largest anticipation time at which the action is in the Top-k; 0 when never.
double time_to_action(const EvalRecord& record, std::size_t k);

struct ObservationResult {
  double percent = 100.0;
  bool correct = false;
};

// Smallest observation ratio with a correct Top-1 action prediction. Records
// never correct report 100 with correct = false.
ObservationResult min_observation_ratio(const EvalRecord& record);

enum Level : std::size_t { kVerb = 0, kNoun = 1, kAction = 2 };
inline constexpr std::array<const char*, 3> kLevelNames = {"verb", "noun", "action"};

using Triple = std::array<double, 3>;

struct StepMetrics {
  double time = 0.0;  // anticipation time (s) or observation ratio (%)
  Triple top1{};
  Triple top5{};
};

// All percentages are 100 * hits / n; means over records sum in record order.
struct MetricsReport {
  Task task = Task::anticipation;
  TimelineSpec spec;
  std::size_t num_records = 0;
  std::vector<StepMetrics> steps;

  // Anticipation only.
  std::size_t reference_step = 0;  // step at tau_a = 1 s
  std::array<RecallResult, 3> recall5{};
  Triple mean_tta5{};

  // Early recognition only.
  Triple mor{};
  std::array<std::size_t, 3> never_correct{};

  nlohmann::json to_json() const;
  // One row in the layout of the usual results table, values with two decimals.
  std::string csv(const std::string& method) const;
};

// Verb and noun metrics use marginal probabilities of softmax(scores). Top-5
// is clamped to the number of classes at each level.
MetricsReport aggregate(std::span<const EvalRecord> records, const Vocabulary& vocab);

// JSON lines, one record per sample.
void write_predictions(const std::filesystem::path& path, std::span<const EvalRecord> records);
std::vector<EvalRecord> read_predictions(const std::filesystem::path& path);

std::string format_percent(double value);

}  // namespace rulstm

#endif  // RULSTM_EVALUATION_HPP_
