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


#ifndef RULSTM_TRAINING_HPP_
#define RULSTM_TRAINING_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rulstm/dataio.hpp"
#include "rulstm/evaluation.hpp"
#include "rulstm/model.hpp"
#include "rulstm/nn.hpp"

namespace rulstm {

struct TrainConfig {
  Task task = Task::anticipation;
  std::vector<std::string> modalities;  // empty: every modality in the data
  FusionStrategy fusion = FusionStrategy::matt;
  BranchArchitecture architecture = BranchArchitecture::rolling_unrolling;
  TimelineSpec timeline;
  std::size_t hidden = 1024;
  ModelDropout dropout;

  // Epochs per modality for sequence completion pre-training and for the
  // anticipation fine-tuning of each branch; unlisted modalities use the
  // default. Early recognition uses early_recognition_epochs for both.
  std::map<std::string, std::size_t> scp_epochs{{"obj", 200}};
  std::map<std::string, std::size_t> branch_epochs{{"obj", 200}};
  std::size_t default_branch_epochs = 100;
  std::size_t fusion_epochs = 100;
  std::size_t early_recognition_epochs = 200;

  bool use_scp = true;
  bool freeze_branches = false;       // fusion stage updates attention only
  bool zero_attention_output = false; // fusion starts from uniform weights

  double learning_rate = 0.01;
  double momentum = 0.9;
  double clip_norm = 5.0;  // <= 0 disables clipping
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  // Each batch is split into this many contiguous shards whose gradients are
  // summed in shard order; shards run on separate threads. Results depend on
  // the shard count, never on scheduling.
  std::size_t grad_shards = 1;
  // Threads for validation and prediction. Does not change results and is
  // not serialized.
  std::size_t jobs = 1;

  void validate() const;
  std::size_t scp_epochs_for(const std::string& modality) const;
  std::size_t branch_epochs_for(const std::string& modality) const;

  nlohmann::json to_json() const;
  // Missing keys keep their defaults; unknown keys are errors.
  static TrainConfig from_json(const nlohmann::json& j);
  bool operator==(const TrainConfig& o) const { return to_json() == o.to_json(); }
};

// Model configuration for the given modalities under this training config.
ModelConfig make_model_config(const TrainConfig& config, std::span<const ModalitySpec> modalities,
                              std::size_t num_actions);

struct StageOptions {
  std::string name;  // e.g. "scp/rgb"; also keys the random streams
  std::size_t epochs = 0;
  UnrollMode mode = UnrollMode::anticipation;
  Task task = Task::anticipation;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double clip_norm = 5.0;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  std::size_t grad_shards = 1;
  std::size_t jobs = 1;
  bool freeze_branches = false;
};

StageOptions stage_options(const TrainConfig& config, std::string name, std::size_t epochs,
                           UnrollMode mode);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::vector<double> val_top1;  // action accuracy per prediction step
  std::vector<double> val_top5;
  double selection_metric = 0.0;
  double seconds = 0.0;  // wall time; kept out of the CSV log
};

struct TrainLog {
  std::string stage;
  Task task = Task::anticipation;
  TimelineSpec spec;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 0: no epoch ran, the initial model is kept
  double best_metric = 0.0;
  std::string checkpoint;  // selected checkpoint file, when saved

  std::string csv() const;
  nlohmann::json summary() const;
};

// Earliest 1-based index of the maximum. Throws on an empty sequence.
std::size_t early_stop_select(std::span<const double> metrics);

// Top-5 action accuracy at tau_a = 1 s, or for early recognition the mean
// Top-1 action accuracy over observation rates.
double selection_metric(const EpochRecord& record, const TimelineSpec& spec, Task task);

// Mean loss and per-step accuracy of the model on a dataset (eval phase).
struct Evaluation {
  double loss = 0.0;
  std::vector<double> top1;
  std::vector<double> top5;
};
Evaluation evaluate(const FusionModel& model, const Dataset& data, UnrollMode mode,
                    std::size_t jobs = 1);

// Eval-phase predictions of every sample.
std::vector<EvalRecord> predict(const FusionModel& model, const Dataset& data,
                                UnrollMode mode = UnrollMode::anticipation, std::size_t jobs = 1);

// Trains in place with SGD and momentum, validating after every epoch, and
// leaves the model at the selected epoch. Throws DivergenceError on a
// non-finite loss. An empty `val` selects on training loss instead.
TrainLog train_stage(FusionModel& model, const Dataset& train, const Dataset& val,
                     const StageOptions& options);

// Copy of the dataset restricted to the named modalities, in that order.
Dataset select_modalities(const Dataset& data, std::span<const std::string> names);

TrainLog train_branch_scp(FusionModel& branch, const Dataset& train, const Dataset& val,
                          const TrainConfig& config);
TrainLog train_branch_anticipation(FusionModel& branch, const Dataset& train, const Dataset& val,
                                   const TrainConfig& config);
TrainLog train_fusion(FusionModel& model, const Dataset& train, const Dataset& val,
                      const TrainConfig& config);

// Fused model whose branches are copied from single-branch models, matched
// by modality name; attention is freshly initialized from rng.
FusionModel assemble(const ModelConfig& config, std::span<const FusionModel> branches, Rng& rng,
                     bool zero_attention_output);

// Vocabulary, modalities and both splits loaded for a training config.
struct TrainingData {
  Vocabulary vocabulary;
  std::vector<ModalitySpec> modalities;
  Dataset train;
  Dataset val;

  static TrainingData load(const TrainConfig& config, const DataDirectory& dir);
  std::size_t num_actions() const { return vocabulary.num_actions(); }
};

enum class BranchStage { scp, branch };

struct StageRun {
  FusionModel model;
  TrainLog log;
};

// Stages exchange checkpoints through out_dir:
//   scp_<branch>.ruck     pre-trained branch
//   branch_<branch>.ruck  fine-tuned branch (needs the scp checkpoint when
//                         pre-training is on)
//   fusion.ruck           fused model (needs every branch checkpoint)
// Each stage also writes <stage>.csv and <stage>.json. Branches are named
// after modalities; early fusion has one branch named "rgb+flow+..." and no
// fusion stage.
std::vector<std::string> branch_names(const TrainConfig& config, const TrainingData& data);
StageRun run_branch_stage(const TrainConfig& config, const TrainingData& data, BranchStage stage,
                          const std::string& branch, const std::filesystem::path& out_dir);
StageRun run_fusion_stage(const TrainConfig& config, const TrainingData& data,
                          const std::filesystem::path& out_dir);

struct PipelineResult {
  FusionModel model;
  std::vector<TrainLog> logs;
  MetricsReport validation;
};

// Every stage in order; the final model is also written to model.ruck.
PipelineResult run_pipeline(const TrainConfig& config, const TrainingData& data,
                            const std::filesystem::path& out_dir);

// Paired runs with and without pre-training for each seed.
struct AblationRow {
  std::uint64_t seed = 0;
  double with_scp = 0.0;  // validation Top-5 action accuracy at 1 s
  double without_scp = 0.0;
};

struct AblationTable {
  std::vector<AblationRow> rows;
  double mean_difference() const;
  std::string csv() const;
};

// Runs land in out_dir/seed<k>/{scp,noscp}.
AblationTable run_scp_ablation(const TrainConfig& config, const TrainingData& data,
                               std::span<const std::uint64_t> seeds,
                               const std::filesystem::path& out_dir);

}  // namespace rulstm

#endif  // RULSTM_TRAINING_HPP_
