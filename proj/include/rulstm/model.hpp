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


#ifndef RULSTM_MODEL_HPP_
#define RULSTM_MODEL_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rulstm/nn.hpp"
#include "rulstm/rng.hpp"
#include "rulstm/tensor.hpp"
#include "rulstm/timeline.hpp"
#include "rulstm/vocabulary.hpp"

namespace rulstm {

enum class FusionStrategy { early, late, matt };

// rolling_unrolling is the full two-LSTM branch. single_lstm predicts from
// the rolling LSTM's hidden state directly and serves as the baseline.
enum class BranchArchitecture { rolling_unrolling, single_lstm };

// anticipation: the unrolling LSTM iterates on the current snippet.
// sequence_completion: iteration j reads snippet t + j - 1 (pre-training).
enum class UnrollMode { anticipation, sequence_completion };

std::string_view to_string(FusionStrategy s);
std::string_view to_string(BranchArchitecture a);
std::string_view to_string(UnrollMode m);
FusionStrategy parse_fusion(std::string_view s);
BranchArchitecture parse_architecture(std::string_view s);

struct ModalitySpec {
  std::string name;
  std::size_t dim = 0;

  bool operator==(const ModalitySpec&) const = default;
};

struct ModelDropout {
  double lstm_input = 0.8;   // inputs of both LSTMs
  double head_input = 0.8;   // input of the score layer
  double attention = 0.8;    // inputs of the 2nd and 3rd attention layers
  bool resample_per_step = true;

  bool operator==(const ModelDropout&) const = default;
};

struct ModelConfig {
  std::vector<ModalitySpec> modalities;
  std::size_t hidden = 1024;
  std::size_t num_actions = 0;
  TimelineSpec timeline;
  FusionStrategy fusion = FusionStrategy::matt;
  BranchArchitecture architecture = BranchArchitecture::rolling_unrolling;
  std::vector<double> late_weights;  // empty means uniform
  ModelDropout dropout;
  std::string vocabulary;  // path of the vocabulary file, informational

  void validate() const;

  // Early fusion runs one branch over the concatenated features.
  std::size_t num_branches() const;
  std::vector<std::size_t> branch_input_dims() const;
  std::vector<std::string> branch_names() const;
  // Fixed late-fusion weights, resolved to uniform when unset.
  std::vector<double> resolved_late_weights() const;
  // {M*2H, M*2H/4, M*2H/8, M}
  std::vector<std::size_t> attention_sizes() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);

  bool operator==(const ModelConfig&) const = default;
};

struct BranchParams {
  std::string name;  // label only, not a parameter
  LstmCell rolling;
  LstmCell unrolling;  // empty for single_lstm
  Linear head;
};

template <class B, class F>
  requires std::is_same_v<std::remove_const_t<B>, BranchParams>
void for_each_block(B& branch, const std::string& prefix, F&& f) {
  for_each_block(branch.rolling, prefix + "rolling.", f);
  if (!branch.unrolling.weight.empty()) for_each_block(branch.unrolling, prefix + "unrolling.", f);
  for_each_block(branch.head, prefix + "head.", f);
}

struct ModelParams {
  std::vector<BranchParams> branches;
  Mlp attention;  // empty unless fusion is matt
};

template <class P, class F>
  requires std::is_same_v<std::remove_const_t<P>, ModelParams>
void for_each_block(P& params, const std::string& prefix, F&& f) {
  for (auto& b : params.branches) for_each_block(b, prefix + b.name + ".", f);
  if (!params.attention.empty()) for_each_block(params.attention, prefix + "attention.", f);
}

struct FusionModel {
  ModelConfig config;
  ModelParams params;

  // Glorot-initialized weights drawn from rng in block order.
  static FusionModel initialize(const ModelConfig& config, Rng& rng);
};

BranchParams initialize_branch(const ModelConfig& config, std::size_t branch, Rng& rng);

struct ForwardOptions {
  UnrollMode mode = UnrollMode::anticipation;
  Phase phase = Phase::eval;
  Rng* rng = nullptr;  // required in the train phase
};

struct BranchTape {
  std::vector<LstmStepTape> rolling;
  std::vector<std::vector<LstmStepTape>> unrolling;  // per anticipation step
  std::vector<Vector> head_inputs;                   // after dropout
  std::vector<Vector> head_masks;                    // empty when no dropout
};

struct BranchOutput {
  std::vector<Vector> scores;              // per anticipation step
  std::vector<LstmState> rolling_states;   // after each of the S steps
};

// One modality branch over an S x D feature matrix.
BranchOutput branch_forward(const BranchParams& branch, const ModelConfig& config,
                            const Matrix& features, const ForwardOptions& options,
                            BranchTape* tape = nullptr);

// dscores: per anticipation step. drolling: gradients w.r.t. rolling_states
// (S entries) or empty. Parameter gradients accumulate into grads.
void branch_backward(const BranchParams& branch, const ModelConfig& config, const BranchTape& tape,
                     std::span<const Vector> dscores, std::span<const LstmState> drolling,
                     BranchParams& grads);

struct PredictionTimeline {
  TimelineSpec spec;
  std::vector<Vector> fused;                       // [step][action]
  std::vector<std::vector<Vector>> branch_scores;  // [step][branch][action]
  std::vector<Vector> weights;                     // [step][branch]

  std::size_t num_steps() const { return fused.size(); }
  int step(std::size_t i) const { return spec.first_anticipation_step() + static_cast<int>(i); }
  double anticipation_time(std::size_t i) const;
};

struct ModelTape {
  std::vector<BranchTape> branches;
  std::vector<MlpTape> attention;  // per anticipation step
  std::vector<BranchOutput> outputs;
};

// Combines branch outputs into fused scores. late: fixed weights. matt:
// per-step weights from the attention MLP over the concatenated rolling
// states. early: the single branch passes through with weight 1.
PredictionTimeline fuse(const FusionModel& model, std::span<const BranchOutput> outputs,
                        const ForwardOptions& options, std::vector<MlpTape>* attention_tape = nullptr);

// features: one S x D_m matrix per modality, in config order.
PredictionTimeline forward(const FusionModel& model, std::span<const Matrix> features,
                           const ForwardOptions& options, ModelTape* tape = nullptr);

// dfused: gradient of the loss w.r.t. the fused scores of every step.
void backward(const FusionModel& model, const ModelTape& tape, const PredictionTimeline& timeline,
              std::span<const Vector> dfused, ModelParams& grads);

// Mean over prediction steps of -log softmax(s_t)[label].
double anticipation_loss(const PredictionTimeline& timeline, std::size_t label);
std::vector<Vector> anticipation_loss_gradient(const PredictionTimeline& timeline,
                                               std::size_t label);

// Eval-mode forward of a model configured with s_enc = 0 and s_ant = N over
// N snippets of the action itself; prediction i sees (i+1)/N of the action.
PredictionTimeline early_recognition_forward(const FusionModel& model,
                                             std::span<const Matrix> features);

struct Marginals {
  Vector verbs;
  Vector nouns;
};

// Verb and noun probabilities by summing the probabilities of the actions
// that share them.
Marginals marginalize(std::span<const double> action_probs, const Vocabulary& vocab);

}  // namespace rulstm

#endif  // RULSTM_MODEL_HPP_
