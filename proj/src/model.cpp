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


#include "rulstm/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rulstm/errors.hpp"

namespace rulstm {

using nlohmann::json;

std::string_view to_string(FusionStrategy s) {
  switch (s) {
    case FusionStrategy::early: return "early";
    case FusionStrategy::late: return "late";
    case FusionStrategy::matt: return "matt";
  }
  return "?";
}

std::string_view to_string(BranchArchitecture a) {
  switch (a) {
    case BranchArchitecture::rolling_unrolling: return "rolling_unrolling";
    case BranchArchitecture::single_lstm: return "single_lstm";
  }
  return "?";
}

std::string_view to_string(UnrollMode m) {
  switch (m) {
    case UnrollMode::anticipation: return "anticipation";
    case UnrollMode::sequence_completion: return "sequence_completion";
  }
  return "?";
}

FusionStrategy parse_fusion(std::string_view s) {
  if (s == "early") return FusionStrategy::early;
  if (s == "late") return FusionStrategy::late;
  if (s == "matt") return FusionStrategy::matt;
  throw ConfigError("fusion must be one of early|late|matt, got '" + std::string(s) + "'");
}

BranchArchitecture parse_architecture(std::string_view s) {
  if (s == "rolling_unrolling" || s == "ru") return BranchArchitecture::rolling_unrolling;
  if (s == "single_lstm" || s == "baseline") return BranchArchitecture::single_lstm;
  throw ConfigError("architecture must be rolling_unrolling|single_lstm, got '" +
                    std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// ModelConfig

void ModelConfig::validate() const {
  if (modalities.empty()) throw ConfigError("model.modalities must not be empty");
  for (const auto& m : modalities) {
    if (m.dim == 0) throw ConfigError("model.modalities[" + m.name + "].dim must be > 0");
  }
  if (hidden == 0) throw ConfigError("model.hidden must be > 0");
  if (num_actions == 0) throw ConfigError("model.num_actions must be > 0");
  timeline.validate();
  if (!late_weights.empty()) {
    if (late_weights.size() != num_branches()) {
      throw ConfigError("model.late_weights must have one entry per branch");
    }
    const double total = std::accumulate(late_weights.begin(), late_weights.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("model.late_weights must sum to 1");
  }
  for (double p : {dropout.lstm_input, dropout.head_input, dropout.attention}) {
    if (!(p >= 0.0 && p < 1.0)) throw ConfigError("model.dropout values must lie in [0, 1)");
  }
}

std::size_t ModelConfig::num_branches() const {
  return fusion == FusionStrategy::early ? 1 : modalities.size();
}

std::vector<std::size_t> ModelConfig::branch_input_dims() const {
  if (fusion == FusionStrategy::early) {
    std::size_t total = 0;
    for (const auto& m : modalities) total += m.dim;
    return {total};
  }
  std::vector<std::size_t> dims;
  for (const auto& m : modalities) dims.push_back(m.dim);
  return dims;
}

std::vector<std::string> ModelConfig::branch_names() const {
  std::vector<std::string> names;
  if (fusion == FusionStrategy::early) {
    std::string joined;
    for (const auto& m : modalities) joined += (joined.empty() ? "" : "+") + m.name;
    names.push_back(joined);
    return names;
  }
  for (const auto& m : modalities) names.push_back(m.name);
  return names;
}

std::vector<double> ModelConfig::resolved_late_weights() const {
  if (!late_weights.empty()) return late_weights;
  const std::size_t m = num_branches();
  return std::vector<double>(m, 1.0 / static_cast<double>(m));
}

std::vector<std::size_t> ModelConfig::attention_sizes() const {
  const std::size_t in = num_branches() * 2 * hidden;
  return {in, std::max<std::size_t>(1, in / 4), std::max<std::size_t>(1, in / 8), num_branches()};
}

json ModelConfig::to_json() const {
  json mods = json::array();
  for (const auto& m : modalities) mods.push_back({{"name", m.name}, {"dim", m.dim}});
  return {{"modalities", mods},
          {"hidden", hidden},
          {"num_actions", num_actions},
          {"timeline", {{"alpha", timeline.alpha}, {"s_enc", timeline.s_enc}, {"s_ant", timeline.s_ant}}},
          {"fusion", to_string(fusion)},
          {"architecture", to_string(architecture)},
          {"late_weights", late_weights},
          {"dropout",
           {{"lstm_input", dropout.lstm_input},
            {"head_input", dropout.head_input},
            {"attention", dropout.attention},
            {"resample_per_step", dropout.resample_per_step}}},
          {"vocabulary", vocabulary}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  try {
    for (const auto& m : j.at("modalities")) {
      c.modalities.push_back({m.at("name").get<std::string>(), m.at("dim").get<std::size_t>()});
    }
    c.hidden = j.value("hidden", c.hidden);
    c.num_actions = j.at("num_actions").get<std::size_t>();
    if (j.contains("timeline")) {
      const auto& t = j.at("timeline");
      c.timeline.alpha = t.value("alpha", c.timeline.alpha);
      c.timeline.s_enc = t.value("s_enc", c.timeline.s_enc);
      c.timeline.s_ant = t.value("s_ant", c.timeline.s_ant);
    }
    c.fusion = parse_fusion(j.value("fusion", std::string(to_string(c.fusion))));
    c.architecture =
        parse_architecture(j.value("architecture", std::string(to_string(c.architecture))));
    c.late_weights = j.value("late_weights", std::vector<double>{});
    if (j.contains("dropout")) {
      const auto& d = j.at("dropout");
      c.dropout.lstm_input = d.value("lstm_input", c.dropout.lstm_input);
      c.dropout.head_input = d.value("head_input", c.dropout.head_input);
      c.dropout.attention = d.value("attention", c.dropout.attention);
      c.dropout.resample_per_step = d.value("resample_per_step", c.dropout.resample_per_step);
    }
    c.vocabulary = j.value("vocabulary", std::string{});
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model description: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Initialization

BranchParams initialize_branch(const ModelConfig& config, std::size_t branch, Rng& rng) {
  const auto dims = config.branch_input_dims();
  BranchParams b;
  b.name = config.branch_names().at(branch);
  b.rolling = LstmCell::initialized(dims.at(branch), config.hidden, rng);
  if (config.architecture == BranchArchitecture::rolling_unrolling) {
    // The unrolling LSTM reads the same features as the rolling one.
    b.unrolling = LstmCell::initialized(dims.at(branch), config.hidden, rng);
  }
  b.head = Linear::initialized(config.hidden, config.num_actions, rng);
  return b;
}

FusionModel FusionModel::initialize(const ModelConfig& config, Rng& rng) {
  config.validate();
  FusionModel model{config, {}};
  for (std::size_t b = 0; b < config.num_branches(); ++b) {
    model.params.branches.push_back(initialize_branch(config, b, rng));
  }
  if (config.fusion == FusionStrategy::matt) {
    const auto sizes = config.attention_sizes();
    model.params.attention = Mlp::initialized(sizes, rng);
  }
  return model;
}

// ---------------------------------------------------------------------------
// Branch

namespace {

void check_features(const ModelConfig& config, const Matrix& features, std::size_t dim) {
  const auto rows = static_cast<std::size_t>(config.timeline.total_steps());
  if (features.rows() != rows) {
    throw ShapeError("branch_forward: expected " + std::to_string(rows) + " feature rows, got " +
                     std::to_string(features.rows()));
  }
  if (features.cols() != dim) {
    throw ShapeError("branch_forward: expected feature dim " + std::to_string(dim) + ", got " +
                     std::to_string(features.cols()));
  }
}

// Input dropout helper. With resample_per_step every call draws a fresh mask;
// otherwise the mask drawn on first use is reused for the whole sequence.
class InputDropout {
 public:
  InputDropout(double p, bool resample, std::size_t dim, const ForwardOptions& options)
      : spec_{p}, resample_(resample), dim_(dim),
        active_(options.phase == Phase::train && p > 0.0), rng_(options.rng) {
    if (active_ && rng_ == nullptr) throw std::invalid_argument("train-phase forward needs an rng");
  }

  Vector apply(std::span<const double> x) {
    Vector out(x.begin(), x.end());
    if (!active_) return out;
    if (resample_ || fixed_.empty()) {
      Vector mask = dropout_mask(spec_, dim_, *rng_);
      if (!resample_) fixed_ = mask;
      for (std::size_t k = 0; k < out.size(); ++k) out[k] *= mask[k];
      return out;
    }
    for (std::size_t k = 0; k < out.size(); ++k) out[k] *= fixed_[k];
    return out;
  }

 private:
  DropoutSpec spec_;
  bool resample_;
  std::size_t dim_;
  bool active_;
  Rng* rng_;
  Vector fixed_;
};

}  // namespace

BranchOutput branch_forward(const BranchParams& branch, const ModelConfig& config,
                            const Matrix& features, const ForwardOptions& options,
                            BranchTape* tape) {
  const std::size_t dim = branch.rolling.input_dim();
  check_features(config, features, dim);
  const TimelineSpec& spec = config.timeline;
  const int total = spec.total_steps();
  const bool unroll = config.architecture == BranchArchitecture::rolling_unrolling;
  if (unroll && branch.unrolling.weight.empty()) {
    throw ShapeError("branch_forward: rolling_unrolling branch without unrolling LSTM");
  }

  InputDropout rolling_drop(config.dropout.lstm_input, config.dropout.resample_per_step, dim,
                            options);
  InputDropout unrolling_drop(config.dropout.lstm_input, config.dropout.resample_per_step, dim,
                              options);
  const bool head_dropout = options.phase == Phase::train && config.dropout.head_input > 0.0;

  if (tape != nullptr) *tape = BranchTape{};
  BranchOutput out;
  LstmState state = LstmState::zeros(config.hidden);
  for (int t = 1; t <= total; ++t) {
    const Vector x = rolling_drop.apply(features.row(static_cast<std::size_t>(t - 1)));
    LstmStepTape* step_tape = nullptr;
    if (tape != nullptr) step_tape = &tape->rolling.emplace_back();
    state = lstm_step(branch.rolling, x, state, step_tape);
    out.rolling_states.push_back(state);
  }

  for (int t = spec.first_anticipation_step(); t <= total; ++t) {
    const LstmState& seed = out.rolling_states[static_cast<std::size_t>(t - 1)];
    Vector summary;
    if (unroll) {
      const int n = unroll_count(spec, t);
      std::vector<LstmStepTape>* unroll_tape = nullptr;
      if (tape != nullptr) unroll_tape = &tape->unrolling.emplace_back();
      LstmState u = seed;
      for (int j = 1; j <= n; ++j) {
        const int row = options.mode == UnrollMode::anticipation ? t : t + j - 1;
        const Vector x = unrolling_drop.apply(features.row(static_cast<std::size_t>(row - 1)));
        LstmStepTape* step_tape = unroll_tape != nullptr ? &unroll_tape->emplace_back() : nullptr;
        u = lstm_step(branch.unrolling, x, u, step_tape);
      }
      summary = std::move(u.h);
    } else {
      summary = seed.h;
    }
    Vector mask;
    if (head_dropout) {
      mask = dropout_mask(DropoutSpec{config.dropout.head_input}, summary.size(), *options.rng);
      for (std::size_t k = 0; k < summary.size(); ++k) summary[k] *= mask[k];
    }
    out.scores.push_back(linear_forward(branch.head, summary));
    if (tape != nullptr) {
      tape->head_inputs.push_back(std::move(summary));
      tape->head_masks.push_back(std::move(mask));
    }
  }
  return out;
}

void branch_backward(const BranchParams& branch, const ModelConfig& config, const BranchTape& tape,
                     std::span<const Vector> dscores, std::span<const LstmState> drolling,
                     BranchParams& grads) {
  const TimelineSpec& spec = config.timeline;
  const auto total = static_cast<std::size_t>(spec.total_steps());
  const auto steps = static_cast<std::size_t>(spec.s_ant);
  if (tape.rolling.size() != total || tape.head_inputs.size() != steps) {
    throw ShapeError("branch_backward: tape does not match the timeline");
  }
  if (dscores.size() != steps) throw ShapeError("branch_backward: expected one gradient per step");
  if (!drolling.empty() && drolling.size() != total) {
    throw ShapeError("branch_backward: rolling-state gradient count mismatch");
  }
  const std::size_t hidden = config.hidden;
  const bool unroll = config.architecture == BranchArchitecture::rolling_unrolling;

  std::vector<Vector> dh_roll(total, Vector(hidden, 0.0));
  std::vector<Vector> dc_roll(total, Vector(hidden, 0.0));
  for (std::size_t t = 0; t < drolling.size(); ++t) {
    dh_roll[t] = drolling[t].h;
    dc_roll[t] = drolling[t].c;
  }

  for (std::size_t i = 0; i < steps; ++i) {
    const std::size_t t_index = static_cast<std::size_t>(spec.s_enc) + i;
    Vector dsummary(hidden, 0.0);
    linear_backward(branch.head, tape.head_inputs[i], dscores[i], grads.head, dsummary);
    if (!tape.head_masks[i].empty()) {
      for (std::size_t k = 0; k < hidden; ++k) dsummary[k] *= tape.head_masks[i][k];
    }
    if (unroll) {
      const auto& iterations = tape.unrolling[i];
      Vector dh = std::move(dsummary);
      Vector dc(hidden, 0.0);
      LstmState dprev;
      for (std::size_t j = iterations.size(); j-- > 0;) {
        lstm_backward(branch.unrolling, iterations[j], dh, dc, grads.unrolling, dprev);
        dh = std::move(dprev.h);
        dc = std::move(dprev.c);
      }
      for (std::size_t k = 0; k < hidden; ++k) {
        dh_roll[t_index][k] += dh[k];
        dc_roll[t_index][k] += dc[k];
      }
    } else {
      for (std::size_t k = 0; k < hidden; ++k) dh_roll[t_index][k] += dsummary[k];
    }
  }

  Vector dh_next(hidden, 0.0);
  Vector dc_next(hidden, 0.0);
  LstmState dprev;
  for (std::size_t t = total; t-- > 0;) {
    for (std::size_t k = 0; k < hidden; ++k) {
      dh_next[k] += dh_roll[t][k];
      dc_next[k] += dc_roll[t][k];
    }
    lstm_backward(branch.rolling, tape.rolling[t], dh_next, dc_next, grads.rolling, dprev);
    dh_next = std::move(dprev.h);
    dc_next = std::move(dprev.c);
  }
}

// ---------------------------------------------------------------------------
// Fusion

double PredictionTimeline::anticipation_time(std::size_t i) const {
  return rulstm::anticipation_time(spec, step(i));
}

namespace {

Vector attention_input(std::span<const BranchOutput> outputs, std::size_t t_index,
                       std::size_t hidden) {
  Vector z;
  z.reserve(outputs.size() * 2 * hidden);
  for (const auto& o : outputs) {
    const auto& s = o.rolling_states[t_index];
    z.insert(z.end(), s.h.begin(), s.h.end());
    z.insert(z.end(), s.c.begin(), s.c.end());
  }
  return z;
}

}  // namespace

PredictionTimeline fuse(const FusionModel& model, std::span<const BranchOutput> outputs,
                        const ForwardOptions& options, std::vector<MlpTape>* attention_tape) {
  const ModelConfig& config = model.config;
  const std::size_t m = config.num_branches();
  if (outputs.size() != m) throw ShapeError("fuse: expected one output per branch");
  const auto steps = static_cast<std::size_t>(config.timeline.s_ant);
  for (const auto& o : outputs) {
    if (o.scores.size() != steps) throw ShapeError("fuse: branches disagree on prediction steps");
  }
  if (config.fusion == FusionStrategy::matt && model.params.attention.empty()) {
    throw ShapeError("fuse: matt fusion without attention parameters");
  }

  PredictionTimeline timeline;
  timeline.spec = config.timeline;
  const std::vector<double> fixed = config.fusion == FusionStrategy::matt
                                        ? std::vector<double>{}
                                        : config.resolved_late_weights();
  Rng* attention_rng = options.phase == Phase::train ? options.rng : nullptr;
  if (attention_tape != nullptr) attention_tape->clear();

  for (std::size_t i = 0; i < steps; ++i) {
    Vector weights;
    if (config.fusion == FusionStrategy::matt) {
      const std::size_t t_index = static_cast<std::size_t>(config.timeline.s_enc) + i;
      const Vector z = attention_input(outputs, t_index, config.hidden);
      MlpTape* tape = attention_tape != nullptr ? &attention_tape->emplace_back() : nullptr;
      const Vector lambda = mlp_forward(model.params.attention, z,
                                        DropoutSpec{config.dropout.attention}, attention_rng, tape);
      weights = softmax(lambda);
    } else {
      weights = fixed;
    }
    Vector fused(config.num_actions, 0.0);
    std::vector<Vector> per_branch;
    for (std::size_t b = 0; b < m; ++b) {
      const Vector& s = outputs[b].scores[i];
      for (std::size_t k = 0; k < fused.size(); ++k) fused[k] += weights[b] * s[k];
      per_branch.push_back(s);
    }
    timeline.fused.push_back(std::move(fused));
    timeline.branch_scores.push_back(std::move(per_branch));
    timeline.weights.push_back(std::move(weights));
  }
  return timeline;
}

namespace {

Matrix concatenate_columns(std::span<const Matrix> parts) {
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeError("early fusion: modalities disagree on row count");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    auto dst = out.row(r).begin();
    for (const auto& p : parts) dst = std::copy(p.row(r).begin(), p.row(r).end(), dst);
  }
  return out;
}

}  // namespace

PredictionTimeline forward(const FusionModel& model, std::span<const Matrix> features,
                           const ForwardOptions& options, ModelTape* tape) {
  const ModelConfig& config = model.config;
  if (features.size() != config.modalities.size()) {
    throw ShapeError("forward: expected " + std::to_string(config.modalities.size()) +
                     " modality feature matrices, got " + std::to_string(features.size()));
  }
  std::vector<BranchOutput> outputs;
  std::vector<BranchTape> branch_tapes(model.params.branches.size());
  if (config.fusion == FusionStrategy::early) {
    const Matrix joined = concatenate_columns(features);
    outputs.push_back(branch_forward(model.params.branches[0], config, joined, options,
                                     tape != nullptr ? &branch_tapes[0] : nullptr));
  } else {
    for (std::size_t b = 0; b < model.params.branches.size(); ++b) {
      outputs.push_back(branch_forward(model.params.branches[b], config, features[b], options,
                                       tape != nullptr ? &branch_tapes[b] : nullptr));
    }
  }
  std::vector<MlpTape> attention;
  PredictionTimeline timeline =
      fuse(model, outputs, options, tape != nullptr ? &attention : nullptr);
  if (tape != nullptr) {
    tape->branches = std::move(branch_tapes);
    tape->attention = std::move(attention);
    tape->outputs = std::move(outputs);
  }
  return timeline;
}

void backward(const FusionModel& model, const ModelTape& tape, const PredictionTimeline& timeline,
              std::span<const Vector> dfused, ModelParams& grads) {
  const ModelConfig& config = model.config;
  const std::size_t m = config.num_branches();
  const auto steps = static_cast<std::size_t>(config.timeline.s_ant);
  const auto total = static_cast<std::size_t>(config.timeline.total_steps());
  const std::size_t hidden = config.hidden;
  if (dfused.size() != steps || timeline.num_steps() != steps) {
    throw ShapeError("backward: gradient/timeline step count mismatch");
  }
  if (grads.branches.size() != m) throw ShapeError("backward: gradient container mismatch");

  std::vector<std::vector<Vector>> dscores(m, std::vector<Vector>(steps));
  std::vector<std::vector<LstmState>> drolling;
  const bool matt = config.fusion == FusionStrategy::matt;
  if (matt) drolling.assign(m, std::vector<LstmState>(total, LstmState::zeros(hidden)));

  for (std::size_t i = 0; i < steps; ++i) {
    const Vector& w = timeline.weights[i];
    const Vector& ds = dfused[i];
    for (std::size_t b = 0; b < m; ++b) {
      Vector g(ds.size());
      for (std::size_t k = 0; k < ds.size(); ++k) g[k] = w[b] * ds[k];
      dscores[b][i] = std::move(g);
    }
    if (!matt) continue;
    // Softmax Jacobian: dlambda = w * (dw - <w, dw>).
    Vector dw(m);
    for (std::size_t b = 0; b < m; ++b) dw[b] = dot(ds, timeline.branch_scores[i][b]);
    const double mean = dot(w, dw);
    Vector dlambda(m);
    for (std::size_t b = 0; b < m; ++b) dlambda[b] = w[b] * (dw[b] - mean);
    Vector dz(m * 2 * hidden, 0.0);
    mlp_backward(model.params.attention, tape.attention[i], dlambda, grads.attention, dz);
    const std::size_t t_index = static_cast<std::size_t>(config.timeline.s_enc) + i;
    for (std::size_t b = 0; b < m; ++b) {
      auto& d = drolling[b][t_index];
      const std::size_t offset = b * 2 * hidden;
      for (std::size_t k = 0; k < hidden; ++k) {
        d.h[k] += dz[offset + k];
        d.c[k] += dz[offset + hidden + k];
      }
    }
  }

  for (std::size_t b = 0; b < m; ++b) {
    std::span<const LstmState> dr;
    if (matt) dr = drolling[b];
    branch_backward(model.params.branches[b], config, tape.branches[b], dscores[b], dr,
                    grads.branches[b]);
  }
}

// ---------------------------------------------------------------------------

double anticipation_loss(const PredictionTimeline& timeline, std::size_t label) {
  if (timeline.fused.empty()) throw ShapeError("anticipation_loss: empty timeline");
  double total = 0.0;
  for (const auto& s : timeline.fused) {
    if (label >= s.size()) {
      throw std::out_of_range("anticipation_loss: label " + std::to_string(label) +
                              " out of range for " + std::to_string(s.size()) + " classes");
    }
    total -= log_softmax(s)[label];
  }
  return total / static_cast<double>(timeline.fused.size());
}

std::vector<Vector> anticipation_loss_gradient(const PredictionTimeline& timeline,
                                               std::size_t label) {
  if (timeline.fused.empty()) throw ShapeError("anticipation_loss: empty timeline");
  const double scale = 1.0 / static_cast<double>(timeline.fused.size());
  std::vector<Vector> grads;
  for (const auto& s : timeline.fused) {
    if (label >= s.size()) throw std::out_of_range("anticipation_loss: label out of range");
    Vector g = softmax(s);
    g[label] -= 1.0;
    for (double& v : g) v *= scale;
    grads.push_back(std::move(g));
  }
  return grads;
}

PredictionTimeline early_recognition_forward(const FusionModel& model,
                                             std::span<const Matrix> features) {
  const TimelineSpec& spec = model.config.timeline;
  if (spec.s_enc != 0) throw ConfigError("early recognition needs timeline.s_enc = 0");
  for (const auto& f : features) {
    if (f.rows() == 0) throw ShapeError("early recognition: empty snippet sequence");
    if (f.rows() != static_cast<std::size_t>(spec.s_ant)) {
      throw ShapeError("early recognition: expected " + std::to_string(spec.s_ant) +
                       " snippets, got " + std::to_string(f.rows()));
    }
  }
  return forward(model, features, ForwardOptions{});
}

Marginals marginalize(std::span<const double> action_probs, const Vocabulary& vocab) {
  if (action_probs.size() != vocab.num_actions()) {
    throw ShapeError("marginalize: " + std::to_string(action_probs.size()) +
                     " probabilities for " + std::to_string(vocab.num_actions()) + " actions");
  }
  Marginals out{Vector(vocab.verbs.size(), 0.0), Vector(vocab.nouns.size(), 0.0)};
  for (std::size_t a = 0; a < action_probs.size(); ++a) {
    const auto& act = vocab.actions[a];
    if (act.verb >= out.verbs.size() || act.noun >= out.nouns.size()) {
      throw ConfigError("marginalize: action " + std::to_string(a) + " is not mapped");
    }
    out.verbs[act.verb] += action_probs[a];
    out.nouns[act.noun] += action_probs[a];
  }
  return out;
}

}  // namespace rulstm
