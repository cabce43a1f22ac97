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


#include "rulstm/training.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>
#include <thread>

#include "binary.hpp"
#include "rulstm/errors.hpp"
#include "rulstm/model_io.hpp"

namespace rulstm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Stable 64-bit FNV-1a, used to key random streams by name.
std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Streams derived from the run seed.
enum Stream : std::uint64_t { kInit = 1, kShuffle, kDropout, kAttention };

std::string number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Runs fn(shard) for shards [0, n) on up to n threads.
template <class F>
void run_shards(std::size_t n, F&& fn) {
  if (n <= 1) {
    if (n == 1) fn(std::size_t{0});
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(n);
  for (std::size_t s = 0; s < n; ++s) {
    threads.emplace_back([&, s] {
      try {
        fn(s);
      } catch (...) {
        errors[s] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// [begin, end) of shard s when n items are split into `shards` parts.
std::pair<std::size_t, std::size_t> shard_range(std::size_t n, std::size_t shards, std::size_t s) {
  return {n * s / shards, n * (s + 1) / shards};
}

bool is_attention_block(const std::string& name) { return name.rfind("attention.", 0) == 0; }


std::string branch_stage_name(BranchStage stage, const std::string& branch) {
  return (stage == BranchStage::scp ? "scp_" : "branch_") + branch;
}

void save_stage(const fs::path& dir, const std::string& stage, const FusionModel& model,
                const SgdMomentum& optimizer, TrainLog& log, const TrainConfig& config) {
  fs::create_directories(dir);
  const fs::path ckpt = dir / (stage + ".ruck");
  log.checkpoint = ckpt.filename().string();
  const json training{{"stage", stage},
                      {"best_epoch", log.best_epoch},
                      {"epochs", log.epochs.size()},
                      {"config", config.to_json()}};
  save_model(ckpt, model, &optimizer, training);
  binary::write_file(dir / (stage + ".csv"), log.csv());
  binary::write_file(dir / (stage + ".json"), log.summary().dump(2) + "\n");
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void TrainConfig::validate() const {
  timeline.validate();
  if (task == Task::early_recognition && timeline.s_enc != 0) {
    throw ConfigError("train.timeline.s_enc must be 0 for early recognition");
  }
  std::set<std::string> seen;
  for (const auto& m : modalities) {
    if (m.empty()) throw ConfigError("train.modalities contains an empty name");
    if (!seen.insert(m).second) throw ConfigError("train.modalities repeats '" + m + "'");
  }
  if (hidden == 0) throw ConfigError("train.hidden must be positive");
  if (batch_size == 0) throw ConfigError("train.batch_size must be at least 1");
  if (grad_shards == 0) throw ConfigError("train.grad_shards must be at least 1");
  if (jobs == 0) throw ConfigError("train.jobs must be at least 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("train.learning_rate must be non-negative");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train.momentum must lie in [0, 1)");
  if (!std::isfinite(clip_norm)) throw ConfigError("train.clip_norm must be finite");
  for (double p : {dropout.lstm_input, dropout.head_input, dropout.attention}) {
    if (!(p >= 0.0 && p < 1.0)) throw ConfigError("train.dropout values must lie in [0, 1)");
  }
}

std::size_t TrainConfig::scp_epochs_for(const std::string& modality) const {
  if (task == Task::early_recognition) return early_recognition_epochs;
  const auto it = scp_epochs.find(modality);
  return it != scp_epochs.end() ? it->second : default_branch_epochs;
}

std::size_t TrainConfig::branch_epochs_for(const std::string& modality) const {
  if (task == Task::early_recognition) return early_recognition_epochs;
  const auto it = branch_epochs.find(modality);
  return it != branch_epochs.end() ? it->second : default_branch_epochs;
}

json TrainConfig::to_json() const {
  return json{{"task", to_string(task)},
              {"modalities", modalities},
              {"fusion", to_string(fusion)},
              {"architecture", to_string(architecture)},
              {"timeline", {{"alpha", timeline.alpha}, {"s_enc", timeline.s_enc}, {"s_ant", timeline.s_ant}}},
              {"hidden", hidden},
              {"dropout",
               {{"lstm_input", dropout.lstm_input},
                {"head_input", dropout.head_input},
                {"attention", dropout.attention},
                {"resample_per_step", dropout.resample_per_step}}},
              {"scp_epochs", scp_epochs},
              {"branch_epochs", branch_epochs},
              {"default_branch_epochs", default_branch_epochs},
              {"fusion_epochs", fusion_epochs},
              {"early_recognition_epochs", early_recognition_epochs},
              {"use_scp", use_scp},
              {"freeze_branches", freeze_branches},
              {"zero_attention_output", zero_attention_output},
              {"learning_rate", learning_rate},
              {"momentum", momentum},
              {"clip_norm", clip_norm},
              {"batch_size", batch_size},
              {"seed", seed},
              {"grad_shards", grad_shards}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("train: config must be a JSON object");
  TrainConfig c;
  const json defaults = c.to_json();
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) throw ConfigError("train." + key + " is not a known field");
  }
  auto get = [&j](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(field);
    } catch (const json::exception&) {
      throw ConfigError(std::string("train.") + key + " has the wrong type");
    }
  };
  if (j.contains("task")) c.task = parse_task(j.at("task").get<std::string>());
  if (j.contains("fusion")) c.fusion = parse_fusion(j.at("fusion").get<std::string>());
  if (j.contains("architecture")) {
    c.architecture = parse_architecture(j.at("architecture").get<std::string>());
  }
  get("modalities", c.modalities);
  get("hidden", c.hidden);
  get("scp_epochs", c.scp_epochs);
  get("branch_epochs", c.branch_epochs);
  get("default_branch_epochs", c.default_branch_epochs);
  get("fusion_epochs", c.fusion_epochs);
  get("early_recognition_epochs", c.early_recognition_epochs);
  get("use_scp", c.use_scp);
  get("freeze_branches", c.freeze_branches);
  get("zero_attention_output", c.zero_attention_output);
  get("learning_rate", c.learning_rate);
  get("momentum", c.momentum);
  get("clip_norm", c.clip_norm);
  get("batch_size", c.batch_size);
  get("seed", c.seed);
  get("grad_shards", c.grad_shards);
  try {
    if (j.contains("timeline")) {
      const auto& t = j.at("timeline");
      c.timeline.alpha = t.value("alpha", c.timeline.alpha);
      c.timeline.s_enc = t.value("s_enc", c.timeline.s_enc);
      c.timeline.s_ant = t.value("s_ant", c.timeline.s_ant);
    }
    if (j.contains("dropout")) {
      const auto& d = j.at("dropout");
      c.dropout.lstm_input = d.value("lstm_input", c.dropout.lstm_input);
      c.dropout.head_input = d.value("head_input", c.dropout.head_input);
      c.dropout.attention = d.value("attention", c.dropout.attention);
      c.dropout.resample_per_step = d.value("resample_per_step", c.dropout.resample_per_step);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  c.validate();
  return c;
}

ModelConfig make_model_config(const TrainConfig& config, std::span<const ModalitySpec> modalities,
                              std::size_t num_actions) {
  ModelConfig m;
  m.modalities.assign(modalities.begin(), modalities.end());
  m.hidden = config.hidden;
  m.num_actions = num_actions;
  m.timeline = config.timeline;
  m.fusion = modalities.size() == 1 && config.fusion != FusionStrategy::early ? FusionStrategy::late
                                                                            : config.fusion;
  m.architecture = config.architecture;
  m.dropout = config.dropout;
  m.validate();
  return m;
}

StageOptions stage_options(const TrainConfig& config, std::string name, std::size_t epochs,
                           UnrollMode mode) {
  StageOptions o;
  o.name = std::move(name);
  o.epochs = epochs;
  o.mode = mode;
  o.task = config.task;
  o.learning_rate = config.learning_rate;
  o.momentum = config.momentum;
  o.clip_norm = config.clip_norm;
  o.batch_size = config.batch_size;
  o.seed = config.seed;
  o.grad_shards = config.grad_shards;
  o.jobs = config.jobs;
  return o;
}

// ---------------------------------------------------------------------------
// Logs and selection

std::size_t early_stop_select(std::span<const double> metrics) {
  if (metrics.empty()) throw std::invalid_argument("early_stop_select: no validation metrics");
  std::size_t best = 0;
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    if (std::isnan(metrics[i])) throw std::invalid_argument("early_stop_select: missing metric");
    if (metrics[i] > metrics[best]) best = i;
  }
  return best + 1;
}

double selection_metric(const EpochRecord& record, const TimelineSpec& spec, Task task) {
  if (record.val_top5.empty()) return -record.train_loss;
  if (task == Task::early_recognition) {
    return std::accumulate(record.val_top1.begin(), record.val_top1.end(), 0.0) /
           static_cast<double>(record.val_top1.size());
  }
  const int step = step_for_anticipation_time(spec, 1.0);
  return record.val_top5.at(static_cast<std::size_t>(step - spec.first_anticipation_step()));
}

std::string TrainLog::csv() const {
  std::string out = "epoch,train_loss";
  const std::size_t steps = epochs.empty() ? 0 : epochs.front().val_top1.size();
  auto label = [&](std::size_t i) {
    if (task == Task::early_recognition) {
      return format_percent(100.0 * static_cast<double>(i + 1) / static_cast<double>(steps));
    }
    return format_percent(anticipation_time(spec, spec.first_anticipation_step() + static_cast<int>(i)));
  };
  for (std::size_t i = 0; i < steps; ++i) out += ",val_top1@" + label(i);
  for (std::size_t i = 0; i < steps; ++i) out += ",val_top5@" + label(i);
  out += ",selection,selected\n";
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch) + "," + number(e.train_loss);
    for (double v : e.val_top1) out += "," + number(v);
    for (double v : e.val_top5) out += "," + number(v);
    out += "," + number(e.selection_metric) + "," + (e.epoch == best_epoch ? "1" : "0") + "\n";
  }
  return out;
}

json TrainLog::summary() const {
  json losses = json::array();
  json metrics = json::array();
  for (const auto& e : epochs) {
    losses.push_back(e.train_loss);
    metrics.push_back(e.selection_metric);
  }
  return json{{"stage", stage},
              {"task", to_string(task)},
              {"epochs", epochs.size()},
              {"best_epoch", best_epoch},
              {"best_metric", best_metric},
              {"selection",
               task == Task::early_recognition ? "mean top1 action accuracy over observation rates"
                                               : "top5 action accuracy at 1s"},
              {"train_loss", losses},
              {"selection_metric", metrics},
              {"checkpoint", checkpoint}};
}

// ---------------------------------------------------------------------------
// Evaluation

Evaluation evaluate(const FusionModel& model, const Dataset& data, UnrollMode mode,
                    std::size_t jobs) {
  Evaluation ev;
  if (data.empty()) return ev;
  const std::size_t K = model.config.num_actions;
  const std::size_t k5 = std::min<std::size_t>(5, K);
  const std::size_t n = data.size();
  std::vector<double> losses(n);
  std::vector<std::vector<char>> hit1(n), hit5(n);
  ForwardOptions options;
  options.mode = mode;
  const std::size_t shards = std::clamp<std::size_t>(jobs, 1, n);
  run_shards(shards, [&](std::size_t shard) {
    const auto [lo, hi] = shard_range(n, shards, shard);
    for (std::size_t i = lo; i < hi; ++i) {
      const Sample& s = data.samples[i];
      const PredictionTimeline tl = forward(model, s.features, options);
      losses[i] = anticipation_loss(tl, s.record.action);
      for (const auto& scores : tl.fused) {
        hit1[i].push_back(topk_hit(scores, s.record.action, 1));
        hit5[i].push_back(topk_hit(scores, s.record.action, k5));
      }
    }
  });
  const std::size_t steps = hit1.front().size();
  ev.top1.assign(steps, 0.0);
  ev.top5.assign(steps, 0.0);
  for (std::size_t t = 0; t < steps; ++t) {
    std::size_t a = 0, b = 0;
    for (std::size_t i = 0; i < n; ++i) {
      a += hit1[i][t];
      b += hit5[i][t];
    }
    ev.top1[t] = 100.0 * static_cast<double>(a) / static_cast<double>(n);
    ev.top5[t] = 100.0 * static_cast<double>(b) / static_cast<double>(n);
  }
  for (double l : losses) ev.loss += l;
  ev.loss /= static_cast<double>(n);
  return ev;
}

std::vector<EvalRecord> predict(const FusionModel& model, const Dataset& data, UnrollMode mode,
                                std::size_t jobs) {
  const std::size_t n = data.size();
  std::vector<EvalRecord> out(n);
  if (n == 0) return out;
  ForwardOptions options;
  options.mode = mode;
  const std::size_t shards = std::clamp<std::size_t>(jobs, 1, n);
  run_shards(shards, [&](std::size_t shard) {
    const auto [lo, hi] = shard_range(n, shards, shard);
    for (std::size_t i = lo; i < hi; ++i) {
      const Sample& s = data.samples[i];
      out[i] = make_eval_record(s, forward(model, s.features, options), data.task);
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Stage loop

TrainLog train_stage(FusionModel& model, const Dataset& train, const Dataset& val,
                     const StageOptions& options) {
  if (train.empty()) throw ConfigError("training: empty training set for stage " + options.name);
  if (options.batch_size == 0) throw ConfigError("training: batch_size must be at least 1");
  if (options.grad_shards == 0) throw ConfigError("training: grad_shards must be at least 1");
  if (train.modalities.size() != model.config.modalities.size()) {
    throw ConfigError("training: stage " + options.name + " expects " +
                      std::to_string(model.config.modalities.size()) + " modalities, data has " +
                      std::to_string(train.modalities.size()));
  }
  for (std::size_t m = 0; m < train.modalities.size(); ++m) {
    if (train.modalities[m] != model.config.modalities[m].name) {
      throw ConfigError("training: modality mismatch, model has " + model.config.modalities[m].name +
                        " where data has " + train.modalities[m]);
    }
  }

  TrainLog log;
  log.stage = options.name;
  log.task = options.task;
  log.spec = model.config.timeline;

  const Rng base = Rng(options.seed).derive({fnv1a(options.name)});
  SgdMomentum optimizer;
  optimizer.learning_rate = options.learning_rate;
  optimizer.momentum = options.momentum;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  ModelParams best = model.params;

  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    Rng shuffler = base.derive({kShuffle, epoch});
    shuffler.shuffle(std::span(order));

    double loss_total = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += options.batch_size) {
      const std::size_t end = std::min(order.size(), begin + options.batch_size);
      const std::size_t count = end - begin;
      const std::size_t shards = std::min(options.grad_shards, count);
      std::vector<ModelParams> shard_grads(shards);
      std::vector<double> sample_loss(count);
      run_shards(shards, [&](std::size_t s) {
        shard_grads[s] = zeros_like(model.params);
        const auto [lo, hi] = shard_range(count, shards, s);
        for (std::size_t j = lo; j < hi; ++j) {
          const std::size_t position = begin + j;
          const Sample& sample = train.samples[order[position]];
          Rng dropout_rng = base.derive({kDropout, epoch, position});
          ForwardOptions fo{options.mode, Phase::train, &dropout_rng};
          ModelTape tape;
          const PredictionTimeline tl = forward(model, sample.features, fo, &tape);
          sample_loss[j] = anticipation_loss(tl, sample.record.action);
          if (!std::isfinite(sample_loss[j])) return;
          backward(model, tape, tl, anticipation_loss_gradient(tl, sample.record.action),
                   shard_grads[s]);
        }
      });
      double batch_loss = 0.0;
      for (std::size_t j = 0; j < count; ++j) {
        if (!std::isfinite(sample_loss[j])) {
          throw DivergenceError("training diverged in stage " + options.name + ": epoch " +
                                std::to_string(epoch) + ", sample " +
                                train.samples[order[begin + j]].id + " has loss " +
                                number(sample_loss[j]));
        }
        batch_loss += sample_loss[j];
      }
      loss_total += batch_loss;

      ModelParams& grads = shard_grads[0];
      for (std::size_t s = 1; s < shards; ++s) add_scaled(grads, shard_grads[s], 1.0);
      scale_blocks(grads, 1.0 / static_cast<double>(count));
      if (!std::isfinite(global_norm(grads))) {
        throw DivergenceError("training diverged in stage " + options.name + ": epoch " +
                              std::to_string(epoch) + " produced a non-finite gradient");
      }
      if (options.clip_norm > 0.0) clip_global_norm(grads, options.clip_norm);

      auto params = mutable_blocks(model.params);
      auto gblocks = const_blocks(grads);
      if (options.freeze_branches) {
        std::erase_if(params, [](const auto& p) { return !is_attention_block(p.first); });
        std::erase_if(gblocks, [](const auto& g) { return !is_attention_block(g.first); });
      }
      optimizer.step(std::span<const std::pair<std::string, Matrix*>>(params),
                     std::span<const std::pair<std::string, const Matrix*>>(gblocks));
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_total / static_cast<double>(train.size());
    if (!val.empty()) {
      const Evaluation ev = evaluate(model, val, options.mode, options.jobs);
      rec.val_top1 = ev.top1;
      rec.val_top5 = ev.top5;
    }
    rec.selection_metric = selection_metric(rec, log.spec, options.task);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    if (log.epochs.empty() || rec.selection_metric > log.best_metric) {
      log.best_metric = rec.selection_metric;
      log.best_epoch = epoch;
      best = model.params;
    }
    log.epochs.push_back(std::move(rec));
  }
  model.params = std::move(best);
  return log;
}

Dataset select_modalities(const Dataset& data, std::span<const std::string> names) {
  Dataset out;
  out.spec = data.spec;
  out.task = data.task;
  std::vector<std::size_t> index;
  for (const auto& name : names) {
    const auto it = std::find(data.modalities.begin(), data.modalities.end(), name);
    if (it == data.modalities.end()) throw ConfigError("dataset has no modality '" + name + "'");
    index.push_back(static_cast<std::size_t>(it - data.modalities.begin()));
    out.modalities.push_back(name);
  }
  out.samples.reserve(data.size());
  for (const auto& s : data.samples) {
    Sample c;
    c.id = s.id;
    c.record = s.record;
    for (std::size_t i : index) {
      c.features.push_back(s.features[i]);
      if (!s.corrupted.empty()) c.corrupted.push_back(s.corrupted[i]);
    }
    out.samples.push_back(std::move(c));
  }
  return out;
}

TrainLog train_branch_scp(FusionModel& branch, const Dataset& train, const Dataset& val,
                          const TrainConfig& config) {
  const std::string name = branch.config.branch_names().at(0);
  if (branch.config.architecture == BranchArchitecture::single_lstm) {
    throw ConfigError("sequence completion needs the unrolling LSTM; single_lstm has none");
  }
  return train_stage(branch, train, val,
                     stage_options(config, "scp_" + name, config.scp_epochs_for(name),
                                   UnrollMode::sequence_completion));
}

TrainLog train_branch_anticipation(FusionModel& branch, const Dataset& train, const Dataset& val,
                                   const TrainConfig& config) {
  const std::string name = branch.config.branch_names().at(0);
  return train_stage(branch, train, val,
                     stage_options(config, "branch_" + name, config.branch_epochs_for(name),
                                   UnrollMode::anticipation));
}

TrainLog train_fusion(FusionModel& model, const Dataset& train, const Dataset& val,
                      const TrainConfig& config) {
  StageOptions o = stage_options(config, "fusion", config.fusion_epochs, UnrollMode::anticipation);
  o.freeze_branches = config.freeze_branches;
  if (o.freeze_branches && model.params.attention.empty()) {
    throw ConfigError("freeze_branches needs attention fusion; nothing would be trained");
  }
  return train_stage(model, train, val, o);
}

FusionModel assemble(const ModelConfig& config, std::span<const FusionModel> branches, Rng& rng,
                     bool zero_attention_output) {
  config.validate();
  if (config.fusion == FusionStrategy::early) {
    throw ConfigError("early fusion trains a single branch; there is nothing to assemble");
  }
  FusionModel model = FusionModel::initialize(config, rng);
  if (branches.size() != config.modalities.size()) {
    throw ConfigError("assemble: " + std::to_string(branches.size()) + " branches for " +
                      std::to_string(config.modalities.size()) + " modalities");
  }
  for (std::size_t m = 0; m < config.modalities.size(); ++m) {
    const auto& spec = config.modalities[m];
    const FusionModel* source = nullptr;
    for (const auto& b : branches) {
      if (b.config.modalities.size() == 1 && b.config.modalities[0].name == spec.name) source = &b;
    }
    if (source == nullptr) throw ConfigError("assemble: no branch for modality " + spec.name);
    const ModelConfig& bc = source->config;
    if (bc.modalities[0].dim != spec.dim || bc.hidden != config.hidden ||
        bc.num_actions != config.num_actions || bc.architecture != config.architecture ||
        !(bc.timeline == config.timeline)) {
      throw ConfigError("assemble: branch " + spec.name + " does not match the fused model");
    }
    model.params.branches[m] = source->params.branches[0];
  }
  if (zero_attention_output && !model.params.attention.empty()) {
    auto& last = model.params.attention.layers.back();
    last.weight.fill(0.0);
    last.bias.fill(0.0);
  }
  return model;
}

// ---------------------------------------------------------------------------
// Protocol

TrainingData TrainingData::load(const TrainConfig& config, const DataDirectory& dir) {
  config.validate();
  TrainingData d;
  d.vocabulary = dir.vocabulary();
  d.vocabulary.validate();
  const std::vector<std::string> names =
      config.modalities.empty() ? dir.available_modalities() : config.modalities;
  for (const auto& n : names) d.modalities.push_back({n, dir.feature_dim(n)});
  d.train = dir.load("train", names, config.timeline, config.task);
  d.val = dir.load("val", names, config.timeline, config.task);
  return d;
}

std::vector<std::string> branch_names(const TrainConfig& config, const TrainingData& data) {
  return make_model_config(config, data.modalities, data.num_actions()).branch_names();
}

StageRun run_branch_stage(const TrainConfig& config, const TrainingData& data, BranchStage stage,
                          const std::string& branch, const fs::path& out_dir) {
  config.validate();
  // The branch's modalities: one, or all of them under early fusion.
  std::vector<ModalitySpec> mods;
  if (config.fusion == FusionStrategy::early) {
    if (branch != branch_names(config, data).at(0)) {
      throw ConfigError("early fusion has a single branch named " + branch_names(config, data).at(0));
    }
    mods = data.modalities;
  } else {
    for (const auto& m : data.modalities) {
      if (m.name == branch) mods.push_back(m);
    }
    if (mods.empty()) throw ConfigError("no modality named '" + branch + "' in the training data");
  }
  std::vector<std::string> names;
  for (const auto& m : mods) names.push_back(m.name);
  const Dataset train = select_modalities(data.train, names);
  const Dataset val = select_modalities(data.val, names);
  const ModelConfig mc = make_model_config(config, mods, data.num_actions());

  StageRun run;
  if (stage == BranchStage::branch && config.use_scp &&
      config.architecture == BranchArchitecture::rolling_unrolling) {
    const fs::path scp = out_dir / (branch_stage_name(BranchStage::scp, branch) + ".ruck");
    if (!fs::exists(scp)) {
      throw IoError("missing " + scp.string() + "; run the scp stage first or disable use_scp");
    }
    run.model = load_model(scp).model;
    if (!(run.model.config == mc)) throw ConfigError(scp.string() + " does not match the config");
  } else {
    Rng rng = Rng(config.seed).derive({kInit, fnv1a(branch)});
    run.model = FusionModel::initialize(mc, rng);
  }
  const std::string name = branch_stage_name(stage, branch);
  StageOptions o = stage_options(
      config, name, stage == BranchStage::scp ? config.scp_epochs_for(branch) : config.branch_epochs_for(branch),
      stage == BranchStage::scp ? UnrollMode::sequence_completion : UnrollMode::anticipation);
  if (stage == BranchStage::scp && mc.architecture == BranchArchitecture::single_lstm) {
    throw ConfigError("sequence completion needs the unrolling LSTM; single_lstm has none");
  }
  run.log = train_stage(run.model, train, val, o);
  SgdMomentum opt;
  opt.learning_rate = config.learning_rate;
  opt.momentum = config.momentum;
  save_stage(out_dir, name, run.model, opt, run.log, config);
  return run;
}

StageRun run_fusion_stage(const TrainConfig& config, const TrainingData& data, const fs::path& out_dir) {
  config.validate();
  if (config.fusion == FusionStrategy::early) {
    throw ConfigError("early fusion has no fusion stage; its branch stage yields the model");
  }
  const ModelConfig mc = make_model_config(config, data.modalities, data.num_actions());
  std::vector<FusionModel> branches;
  for (const auto& m : data.modalities) {
    const fs::path p = out_dir / (branch_stage_name(BranchStage::branch, m.name) + ".ruck");
    if (!fs::exists(p)) throw IoError("missing " + p.string() + "; run the branch stage first");
    branches.push_back(load_model(p).model);
  }
  Rng rng = Rng(config.seed).derive({kAttention});
  StageRun run;
  run.model = assemble(mc, branches, rng, config.zero_attention_output);
  run.log = train_fusion(run.model, data.train, data.val, config);
  SgdMomentum opt;
  opt.learning_rate = config.learning_rate;
  opt.momentum = config.momentum;
  save_stage(out_dir, "fusion", run.model, opt, run.log, config);
  return run;
}

PipelineResult run_pipeline(const TrainConfig& config, const TrainingData& data, const fs::path& out_dir) {
  config.validate();
  PipelineResult result;
  const bool scp = config.use_scp && config.architecture == BranchArchitecture::rolling_unrolling;
  for (const auto& b : branch_names(config, data)) {
    if (scp) result.logs.push_back(run_branch_stage(config, data, BranchStage::scp, b, out_dir).log);
    StageRun run = run_branch_stage(config, data, BranchStage::branch, b, out_dir);
    result.logs.push_back(run.log);
    result.model = std::move(run.model);
  }
  if (config.fusion != FusionStrategy::early && data.modalities.size() > 1) {
    StageRun run = run_fusion_stage(config, data, out_dir);
    result.logs.push_back(run.log);
    result.model = std::move(run.model);
  }
  save_model(out_dir / "model.ruck", result.model, nullptr,
             json{{"stage", "final"}, {"config", config.to_json()}});
  if (!data.val.empty()) {
    result.validation = aggregate(predict(result.model, data.val, UnrollMode::anticipation, config.jobs),
                                  data.vocabulary);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Ablation

double AblationTable::mean_difference() const {
  if (rows.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : rows) sum += r.with_scp - r.without_scp;
  return sum / static_cast<double>(rows.size());
}

std::string AblationTable::csv() const {
  std::string out = "seed,top5_action@1.00_with_scp,top5_action@1.00_without_scp,difference\n";
  double with = 0.0, without = 0.0;
  for (const auto& r : rows) {
    out += std::to_string(r.seed) + "," + format_percent(r.with_scp) + "," +
           format_percent(r.without_scp) + "," + format_percent(r.with_scp - r.without_scp) + "\n";
    with += r.with_scp;
    without += r.without_scp;
  }
  if (!rows.empty()) {
    const double n = static_cast<double>(rows.size());
    out += "mean," + format_percent(with / n) + "," + format_percent(without / n) + "," +
           format_percent(mean_difference()) + "\n";
  }
  return out;
}

AblationTable run_scp_ablation(const TrainConfig& config, const TrainingData& data,
                               std::span<const std::uint64_t> seeds, const fs::path& out_dir) {
  if (config.task != Task::anticipation) throw ConfigError("the SCP ablation runs on anticipation");
  if (config.architecture != BranchArchitecture::rolling_unrolling) {
    throw ConfigError("the SCP ablation needs the rolling-unrolling architecture");
  }
  AblationTable table;
  for (std::uint64_t seed : seeds) {
    AblationRow row;
    row.seed = seed;
    for (bool scp : {true, false}) {
      TrainConfig c = config;
      c.seed = seed;
      c.use_scp = scp;
      const fs::path dir = out_dir / ("seed" + std::to_string(seed)) / (scp ? "scp" : "noscp");
      const PipelineResult r = run_pipeline(c, data, dir);
      const double top5 = r.validation.steps.at(r.validation.reference_step).top5[kAction];
      (scp ? row.with_scp : row.without_scp) = top5;
    }
    table.rows.push_back(row);
  }
  return table;
}

}  // namespace rulstm
