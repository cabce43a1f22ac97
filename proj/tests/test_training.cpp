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


#include <cmath>

#include "../src/binary.hpp"
#include "doctest.h"
#include "rulstm/checkpoint.hpp"
#include "rulstm/errors.hpp"
#include "rulstm/model_io.hpp"
#include "rulstm/synth.hpp"
#include "rulstm/training.hpp"
#include "test_util.hpp"

using namespace rulstm;
using rulstm::testing::TempDir;

namespace {

SynthConfig toy_synth(std::size_t train, std::size_t val, std::uint64_t seed = 3) {
  SynthConfig c;
  c.num_verbs = 2;
  c.num_nouns = 2;
  c.num_actions = 4;
  c.modalities = {{"rgb", 8, SynthModality::Kind::dense},
                  {"flow", 8, SynthModality::Kind::dense},
                  {"obj", 6, SynthModality::Kind::objects}};
  c.objects_per_action = 2;
  c.train_samples = train;
  c.val_samples = val;
  c.actions_per_video = 8;
  c.window_steps = 5;
  c.noise = 0.5;
  c.many_shot_threshold = 2;
  c.seed = seed;
  return c;
}

TrainConfig toy_train() {
  TrainConfig c;
  c.timeline = {0.25, 2, 3};
  c.hidden = 8;
  c.dropout = {0.1, 0.1, 0.1, true};
  c.scp_epochs = {};
  c.branch_epochs = {};
  c.default_branch_epochs = 2;
  c.fusion_epochs = 2;
  c.batch_size = 8;
  c.seed = 5;
  return c;
}

// Synthetic data on disk plus the loaded splits.
struct Toy {
  TempDir dir;
  TrainingData data;

  Toy(const SynthConfig& synth, const TrainConfig& train) {
    write_synth(synth_generate(synth), synth, dir.path());
    data = TrainingData::load(train, DataDirectory{dir.path()});
  }
};

FusionModel single_branch(const TrainConfig& config, const TrainingData& data, const std::string& name,
                          std::uint64_t seed = 1) {
  std::vector<ModalitySpec> mods;
  for (const auto& m : data.modalities) {
    if (m.name == name) mods.push_back(m);
  }
  Rng rng(seed);
  return FusionModel::initialize(make_model_config(config, mods, data.num_actions()), rng);
}

std::string checkpoint_bytes(const FusionModel& model) {
  return serialize_checkpoint(make_checkpoint(model));
}

}  // namespace

TEST_CASE("early stopping picks the earliest maximum") {
  const std::vector<double> rising{1, 2, 3, 4};
  CHECK(early_stop_select(rising) == 4);
  const std::vector<double> plateau{10, 30, 30, 20};
  CHECK(early_stop_select(plateau) == 2);
  const std::vector<double> single{7};
  CHECK(early_stop_select(single) == 1);
  CHECK_THROWS(early_stop_select(std::span<const double>{}));
  const std::vector<double> missing{1, NAN};
  CHECK_THROWS(early_stop_select(missing));
}

TEST_CASE("selection metric") {
  EpochRecord r;
  r.val_top1 = {0, 10, 20, 30, 40, 50, 60, 70};
  r.val_top5 = {1, 11, 21, 31, 41, 51, 61, 71};
  CHECK(selection_metric(r, TimelineSpec{}, Task::anticipation) == 41);  // tau_a = 1 s
  CHECK(selection_metric(r, TimelineSpec{0.25, 0, 8}, Task::early_recognition) == 35);
  EpochRecord no_val;
  no_val.train_loss = 2.5;
  CHECK(selection_metric(no_val, TimelineSpec{}, Task::anticipation) == -2.5);
}

TEST_CASE("train config") {
  TrainConfig c;
  CHECK(c.scp_epochs_for("rgb") == 100);
  CHECK(c.scp_epochs_for("flow") == 100);
  CHECK(c.scp_epochs_for("obj") == 200);
  CHECK(c.branch_epochs_for("obj") == 200);
  CHECK(c.fusion_epochs == 100);
  CHECK(c.learning_rate == 0.01);
  CHECK(c.momentum == 0.9);
  CHECK(c.batch_size == 32);
  c.task = Task::early_recognition;
  c.timeline = {0.25, 0, 8};
  CHECK(c.scp_epochs_for("rgb") == 200);
  CHECK(c.branch_epochs_for("obj") == 200);

  const TrainConfig t = toy_train();
  CHECK(TrainConfig::from_json(t.to_json()) == t);
  CHECK_THROWS_AS(TrainConfig::from_json({{"batchsize", 3}}), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_json({{"batch_size", 0}}), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_json({{"modalities", {"rgb", "rgb"}}}), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_json({{"task", "early_recognition"}}), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_json({{"fusion", "sum"}}), ConfigError);
}

TEST_CASE("zero epochs leave parameters unchanged") {
  const TrainConfig tc = toy_train();
  Toy toy(toy_synth(16, 8), tc);
  FusionModel m = single_branch(tc, toy.data, "rgb");
  const std::string before = checkpoint_bytes(m);
  const Dataset train = select_modalities(toy.data.train, std::vector<std::string>{"rgb"});
  StageOptions o = stage_options(tc, "branch_rgb", 0, UnrollMode::anticipation);
  const TrainLog log = train_stage(m, train, train, o);
  CHECK(log.epochs.empty());
  CHECK(log.best_epoch == 0);
  CHECK(checkpoint_bytes(m) == before);
}

TEST_CASE("training is deterministic per seed") {
  const TrainConfig tc = toy_train();
  Toy toy(toy_synth(24, 8), tc);
  const std::vector<std::string> rgb{"rgb"};
  const Dataset train = select_modalities(toy.data.train, rgb);
  const Dataset val = select_modalities(toy.data.val, rgb);
  auto run = [&](std::uint64_t seed, std::size_t shards) {
    FusionModel m = single_branch(tc, toy.data, "rgb");
    StageOptions o = stage_options(tc, "scp_rgb", 3, UnrollMode::sequence_completion);
    o.seed = seed;
    o.grad_shards = shards;
    const TrainLog log = train_stage(m, train, val, o);
    return std::make_pair(checkpoint_bytes(m), log.csv());
  };
  const auto a = run(1, 1);
  CHECK(a == run(1, 1));
  CHECK(run(1, 3) == run(1, 3));
  CHECK(a.first != run(2, 1).first);
}

TEST_CASE("sequence completion training beats the uniform loss") {
  TrainConfig tc = toy_train();
  tc.dropout = {0.0, 0.0, 0.0, true};
  Toy toy(toy_synth(32, 0), tc);
  FusionModel m = single_branch(tc, toy.data, "rgb");
  const std::vector<std::string> rgb{"rgb"};
  const Dataset train = select_modalities(toy.data.train, rgb);
  const TrainLog log = train_stage(m, train, Dataset{}, stage_options(tc, "scp_rgb", 200, UnrollMode::sequence_completion));
  REQUIRE(log.epochs.size() == 200);
  CHECK(log.epochs.back().train_loss < std::log(4.0));
}

TEST_CASE("frozen learning rate keeps metrics constant") {
  TrainConfig tc = toy_train();
  tc.learning_rate = 0.0;
  Toy toy(toy_synth(16, 8), tc);
  FusionModel m = single_branch(tc, toy.data, "flow");
  const std::string before = checkpoint_bytes(m);
  const std::vector<std::string> flow{"flow"};
  const TrainLog log = train_stage(m, select_modalities(toy.data.train, flow),
                                   select_modalities(toy.data.val, flow),
                                   stage_options(tc, "branch_flow", 4, UnrollMode::anticipation));
  for (const auto& e : log.epochs) {
    CHECK(e.val_top1 == log.epochs[0].val_top1);
    CHECK(e.val_top5 == log.epochs[0].val_top5);
  }
  CHECK(log.best_epoch == 1);
  CHECK(checkpoint_bytes(m) == before);
}

TEST_CASE("small steps on one batch rarely increase the loss") {
  TrainConfig tc = toy_train();
  tc.dropout = {0.0, 0.0, 0.0, true};
  tc.learning_rate = 1e-4;
  Toy toy(toy_synth(16, 0), tc);
  std::size_t steps = 0, increases = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    FusionModel m = single_branch(tc, toy.data, "rgb", seed);
    const std::vector<std::string> rgb{"rgb"};
    StageOptions o = stage_options(tc, "branch_rgb", 60, UnrollMode::anticipation);
    o.batch_size = 16;  // the whole set: every epoch is one step on the same batch
    const TrainLog log = train_stage(m, select_modalities(toy.data.train, rgb), Dataset{}, o);
    for (std::size_t e = 1; e < log.epochs.size(); ++e) {
      ++steps;
      increases += log.epochs[e].train_loss > log.epochs[e - 1].train_loss;
    }
  }
  CHECK(static_cast<double>(increases) <= 0.05 * static_cast<double>(steps));
}

TEST_CASE("divergence aborts with a diagnostic") {
  const TrainConfig tc = toy_train();
  Toy toy(toy_synth(8, 0), tc);
  const std::vector<std::string> rgb{"rgb"};
  Dataset train = select_modalities(toy.data.train, rgb);
  train.samples[3].features[0](1, 2) = NAN;
  FusionModel m = single_branch(tc, toy.data, "rgb");
  try {
    train_stage(m, train, Dataset{}, stage_options(tc, "branch_rgb", 1, UnrollMode::anticipation));
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()).find(train.samples[3].id) != std::string::npos);
  }
  CHECK_THROWS_AS(train_stage(m, Dataset{}, Dataset{}, stage_options(tc, "x", 1, UnrollMode::anticipation)),
                  ConfigError);
}

TEST_CASE("assembled attention can start from uniform weights") {
  const TrainConfig tc = toy_train();
  Toy toy(toy_synth(8, 4), tc);
  std::vector<FusionModel> branches;
  for (const auto& m : toy.data.modalities) branches.push_back(single_branch(tc, toy.data, m.name));
  const ModelConfig mc = make_model_config(tc, toy.data.modalities, toy.data.num_actions());
  Rng rng(4);
  const FusionModel model = assemble(mc, branches, rng, true);
  const PredictionTimeline tl = forward(model, toy.data.val.samples[0].features, ForwardOptions{});
  for (const auto& w : tl.weights) {
    for (double v : w) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }
  // Branch parameters are the single-branch ones.
  CHECK(model.params.branches[1].rolling.weight == branches[1].params.branches[0].rolling.weight);

  CHECK_THROWS_AS(assemble(mc, std::span(branches).first(2), rng, false), ConfigError);
  TrainConfig other = tc;
  other.hidden = 4;
  std::vector<FusionModel> wrong = branches;
  wrong[0] = single_branch(other, toy.data, "rgb");
  CHECK_THROWS_AS(assemble(mc, wrong, rng, false), ConfigError);
}

TEST_CASE("frozen branches only move the attention") {
  TrainConfig tc = toy_train();
  tc.freeze_branches = true;
  Toy toy(toy_synth(16, 4), tc);
  std::vector<FusionModel> branches;
  for (const auto& m : toy.data.modalities) branches.push_back(single_branch(tc, toy.data, m.name));
  Rng rng(4);
  FusionModel model = assemble(make_model_config(tc, toy.data.modalities, toy.data.num_actions()),
                               branches, rng, false);
  const FusionModel before = model;
  train_fusion(model, toy.data.train, Dataset{}, tc);
  for (std::size_t b = 0; b < 3; ++b) {
    CHECK(model.params.branches[b].rolling.weight == before.params.branches[b].rolling.weight);
    CHECK(model.params.branches[b].head.weight == before.params.branches[b].head.weight);
  }
  CHECK_FALSE(model.params.attention.layers[0].weight == before.params.attention.layers[0].weight);
}

TEST_CASE("pipeline writes every stage and repeats byte for byte") {
  const TrainConfig tc = toy_train();
  Toy toy(toy_synth(24, 8), tc);
  TempDir a, b;
  const PipelineResult r = run_pipeline(tc, toy.data, a.path());
  run_pipeline(tc, toy.data, b.path());
  CHECK(r.logs.size() == 7);  // scp and branch per modality, then fusion
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(a.path())) {
    ++files;
    CHECK(binary::read_file(e.path()) == binary::read_file(b.path() / e.path().filename()));
  }
  CHECK(files == 7 * 3 + 1);
  CHECK(std::filesystem::exists(a.path() / "fusion.ruck"));
  CHECK(std::filesystem::exists(a.path() / "scp_obj.csv"));
  CHECK(r.validation.steps.size() == 3);

  // The saved model reproduces the in-memory forward pass.
  const FusionModel loaded = load_model(a.path() / "model.ruck").model;
  const auto& features = toy.data.val.samples[0].features;
  CHECK(forward(loaded, features, ForwardOptions{}).fused == forward(r.model, features, ForwardOptions{}).fused);
}

TEST_CASE("stages check their inputs") {
  TrainConfig tc = toy_train();
  Toy toy(toy_synth(8, 4), tc);
  TempDir dir;
  CHECK_THROWS_AS(run_branch_stage(tc, toy.data, BranchStage::branch, "rgb", dir.path()), IoError);
  CHECK_THROWS_AS(run_fusion_stage(tc, toy.data, dir.path()), IoError);
  CHECK_THROWS_AS(run_branch_stage(tc, toy.data, BranchStage::scp, "depth", dir.path()), ConfigError);

  tc.use_scp = false;
  const StageRun run = run_branch_stage(tc, toy.data, BranchStage::branch, "rgb", dir.path());
  CHECK(run.log.epochs.size() == 2);

  TrainConfig early = toy_train();
  early.fusion = FusionStrategy::early;
  CHECK(branch_names(early, toy.data) == std::vector<std::string>{"flow+obj+rgb"});  // directory order
  CHECK_THROWS_AS(run_fusion_stage(early, toy.data, dir.path()), ConfigError);

  TrainConfig single = toy_train();
  single.architecture = BranchArchitecture::single_lstm;
  CHECK_THROWS_AS(run_branch_stage(single, toy.data, BranchStage::scp, "rgb", dir.path()), ConfigError);
}

TEST_CASE("early fusion and single-LSTM pipelines") {
  TrainConfig early = toy_train();
  early.fusion = FusionStrategy::early;
  Toy toy(toy_synth(16, 8), early);
  TempDir dir;
  const PipelineResult r = run_pipeline(early, toy.data, dir.path());
  CHECK(r.logs.size() == 2);
  CHECK(r.model.params.branches.size() == 1);

  TrainConfig single = toy_train();
  single.architecture = BranchArchitecture::single_lstm;
  TempDir dir2;
  const PipelineResult s = run_pipeline(single, toy.data, dir2.path());
  CHECK(s.logs.size() == 4);  // no pre-training stage
}

TEST_CASE("ablation table pairs runs per seed") {
  TrainConfig tc = toy_train();
  tc.modalities = {"rgb"};
  tc.default_branch_epochs = 1;
  Toy toy(toy_synth(16, 8), tc);
  TempDir dir;
  const std::vector<std::uint64_t> seeds{1, 2};
  const AblationTable t = run_scp_ablation(tc, toy.data, seeds, dir.path());
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[1].seed == 2);
  const std::string csv = t.csv();
  CHECK(csv.rfind("seed,top5_action@1.00_with_scp,top5_action@1.00_without_scp,difference\n", 0) == 0);
  CHECK(csv.find("\nmean,") != std::string::npos);
  CHECK(std::filesystem::exists(dir.path() / "seed2" / "noscp" / "model.ruck"));
}
