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


#include <cstdlib>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "rulstm/cli.hpp"
#include "rulstm/errors.hpp"
#include "rulstm/model_gradcheck.hpp"
#include "rulstm/model_io.hpp"
#include "rulstm/vocabulary.hpp"
#include "test_util.hpp"

namespace rulstm {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using testing::TempDir;

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "rulstm");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

// Every regular file under dir except the run manifest, with its bytes.
std::map<std::string, std::string> contents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().filename() == "run_manifest.json") continue;
    out[fs::relative(e.path(), dir).generic_string()] = slurp(e.path());
  }
  return out;
}

std::vector<std::string> csv_header(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::string line, cell;
  std::getline(in, line);
  std::vector<std::string> cells;
  std::istringstream row(line);
  while (std::getline(row, cell, ',')) cells.push_back(cell);
  return cells;
}

// Small dataset and short schedules so every command runs in about a second.
struct Fixture {
  TempDir tmp;
  fs::path data = tmp.path() / "data";
  fs::path synth_config = tmp.path() / "synth.json";
  fs::path train_config = tmp.path() / "train.json";

  Fixture() {
    write(synth_config, R"({"train_samples": 120, "val_samples": 60, "noise": 1.5})");
    write(train_config, R"({"hidden": 8, "scp_epochs": {"obj": 1}, "branch_epochs": {"obj": 1},
                            "default_branch_epochs": 1, "fusion_epochs": 1, "early_recognition_epochs": 1,
                            "batch_size": 16})");
    const Result r = cli({"synth", "--config", synth_config.string(), "--out", data.string()});
    REQUIRE(r.code == 0);
  }
};

}  // namespace

TEST_CASE("seed precedence") {
  CHECK(resolve_seed(7, 3, "5") == 7);
  CHECK(resolve_seed(std::nullopt, 3, "5") == 3);
  CHECK(resolve_seed(std::nullopt, std::nullopt, "5") == 5);
  CHECK(resolve_seed(std::nullopt, std::nullopt, nullptr) == 0);
  CHECK(resolve_seed(std::nullopt, std::nullopt, "") == 0);
  CHECK_THROWS_AS(resolve_seed(std::nullopt, std::nullopt, "12x"), ConfigError);
  CHECK_THROWS_AS(resolve_seed(std::nullopt, std::nullopt, "-1"), ConfigError);
}

TEST_CASE("usage errors") {
  CHECK(cli({"--help"}).code == kExitOk);
  CHECK(cli({"train", "--help"}).code == kExitOk);
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({"synth"}).code == kExitUsage);  // --out is required
  CHECK(cli({"gradcheck", "--tolerance", "abc"}).code == kExitUsage);
}

TEST_CASE("synth writes a dataset and reruns byte for byte") {
  Fixture f;
  CHECK(fs::exists(f.data / "manifest.csv"));
  CHECK(fs::exists(f.data / "vocab.json"));
  CHECK(fs::exists(f.data / "splits.json"));
  for (const char* m : {"rgb", "flow", "obj"}) {
    CHECK(!fs::is_empty(f.data / "features" / m));
  }
  const fs::path again = f.tmp.path() / "again";
  REQUIRE(cli({"synth", "--config", f.synth_config.string(), "--out", again.string()}).code == 0);
  CHECK(contents(f.data) == contents(again));

  const fs::path other = f.tmp.path() / "other";
  REQUIRE(cli({"synth", "--config", f.synth_config.string(), "--out", other.string(), "--seed", "9"})
              .code == 0);
  CHECK(contents(f.data) != contents(other));
  CHECK(json::parse(slurp(other / "run_manifest.json"))["seed"] == 9);
}

TEST_CASE("synth rejects an invalid config naming the field") {
  TempDir tmp;
  write(tmp.path() / "bad.json", R"({"num_actions": 0})");
  const Result r = cli({"synth", "--config", (tmp.path() / "bad.json").string(), "--out",
                        (tmp.path() / "out").string()});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("num_actions") != std::string::npos);

  write(tmp.path() / "typo.json", R"({"num_actoins": 3})");
  CHECK(cli({"synth", "--config", (tmp.path() / "typo.json").string(), "--out",
             (tmp.path() / "out").string()})
            .code == kExitUsage);
  CHECK(cli({"synth", "--config", (tmp.path() / "missing.json").string(), "--out",
             (tmp.path() / "out").string()})
            .code == kExitIo);
}

TEST_CASE("RU_SEED is the fallback seed") {
  TempDir tmp;
  ::setenv("RU_SEED", "11", 1);
  REQUIRE(cli({"synth", "--out", (tmp.path() / "a").string()}).code == 0);
  ::unsetenv("RU_SEED");
  CHECK(json::parse(slurp(tmp.path() / "a" / "run_manifest.json"))["seed"] == 11);
}

TEST_CASE("train, eval and predict") {
  Fixture f;
  const fs::path run = f.tmp.path() / "run";
  const Result t = cli({"train", "--config", f.train_config.string(), "--data", f.data.string(), "--out",
                        run.string(), "--seed", "3"});
  REQUIRE(t.code == 0);
  for (const char* file : {"scp_rgb.ruck", "branch_obj.ruck", "fusion.ruck", "fusion.csv", "model.ruck",
                           "metrics.csv"}) {
    CHECK(fs::exists(run / file));
  }
  const json manifest = json::parse(slurp(run / "run_manifest.json"));
  CHECK(manifest["status"] == "ok");
  CHECK(manifest["command"] == "train");
  CHECK(manifest["seed"] == 3);
  CHECK(manifest["config"]["hidden"] == 8);
  CHECK(manifest["artifacts"].size() == 24);
  for (const auto& a : manifest["artifacts"]) CHECK(fs::exists(run / a.get<std::string>()));

  SUBCASE("identical invocations give identical artifacts") {
    const fs::path again = f.tmp.path() / "again";
    REQUIRE(cli({"train", "--config", f.train_config.string(), "--data", f.data.string(), "--out",
                 again.string(), "--seed", "3"})
                .code == 0);
    CHECK(contents(run) == contents(again));
  }

  SUBCASE("anticipation report has eight top-5 columns") {
    const fs::path ev = f.tmp.path() / "ev";
    const Result e = cli({"eval", "--model", (run / "model.ruck").string(), "--data", f.data.string(),
                          "--out", ev.string(), "--name", "ru"});
    REQUIRE(e.code == 0);
    const auto header = csv_header(ev / "metrics.csv");
    CHECK(std::count_if(header.begin(), header.end(),
                        [](const std::string& c) { return c.rfind("top5_action@", 0) == 0; }) == 9);
    CHECK(header[1] == "top5_action@2.00");
    CHECK(header[8] == "top5_action@0.25");
    CHECK(slurp(ev / "metrics.csv").find("\nru,") != std::string::npos);
    CHECK(json::parse(slurp(ev / "metrics.json"))["num_records"] == 60);
  }

  SUBCASE("predict dumps one line per sample") {
    const fs::path pr = f.tmp.path() / "pr";
    REQUIRE(cli({"predict", "--model", (run / "model.ruck").string(), "--data", f.data.string(),
                 "--out", pr.string(), "--split", "all"})
                .code == 0);
    const std::string text = slurp(pr / "predictions.jsonl");
    CHECK(std::count(text.begin(), text.end(), '\n') == 180);
  }

  SUBCASE("early mode needs an early recognition model") {
    const Result e = cli({"eval", "--model", (run / "model.ruck").string(), "--data", f.data.string(),
                          "--out", (f.tmp.path() / "x").string(), "--mode", "early"});
    CHECK(e.code == kExitUsage);
  }
}

TEST_CASE("stages run separately and need their inputs") {
  Fixture f;
  const fs::path run = f.tmp.path() / "run";
  const std::vector<std::string> base{"--config", f.train_config.string(), "--data", f.data.string(),
                                      "--out", run.string()};
  auto stage = [&](std::vector<std::string> extra) {
    std::vector<std::string> a{"train"};
    a.insert(a.end(), base.begin(), base.end());
    a.insert(a.end(), extra.begin(), extra.end());
    return cli(a);
  };
  CHECK(stage({"--stage", "fusion"}).code == kExitIo);
  CHECK(json::parse(slurp(run / "run_manifest.json"))["status"] == "failed");
  CHECK(stage({"--stage", "branch", "--modality", "rgb"}).code == kExitIo);
  CHECK(stage({"--stage", "scp", "--modality", "nope"}).code == kExitUsage);
  REQUIRE(stage({"--stage", "scp"}).code == 0);
  REQUIRE(stage({"--stage", "branch"}).code == 0);
  REQUIRE(stage({"--stage", "fusion"}).code == 0);
  CHECK(fs::exists(run / "fusion.ruck"));

  // The staged run matches the one-shot pipeline.
  const fs::path all = f.tmp.path() / "all";
  REQUIRE(cli({"train", "--config", f.train_config.string(), "--data", f.data.string(), "--out",
               all.string()})
              .code == 0);
  CHECK(slurp(run / "fusion.ruck") == slurp(all / "fusion.ruck"));
}

TEST_CASE("fusion and s_enc flags") {
  Fixture f;
  const fs::path early = f.tmp.path() / "early";
  REQUIRE(cli({"train", "--config", f.train_config.string(), "--data", f.data.string(), "--out",
               early.string(), "--fusion", "early"})
              .code == 0);
  CHECK(load_model(early / "model.ruck").model.config.fusion == FusionStrategy::early);
  CHECK(!fs::exists(early / "fusion.ruck"));

  const fs::path late = f.tmp.path() / "late";
  REQUIRE(cli({"train", "--config", f.train_config.string(), "--data", f.data.string(), "--out",
               late.string(), "--fusion", "late", "--s-enc", "3"})
              .code == 0);
  const ModelConfig mc = load_model(late / "model.ruck").model.config;
  CHECK(mc.fusion == FusionStrategy::late);
  CHECK(mc.timeline.s_enc == 3);
  CHECK(mc.timeline.s_ant == 8);
  CHECK(cli({"train", "--config", f.train_config.string(), "--data", f.data.string(), "--out",
             late.string(), "--fusion", "average"})
            .code == kExitUsage);
}

TEST_CASE("early recognition and recognition modes") {
  Fixture f;
  const fs::path run = f.tmp.path() / "run";
  REQUIRE(cli({"train", "--config", f.train_config.string(), "--data", f.data.string(), "--out",
               run.string(), "--task", "early_recognition"})
              .code == 0);
  const fs::path ev = f.tmp.path() / "ev";
  REQUIRE(cli({"eval", "--model", (run / "model.ruck").string(), "--data", f.data.string(), "--out",
               ev.string(), "--mode", "early"})
              .code == 0);
  const auto header = csv_header(ev / "metrics.csv");
  CHECK(std::count_if(header.begin(), header.end(),
                      [](const std::string& c) { return c.rfind("top1_action@", 0) == 0; }) == 8);
  CHECK(std::find(header.begin(), header.end(), "top1_action@12.50") != header.end());
  CHECK(std::find(header.begin(), header.end(), "top1_action@100.00") != header.end());

  const fs::path rec = f.tmp.path() / "rec";
  REQUIRE(cli({"eval", "--model", (run / "model.ruck").string(), "--data", f.data.string(), "--out",
               rec.string(), "--mode", "recognition"})
              .code == 0);
  CHECK(csv_header(rec / "metrics.csv") ==
        std::vector<std::string>{"method", "top1_verb", "top1_noun", "top1_action"});
  const json early_json = json::parse(slurp(ev / "metrics.json"));
  const json rec_json = json::parse(slurp(rec / "metrics.json"));
  // Recognition reads the last observation rate of the early report.
  CHECK(rec_json["top1"]["action"].get<double>() ==
        early_json["steps"].back()["top1_action"].get<double>());
}

TEST_CASE("an untrained model is near chance") {
  TempDir tmp;
  write(tmp.path() / "synth.json", R"({"train_samples": 20, "val_samples": 2000, "corruption": 1.0})");
  const fs::path data = tmp.path() / "data";
  REQUIRE(cli({"synth", "--config", (tmp.path() / "synth.json").string(), "--out", data.string()})
              .code == 0);
  ModelConfig c;
  c.modalities = {{"flow", 16}, {"obj", 24}, {"rgb", 16}};
  c.hidden = 16;
  c.num_actions = 10;
  Rng rng(4);
  save_model(tmp.path() / "random.ruck", FusionModel::initialize(c, rng));
  const fs::path ev = tmp.path() / "ev";
  REQUIRE(cli({"eval", "--model", (tmp.path() / "random.ruck").string(), "--data", data.string(),
               "--out", ev.string(), "--jobs", "2"})
              .code == 0);
  const json j = json::parse(slurp(ev / "metrics.json"));
  double mean = 0.0;
  for (const auto& s : j["steps"]) mean += s["top1_action"].get<double>() / 8.0;
  // Fully corrupted inputs carry no label information, so any model scores
  // 1/K = 10% up to a binomial standard error of 0.67 points.
  CHECK(std::abs(mean - 10.0) < 4.0);
}

TEST_CASE("gradcheck lists every block once and fails on a corrupted gradient") {
  const Result ok = cli({"gradcheck"});
  CHECK(ok.code == kExitOk);
  CHECK(ok.out.find("PASS") != std::string::npos);

  Rng rng(0);
  const FusionModel m = FusionModel::initialize(gradcheck_toy_config(), rng);
  std::vector<std::string> names;
  for_each_block(m.params, "", [&](const std::string& n, const Matrix&) { names.push_back(n); });
  REQUIRE(!names.empty());
  for (const auto& n : names) {
    std::size_t count = 0;
    std::istringstream lines(ok.out);
    for (std::string line; std::getline(lines, line);) {
      if (line.rfind(n + " ", 0) == 0) ++count;
    }
    CHECK_MESSAGE(count == 1, n);
  }

  const Result bad = cli({"gradcheck", "--inject-fault", "attention.layer1.weight"});
  CHECK(bad.code == kExitContractFailed);
  CHECK(bad.out.find("FAIL") != std::string::npos);
  CHECK(cli({"gradcheck", "--inject-fault", "no.such.block"}).code == kExitUsage);

  TempDir tmp;
  CHECK(cli({"gradcheck", "--fusion", "late", "--mode", "scp", "--out", tmp.path().string()}).code == 0);
  const json report = json::parse(slurp(tmp.path() / "gradcheck.json"));
  CHECK(report["passed"] == true);
  CHECK(report["blocks"].size() == names.size() - 6);  // late fusion has no attention
}

TEST_CASE("divergence exits with its own code") {
  Fixture f;
  write(f.train_config, R"({"hidden": 8, "default_branch_epochs": 3,
                            "learning_rate": 1e308, "clip_norm": 0, "use_scp": false})");
  const Result r = cli({"train", "--config", f.train_config.string(), "--data", f.data.string(), "--out",
                        (f.tmp.path() / "run").string(), "--stage", "branch", "--modality", "rgb"});
  CHECK(r.code == kExitDivergence);
  CHECK(r.err.find("train/") != std::string::npos);  // names the sample
}

TEST_CASE("ablate writes a paired table") {
  Fixture f;
  const fs::path out = f.tmp.path() / "abl";
  const Result r = cli({"ablate", "--axis", "scp", "--config", f.train_config.string(), "--data",
                        f.data.string(), "--out", out.string(), "--seeds", "1", "2"});
  REQUIRE(r.code == 0);
  std::istringstream lines(slurp(out / "ablation.csv"));
  std::vector<std::string> rows;
  for (std::string line; std::getline(lines, line);) rows.push_back(line);
  REQUIRE(rows.size() == 4);
  CHECK(rows[1].rfind("1,", 0) == 0);
  CHECK(rows[2].rfind("2,", 0) == 0);
  CHECK(rows[3].rfind("mean,", 0) == 0);
  CHECK(fs::exists(out / "seed1" / "noscp" / "model.ruck"));

  const fs::path sweep = f.tmp.path() / "senc";
  REQUIRE(cli({"ablate", "--axis", "s_enc", "--config", f.train_config.string(), "--data",
               f.data.string(), "--out", sweep.string(), "--s-enc", "2", "6"})
              .code == 0);
  const std::string table = slurp(sweep / "ablation.csv");
  CHECK(table.find("\ns_enc=2,") != std::string::npos);
  CHECK(table.find("\ns_enc=6,") != std::string::npos);
}

}  // namespace rulstm
