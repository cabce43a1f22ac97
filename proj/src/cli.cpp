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


#include "rulstm/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rulstm/dataio.hpp"
#include "rulstm/errors.hpp"
#include "rulstm/evaluation.hpp"
#include "rulstm/model_gradcheck.hpp"
#include "rulstm/model_io.hpp"
#include "rulstm/synth.hpp"
#include "rulstm/training.hpp"

namespace rulstm {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

std::optional<std::uint64_t> config_seed(const json& j) {
  if (!j.contains("seed")) return std::nullopt;
  if (!j["seed"].is_number_unsigned()) throw ConfigError("seed must be an unsigned integer");
  return j["seed"].get<std::uint64_t>();
}

using Snapshot = std::map<std::string, fs::file_time_type>;

Snapshot snapshot(const fs::path& dir) {
  Snapshot s;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return s;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) s[fs::relative(e.path(), dir).generic_string()] = e.last_write_time();
  }
  return s;
}

// Records what a command was asked to do and, once it ends, what it wrote.
class RunManifest {
 public:
  static constexpr const char* kFile = "run_manifest.json";

  RunManifest(fs::path dir, std::string command, std::span<const std::string> args)
      : dir_(std::move(dir)) {
    doc_ = json{{"command", std::move(command)},
                {"argv", std::vector<std::string>(args.begin(), args.end())},
                {"version", kVersion},
                {"started", utc_now()},
                {"status", "running"}};
  }

  // Writes the manifest before the command does any heavy work.
  void start(const json& config, std::uint64_t seed) {
    doc_["config"] = config;
    doc_["seed"] = seed;
    fs::create_directories(dir_);
    before_ = snapshot(dir_);
    save();
  }

  void finish(int exit_code, const std::string& error = {}) {
    std::vector<std::string> artifacts;
    for (const auto& [name, time] : snapshot(dir_)) {
      if (name == kFile) continue;
      const auto it = before_.find(name);
      if (it == before_.end() || it->second != time) artifacts.push_back(name);
    }
    doc_["artifacts"] = artifacts;
    doc_["finished"] = utc_now();
    doc_["exit_code"] = exit_code;
    doc_["status"] = exit_code == kExitOk ? "ok" : "failed";
    if (!error.empty()) doc_["error"] = error;
    save();
  }

 private:
  void save() const { write_text(dir_ / kFile, doc_.dump(2) + "\n"); }

  fs::path dir_;
  json doc_;
  Snapshot before_;
};

struct Context {
  std::span<const std::string> args;
  std::ostream& out;
  std::ostream& err;
  std::optional<RunManifest> manifest;

  RunManifest& begin(const fs::path& dir, const std::string& command, const json& config,
                     std::uint64_t seed) {
    manifest.emplace(dir, command, args);
    manifest->start(config, seed);
    return *manifest;
  }
};

UnrollMode parse_unroll(const std::string& s) {
  if (s == "anticipation") return UnrollMode::anticipation;
  if (s == "scp" || s == "sequence_completion") return UnrollMode::sequence_completion;
  throw ConfigError("unknown unroll mode '" + s + "'");
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

int cmd_synth(Context& ctx, const SynthArgs& a) {
  json j = a.config.empty() ? json::object() : read_json_file(a.config);
  SynthConfig config = SynthConfig::from_json(j);
  config.seed = resolve_seed(a.seed, config_seed(j), std::getenv("RU_SEED"));
  config.validate();
  RunManifest& m = ctx.begin(a.out, "synth", config.to_json(), config.seed);

  const SynthDataset data = synth_generate(config);
  write_synth(data, config, a.out);
  const auto [num, den] = config.fps_fraction();
  ctx.out << "wrote " << a.out << ": " << data.manifest.size() << " samples, "
          << data.train_videos.size() << " train / " << data.val_videos.size() << " val videos, "
          << config.modalities.size() << " modalities, " << data.vocabulary.num_actions()
          << " actions, fps " << num << "/" << den << "\n";
  m.finish(kExitOk);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out;
  std::string stage = "all";
  std::vector<std::string> branches;
  std::string modalities;
  std::string fusion;
  std::optional<int> s_enc;
  std::optional<std::uint64_t> seed;
  std::string task;
  std::optional<std::size_t> jobs;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  for (std::string item; std::getline(in, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Config file, then flags.
TrainConfig resolve_train_config(const std::string& path, std::optional<std::uint64_t> seed,
                                 const std::string& task, const std::string& fusion,
                                 std::optional<int> s_enc, const std::string& modalities,
                                 std::optional<std::size_t> jobs) {
  const json j = path.empty() ? json::object() : read_json_file(path);
  TrainConfig c = TrainConfig::from_json(j);
  c.seed = resolve_seed(seed, config_seed(j), std::getenv("RU_SEED"));
  if (!task.empty()) c.task = parse_task(task);
  if (!fusion.empty()) c.fusion = parse_fusion(fusion);
  if (!modalities.empty()) c.modalities = split_list(modalities);
  if (s_enc) {
    c.timeline.s_enc = *s_enc;
  } else if (c.task == Task::early_recognition &&
             !(j.contains("timeline") && j["timeline"].contains("s_enc"))) {
    c.timeline.s_enc = 0;  // early recognition observes the action only
  }
  if (jobs) c.jobs = *jobs;
  c.validate();
  return c;
}

void print_log(std::ostream& out, const TrainLog& log) {
  out << log.stage << ": " << log.epochs.size() << " epochs, best epoch " << log.best_epoch
      << ", selection metric " << format_percent(log.best_metric) << "\n";
}

void write_report(const fs::path& dir, const MetricsReport& report, const std::string& method) {
  write_text(dir / "metrics.csv", report.csv(method));
  write_text(dir / "metrics.json", report.to_json().dump(2) + "\n");
}

int cmd_train(Context& ctx, const TrainArgs& a) {
  const TrainConfig config = resolve_train_config(a.config, a.seed, a.task, a.fusion, a.s_enc,
                                                  a.modalities, a.jobs);
  if (a.stage != "all" && a.stage != "scp" && a.stage != "branch" && a.stage != "fusion") {
    throw ConfigError("--stage must be scp, branch, fusion or all");
  }
  if (!a.branches.empty() && a.stage != "scp" && a.stage != "branch") {
    throw ConfigError("--modality applies to the scp and branch stages");
  }
  const DataDirectory dir{a.data};
  if (!fs::is_directory(a.data)) throw IoError("no data directory at " + a.data);
  json resolved = config.to_json();
  resolved["jobs"] = config.jobs;
  RunManifest& m = ctx.begin(a.out, "train", resolved, config.seed);
  const TrainingData data = TrainingData::load(config, dir);

  if (a.stage == "all") {
    const PipelineResult r = run_pipeline(config, data, a.out);
    for (const auto& log : r.logs) print_log(ctx.out, log);
    if (!data.val.empty()) {
      write_report(a.out, r.validation, "rulstm");
      const auto& v = r.validation;
      if (v.task == Task::anticipation) {
        ctx.out << "validation top-5 action accuracy at " << format_percent(v.steps[v.reference_step].time)
                << " s: " << format_percent(v.steps[v.reference_step].top5[kAction]) << "\n";
      } else {
        ctx.out << "validation top-1 action accuracy at full observation: "
                << format_percent(v.steps.back().top1[kAction]) << "\n";
      }
    }
  } else if (a.stage == "fusion") {
    print_log(ctx.out, run_fusion_stage(config, data, a.out).log);
  } else {
    const BranchStage stage = a.stage == "scp" ? BranchStage::scp : BranchStage::branch;
    const std::vector<std::string> names = a.branches.empty() ? branch_names(config, data) : a.branches;
    for (const auto& b : names) print_log(ctx.out, run_branch_stage(config, data, stage, b, a.out).log);
  }
  m.finish(kExitOk);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval / predict

struct EvalArgs {
  std::string model;
  std::string data;
  std::string split = "val";
  std::string mode = "anticipation";
  std::string out;
  std::string name;
  std::optional<std::size_t> jobs;
};

struct LoadedEval {
  LoadedModel model;
  Dataset data;
  Vocabulary vocabulary;
};

LoadedEval load_for_eval(const EvalArgs& a) {
  if (a.mode != "anticipation" && a.mode != "early" && a.mode != "recognition") {
    throw ConfigError("--mode must be anticipation, early or recognition");
  }
  LoadedEval e{load_model(a.model), {}, {}};
  const ModelConfig& mc = e.model.model.config;
  const Task task = a.mode == "anticipation" ? Task::anticipation : Task::early_recognition;
  if (task == Task::early_recognition && mc.timeline.s_enc != 0) {
    throw ConfigError("--mode " + a.mode + " needs a model trained with s_enc = 0");
  }
  const DataDirectory dir{a.data};
  if (!fs::is_directory(a.data)) throw IoError("no data directory at " + a.data);
  e.vocabulary = dir.vocabulary();
  if (e.vocabulary.num_actions() != mc.num_actions) {
    throw ShapeError("model predicts " + std::to_string(mc.num_actions) + " actions, vocabulary has " +
                     std::to_string(e.vocabulary.num_actions()));
  }
  std::vector<std::string> names;
  for (const auto& m : mc.modalities) {
    const std::size_t dim = dir.feature_dim(m.name);
    if (dim != m.dim) {
      throw ShapeError("modality " + m.name + ": model expects dimension " + std::to_string(m.dim) +
                       ", data has " + std::to_string(dim));
    }
    names.push_back(m.name);
  }
  e.data = dir.load(a.split, names, mc.timeline, task);
  return e;
}

int cmd_eval(Context& ctx, const EvalArgs& a) {
  const std::uint64_t seed = resolve_seed(std::nullopt, std::nullopt, std::getenv("RU_SEED"));
  RunManifest& m = ctx.begin(a.out, "eval", json{{"model", a.model}, {"data", a.data}, {"split", a.split},
                                                 {"mode", a.mode}}, seed);
  const LoadedEval e = load_for_eval(a);
  if (e.data.empty()) throw ConfigError("split '" + a.split + "' has no samples");
  const auto records = predict(e.model.model, e.data, UnrollMode::anticipation, a.jobs.value_or(1));
  const MetricsReport report = aggregate(records, e.vocabulary);
  const std::string method = a.name.empty() ? fs::path(a.model).stem().string() : a.name;
  if (a.mode == "recognition") {
    const Triple& top1 = report.steps.back().top1;
    std::string csv = "method,top1_verb,top1_noun,top1_action\n" + method;
    json j{{"task", "recognition"}, {"num_records", report.num_records}};
    for (std::size_t l = 0; l < 3; ++l) {
      csv += "," + format_percent(top1[l]);
      j["top1"][kLevelNames[l]] = top1[l];
    }
    write_text(fs::path(a.out) / "metrics.csv", csv + "\n");
    write_text(fs::path(a.out) / "metrics.json", j.dump(2) + "\n");
    ctx.out << "recognition top-1 verb/noun/action: " << format_percent(top1[kVerb]) << " / "
            << format_percent(top1[kNoun]) << " / " << format_percent(top1[kAction]) << "\n";
  } else {
    write_report(a.out, report, method);
    ctx.out << report.csv(method);
  }
  m.finish(kExitOk);
  return kExitOk;
}

int cmd_predict(Context& ctx, const EvalArgs& a) {
  const std::uint64_t seed = resolve_seed(std::nullopt, std::nullopt, std::getenv("RU_SEED"));
  RunManifest& m = ctx.begin(a.out, "predict", json{{"model", a.model}, {"data", a.data},
                                                    {"split", a.split}, {"mode", a.mode}}, seed);
  const LoadedEval e = load_for_eval(a);
  const auto records = predict(e.model.model, e.data, UnrollMode::anticipation, a.jobs.value_or(1));
  write_predictions(fs::path(a.out) / "predictions.jsonl", records);
  ctx.out << "wrote " << records.size() << " predictions to "
          << (fs::path(a.out) / "predictions.jsonl").string() << "\n";
  m.finish(kExitOk);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckArgs {
  std::string config;
  std::string fusion;
  std::string mode = "anticipation";
  std::optional<std::uint64_t> seed;
  double tolerance = 1e-4;
  std::size_t samples = 2;
  std::string out;
  std::string fault;
};

std::string scientific(double v) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(3) << v;
  return s.str();
}

int cmd_gradcheck(Context& ctx, const GradcheckArgs& a) {
  json j = a.config.empty() ? gradcheck_toy_config().to_json() : read_json_file(a.config);
  const std::optional<std::uint64_t> file_seed = config_seed(j);
  j.erase("seed");
  ModelConfig config = ModelConfig::from_json(j);
  if (!a.fusion.empty()) config.fusion = parse_fusion(a.fusion);
  config.validate();

  ModelGradcheckOptions o;
  o.mode = parse_unroll(a.mode);
  o.seed = resolve_seed(a.seed, file_seed, std::getenv("RU_SEED"));
  o.samples = a.samples;
  o.check.tolerance = a.tolerance;
  o.fault_block = a.fault;
  RunManifest* m = a.out.empty() ? nullptr : &ctx.begin(a.out, "gradcheck", config.to_json(), o.seed);

  const GradcheckReport report = check_model_gradients(config, o);
  std::size_t width = 5;
  for (const auto& b : report.blocks) width = std::max(width, b.name.size());
  ctx.out << std::left << std::setw(static_cast<int>(width)) << "block" << "  " << std::right
          << std::setw(8) << "entries" << "  " << std::setw(10) << "max_rel" << "  status\n";
  json blocks = json::array();
  for (const auto& b : report.blocks) {
    const bool ok = b.max_relative_error < report.tolerance;
    ctx.out << std::left << std::setw(static_cast<int>(width)) << b.name << "  " << std::right
            << std::setw(8) << b.entries << "  " << std::setw(10) << scientific(b.max_relative_error)
            << "  " << (ok ? "ok" : "FAIL") << "\n";
    blocks.push_back({{"block", b.name},
                      {"entries", b.entries},
                      {"max_relative_error", b.max_relative_error},
                      {"worst_index", b.worst_index},
                      {"analytic", b.analytic_at_worst},
                      {"numeric", b.numeric_at_worst}});
  }
  const bool passed = report.passed();
  ctx.out << "max relative error " << scientific(report.max_relative_error()) << " (tolerance "
          << scientific(report.tolerance) << "): " << (passed ? "PASS" : "FAIL") << "\n";
  const int code = passed ? kExitOk : kExitContractFailed;
  if (m != nullptr) {
    write_text(fs::path(a.out) / "gradcheck.json",
               json{{"tolerance", report.tolerance},
                    {"max_relative_error", report.max_relative_error()},
                    {"passed", passed},
                    {"blocks", blocks}}
                       .dump(2) + "\n");
    m->finish(code);
  }
  return code;
}

// ---------------------------------------------------------------------------
// ablate

struct AblateArgs {
  std::string axis = "scp";
  std::string config;
  std::string data;
  std::string out;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<int> s_enc{2, 4, 6, 8, 10};
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
};

int cmd_ablate(Context& ctx, const AblateArgs& a) {
  if (a.axis != "scp" && a.axis != "fusion" && a.axis != "s_enc") {
    throw ConfigError("--axis must be scp, fusion or s_enc");
  }
  const TrainConfig config = resolve_train_config(a.config, a.seed, "", "", std::nullopt, "", a.jobs);
  if (!fs::is_directory(a.data)) throw IoError("no data directory at " + a.data);
  const DataDirectory dir{a.data};
  json resolved = config.to_json();
  resolved["axis"] = a.axis;
  RunManifest& m = ctx.begin(a.out, "ablate", resolved, config.seed);
  const fs::path out(a.out);

  std::string csv;
  if (a.axis == "scp") {
    const TrainingData data = TrainingData::load(config, dir);
    const AblationTable table = run_scp_ablation(config, data, a.seeds, out);
    csv = table.csv();
    ctx.out << csv << "mean difference (with - without): " << format_percent(table.mean_difference())
            << "\n";
  } else {
    // One full pipeline per arm; rows share the validation report layout.
    std::vector<std::pair<std::string, TrainConfig>> arms;
    if (a.axis == "fusion") {
      for (auto f : {FusionStrategy::late, FusionStrategy::early, FusionStrategy::matt}) {
        TrainConfig c = config;
        c.fusion = f;
        arms.emplace_back(std::string(to_string(f)), c);
      }
    } else {
      for (int s : a.s_enc) {
        TrainConfig c = config;
        c.timeline.s_enc = s;
        c.validate();
        arms.emplace_back("s_enc=" + std::to_string(s), c);
      }
    }
    for (const auto& [name, c] : arms) {
      const TrainingData data = TrainingData::load(c, dir);
      if (data.val.empty()) throw ConfigError("the ablation needs a validation split");
      std::string dirname = name;
      std::replace(dirname.begin(), dirname.end(), '=', '_');
      const PipelineResult r = run_pipeline(c, data, out / dirname);
      const std::string rows = r.validation.csv(name);
      csv += csv.empty() ? rows : rows.substr(rows.find('\n') + 1);
    }
    ctx.out << csv;
  }
  write_text(out / "ablation.csv", csv);
  m.finish(kExitOk);
  return kExitOk;
}

int exit_code_for(const std::exception_ptr& e, std::string& message) {
  try {
    std::rethrow_exception(e);
  } catch (const DivergenceError& x) {
    message = x.what();
    return kExitDivergence;
  } catch (const IoError& x) {
    message = x.what();
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& x) {
    message = x.what();
    return kExitIo;
  } catch (const std::invalid_argument& x) {  // ConfigError, ShapeError
    message = x.what();
    return kExitUsage;
  } catch (const std::exception& x) {
    message = x.what();
    return kExitContractFailed;
  }
}

}  // namespace

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::optional<std::uint64_t> config,
                           const char* env) {
  if (flag) return *flag;
  if (config) return *config;
  if (env != nullptr && *env != '\0') {
    const std::string_view s(env);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw ConfigError("RU_SEED must be an unsigned integer, got '" + std::string(s) + "'");
    }
    return v;
  }
  return 0;
}

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Rolling-unrolling LSTM action anticipation", "rulstm"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic dataset");
  s->add_option("--config", synth.config, "Synthetic dataset config (JSON)");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--seed", synth.seed, "Root seed (overrides the config and RU_SEED)");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train one stage or the whole pipeline");
  t->add_option("--config", train.config, "Training config (JSON)");
  t->add_option("--data", train.data, "Dataset directory")->required();
  t->add_option("--out", train.out, "Directory for checkpoints and logs")->required();
  t->add_option("--stage", train.stage, "scp, branch, fusion or all")->capture_default_str();
  t->add_option("--modality", train.branches, "Branch to train in the scp or branch stage (repeatable)");
  t->add_option("--modalities", train.modalities, "Comma-separated modality subset");
  t->add_option("--fusion", train.fusion, "late, early or matt");
  t->add_option("--s-enc", train.s_enc, "Encoding steps");
  t->add_option("--seed", train.seed, "Root seed (overrides the config and RU_SEED)");
  t->add_option("--task", train.task, "anticipation or early_recognition");
  t->add_option("--jobs", train.jobs, "Threads for validation");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Evaluate a model and write metrics.csv and metrics.json");
  EvalArgs pred;
  auto* p = app.add_subcommand("predict", "Write per-sample predictions as JSON lines");
  for (auto [cmd, a] : {std::pair{e, &eval}, std::pair{p, &pred}}) {
    cmd->add_option("--model", a->model, "Model checkpoint")->required();
    cmd->add_option("--data", a->data, "Dataset directory")->required();
    cmd->add_option("--split", a->split, "train, val or all")->capture_default_str();
    cmd->add_option("--mode", a->mode, "anticipation, early or recognition")->capture_default_str();
    cmd->add_option("--out", a->out, "Output directory")->required();
    cmd->add_option("--jobs", a->jobs, "Threads");
  }
  e->add_option("--name", eval.name, "Method name in the CSV row (default: model file stem)");

  GradcheckArgs grad;
  auto* g = app.add_subcommand("gradcheck", "Finite-difference check of the fused model's gradients");
  g->add_option("--config", grad.config, "Model config (JSON); default is a small three-modality model");
  g->add_option("--fusion", grad.fusion, "late, early or matt");
  g->add_option("--mode", grad.mode, "anticipation or scp")->capture_default_str();
  g->add_option("--seed", grad.seed, "Seed for parameters and inputs");
  g->add_option("--tolerance", grad.tolerance, "Maximum relative error")->capture_default_str();
  g->add_option("--samples", grad.samples, "Inputs averaged in the loss")->capture_default_str();
  g->add_option("--out", grad.out, "Directory for gradcheck.json and the run manifest");
  g->add_option("--inject-fault", grad.fault, "Corrupt the analytic gradient of one block")
      ->group("");

  AblateArgs abl;
  auto* b = app.add_subcommand("ablate", "Paired ablation sweeps");
  b->add_option("--axis", abl.axis, "scp, fusion or s_enc")->capture_default_str();
  b->add_option("--config", abl.config, "Training config (JSON)");
  b->add_option("--data", abl.data, "Dataset directory")->required();
  b->add_option("--out", abl.out, "Output directory")->required();
  b->add_option("--seeds", abl.seeds, "Seeds of the scp axis")->capture_default_str();
  b->add_option("--s-enc", abl.s_enc, "Values of the s_enc axis")->capture_default_str();
  b->add_option("--seed", abl.seed, "Root seed of the fusion and s_enc axes");
  b->add_option("--jobs", abl.jobs, "Threads for validation");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& x) {
    const int code = app.exit(x, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  Context ctx{args, out, err, std::nullopt};
  try {
    if (s->parsed()) return cmd_synth(ctx, synth);
    if (t->parsed()) return cmd_train(ctx, train);
    if (e->parsed()) return cmd_eval(ctx, eval);
    if (p->parsed()) return cmd_predict(ctx, pred);
    if (g->parsed()) return cmd_gradcheck(ctx, grad);
    return cmd_ablate(ctx, abl);
  } catch (...) {
    std::string message;
    const int code = exit_code_for(std::current_exception(), message);
    err << "error: " << message << "\n";
    if (ctx.manifest) {
      try {
        ctx.manifest->finish(code, message);
      } catch (const std::exception&) {
      }
    }
    return code;
  }
}

}  // namespace rulstm
