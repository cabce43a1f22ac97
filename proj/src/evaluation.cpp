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


#include "rulstm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "binary.hpp"
#include "rulstm/errors.hpp"

namespace rulstm {

using nlohmann::json;

double EvalRecord::anticipation_time(std::size_t i) const {
  return rulstm::anticipation_time(spec, spec.first_anticipation_step() + static_cast<int>(i));
}

double EvalRecord::observation_ratio(std::size_t i) const {
  return 100.0 * static_cast<double>(i + 1) / static_cast<double>(num_steps());
}

EvalRecord make_eval_record(const Sample& sample, const PredictionTimeline& timeline, Task task) {
  EvalRecord r;
  r.id = sample.id;
  r.verb = sample.record.verb;
  r.noun = sample.record.noun;
  r.action = sample.record.action;
  r.spec = timeline.spec;
  r.task = task;
  r.scores = timeline.fused;
  r.weights = timeline.weights;
  r.corrupted = sample.corrupted;
  return r;
}

bool topk_hit(std::span<const double> scores, std::size_t truth, std::size_t k) {
  if (k == 0) throw std::invalid_argument("topk_hit: k must be positive");
  if (k > scores.size()) {
    throw std::invalid_argument("topk_hit: k = " + std::to_string(k) + " exceeds " +
                                std::to_string(scores.size()) + " classes");
  }
  if (truth >= scores.size()) throw std::invalid_argument("topk_hit: truth out of range");
  const double s = scores[truth];
  if (!std::isfinite(s)) throw std::domain_error("topk_hit: non-finite score");
  std::size_t rank = 0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (!std::isfinite(scores[j])) throw std::domain_error("topk_hit: non-finite score");
    if (scores[j] > s || (scores[j] == s && j < truth)) ++rank;
  }
  return rank < k;
}

RecallResult mean_topk_recall(std::span<const ScoredLabel> items, std::size_t k,
                              std::span<const std::size_t> classes) {
  if (items.empty()) throw std::invalid_argument("mean_topk_recall: no records");
  std::vector<std::size_t> ids(classes.begin(), classes.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  RecallResult out;
  double sum = 0.0;
  for (std::size_t c : ids) {
    std::size_t n = 0;
    std::size_t hits = 0;
    for (const auto& item : items) {
      if (item.truth != c) continue;
      ++n;
      hits += topk_hit(item.scores, item.truth, k);
    }
    if (n == 0) {
      ++out.excluded;
      continue;
    }
    sum += static_cast<double>(hits) / static_cast<double>(n);
    ++out.classes;
  }
  if (out.classes > 0) out.percent = 100.0 * sum / static_cast<double>(out.classes);
  return out;
}

namespace {

void require_steps(const EvalRecord& record) {
  if (record.scores.empty()) throw std::invalid_argument("record " + record.id + ": empty timeline");
}

ObservationResult first_top1(const EvalRecord& record, const std::vector<Vector>& scores,
                             std::size_t truth) {
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (topk_hit(scores[i], truth, 1)) return {record.observation_ratio(i), true};
  }
  return {100.0, false};
}

// Scores of every step at each level: actions as given, verbs and nouns as
// marginal probabilities.
std::array<std::vector<Vector>, 3> level_scores(const EvalRecord& r, const Vocabulary& vocab) {
  std::array<std::vector<Vector>, 3> out;
  for (const auto& s : r.scores) {
    Marginals m = marginalize(softmax(s), vocab);
    out[kVerb].push_back(std::move(m.verbs));
    out[kNoun].push_back(std::move(m.nouns));
    out[kAction].push_back(s);
  }
  return out;
}

std::string two_decimals(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

double time_to_action(const EvalRecord& record, std::size_t k) {
  require_steps(record);
  if (record.task != Task::anticipation) {
    throw std::invalid_argument("time_to_action: record " + record.id + " is not an anticipation record");
  }
  double best = 0.0;
  for (std::size_t i = 0; i < record.num_steps(); ++i) {
    if (topk_hit(record.scores[i], record.action, k)) best = std::max(best, record.anticipation_time(i));
  }
  return best;
}

ObservationResult min_observation_ratio(const EvalRecord& record) {
  require_steps(record);
  return first_top1(record, record.scores, record.action);
}

std::string format_percent(double value) { return two_decimals(value); }

MetricsReport aggregate(std::span<const EvalRecord> records, const Vocabulary& vocab) {
  if (records.empty()) throw std::invalid_argument("aggregate: no records");
  const EvalRecord& first = records.front();
  require_steps(first);
  for (const auto& r : records) {
    if (r.task != first.task || !(r.spec == first.spec) || r.num_steps() != first.num_steps()) {
      throw ConfigError("aggregate: record " + r.id + " has an inconsistent timeline");
    }
    for (const auto& s : r.scores) {
      if (s.size() != vocab.num_actions()) {
        throw ShapeError("aggregate: record " + r.id + " has " + std::to_string(s.size()) +
                         " scores for " + std::to_string(vocab.num_actions()) + " actions");
      }
    }
  }

  MetricsReport rep;
  rep.task = first.task;
  rep.spec = first.spec;
  rep.num_records = records.size();
  const std::size_t steps = first.num_steps();
  const std::array<std::size_t, 3> num_classes{vocab.verbs.size(), vocab.nouns.size(),
                                               vocab.num_actions()};
  std::array<std::size_t, 3> k5{};
  for (std::size_t l = 0; l < 3; ++l) k5[l] = std::min<std::size_t>(5, num_classes[l]);

  std::vector<std::array<std::vector<Vector>, 3>> scores;
  scores.reserve(records.size());
  for (const auto& r : records) scores.push_back(level_scores(r, vocab));
  auto truth = [](const EvalRecord& r, std::size_t level) {
    return level == kVerb ? r.verb : level == kNoun ? r.noun : r.action;
  };

  const double n = static_cast<double>(records.size());
  for (std::size_t i = 0; i < steps; ++i) {
    StepMetrics m;
    m.time = rep.task == Task::anticipation ? first.anticipation_time(i) : first.observation_ratio(i);
    for (std::size_t l = 0; l < 3; ++l) {
      std::size_t hit1 = 0;
      std::size_t hit5 = 0;
      for (std::size_t r = 0; r < records.size(); ++r) {
        hit1 += topk_hit(scores[r][l][i], truth(records[r], l), 1);
        hit5 += topk_hit(scores[r][l][i], truth(records[r], l), k5[l]);
      }
      m.top1[l] = 100.0 * static_cast<double>(hit1) / n;
      m.top5[l] = 100.0 * static_cast<double>(hit5) / n;
    }
    rep.steps.push_back(m);
  }

  if (rep.task == Task::anticipation) {
    rep.reference_step = static_cast<std::size_t>(step_for_anticipation_time(rep.spec, 1.0) -
                                                  rep.spec.first_anticipation_step());
    const std::array<const std::vector<std::size_t>*, 3> many_shot{
        &vocab.many_shot_verbs, &vocab.many_shot_nouns, &vocab.many_shot_actions};
    for (std::size_t l = 0; l < 3; ++l) {
      std::vector<ScoredLabel> items;
      for (std::size_t r = 0; r < records.size(); ++r) {
        items.push_back({scores[r][l][rep.reference_step], truth(records[r], l)});
      }
      rep.recall5[l] = mean_topk_recall(items, k5[l], *many_shot[l]);

      double sum = 0.0;
      for (std::size_t r = 0; r < records.size(); ++r) {
        double best = 0.0;
        for (std::size_t i = 0; i < steps; ++i) {
          if (topk_hit(scores[r][l][i], truth(records[r], l), k5[l])) {
            best = std::max(best, records[r].anticipation_time(i));
          }
        }
        sum += best;
      }
      rep.mean_tta5[l] = sum / n;
    }
  } else {
    for (std::size_t l = 0; l < 3; ++l) {
      double sum = 0.0;
      for (std::size_t r = 0; r < records.size(); ++r) {
        const ObservationResult o = first_top1(records[r], scores[r][l], truth(records[r], l));
        sum += o.percent;
        rep.never_correct[l] += !o.correct;
      }
      rep.mor[l] = sum / n;
    }
  }
  return rep;
}

json MetricsReport::to_json() const {
  json j{{"task", to_string(task)},
         {"alpha", spec.alpha},
         {"s_enc", spec.s_enc},
         {"s_ant", spec.s_ant},
         {"num_records", num_records}};
  json rows = json::array();
  for (const auto& s : steps) {
    json row{{task == Task::anticipation ? "anticipation_time" : "observation_ratio", s.time}};
    for (std::size_t l = 0; l < 3; ++l) {
      row[std::string("top1_") + kLevelNames[l]] = s.top1[l];
      row[std::string("top5_") + kLevelNames[l]] = s.top5[l];
    }
    rows.push_back(row);
  }
  j["steps"] = rows;
  if (task == Task::anticipation) {
    j["reference_anticipation_time"] = steps.at(reference_step).time;
    for (std::size_t l = 0; l < 3; ++l) {
      const std::string name = kLevelNames[l];
      j["mean_top5_recall"][name] = {{"percent", optional_number(recall5[l].percent)},
                                     {"classes", recall5[l].classes},
                                     {"excluded_classes", recall5[l].excluded}};
      j["mean_tta5"][name] = mean_tta5[l];
    }
  } else {
    for (std::size_t l = 0; l < 3; ++l) {
      const std::string name = kLevelNames[l];
      j["mor"][name] = {{"percent", mor[l]}, {"never_correct", never_correct[l]}};
    }
  }
  return j;
}

std::string MetricsReport::csv(const std::string& method) const {
  std::vector<std::string> header{"method"};
  std::vector<std::string> row{method};
  auto add = [&](const std::string& name, const std::string& value) {
    header.push_back(name);
    row.push_back(value);
  };
  if (task == Task::anticipation) {
    for (const auto& s : steps) add("top5_action@" + two_decimals(s.time), two_decimals(s.top5[kAction]));
    const StepMetrics& ref = steps.at(reference_step);
    const std::string at = "@" + two_decimals(ref.time);
    for (std::size_t l = 0; l < 3; ++l) add(std::string("top1_") + kLevelNames[l] + at, two_decimals(ref.top1[l]));
    for (std::size_t l = 0; l < 3; ++l) add(std::string("top5_") + kLevelNames[l] + at, two_decimals(ref.top5[l]));
    for (std::size_t l = 0; l < 3; ++l) {
      add(std::string("recall5_") + kLevelNames[l] + at,
          recall5[l].percent ? two_decimals(*recall5[l].percent) : "");
    }
    for (std::size_t l = 0; l < 3; ++l) add(std::string("tta5_") + kLevelNames[l], two_decimals(mean_tta5[l]));
  } else {
    for (std::size_t l = 0; l < 3; ++l) {
      for (const auto& s : steps) {
        add(std::string("top1_") + kLevelNames[l] + "@" + two_decimals(s.time), two_decimals(s.top1[l]));
      }
    }
    for (std::size_t l = 0; l < 3; ++l) add(std::string("mor_") + kLevelNames[l], two_decimals(mor[l]));
  }
  std::string out;
  for (const auto* line : {&header, &row}) {
    for (std::size_t i = 0; i < line->size(); ++i) out += (i ? "," : "") + (*line)[i];
    out += "\n";
  }
  return out;
}

void write_predictions(const std::filesystem::path& path, std::span<const EvalRecord> records) {
  std::string out;
  for (const auto& r : records) {
    json j{{"id", r.id},
           {"verb", r.verb},
           {"noun", r.noun},
           {"action", r.action},
           {"task", to_string(r.task)},
           {"alpha", r.spec.alpha},
           {"s_enc", r.spec.s_enc},
           {"s_ant", r.spec.s_ant},
           {"scores", r.scores}};
    if (!r.weights.empty()) j["weights"] = r.weights;
    if (!r.corrupted.empty()) j["corrupted"] = r.corrupted;
    out += j.dump() + "\n";
  }
  binary::write_file(path, out);
}

std::vector<EvalRecord> read_predictions(const std::filesystem::path& path) {
  std::istringstream in(binary::read_file(path));
  std::vector<EvalRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      EvalRecord r;
      r.id = j.at("id").get<std::string>();
      r.verb = j.at("verb").get<std::size_t>();
      r.noun = j.at("noun").get<std::size_t>();
      r.action = j.at("action").get<std::size_t>();
      r.task = parse_task(j.at("task").get<std::string>());
      r.spec = {j.at("alpha").get<double>(), j.at("s_enc").get<int>(), j.at("s_ant").get<int>()};
      r.scores = j.at("scores").get<std::vector<Vector>>();
      if (j.contains("weights")) r.weights = j.at("weights").get<std::vector<Vector>>();
      if (j.contains("corrupted")) r.corrupted = j.at("corrupted").get<std::vector<bool>>();
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

}  // namespace rulstm
