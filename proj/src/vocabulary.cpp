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


#include "rulstm/vocabulary.hpp"

#include <fstream>
#include <set>
#include <utility>

#include "rulstm/errors.hpp"

namespace rulstm {

using nlohmann::json;

void Vocabulary::validate() const {
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t a = 0; a < actions.size(); ++a) {
    const auto& act = actions[a];
    if (act.verb >= verbs.size()) {
      throw ConfigError("vocabulary.actions[" + std::to_string(a) + "].verb out of range");
    }
    if (act.noun >= nouns.size()) {
      throw ConfigError("vocabulary.actions[" + std::to_string(a) + "].noun out of range");
    }
    if (!seen.emplace(act.verb, act.noun).second) {
      throw ConfigError("vocabulary.actions[" + std::to_string(a) +
                        "] repeats an existing (verb, noun) pair");
    }
  }
  auto check = [](const std::vector<std::size_t>& ids, std::size_t n, const char* field) {
    for (std::size_t id : ids) {
      if (id >= n) throw ConfigError(std::string("vocabulary.") + field + " contains id " +
                                     std::to_string(id) + " out of range");
    }
  };
  check(many_shot_verbs, verbs.size(), "many_shot_verbs");
  check(many_shot_nouns, nouns.size(), "many_shot_nouns");
  check(many_shot_actions, actions.size(), "many_shot_actions");
}

std::optional<std::size_t> Vocabulary::find_action(std::size_t verb, std::size_t noun) const {
  for (std::size_t a = 0; a < actions.size(); ++a) {
    if (actions[a].verb == verb && actions[a].noun == noun) return a;
  }
  return std::nullopt;
}

void Vocabulary::set_many_shot_from_labels(std::span<const std::size_t> action_labels,
                                           std::size_t threshold) {
  std::vector<std::size_t> verb_counts(verbs.size(), 0);
  std::vector<std::size_t> noun_counts(nouns.size(), 0);
  std::vector<std::size_t> action_counts(actions.size(), 0);
  for (std::size_t a : action_labels) {
    if (a >= actions.size()) throw ConfigError("action label out of range");
    ++action_counts[a];
    ++verb_counts[actions[a].verb];
    ++noun_counts[actions[a].noun];
  }
  auto pick = [threshold](const std::vector<std::size_t>& counts) {
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (counts[i] >= threshold) ids.push_back(i);
    }
    return ids;
  };
  many_shot_verbs = pick(verb_counts);
  many_shot_nouns = pick(noun_counts);
  many_shot_actions = pick(action_counts);
}

json Vocabulary::to_json() const {
  json acts = json::array();
  for (const auto& a : actions) {
    acts.push_back({{"verb", a.verb}, {"noun", a.noun}, {"name", a.name}});
  }
  return {{"verbs", verbs},
          {"nouns", nouns},
          {"actions", acts},
          {"many_shot_verbs", many_shot_verbs},
          {"many_shot_nouns", many_shot_nouns},
          {"many_shot_actions", many_shot_actions}};
}

Vocabulary Vocabulary::from_json(const json& j) {
  Vocabulary v;
  try {
    v.verbs = j.at("verbs").get<std::vector<std::string>>();
    v.nouns = j.at("nouns").get<std::vector<std::string>>();
    for (const auto& a : j.at("actions")) {
      Action act;
      act.verb = a.at("verb").get<std::size_t>();
      act.noun = a.at("noun").get<std::size_t>();
      act.name = a.value("name", v.verbs.at(act.verb) + " " + v.nouns.at(act.noun));
      v.actions.push_back(std::move(act));
    }
    v.many_shot_verbs = j.value("many_shot_verbs", std::vector<std::size_t>{});
    v.many_shot_nouns = j.value("many_shot_nouns", std::vector<std::size_t>{});
    v.many_shot_actions = j.value("many_shot_actions", std::vector<std::size_t>{});
  } catch (const json::exception& e) {
    throw ConfigError(std::string("vocabulary: ") + e.what());
  } catch (const std::out_of_range& e) {
    throw ConfigError(std::string("vocabulary: action refers to unknown verb or noun"));
  }
  v.validate();
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_json().dump(2) << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

}  // namespace rulstm
