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


#ifndef RULSTM_VOCABULARY_HPP_
#define RULSTM_VOCABULARY_HPP_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace rulstm {

// Verb and noun names plus the action classes, each an ordered
// (verb, noun) pair. Action ids index `actions`.
struct Vocabulary {
  struct Action {
    std::size_t verb = 0;
    std::size_t noun = 0;
    std::string name;
  };

  std::vector<std::string> verbs;
  std::vector<std::string> nouns;
  std::vector<Action> actions;
  std::vector<std::size_t> many_shot_verbs;
  std::vector<std::size_t> many_shot_nouns;
  std::vector<std::size_t> many_shot_actions;

  std::size_t num_actions() const { return actions.size(); }

  // Ids in range, (verb, noun) pairs distinct, many-shot lists in range.
  void validate() const;

  std::optional<std::size_t> find_action(std::size_t verb, std::size_t noun) const;

  // Fills the many-shot lists with every class that has at least `threshold`
  // occurrences among the given action labels.
  void set_many_shot_from_labels(std::span<const std::size_t> action_labels,
                                 std::size_t threshold);

  nlohmann::json to_json() const;
  static Vocabulary from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);
};

}  // namespace rulstm

#endif  // RULSTM_VOCABULARY_HPP_
