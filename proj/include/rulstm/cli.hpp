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


#ifndef RULSTM_CLI_HPP_
#define RULSTM_CLI_HPP_

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>

namespace rulstm {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitContractFailed = 1,  // e.g. a gradient check over tolerance
  kExitUsage = 2,           // bad flags or configuration
  kExitIo = 3,
  kExitDivergence = 4,
};

// Flag, then the config file's "seed", then RU_SEED, then 0. Throws
// ConfigError when RU_SEED is not an unsigned integer.
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::optional<std::uint64_t> config,
                           const char* env);

// args[0] is the program name. Subcommands: synth, train, eval, predict,
// gradcheck, ablate.
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace rulstm

#endif  // RULSTM_CLI_HPP_
