// Copyright 2026 The ProxyMoE Authors.
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


// The proxymoe command-line front end as a library, so tests can drive it
// in-process.

#ifndef PROXYMOE_TOOLS_CLI_COMMANDS_H_
#define PROXYMOE_TOOLS_CLI_COMMANDS_H_

#include <ostream>
#include <span>
#include <string>

namespace proxymoe::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitInput = 2;

// argv[0] is the program name. Results go to --out (or `out` when absent);
// failures are one "ErrorClass: message" line on `err`.
int run(std::span<const std::string> args, std::ostream& out,
        std::ostream& err);

}  // namespace proxymoe::cli

#endif  // PROXYMOE_TOOLS_CLI_COMMANDS_H_
