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

#ifndef PROXYMOE_ERROR_H_
#define PROXYMOE_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace proxymoe {

enum class ErrorKind {
  kDimensionMismatch,
  kNotPositiveDefinite,
  kNonPositiveSchur,
  kParseError,
  kInvalidSpec,
  kDegenerateSet,
  kDiverged,
  kPoolTooSmall,
  kPoolTooLarge,
  kZeroVector,
  kNonPositiveRelevance,
  kSingularSubset,
  kInsufficientRank,
  kEmptySequence,
  kEmptyClientData,
  kEmptyTrainingSet,
  kIncompatibleExperts,
  kEmptyUnion,
  kInvalidCounts,
  kEmptyPrivateSet,
  kInvalidArgument,
};

// Stable CamelCase name, used as the machine-parseable error class by the CLI.
std::string_view error_kind_name(ErrorKind kind);

// All library failures are reported by throwing Error. The kind is the
// contract; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace proxymoe

#endif  // PROXYMOE_ERROR_H_
