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

#include "proxymoe/error.h"

namespace proxymoe {

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kNotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::kNonPositiveSchur: return "NonPositiveSchur";
    case ErrorKind::kParseError: return "ParseError";
    case ErrorKind::kInvalidSpec: return "InvalidSpec";
    case ErrorKind::kDegenerateSet: return "DegenerateSet";
    case ErrorKind::kDiverged: return "Diverged";
    case ErrorKind::kPoolTooSmall: return "PoolTooSmall";
    case ErrorKind::kPoolTooLarge: return "PoolTooLarge";
    case ErrorKind::kZeroVector: return "ZeroVector";
    case ErrorKind::kNonPositiveRelevance: return "NonPositiveRelevance";
    case ErrorKind::kSingularSubset: return "SingularSubset";
    case ErrorKind::kInsufficientRank: return "InsufficientRank";
    case ErrorKind::kEmptySequence: return "EmptySequence";
    case ErrorKind::kEmptyClientData: return "EmptyClientData";
    case ErrorKind::kEmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorKind::kIncompatibleExperts: return "IncompatibleExperts";
    case ErrorKind::kEmptyUnion: return "EmptyUnion";
    case ErrorKind::kInvalidCounts: return "InvalidCounts";
    case ErrorKind::kEmptyPrivateSet: return "EmptyPrivateSet";
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
      kind_(kind) {}

}  // namespace proxymoe
