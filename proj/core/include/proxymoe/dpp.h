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


// Relevance-weighted determinantal point process over a candidate pool:
// kernel construction, subset log-probabilities and MAP selection.
//
// With L the cosine kernel over the pool and r the clamped relevance scores,
// the weighted kernel is Diag(r) L Diag(r), so for any subset S
//
//   log det(Lw_S) = 2 * sum_{i in S} log r_i + log det(L_S).
//
// The first term rewards relevance; the second penalizes redundancy.

#ifndef PROXYMOE_DPP_H_
#define PROXYMOE_DPP_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "proxymoe/embedding.h"
#include "proxymoe/linalg.h"
#include "proxymoe/relevance.h"

namespace proxymoe {

enum class KernelKind { kCosine };

struct KernelConfig {
  KernelKind kind = KernelKind::kCosine;
  // L2-normalize inputs first so the diagonal is exactly 1. Without
  // normalization the kernel is the plain Gram matrix of the inputs.
  bool normalize_inputs = true;
};

// Throws InvalidArgument for an empty pool and ZeroVector when a record has
// zero norm and normalization is on.
Matrix build_kernel(const EmbeddingSet& pool, const KernelConfig& cfg = {});

struct WeightedKernel {
  std::vector<std::string> pool_ids;
  Matrix base;
  Vector relevance;
  Matrix weighted;

  std::size_t size() const noexcept { return pool_ids.size(); }
  std::size_t index_of(std::string_view id) const;  // throws InvalidArgument
};

// Throws DimensionMismatch and NonPositiveRelevance. Ids default to "0".."n-1".
WeightedKernel weight_kernel(const Matrix& base, std::span<const double> r);
WeightedKernel weight_kernel(const Matrix& base, std::span<const double> r,
                             std::vector<std::string> ids);

// Kernel over `pool` weighted by each record's relevance score.
WeightedKernel make_weighted_kernel(const EmbeddingSet& pool,
                                    const RelevanceScores& scores,
                                    const KernelConfig& cfg = {});

// log det of the weighted submatrix on S. Throws SingularSubset when the
// submatrix is not positive definite (including repeated items).
double log_prob(const WeightedKernel& k, std::span<const std::size_t> subset);
double log_prob(const WeightedKernel& k, std::span<const std::string> ids);

// The same quantity assembled as 2 sum log r_i + log det(L_S).
double log_prob_decomposed(const WeightedKernel& k,
                           std::span<const std::size_t> subset);

enum class SelectionMethod {
  kDpp,
  kDppNaive,
  kBruteForce,
  kRandom,
  kTopkRelevance,
};

std::string_view selection_method_name(SelectionMethod method);
// Throws InvalidArgument for an unknown name.
SelectionMethod parse_selection_method(std::string_view name);

struct ProxySelection {
  int client = 0;
  SelectionMethod method = SelectionMethod::kDpp;
  std::vector<std::string> selected_ids;
  // Positions in the pool the selection was drawn from.
  std::vector<std::size_t> selected_index;
  // log det of the weighted submatrix; NaN for methods that never saw a
  // kernel.
  double log_det = 0.0;
  // Per-step log-det increments (kernel methods only).
  Vector gains;
  double wall_ms = 0.0;
  // Wall time of each greedy step (greedy_map only).
  Vector step_ms;
};

// Greedy MAP with an incrementally maintained Cholesky row per candidate:
// each step costs one inner product of the current selection size per
// remaining candidate. Ties go to the lowest id. Candidates whose residual
// falls to kJitterFloor are retired for good. Throws InsufficientRank when
// fewer than m candidates can be added, InvalidArgument when m > pool size.
ProxySelection greedy_map(const WeightedKernel& k, std::size_t m);

// Reference greedy that factorizes S + {x} from scratch for every candidate.
ProxySelection greedy_map_naive(const WeightedKernel& k, std::size_t m);

// Exhaustive search over all size-m subsets; pool size at most 16 (throws
// PoolTooLarge). Ties go to the lexicographically smallest sorted id tuple.
// Result ids are in ascending id order.
inline constexpr std::size_t kBruteForceMaxPool = 16;
ProxySelection brute_force_map(const WeightedKernel& k, std::size_t m);

// Uniform without replacement, in draw order. Throws PoolTooSmall.
ProxySelection select_random(const EmbeddingSet& pool, std::size_t m,
                             std::uint64_t seed);

// Top m by score, ties by ascending id. Throws PoolTooSmall.
ProxySelection select_topk_relevance(const RelevanceScores& scores,
                                     std::size_t m);

}  // namespace proxymoe

#endif  // PROXYMOE_DPP_H_
