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


// Sensitivity of the shared routing vector, the mean encoding of a client's
// private data together with its proxy set:
//
//   e = N/(N+m) mu_priv + m/(N+m) mu_proxy.
//
// Replacing one private sample moves e by at most 2B/(N+m) <= 2B/m, where B
// bounds every embedding norm, against 2B/N for a private-only mean.

#ifndef PROXYMOE_PRIVACY_H_
#define PROXYMOE_PRIVACY_H_

#include <cstddef>
#include <span>
#include <vector>

#include "proxymoe/linalg.h"

namespace proxymoe {

// Mean over the union of both sets. Throws EmptyUnion and DimensionMismatch.
Vector routing_vector(std::span<const Vector> private_embs,
                      std::span<const Vector> proxy_embs);

// N/(N+m) mu_priv + m/(N+m) mu_proxy, skipping an empty side.
Vector routing_vector_decomposed(std::span<const Vector> private_embs,
                                 std::span<const Vector> proxy_embs);

struct SensitivityBound {
  double tight = 0.0;  // 2B/(N+m)
  double loose = 0.0;  // 2B/m
};

// Throws InvalidCounts when m = 0 and InvalidArgument when B < 0.
SensitivityBound sensitivity_bound(double norm_bound, std::size_t num_private,
                                   std::size_t num_proxy);

// 2B/N. Throws InvalidCounts when N = 0.
double private_only_sensitivity(double norm_bound, std::size_t num_private);

struct SensitivityReport {
  std::size_t num_private = 0;
  std::size_t num_proxy = 0;
  double norm_bound = 0.0;  // max norm over all involved vectors
  double bound = 0.0;
  double loose_bound = 0.0;
  double empirical_max = 0.0;
  double private_only_bound = 0.0;
  double decomposition_residual = 0.0;
  // empirical_max reaches the tight bound within 1e-12.
  bool tightness_witness = false;
  bool bound_holds = false;
};

// Replaces every private sample by every candidate in turn, recomputes the
// routing vector from scratch and records the largest move. Throws
// EmptyPrivateSet, InvalidCounts (no proxies) and DimensionMismatch.
SensitivityReport empirical_sensitivity(std::span<const Vector> private_embs,
                                        std::span<const Vector> proxy_embs,
                                        std::span<const Vector> candidates);

// Private means implied by ((N+m) e - m mu_proxy) / N for each hypothesized
// N. Throws InvalidCounts for a non-positive N.
std::vector<Vector> recover_private_mean(std::span<const double> routing,
                                         std::span<const double> proxy_mean,
                                         std::size_t num_proxy,
                                         std::span<const std::size_t> candidate_ns);

}  // namespace proxymoe

#endif  // PROXYMOE_PRIVACY_H_
