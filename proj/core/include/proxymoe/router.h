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


// Context-aware top-k router. Each token representation is blended with the
// mean representation of its sequence before being scored against one
// routing vector per expert:
//
//   z~ = (1 - lambda) z_t + lambda z_seq,  pi = softmax(<z~, e_p>)_p
//
// and the layer output is sum over the top-k experts of pi_p * FFN_p(z_t).

#ifndef PROXYMOE_ROUTER_H_
#define PROXYMOE_ROUTER_H_

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "proxymoe/embedding.h"
#include "proxymoe/linalg.h"
#include "proxymoe/nn.h"

namespace proxymoe {

struct RouterLayer {
  std::vector<Vector> routing_vectors;
  // lambda = sigmoid(lambda_raw), so it stays in (0, 1) while training.
  double lambda_raw = 0.0;
  std::size_t top_k = 1;
  // When set, lambda is held at this value (e.g. 0 for a token-only router)
  // and lambda_raw receives no updates.
  std::optional<double> pinned_lambda;

  std::size_t num_experts() const noexcept { return routing_vectors.size(); }
  std::size_t dim() const noexcept {
    return routing_vectors.empty() ? 0 : routing_vectors.front().size();
  }
  double lambda() const;

  // Throws DimensionMismatch unless vectors share a dimension, and
  // InvalidArgument unless 1 <= top_k <= K and any pinned lambda lies in
  // [0, 1].
  void validate() const;

  friend bool operator==(const RouterLayer&, const RouterLayer&) = default;
};

struct RoutingDecision {
  Vector logits;
  Vector distribution;
  std::vector<std::size_t> chosen;  // descending probability, ties lowest index
  Vector weights;                   // distribution at the chosen experts
};

// (1 - lambda) z_t + lambda z_seq. Throws DimensionMismatch.
Vector blend(std::span<const double> z_t, std::span<const double> z_seq,
             double lambda);

// Arithmetic mean of the token vectors. Throws EmptySequence.
Vector sequence_embedding(std::span<const Vector> tokens);

// Indices of the k largest entries, by descending value then ascending index.
std::vector<std::size_t> top_k_indices(std::span<const double> values,
                                       std::size_t k);

RoutingDecision routing_distribution(const RouterLayer& router,
                                     std::span<const double> z_t,
                                     std::span<const double> z_seq);

// Maps a raw input vector to the representation the router sees.
using Encoder = std::function<Vector(std::span<const double>)>;

// e_p = mean of encoders[p] over every record of client_data[p]. Throws
// EmptyClientData and DimensionMismatch.
std::vector<Vector> init_routing_vectors(std::span<const Encoder> encoders,
                                         std::span<const EmbeddingSet> client_data);

// Gate-weighted sum of the chosen experts' outputs on z_t.
Vector moe_forward(std::span<const Ffn> experts, const RouterLayer& router,
                   std::span<const double> z_t, std::span<const double> z_seq);

struct MoeGradients {
  std::vector<Vector> routing_vectors;
  double lambda_raw = 0.0;
  std::vector<Ffn> experts;  // zero for experts outside the top-k

  // Zeroed gradients shaped like (experts, router).
  static MoeGradients zeros(std::span<const Ffn> experts,
                            const RouterLayer& router);
};

// Accumulates into `grads` the gradient of <grad_out, moe_forward(...)> with
// respect to the routing vectors, lambda_raw (zero when pinned) and the
// chosen experts' parameters; z_t and z_seq are treated as constants. The
// top-k set is held fixed, which is exact away from ties.
void moe_backward(std::span<const Ffn> experts, const RouterLayer& router,
                  std::span<const double> z_t, std::span<const double> z_seq,
                  std::span<const double> grad_out, MoeGradients& grads);

}  // namespace proxymoe

#endif  // PROXYMOE_ROUTER_H_
