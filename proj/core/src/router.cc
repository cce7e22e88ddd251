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


#include "proxymoe/router.h"

#include <algorithm>
#include <numeric>
#include <string>

#include "proxymoe/error.h"
#include "proxymoe/relevance.h"

namespace proxymoe {
namespace {

void require_dim(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw Error(ErrorKind::kDimensionMismatch,
                std::string(what) + ": " + std::to_string(got) + " vs " +
                    std::to_string(want));
  }
}

}  // namespace

double RouterLayer::lambda() const {
  return pinned_lambda ? *pinned_lambda : sigmoid(lambda_raw);
}

void RouterLayer::validate() const {
  if (routing_vectors.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "router has no experts");
  }
  for (const auto& e : routing_vectors) {
    require_dim(e.size(), dim(), "routing vector dimension");
  }
  if (top_k < 1 || top_k > num_experts()) {
    throw Error(ErrorKind::kInvalidArgument,
                "top_k " + std::to_string(top_k) + " outside [1, " +
                    std::to_string(num_experts()) + "]");
  }
  if (pinned_lambda && !(*pinned_lambda >= 0.0 && *pinned_lambda <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "pinned lambda outside [0, 1]");
  }
}

Vector blend(std::span<const double> z_t, std::span<const double> z_seq,
             double lambda) {
  require_dim(z_t.size(), z_seq.size(), "blend");
  Vector out(z_t.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (1.0 - lambda) * z_t[i] + lambda * z_seq[i];
  }
  return out;
}

Vector sequence_embedding(std::span<const Vector> tokens) {
  if (tokens.empty()) {
    throw Error(ErrorKind::kEmptySequence, "sequence has no tokens");
  }
  Vector mean(tokens.front().size(), 0.0);
  for (const auto& t : tokens) {
    require_dim(t.size(), mean.size(), "sequence token");
    for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += t[i];
  }
  for (double& v : mean) v /= static_cast<double>(tokens.size());
  return mean;
}

std::vector<std::size_t> top_k_indices(std::span<const double> values,
                                       std::size_t k) {
  k = std::min(k, values.size());
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<long>(k),
                    order.end(), [&](std::size_t a, std::size_t b) {
                      if (values[a] != values[b]) return values[a] > values[b];
                      return a < b;
                    });
  order.resize(k);
  return order;
}

RoutingDecision routing_distribution(const RouterLayer& router,
                                     std::span<const double> z_t,
                                     std::span<const double> z_seq) {
  require_dim(z_t.size(), router.dim(), "routing_distribution token");
  const Vector mixed = blend(z_t, z_seq, router.lambda());
  RoutingDecision d;
  d.logits.reserve(router.num_experts());
  for (const auto& e : router.routing_vectors) d.logits.push_back(dot(mixed, e));
  d.distribution = softmax(d.logits);
  d.chosen = top_k_indices(d.distribution, router.top_k);
  for (std::size_t p : d.chosen) d.weights.push_back(d.distribution[p]);
  return d;
}

std::vector<Vector> init_routing_vectors(
    std::span<const Encoder> encoders,
    std::span<const EmbeddingSet> client_data) {
  require_dim(encoders.size(), client_data.size(), "encoders vs clients");
  std::vector<Vector> out;
  for (std::size_t p = 0; p < encoders.size(); ++p) {
    const auto& data = client_data[p];
    if (data.empty()) {
      throw Error(ErrorKind::kEmptyClientData,
                  "client " + std::to_string(p) + " has no data");
    }
    Vector mean;
    for (const auto& r : data.records()) {
      const Vector z = encoders[p](r.vec);
      if (mean.empty()) mean.assign(z.size(), 0.0);
      require_dim(z.size(), mean.size(), "encoded dimension");
      for (std::size_t i = 0; i < z.size(); ++i) mean[i] += z[i];
    }
    for (double& v : mean) v /= static_cast<double>(data.size());
    if (!out.empty()) require_dim(mean.size(), out.front().size(), "router dim");
    out.push_back(std::move(mean));
  }
  return out;
}

Vector moe_forward(std::span<const Ffn> experts, const RouterLayer& router,
                   std::span<const double> z_t, std::span<const double> z_seq) {
  require_dim(experts.size(), router.num_experts(), "expert count");
  const RoutingDecision d = routing_distribution(router, z_t, z_seq);
  Vector out;
  for (std::size_t c = 0; c < d.chosen.size(); ++c) {
    const Vector y = experts[d.chosen[c]].forward(z_t);
    if (out.empty()) out.assign(y.size(), 0.0);
    require_dim(y.size(), out.size(), "expert output");
    for (std::size_t i = 0; i < y.size(); ++i) out[i] += d.weights[c] * y[i];
  }
  return out;
}

MoeGradients MoeGradients::zeros(std::span<const Ffn> experts,
                                 const RouterLayer& router) {
  MoeGradients g;
  for (const auto& e : router.routing_vectors) {
    g.routing_vectors.emplace_back(e.size(), 0.0);
  }
  for (const auto& f : experts) g.experts.push_back(f.zeros_like());
  return g;
}

void moe_backward(std::span<const Ffn> experts, const RouterLayer& router,
                  std::span<const double> z_t, std::span<const double> z_seq,
                  std::span<const double> grad_out, MoeGradients& grads) {
  require_dim(experts.size(), router.num_experts(), "expert count");
  const double lambda = router.lambda();
  const Vector mixed = blend(z_t, z_seq, lambda);
  const RoutingDecision d = routing_distribution(router, z_t, z_seq);
  const std::size_t k = router.num_experts();

  // dL/dpi_p = <grad_out, FFN_p(z_t)> for chosen p, zero otherwise.
  Vector dpi(k, 0.0);
  for (std::size_t c = 0; c < d.chosen.size(); ++c) {
    const std::size_t p = d.chosen[c];
    Ffn::Cache cache;
    const Vector y = experts[p].forward(z_t, cache);
    dpi[p] = dot(grad_out, y);
    Vector scaled(grad_out.begin(), grad_out.end());
    for (double& v : scaled) v *= d.weights[c];
    experts[p].backward(z_t, cache, scaled, grads.experts[p]);
  }
  // Softmax Jacobian: dL/dlogit_q = pi_q (dpi_q - sum_p pi_p dpi_p).
  const double mean_dpi = dot(d.distribution, dpi);
  Vector dmixed(mixed.size(), 0.0);
  for (std::size_t q = 0; q < k; ++q) {
    const double dlogit = d.distribution[q] * (dpi[q] - mean_dpi);
    if (dlogit == 0.0) continue;
    const auto& e = router.routing_vectors[q];
    for (std::size_t i = 0; i < mixed.size(); ++i) {
      grads.routing_vectors[q][i] += dlogit * mixed[i];
      dmixed[i] += dlogit * e[i];
    }
  }
  if (!router.pinned_lambda) {
    double dlambda = 0.0;
    for (std::size_t i = 0; i < mixed.size(); ++i) {
      dlambda += dmixed[i] * (z_seq[i] - z_t[i]);
    }
    grads.lambda_raw += dlambda * lambda * (1.0 - lambda);
  }
}

}  // namespace proxymoe
