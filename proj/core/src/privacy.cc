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


#include "proxymoe/privacy.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "proxymoe/error.h"

namespace proxymoe {
namespace {

std::size_t common_dim(std::span<const Vector> a, std::span<const Vector> b) {
  std::size_t dim = !a.empty() ? a.front().size()
                               : (!b.empty() ? b.front().size() : 0);
  for (auto set : {a, b}) {
    for (const auto& v : set) {
      if (v.size() != dim) {
        throw Error(ErrorKind::kDimensionMismatch,
                    "embedding of length " + std::to_string(v.size()) +
                        ", expected " + std::to_string(dim));
      }
    }
  }
  return dim;
}

Vector mean_of(std::span<const Vector> set, std::size_t dim) {
  Vector m(dim, 0.0);
  for (const auto& v : set) {
    for (std::size_t i = 0; i < dim; ++i) m[i] += v[i];
  }
  for (double& x : m) x /= static_cast<double>(set.size());
  return m;
}

double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

Vector routing_vector(std::span<const Vector> private_embs,
                      std::span<const Vector> proxy_embs) {
  if (private_embs.empty() && proxy_embs.empty()) {
    throw Error(ErrorKind::kEmptyUnion, "no private or proxy embeddings");
  }
  const std::size_t dim = common_dim(private_embs, proxy_embs);
  Vector e(dim, 0.0);
  for (auto set : {private_embs, proxy_embs}) {
    for (const auto& v : set) {
      for (std::size_t i = 0; i < dim; ++i) e[i] += v[i];
    }
  }
  const auto total = static_cast<double>(private_embs.size() + proxy_embs.size());
  for (double& x : e) x /= total;
  return e;
}

Vector routing_vector_decomposed(std::span<const Vector> private_embs,
                                 std::span<const Vector> proxy_embs) {
  if (private_embs.empty() && proxy_embs.empty()) {
    throw Error(ErrorKind::kEmptyUnion, "no private or proxy embeddings");
  }
  const std::size_t dim = common_dim(private_embs, proxy_embs);
  const auto n = static_cast<double>(private_embs.size());
  const auto m = static_cast<double>(proxy_embs.size());
  Vector e(dim, 0.0);
  if (!private_embs.empty()) {
    const Vector mu = mean_of(private_embs, dim);
    for (std::size_t i = 0; i < dim; ++i) e[i] += n / (n + m) * mu[i];
  }
  if (!proxy_embs.empty()) {
    const Vector mu = mean_of(proxy_embs, dim);
    for (std::size_t i = 0; i < dim; ++i) e[i] += m / (n + m) * mu[i];
  }
  return e;
}

SensitivityBound sensitivity_bound(double norm_bound, std::size_t num_private,
                                   std::size_t num_proxy) {
  if (num_proxy == 0) {
    throw Error(ErrorKind::kInvalidCounts, "proxy count m must be >= 1");
  }
  if (!(norm_bound >= 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "norm bound must be >= 0");
  }
  return {2.0 * norm_bound / static_cast<double>(num_private + num_proxy),
          2.0 * norm_bound / static_cast<double>(num_proxy)};
}

double private_only_sensitivity(double norm_bound, std::size_t num_private) {
  if (num_private == 0) {
    throw Error(ErrorKind::kInvalidCounts, "private count N must be >= 1");
  }
  if (!(norm_bound >= 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "norm bound must be >= 0");
  }
  return 2.0 * norm_bound / static_cast<double>(num_private);
}

SensitivityReport empirical_sensitivity(std::span<const Vector> private_embs,
                                        std::span<const Vector> proxy_embs,
                                        std::span<const Vector> candidates) {
  if (private_embs.empty()) {
    throw Error(ErrorKind::kEmptyPrivateSet, "no private embeddings");
  }
  const std::size_t dim = common_dim(private_embs, proxy_embs);
  for (const auto& c : candidates) {
    if (c.size() != dim) {
      throw Error(ErrorKind::kDimensionMismatch, "candidate dimension differs");
    }
  }

  SensitivityReport r;
  r.num_private = private_embs.size();
  r.num_proxy = proxy_embs.size();
  for (auto set : {private_embs, proxy_embs, candidates}) {
    for (const auto& v : set) r.norm_bound = std::max(r.norm_bound, norm(v));
  }
  const SensitivityBound b =
      sensitivity_bound(r.norm_bound, r.num_private, r.num_proxy);
  r.bound = b.tight;
  r.loose_bound = b.loose;
  r.private_only_bound = private_only_sensitivity(r.norm_bound, r.num_private);

  const Vector e = routing_vector(private_embs, proxy_embs);
  r.decomposition_residual =
      distance(e, routing_vector_decomposed(private_embs, proxy_embs));

  std::vector<Vector> perturbed(private_embs.begin(), private_embs.end());
  for (std::size_t k = 0; k < perturbed.size(); ++k) {
    for (const auto& c : candidates) {
      perturbed[k] = c;
      r.empirical_max = std::max(
          r.empirical_max, distance(e, routing_vector(perturbed, proxy_embs)));
    }
    perturbed[k] = private_embs[k];
  }
  r.bound_holds = r.empirical_max <= r.bound + 1e-12;
  r.tightness_witness = std::abs(r.empirical_max - r.bound) <= 1e-12;
  return r;
}

std::vector<Vector> recover_private_mean(
    std::span<const double> routing, std::span<const double> proxy_mean,
    std::size_t num_proxy, std::span<const std::size_t> candidate_ns) {
  if (routing.size() != proxy_mean.size()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "routing vector and proxy mean differ in length");
  }
  std::vector<Vector> out;
  const auto m = static_cast<double>(num_proxy);
  for (std::size_t n_hyp : candidate_ns) {
    if (n_hyp == 0) {
      throw Error(ErrorKind::kInvalidCounts, "hypothesized N must be >= 1");
    }
    const auto n = static_cast<double>(n_hyp);
    Vector mu(routing.size());
    for (std::size_t i = 0; i < mu.size(); ++i) {
      mu[i] = ((n + m) * routing[i] - m * proxy_mean[i]) / n;
    }
    out.push_back(std::move(mu));
  }
  return out;
}

}  // namespace proxymoe
