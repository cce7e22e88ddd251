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


#include "proxymoe/dpp.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "proxymoe/error.h"
#include "proxymoe/rng.h"

namespace proxymoe {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// rank[i] is the position of pool_ids[i] in ascending id order.
std::vector<std::size_t> id_ranks(const std::vector<std::string>& ids) {
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
  std::vector<std::size_t> rank(ids.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r;
  return rank;
}

void check_m(const WeightedKernel& k, std::size_t m) {
  if (m > k.size()) {
    throw Error(ErrorKind::kInvalidArgument,
                "cannot select " + std::to_string(m) + " items from a pool of " +
                    std::to_string(k.size()));
  }
}

[[noreturn]] void insufficient_rank(std::size_t got, std::size_t m) {
  throw Error(ErrorKind::kInsufficientRank,
              "only " + std::to_string(got) + " of " + std::to_string(m) +
                  " items have a positive Schur complement");
}

void fill_ids(const WeightedKernel& k, ProxySelection& sel) {
  sel.selected_ids.clear();
  for (std::size_t i : sel.selected_index) {
    sel.selected_ids.push_back(k.pool_ids[i]);
  }
}

// log det of the weighted submatrix, or nullopt when it is singular.
std::optional<double> try_log_det(const Matrix& m,
                                  std::span<const std::size_t> subset) {
  if (subset.empty()) return 0.0;
  try {
    return cholesky_decompose(m.submatrix(subset)).log_det();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kNotPositiveDefinite) return std::nullopt;
    throw;
  }
}

}  // namespace

Matrix build_kernel(const EmbeddingSet& pool, const KernelConfig& cfg) {
  if (pool.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "kernel over an empty pool");
  }
  const std::size_t n = pool.size();
  std::vector<Vector> z;
  z.reserve(n);
  for (const auto& r : pool.records()) {
    Vector v = r.vec;
    if (cfg.normalize_inputs) {
      const double len = norm(v);
      if (!(len > 0.0)) {
        throw Error(ErrorKind::kZeroVector,
                    "record '" + r.id + "' has zero norm");
      }
      for (double& x : v) x /= len;
    }
    z.push_back(std::move(v));
  }
  Matrix l(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    l(i, i) = cfg.normalize_inputs ? 1.0 : squared_norm(z[i]);
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = dot(z[i], z[j]);
      if (cfg.normalize_inputs) s = std::clamp(s, -1.0, 1.0);
      l(i, j) = s;
      l(j, i) = s;
    }
  }
  l.mark_psd();
  return l;
}

std::size_t WeightedKernel::index_of(std::string_view id) const {
  for (std::size_t i = 0; i < pool_ids.size(); ++i) {
    if (pool_ids[i] == id) return i;
  }
  throw Error(ErrorKind::kInvalidArgument,
              "id '" + std::string(id) + "' is not in the pool");
}

WeightedKernel weight_kernel(const Matrix& base, std::span<const double> r,
                             std::vector<std::string> ids) {
  if (!base.is_square() || r.size() != base.rows() ||
      ids.size() != base.rows()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "relevance vector of length " + std::to_string(r.size()) +
                    " for a " + std::to_string(base.rows()) + "x" +
                    std::to_string(base.cols()) + " kernel");
  }
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!(r[i] > 0.0)) {
      throw Error(ErrorKind::kNonPositiveRelevance,
                  "relevance of item " + std::to_string(i) + " is " +
                      std::to_string(r[i]));
    }
  }
  WeightedKernel k;
  k.pool_ids = std::move(ids);
  k.base = base;
  k.relevance.assign(r.begin(), r.end());
  const std::size_t n = base.rows();
  k.weighted = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      k.weighted(i, j) = r[i] * r[j] * base(i, j);
    }
  }
  if (base.known_psd()) k.weighted.mark_psd();
  return k;
}

WeightedKernel weight_kernel(const Matrix& base, std::span<const double> r) {
  std::vector<std::string> ids(base.rows());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = std::to_string(i);
  return weight_kernel(base, r, std::move(ids));
}

WeightedKernel make_weighted_kernel(const EmbeddingSet& pool,
                                    const RelevanceScores& scores,
                                    const KernelConfig& cfg) {
  Vector r(pool.size());
  std::vector<std::string> ids(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    ids[i] = pool[i].id;
    r[i] = scores.at(ids[i]);
  }
  return weight_kernel(build_kernel(pool, cfg), r, std::move(ids));
}

double log_prob(const WeightedKernel& k, std::span<const std::size_t> subset) {
  for (std::size_t i : subset) {
    if (i >= k.size()) {
      throw Error(ErrorKind::kInvalidArgument, "subset index out of range");
    }
  }
  auto v = try_log_det(k.weighted, subset);
  if (!v) {
    throw Error(ErrorKind::kSingularSubset,
                "weighted submatrix of size " + std::to_string(subset.size()) +
                    " is not positive definite");
  }
  return *v;
}

double log_prob(const WeightedKernel& k, std::span<const std::string> ids) {
  std::vector<std::size_t> subset;
  subset.reserve(ids.size());
  for (const auto& id : ids) subset.push_back(k.index_of(id));
  return log_prob(k, subset);
}

double log_prob_decomposed(const WeightedKernel& k,
                           std::span<const std::size_t> subset) {
  double relevance_term = 0.0;
  for (std::size_t i : subset) relevance_term += 2.0 * std::log(k.relevance.at(i));
  auto diversity = try_log_det(k.base, subset);
  if (!diversity) {
    throw Error(ErrorKind::kSingularSubset,
                "base submatrix is not positive definite");
  }
  return relevance_term + *diversity;
}

std::string_view selection_method_name(SelectionMethod method) {
  switch (method) {
    case SelectionMethod::kDpp: return "dpp";
    case SelectionMethod::kDppNaive: return "dpp_naive";
    case SelectionMethod::kBruteForce: return "brute_force";
    case SelectionMethod::kRandom: return "random";
    case SelectionMethod::kTopkRelevance: return "topk_relevance";
  }
  return "unknown";
}

SelectionMethod parse_selection_method(std::string_view name) {
  for (auto m : {SelectionMethod::kDpp, SelectionMethod::kDppNaive,
                 SelectionMethod::kBruteForce, SelectionMethod::kRandom,
                 SelectionMethod::kTopkRelevance}) {
    if (selection_method_name(m) == name) return m;
  }
  throw Error(ErrorKind::kInvalidArgument,
              "unknown selection method '" + std::string(name) + "'");
}

ProxySelection greedy_map(const WeightedKernel& k, std::size_t m) {
  const auto start = Clock::now();
  check_m(k, m);
  const std::size_t n = k.size();
  const auto rank = id_ranks(k.pool_ids);
  const Matrix& lw = k.weighted;

  // Column i of `cache` holds the solution y_i of P y_i = Lw[S, i] for the
  // current factor P, stored step-major so each step streams one row per
  // earlier step. `residual[i]` is Lw_ii - |y_i|^2, the Schur complement.
  Matrix cache(std::max<std::size_t>(m, 1), n);
  Vector residual(n);
  Vector cross(n);
  std::vector<std::size_t> active;
  active.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    residual[i] = lw(i, i);
    if (residual[i] > kJitterFloor) active.push_back(i);
  }

  ProxySelection sel;
  sel.method = SelectionMethod::kDpp;
  sel.step_ms.reserve(m);
  for (std::size_t step = 0; step < m; ++step) {
    const auto step_start = Clock::now();
    if (active.empty()) insufficient_rank(step, m);
    std::size_t best = active.front();
    for (std::size_t i : active) {
      if (residual[i] > residual[best] ||
          (residual[i] == residual[best] && rank[i] < rank[best])) {
        best = i;
      }
    }
    const double pivot = std::sqrt(residual[best]);
    sel.selected_index.push_back(best);
    sel.gains.push_back(std::log(residual[best]));
    sel.log_det += sel.gains.back();
    std::erase(active, best);

    // cross_i = Lw[best, i] - <y_best, y_i>, accumulated over earlier steps.
    const auto lw_best = lw.row(best);
    std::copy(lw_best.begin(), lw_best.end(), cross.begin());
    for (std::size_t t = 0; t < step; ++t) {
      const auto row = cache.row(t);
      const double b = row[best];
      for (std::size_t i = 0; i < n; ++i) cross[i] -= b * row[i];
    }
    const auto out = cache.row(step);
    std::erase_if(active, [&](std::size_t i) {
      const double y = cross[i] / pivot;
      out[i] = y;
      residual[i] -= y * y;
      return !(residual[i] > kJitterFloor);
    });
    sel.step_ms.push_back(elapsed_ms(step_start));
  }
  fill_ids(k, sel);
  sel.wall_ms = elapsed_ms(start);
  return sel;
}

ProxySelection greedy_map_naive(const WeightedKernel& k, std::size_t m) {
  const auto start = Clock::now();
  check_m(k, m);
  const std::size_t n = k.size();
  const auto rank = id_ranks(k.pool_ids);
  ProxySelection sel;
  sel.method = SelectionMethod::kDppNaive;
  std::vector<bool> taken(n, false);
  for (std::size_t step = 0; step < m; ++step) {
    std::optional<std::size_t> best;
    double best_log_det = -std::numeric_limits<double>::infinity();
    std::vector<std::size_t> trial = sel.selected_index;
    trial.push_back(0);
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      trial.back() = i;
      const auto v = try_log_det(k.weighted, trial);
      if (!v) continue;
      if (!best || *v > best_log_det ||
          (*v == best_log_det && rank[i] < rank[*best])) {
        best = i;
        best_log_det = *v;
      }
    }
    if (!best) insufficient_rank(step, m);
    taken[*best] = true;
    sel.selected_index.push_back(*best);
    sel.gains.push_back(best_log_det - sel.log_det);
    sel.log_det = best_log_det;
  }
  fill_ids(k, sel);
  sel.wall_ms = elapsed_ms(start);
  return sel;
}

ProxySelection brute_force_map(const WeightedKernel& k, std::size_t m) {
  const auto start = Clock::now();
  const std::size_t n = k.size();
  if (n > kBruteForceMaxPool) {
    throw Error(ErrorKind::kPoolTooLarge,
                "brute force over " + std::to_string(n) + " items (max " +
                    std::to_string(kBruteForceMaxPool) + ")");
  }
  check_m(k, m);
  // Enumerate subsets as index sets in ascending-id order so that the first
  // maximizer met in lexicographic order wins ties.
  std::vector<std::size_t> by_id(n);
  std::iota(by_id.begin(), by_id.end(), std::size_t{0});
  std::sort(by_id.begin(), by_id.end(), [&](std::size_t a, std::size_t b) {
    return k.pool_ids[a] < k.pool_ids[b];
  });

  std::optional<std::vector<std::size_t>> best;
  double best_log_det = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> pos(m);
  std::iota(pos.begin(), pos.end(), std::size_t{0});
  std::vector<std::size_t> subset(m);
  while (true) {
    for (std::size_t t = 0; t < m; ++t) subset[t] = by_id[pos[t]];
    if (const auto v = try_log_det(k.weighted, subset);
        v && (!best || *v > best_log_det)) {
      best = subset;
      best_log_det = *v;
    }
    // Next combination in lexicographic order.
    std::size_t t = m;
    while (t > 0 && pos[t - 1] == n - m + t - 1) --t;
    if (t == 0) break;
    ++pos[t - 1];
    for (std::size_t u = t; u < m; ++u) pos[u] = pos[u - 1] + 1;
  }
  if (!best) insufficient_rank(0, m);

  ProxySelection sel;
  sel.method = SelectionMethod::kBruteForce;
  sel.selected_index = *best;
  if (m > 0) {
    const auto f = cholesky_decompose(k.weighted.submatrix(sel.selected_index));
    for (std::size_t i = 0; i < m; ++i) {
      sel.gains.push_back(2.0 * std::log(f.at(i, i)));
    }
    sel.log_det = f.log_det();
  }
  fill_ids(k, sel);
  sel.wall_ms = elapsed_ms(start);
  return sel;
}

ProxySelection select_random(const EmbeddingSet& pool, std::size_t m,
                             std::uint64_t seed) {
  const auto start = Clock::now();
  if (m > pool.size()) {
    throw Error(ErrorKind::kPoolTooSmall,
                "cannot draw " + std::to_string(m) + " of " +
                    std::to_string(pool.size()));
  }
  Rng rng(seed);
  ProxySelection sel;
  sel.method = SelectionMethod::kRandom;
  sel.selected_index = rng.sample_without_replacement(pool.size(), m);
  for (std::size_t i : sel.selected_index) sel.selected_ids.push_back(pool[i].id);
  sel.log_det = std::numeric_limits<double>::quiet_NaN();
  sel.wall_ms = elapsed_ms(start);
  return sel;
}

ProxySelection select_topk_relevance(const RelevanceScores& scores,
                                     std::size_t m) {
  const auto start = Clock::now();
  if (m > scores.size()) {
    throw Error(ErrorKind::kPoolTooSmall,
                "cannot take the top " + std::to_string(m) + " of " +
                    std::to_string(scores.size()));
  }
  const auto& ids = scores.ids();
  const auto& values = scores.values();
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<long>(m),
                    order.end(), [&](std::size_t a, std::size_t b) {
                      if (values[a] != values[b]) return values[a] > values[b];
                      return ids[a] < ids[b];
                    });
  ProxySelection sel;
  sel.client = scores.client();
  sel.method = SelectionMethod::kTopkRelevance;
  for (std::size_t i = 0; i < m; ++i) {
    sel.selected_index.push_back(order[i]);
    sel.selected_ids.push_back(ids[order[i]]);
  }
  sel.log_det = std::numeric_limits<double>::quiet_NaN();
  sel.wall_ms = elapsed_ms(start);
  return sel;
}

}  // namespace proxymoe
