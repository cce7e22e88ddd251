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


#include "proxymoe/relevance.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "proxymoe/error.h"
#include "proxymoe/rng.h"

namespace proxymoe {
namespace {

// ln(1 + e^x) without overflow.
double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double logit(std::span<const double> w, double b, std::span<const double> x) {
  return dot(w, x) + b;
}

void check_dims(const EmbeddingSet& set, std::size_t dim, const char* what) {
  if (!set.empty() && set.dimension() != dim) {
    throw Error(ErrorKind::kDimensionMismatch,
                std::string(what) + " has dimension " +
                    std::to_string(set.dimension()) + ", expected " +
                    std::to_string(dim));
  }
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

BceEvaluation bce_loss_and_gradient(std::span<const double> weights,
                                    double bias, const EmbeddingSet& positives,
                                    const EmbeddingSet& negatives) {
  const std::size_t dim = weights.size();
  check_dims(positives, dim, "positives");
  check_dims(negatives, dim, "negatives");
  const std::size_t total = positives.size() + negatives.size();
  BceEvaluation out{0.0, Vector(dim + 1, 0.0)};
  if (total == 0) return out;
  auto accumulate = [&](const EmbeddingSet& set, double target) {
    for (const auto& r : set.records()) {
      const double z = logit(weights, bias, r.vec);
      // -[t ln s(z) + (1 - t) ln(1 - s(z))] = softplus(z) - t z
      out.loss += softplus(z) - target * z;
      const double residual = sigmoid(z) - target;
      for (std::size_t i = 0; i < dim; ++i) out.gradient[i] += residual * r.vec[i];
      out.gradient[dim] += residual;
    }
  };
  accumulate(positives, 1.0);
  accumulate(negatives, 0.0);
  const double inv = 1.0 / static_cast<double>(total);
  out.loss *= inv;
  for (double& g : out.gradient) g *= inv;
  return out;
}

RelevanceModel train_relevance_classifier(const EmbeddingSet& positives,
                                          const EmbeddingSet& negatives,
                                          const RelevanceHyper& hyper) {
  if (positives.empty() || negatives.empty()) {
    throw Error(ErrorKind::kInvalidArgument,
                "relevance training needs positives and negatives");
  }
  if (positives.dimension() != negatives.dimension()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "positives and negatives differ in dimension");
  }
  if (hyper.epochs < 0 || !(hyper.learning_rate >= 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "bad relevance hyperparameters");
  }
  const std::size_t dim = positives.dimension();
  RelevanceModel model;
  model.weights.assign(dim, 0.0);
  BceEvaluation eval =
      bce_loss_and_gradient(model.weights, model.bias, positives, negatives);
  model.initial_loss = eval.loss;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    for (std::size_t i = 0; i < dim; ++i) {
      model.weights[i] -= hyper.learning_rate * eval.gradient[i];
    }
    model.bias -= hyper.learning_rate * eval.gradient[dim];
    eval = bce_loss_and_gradient(model.weights, model.bias, positives, negatives);
    if (!std::isfinite(eval.loss)) {
      throw Error(ErrorKind::kDiverged,
                  "relevance loss is not finite at epoch " +
                      std::to_string(epoch));
    }
    ++model.iterations;
  }
  model.final_loss = eval.loss;
  return model;
}

double score(const RelevanceModel& model, std::span<const double> x) {
  if (x.size() != model.weights.size()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "score: input has " + std::to_string(x.size()) +
                    " dims, model has " + std::to_string(model.weights.size()));
  }
  const double s = sigmoid(logit(model.weights, model.bias, x));
  return std::clamp(s, kRelevanceFloor, 1.0 - kRelevanceFloor);
}

EmbeddingSet draw_negatives(const EmbeddingSet& public_set,
                            std::size_t num_positives, std::uint64_t seed) {
  const std::size_t k = std::min(10 * num_positives, public_set.size());
  Rng rng(seed);
  EmbeddingSet out(public_set.role(), public_set.dimension());
  for (std::size_t i : rng.sample_without_replacement(public_set.size(), k)) {
    out.add(public_set[i]);
  }
  return out;
}

void RelevanceScores::set(std::string id, double value) {
  if (index_.contains(id)) {
    throw Error(ErrorKind::kInvalidArgument, "duplicate score id '" + id + "'");
  }
  index_.emplace(id, ids_.size());
  ids_.push_back(std::move(id));
  values_.push_back(value);
}

double RelevanceScores::at(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) {
    throw Error(ErrorKind::kInvalidArgument,
                "no relevance score for '" + std::string(id) + "'");
  }
  return values_[it->second];
}

bool RelevanceScores::contains(std::string_view id) const {
  return index_.contains(std::string(id));
}

RelevanceScores score_set(const RelevanceModel& model, const EmbeddingSet& set,
                          int client) {
  RelevanceScores out(client);
  for (const auto& r : set.records()) out.set(r.id, score(model, r.vec));
  return out;
}

std::vector<std::size_t> rank_by_score(const RelevanceScores& scores,
                                       const EmbeddingSet& set) {
  Vector value(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) value[i] = scores.at(set[i].id);
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (value[a] != value[b]) return value[a] > value[b];
    return set[a].id < set[b].id;
  });
  return order;
}

EmbeddingSet candidate_pool(const RelevanceScores& scores,
                            const EmbeddingSet& public_set, std::size_t n) {
  if (n > public_set.size()) {
    throw Error(ErrorKind::kPoolTooSmall,
                "requested " + std::to_string(n) + " candidates from " +
                    std::to_string(public_set.size()));
  }
  const auto order = rank_by_score(scores, public_set);
  EmbeddingSet out(public_set.role(), public_set.dimension());
  for (std::size_t i = 0; i < n; ++i) out.add(public_set[order[i]]);
  return out;
}

}  // namespace proxymoe
