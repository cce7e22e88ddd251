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


// Logistic relevance classifier separating a client's data from the public
// pool, and the relevance-ranked candidate pool built from its scores.

#ifndef PROXYMOE_RELEVANCE_H_
#define PROXYMOE_RELEVANCE_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "proxymoe/embedding.h"
#include "proxymoe/linalg.h"

namespace proxymoe {

// Scores are clamped to [kRelevanceFloor, 1 - kRelevanceFloor] so ln(r) is
// always finite.
inline constexpr double kRelevanceFloor = 1e-6;

struct RelevanceHyper {
  double learning_rate = 0.1;
  int epochs = 500;
  std::uint64_t seed = 0;
};

struct RelevanceModel {
  Vector weights;
  double bias = 0.0;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int iterations = 0;
};

// Mean binary cross-entropy with positives labelled 1 and negatives 0, and its
// gradient; gradient.back() is the bias component.
struct BceEvaluation {
  double loss = 0.0;
  Vector gradient;
};
BceEvaluation bce_loss_and_gradient(std::span<const double> weights,
                                    double bias, const EmbeddingSet& positives,
                                    const EmbeddingSet& negatives);

// Full-batch gradient descent from zero weights. Throws DimensionMismatch,
// InvalidArgument for empty inputs and Diverged on a non-finite loss.
RelevanceModel train_relevance_classifier(const EmbeddingSet& positives,
                                          const EmbeddingSet& negatives,
                                          const RelevanceHyper& hyper);

// Unclamped logistic function, evaluated without overflow.
double sigmoid(double x);

double score(const RelevanceModel& model, std::span<const double> x);

// min(10 * num_positives, |public|) records drawn uniformly without
// replacement, returned in draw order.
EmbeddingSet draw_negatives(const EmbeddingSet& public_set,
                            std::size_t num_positives, std::uint64_t seed);

class RelevanceScores {
 public:
  RelevanceScores() = default;
  explicit RelevanceScores(int client) : client_(client) {}

  int client() const noexcept { return client_; }
  // Throws InvalidArgument on a duplicate id.
  void set(std::string id, double value);
  double at(std::string_view id) const;  // throws InvalidArgument if unknown
  bool contains(std::string_view id) const;
  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const Vector& values() const noexcept { return values_; }

 private:
  int client_ = 0;
  std::vector<std::string> ids_;
  Vector values_;
  std::unordered_map<std::string, std::size_t> index_;
};

RelevanceScores score_set(const RelevanceModel& model, const EmbeddingSet& set,
                          int client);

// Record order by descending score, ties by ascending id.
std::vector<std::size_t> rank_by_score(const RelevanceScores& scores,
                                       const EmbeddingSet& set);

// The n highest-scoring records of `public_set`. Throws PoolTooSmall when
// n > |public_set| and InvalidArgument when a record has no score.
EmbeddingSet candidate_pool(const RelevanceScores& scores,
                            const EmbeddingSet& public_set, std::size_t n);

}  // namespace proxymoe

#endif  // PROXYMOE_RELEVANCE_H_
