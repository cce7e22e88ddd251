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


// Desk-scale training pipeline: a seed model over the public pool, one expert
// per client branched from it (only the FFN block is fine-tuned), the merged
// mixture with a context-aware router, and its final fine-tune on the union
// of proxy sets.
//
// Model: h_t = tanh(E x_t), u_t = F(h_t), logits = mean_t head(u_t),
// where F is the FFN block (dense model) or the routed expert mixture.

#ifndef PROXYMOE_TOY_MOE_H_
#define PROXYMOE_TOY_MOE_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "proxymoe/dpp.h"
#include "proxymoe/embedding.h"
#include "proxymoe/nn.h"
#include "proxymoe/relevance.h"
#include "proxymoe/router.h"

namespace proxymoe {

struct ToyModel {
  Dense encoder;
  Ffn ffn;
  Dense head;

  std::size_t input_dim() const noexcept { return encoder.in(); }
  std::size_t hidden_dim() const noexcept { return encoder.out(); }
  std::size_t num_classes() const noexcept { return head.out(); }

  // Random initialization; the FFN inner width equals hidden_dim.
  static ToyModel random(std::size_t input_dim, std::size_t hidden_dim,
                         std::size_t num_classes, std::uint64_t seed);

  Vector encode(std::span<const double> x) const;
  Vector sequence_logits(std::span<const Vector> tokens) const;

  friend bool operator==(const ToyModel&, const ToyModel&) = default;
};

struct MoEModel {
  Dense encoder;
  std::vector<Ffn> experts;
  RouterLayer router;
  Dense head;

  Vector encode(std::span<const double> x) const;
  Vector sequence_logits(std::span<const Vector> tokens) const;
  // Top-1 expert per token.
  std::vector<std::size_t> token_routes(std::span<const Vector> tokens) const;

  friend bool operator==(const MoEModel&, const MoEModel&) = default;
};

enum class ProxyMix { kUnion, kPrivateOnly, kProxyOnly };

std::string_view proxy_mix_name(ProxyMix mix);
ProxyMix parse_proxy_mix(std::string_view name);  // throws InvalidArgument

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 100;
  // 0 means full batch.
  std::size_t batch_size = 0;
  std::uint64_t seed = 0;
  ProxyMix proxy_mix = ProxyMix::kUnion;
};

// Which parameter groups a gradient pass should produce.
struct ToyGradMask {
  bool encoder = true;
  bool ffn = true;
  bool head = true;
};

// Mean sequence cross-entropy over `samples`; when `grad` is non-null it
// receives the gradient (same shape as the model, masked groups left zero).
double toy_loss(const ToyModel& model, std::span<const Sample> samples,
                ToyModel* grad = nullptr, ToyGradMask mask = {});

// Same for the mixture; encoder and head are constants.
double moe_loss(const MoEModel& model, std::span<const Sample> samples,
                MoeGradients* grad = nullptr);

// Trains every parameter on the labelled public pool. Throws
// EmptyTrainingSet and Diverged.
ToyModel train_seed(const EmbeddingSet& public_set, const TrainConfig& cfg,
                    std::size_t hidden_dim = 32);

// Copies `seed` and fine-tunes only its FFN block on the data chosen by
// cfg.proxy_mix. Throws EmptyTrainingSet.
ToyModel branch_and_finetune_expert(const ToyModel& seed,
                                    const EmbeddingSet& private_set,
                                    const EmbeddingSet& proxy_set,
                                    const TrainConfig& cfg);

// Installs the experts' FFN blocks behind a router initialized to
// `router_init` with lambda_raw = 0. Throws IncompatibleExperts when the
// experts do not share encoder and head bit for bit.
MoEModel unify(std::span<const ToyModel> experts,
               std::vector<Vector> router_init, std::size_t top_k);

// Updates the experts and the router (vectors and, unless pinned, lambda);
// encoder and head stay frozen. Throws EmptyTrainingSet and Diverged.
MoEModel finetune_moe(const MoEModel& moe, const EmbeddingSet& union_proxies,
                      const TrainConfig& cfg);

struct EvalReport {
  std::vector<double> per_domain;  // accuracy in [0, 1]
  double average = 0.0;            // arithmetic mean of per_domain
  // routing_histogram[d][p]: tokens of domain-d test data whose top-1 expert
  // is p. Empty for dense models.
  std::vector<std::vector<std::size_t>> routing_histogram;
};

EvalReport evaluate(const ToyModel& model, std::span<const EmbeddingSet> tests);
EvalReport evaluate(const MoEModel& model, std::span<const EmbeddingSet> tests);

enum class RouterInit { kDomainAware, kRandom };

std::string_view router_init_name(RouterInit init);
RouterInit parse_router_init(std::string_view name);  // throws InvalidArgument

struct PipelineConfig {
  DomainSpec domains;
  SelectionMethod selection = SelectionMethod::kDpp;
  ProxyMix proxy_mix = ProxyMix::kUnion;
  std::size_t pool_size = 72;
  std::size_t proxies_per_client = 12;
  KernelConfig kernel;
  RelevanceHyper relevance;
  std::size_t hidden_dim = 32;
  std::size_t top_k = 1;
  bool pin_lambda_zero = false;
  RouterInit router_init = RouterInit::kDomainAware;
  TrainConfig seed_train{0.1, 60, 64, 0, ProxyMix::kUnion};
  TrainConfig expert_train{0.1, 100, 32, 0, ProxyMix::kUnion};
  TrainConfig moe_train{0.05, 50, 16, 0, ProxyMix::kUnion};
  std::uint64_t seed = 0;
};

// Derives every nested seed from `seed` (domains, relevance, training).
void apply_seed(PipelineConfig& cfg, std::uint64_t seed);

struct PipelineResult {
  EvalReport report;
  EvalReport seed_report;
  std::vector<EvalReport> expert_reports;
  std::vector<ProxySelection> selections;
  MoEModel model;
};

// Relevance -> candidate pool -> selection -> expert fine-tuning -> router
// initialization -> unification -> final fine-tune -> evaluation.
PipelineResult run_pipeline(const PipelineConfig& cfg);

// One client's proxy selection as run by the pipeline, over sample-mean
// embeddings of the public pool.
struct ClientSelection {
  RelevanceModel relevance;
  RelevanceScores scores;          // over every public sample
  std::vector<std::string> pool;   // candidate pool ids; empty for random/topk
  ProxySelection selection;
};

ClientSelection run_client_selection(const EmbeddingSet& public_means,
                                     const EmbeddingSet& private_set,
                                     int client, const PipelineConfig& cfg);

ProxySelection select_proxies(const EmbeddingSet& public_means,
                              const EmbeddingSet& private_set, int client,
                              const PipelineConfig& cfg);

}  // namespace proxymoe

#endif  // PROXYMOE_TOY_MOE_H_
