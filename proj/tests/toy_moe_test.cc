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


#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <gtest/gtest.h>

#include "proxymoe/error.h"
#include "proxymoe/rng.h"
#include "proxymoe/toy_moe.h"
#include "test_util.h"

namespace proxymoe {
namespace {

using testing::kind_of;

std::vector<Sample> random_samples(Rng& rng, std::size_t n, std::size_t dim,
                                   std::size_t classes) {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.id = "s" + std::to_string(i);
    for (std::size_t t = 0, len = 1 + rng.below(4); t < len; ++t) {
      s.tokens.push_back(testing::random_vector(dim, rng));
    }
    s.label = static_cast<int>(rng.below(classes));
    out.push_back(std::move(s));
  }
  return out;
}

template <typename Views>
Vector flatten(const Views& views) {
  Vector out;
  for (auto v : views) out.insert(out.end(), v.begin(), v.end());
  return out;
}

void assign(const ParamViews& views, const Vector& flat) {
  std::size_t at = 0;
  for (auto v : views) {
    for (double& x : v) x = flat[at++];
  }
}

ConstParamViews all_params(const ToyModel& m) {
  ConstParamViews v = m.encoder.params();
  for (auto s : m.ffn.params()) v.push_back(s);
  for (auto s : m.head.params()) v.push_back(s);
  return v;
}

ParamViews all_params(ToyModel& m) {
  ParamViews v = m.encoder.params();
  for (auto s : m.ffn.params()) v.push_back(s);
  for (auto s : m.head.params()) v.push_back(s);
  return v;
}

TEST(ToyLoss, GradientMatchesFiniteDifferences) {
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t dim = 2 + rng.below(4), hidden = 2 + rng.below(5);
    const std::size_t classes = 2 + rng.below(2);
    const ToyModel model = ToyModel::random(dim, hidden, classes, rng.next_u64());
    const auto samples = random_samples(rng, 4, dim, classes);
    ToyModel grad;
    toy_loss(model, samples, &grad);
    const Vector numeric = testing::numeric_gradient(
        [&](const Vector& flat) {
          ToyModel m = model;
          assign(all_params(m), flat);
          return toy_loss(m, samples);
        },
        flatten(all_params(model)));
    EXPECT_LT(testing::relative_error(flatten(all_params(grad)), numeric),
              1e-4)
        << "trial " << trial;
  }
}

TEST(ToyLoss, MaskedGroupsStayZero) {
  Rng rng(2);
  const ToyModel model = ToyModel::random(3, 4, 2, 7);
  const auto samples = random_samples(rng, 3, 3, 2);
  ToyModel grad;
  toy_loss(model, samples, &grad, {false, true, false});
  for (double x : flatten(grad.encoder.params())) EXPECT_EQ(x, 0.0);
  for (double x : flatten(grad.head.params())) EXPECT_EQ(x, 0.0);
  bool any = false;
  for (double x : flatten(grad.ffn.params())) any = any || x != 0.0;
  EXPECT_TRUE(any);
}

MoEModel random_moe(Rng& rng, std::size_t dim, std::size_t hidden,
                    std::size_t experts, std::size_t classes, std::size_t top_k) {
  const ToyModel base = ToyModel::random(dim, hidden, classes, rng.next_u64());
  std::vector<ToyModel> members;
  std::vector<Vector> init;
  for (std::size_t p = 0; p < experts; ++p) {
    ToyModel e = base;
    e.ffn = Ffn::random(hidden, hidden, hidden, rng);
    members.push_back(std::move(e));
    init.push_back(testing::random_vector(hidden, rng));
  }
  MoEModel moe = unify(members, init, top_k);
  moe.router.lambda_raw = rng.normal();
  return moe;
}

Vector moe_flat(const MoEModel& m) {
  Vector out;
  for (const auto& f : m.experts) {
    for (auto v : f.params()) out.insert(out.end(), v.begin(), v.end());
  }
  for (const auto& e : m.router.routing_vectors) out.insert(out.end(), e.begin(), e.end());
  out.push_back(m.router.lambda_raw);
  return out;
}

void moe_assign(MoEModel& m, const Vector& flat) {
  std::size_t at = 0;
  for (auto& f : m.experts) {
    for (auto v : f.params()) {
      for (double& x : v) x = flat[at++];
    }
  }
  for (auto& e : m.router.routing_vectors) {
    for (double& x : e) x = flat[at++];
  }
  m.router.lambda_raw = flat[at++];
}

Vector moe_grad_flat(const MoeGradients& g) {
  Vector out;
  for (const auto& f : g.experts) {
    for (auto v : f.params()) out.insert(out.end(), v.begin(), v.end());
  }
  for (const auto& e : g.routing_vectors) out.insert(out.end(), e.begin(), e.end());
  out.push_back(g.lambda_raw);
  return out;
}

TEST(MoeLoss, GradientMatchesFiniteDifferences) {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t dim = 2 + rng.below(4), hidden = 2 + rng.below(4);
    const std::size_t k = 2 + rng.below(3);
    const MoEModel moe = random_moe(rng, dim, hidden, k, 2, 1 + rng.below(k));
    const auto samples = random_samples(rng, 3, dim, 2);
    MoeGradients g = MoeGradients::zeros(moe.experts, moe.router);
    moe_loss(moe, samples, &g);
    const Vector numeric = testing::numeric_gradient(
        [&](const Vector& flat) {
          MoEModel m = moe;
          moe_assign(m, flat);
          return moe_loss(m, samples);
        },
        moe_flat(moe));
    EXPECT_LT(testing::relative_error(moe_grad_flat(g), numeric), 1e-4)
        << "trial " << trial;
  }
}

EmbeddingSet separable(Rng& rng, std::size_t n, const std::string& prefix) {
  EmbeddingSet s(SetRole::kPublic, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    const double sign = label == 1 ? 1.0 : -1.0;
    s.add({prefix + std::to_string(i),
           {sign * (1.0 + rng.uniform()), rng.normal()}, label, 0, {}});
  }
  return s;
}

TEST(TrainSeed, ZeroEpochsAndDeterminism) {
  Rng rng(4);
  const EmbeddingSet data = separable(rng, 40, "x");
  TrainConfig cfg{0.1, 0, 8, 99, ProxyMix::kUnion};
  EXPECT_EQ(train_seed(data, cfg, 5), ToyModel::random(2, 5, 2, 99));
  cfg.epochs = 5;
  EXPECT_EQ(train_seed(data, cfg, 5), train_seed(data, cfg, 5));
  EXPECT_EQ(kind_of([&] { train_seed(EmbeddingSet(SetRole::kPublic, 2), cfg, 5); }),
            ErrorKind::kEmptyTrainingSet);
}

TEST(TrainSeed, SeparableDataIsLearned) {
  Rng rng(5);
  const EmbeddingSet data = separable(rng, 100, "x");
  const ToyModel m = train_seed(data, {0.1, 200, 0, 1, ProxyMix::kUnion}, 8);
  const std::vector<EmbeddingSet> tests = {data};
  EXPECT_GE(evaluate(m, tests).average, 0.95);
}

TEST(TrainSeed, DivergenceIsReported) {
  Rng rng(6);
  const EmbeddingSet data = separable(rng, 20, "x");
  EXPECT_EQ(kind_of([&] { train_seed(data, {1e300, 5, 0, 1, ProxyMix::kUnion}, 4); }),
            ErrorKind::kDiverged);
}

TEST(Expert, ZeroEpochsAndFreezing) {
  Rng rng(7);
  const EmbeddingSet pub = separable(rng, 40, "p");
  const EmbeddingSet priv = separable(rng, 10, "c");
  const EmbeddingSet proxy = separable(rng, 6, "q");
  const ToyModel seed = train_seed(pub, {0.1, 20, 8, 1, ProxyMix::kUnion}, 6);
  TrainConfig cfg{0.1, 0, 4, 2, ProxyMix::kUnion};
  EXPECT_EQ(branch_and_finetune_expert(seed, priv, proxy, cfg), seed);
  cfg.epochs = 10;
  const ToyModel e = branch_and_finetune_expert(seed, priv, proxy, cfg);
  EXPECT_EQ(e.encoder, seed.encoder);
  EXPECT_EQ(e.head, seed.head);
  EXPECT_NE(e.ffn, seed.ffn);
}

TEST(Expert, ProxyMixModes) {
  Rng rng(8);
  const EmbeddingSet pub = separable(rng, 40, "p");
  const EmbeddingSet priv = separable(rng, 10, "c");
  const EmbeddingSet proxy = separable(rng, 6, "q");
  const EmbeddingSet empty(SetRole::kProxy, 2);
  const ToyModel seed = train_seed(pub, {0.1, 20, 8, 1, ProxyMix::kUnion}, 6);
  TrainConfig cfg{0.1, 10, 4, 2, ProxyMix::kPrivateOnly};
  EXPECT_EQ(branch_and_finetune_expert(seed, priv, proxy, cfg),
            branch_and_finetune_expert(seed, priv, empty, cfg));
  cfg.proxy_mix = ProxyMix::kProxyOnly;
  EXPECT_EQ(branch_and_finetune_expert(seed, empty, proxy, cfg),
            branch_and_finetune_expert(seed, priv, proxy, cfg));
  EXPECT_EQ(kind_of([&] { branch_and_finetune_expert(seed, priv, empty, cfg); }),
            ErrorKind::kEmptyTrainingSet);
  cfg.proxy_mix = ProxyMix::kUnion;
  EXPECT_EQ(kind_of([&] { branch_and_finetune_expert(seed, priv, empty, cfg); }),
            ErrorKind::kEmptyTrainingSet);
}

TEST(Unify, SingleExpertReproducesIt) {
  Rng rng(9);
  const ToyModel e = ToyModel::random(3, 4, 2, 5);
  const std::vector<ToyModel> one = {e};
  const MoEModel moe = unify(one, {testing::random_vector(4, rng)}, 1);
  for (int i = 0; i < 20; ++i) {
    std::vector<Vector> tokens = {testing::random_vector(3, rng),
                                  testing::random_vector(3, rng)};
    const Vector a = moe.sequence_logits(tokens);
    const Vector b = e.sequence_logits(tokens);
    for (std::size_t j = 0; j < a.size(); ++j) EXPECT_NEAR(a[j], b[j], 1e-12);
  }
}

TEST(Unify, IdenticalExpertsWithFullTopK) {
  Rng rng(10);
  const ToyModel e = ToyModel::random(3, 4, 2, 5);
  const std::vector<ToyModel> two = {e, e};
  const MoEModel moe = unify(
      two, {testing::random_vector(4, rng), testing::random_vector(4, rng)}, 2);
  for (int i = 0; i < 20; ++i) {
    std::vector<Vector> tokens = {testing::random_vector(3, rng)};
    const Vector a = moe.sequence_logits(tokens);
    const Vector b = e.sequence_logits(tokens);
    for (std::size_t j = 0; j < a.size(); ++j) EXPECT_NEAR(a[j], b[j], 1e-12);
  }
}

TEST(Unify, Errors) {
  const std::vector<ToyModel> mixed = {ToyModel::random(3, 4, 2, 1),
                                       ToyModel::random(3, 4, 2, 2)};
  EXPECT_EQ(kind_of([&] { unify(mixed, {Vector(4), Vector(4)}, 1); }),
            ErrorKind::kIncompatibleExperts);
  const std::vector<ToyModel> same = {mixed[0], mixed[0]};
  EXPECT_EQ(kind_of([&] { unify(same, {Vector(4)}, 1); }),
            ErrorKind::kDimensionMismatch);
  EXPECT_EQ(kind_of([&] { unify(same, {Vector(4), Vector(4)}, 3); }),
            ErrorKind::kInvalidArgument);
}

EmbeddingSet to_set(const std::vector<Sample>& samples, std::size_t dim) {
  EmbeddingSet s(SetRole::kProxy, dim);
  for (const auto& x : samples) {
    for (std::size_t t = 0; t < x.tokens.size(); ++t) {
      s.add({x.id + "-t" + std::to_string(t), x.tokens[t], x.label, {}, x.id});
    }
  }
  return s;
}

TEST(FinetuneMoe, ContractsOnTinyData) {
  Rng rng(11);
  const MoEModel moe = random_moe(rng, 3, 4, 3, 2, 1);
  const auto samples = random_samples(rng, 8, 3, 2);
  const EmbeddingSet data = to_set(samples, 3);

  EXPECT_EQ(finetune_moe(moe, data, {0.1, 0, 0, 1, ProxyMix::kUnion}), moe);
  const MoEModel frozen = finetune_moe(moe, data, {0.0, 5, 0, 1, ProxyMix::kUnion});
  EXPECT_EQ(frozen.router, moe.router);

  // Full batch, small step: the loss never goes up.
  MoEModel m = moe;
  double previous = moe_loss(m, samples);
  for (int epoch = 0; epoch < 20; ++epoch) {
    m = finetune_moe(m, data, {0.01, 1, 0, 1, ProxyMix::kUnion});
    const double loss = moe_loss(m, samples);
    EXPECT_LE(loss, previous + 1e-12);
    previous = loss;
  }
  EXPECT_EQ(m.encoder, moe.encoder);
  EXPECT_EQ(m.head, moe.head);
  EXPECT_NE(m.router.lambda_raw, moe.router.lambda_raw);

  MoEModel pinned = moe;
  pinned.router.pinned_lambda = 0.0;
  const MoEModel after = finetune_moe(pinned, data, {0.1, 5, 0, 1, ProxyMix::kUnion});
  EXPECT_EQ(after.router.lambda_raw, pinned.router.lambda_raw);
  EXPECT_EQ(after.router.lambda(), 0.0);

  EXPECT_EQ(kind_of([&] { finetune_moe(moe, EmbeddingSet(SetRole::kProxy, 3), {}); }),
            ErrorKind::kEmptyTrainingSet);
}

// Tokens (+-1, 0); label 1 when the first coordinate is positive.
EmbeddingSet signed_tokens(int n) {
  EmbeddingSet s(SetRole::kTest, 2);
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    s.add({"t" + std::to_string(i), {label == 1 ? 1.0 : -1.0, 0.0}, label, 0, {}});
  }
  return s;
}

TEST(Evaluate, ConstantAndPerfectModels) {
  ToyModel m;
  m.encoder = Dense(2, 2);
  m.encoder.weight = Matrix::identity(2);
  m.ffn.up = Dense(2, 2);
  m.ffn.up.weight = Matrix::from_rows({{1, 0}, {-1, 0}});
  m.ffn.down = Dense(2, 2);
  m.ffn.down.weight = Matrix::identity(2);
  m.head = Dense(2, 2);
  m.head.weight = Matrix::from_rows({{0, 1}, {1, 0}});
  const std::vector<EmbeddingSet> tests = {signed_tokens(10), signed_tokens(6)};
  const EvalReport perfect = evaluate(m, tests);
  EXPECT_EQ(perfect.per_domain, (std::vector<double>{1.0, 1.0}));
  EXPECT_EQ(perfect.average, 1.0);
  EXPECT_TRUE(perfect.routing_histogram.empty());

  ToyModel constant = m;
  constant.head.weight = Matrix(2, 2);
  constant.head.bias = {1.0, 0.0};
  const EvalReport half = evaluate(constant, tests);
  EXPECT_EQ(half.per_domain, (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(half.average, 0.5);
}

TEST(Names, RoundTrip) {
  for (ProxyMix m : {ProxyMix::kUnion, ProxyMix::kPrivateOnly, ProxyMix::kProxyOnly}) {
    EXPECT_EQ(parse_proxy_mix(proxy_mix_name(m)), m);
  }
  for (RouterInit r : {RouterInit::kDomainAware, RouterInit::kRandom}) {
    EXPECT_EQ(parse_router_init(router_init_name(r)), r);
  }
  EXPECT_EQ(kind_of([] { parse_proxy_mix("both"); }), ErrorKind::kInvalidArgument);
  EXPECT_EQ(kind_of([] { parse_router_init("zero"); }), ErrorKind::kInvalidArgument);
}

PipelineConfig tiny_config(std::uint64_t seed) {
  PipelineConfig cfg;
  cfg.domains.sequences_per_domain = 12;
  cfg.domains.test_sequences_per_domain = 30;
  cfg.domains.public_sequences_per_domain = 30;
  cfg.domains.public_distractor_sequences = 40;
  cfg.pool_size = 30;
  cfg.proxies_per_client = 6;
  cfg.hidden_dim = 12;
  cfg.seed_train.epochs = 10;
  cfg.expert_train.epochs = 10;
  cfg.moe_train.epochs = 5;
  apply_seed(cfg, seed);
  return cfg;
}

TEST(Pipeline, DeterministicAndFrozen) {
  const PipelineConfig cfg = tiny_config(3);
  const PipelineResult a = run_pipeline(cfg);
  const PipelineResult b = run_pipeline(cfg);
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.report.per_domain, b.report.per_domain);
  ASSERT_EQ(a.selections.size(), 3u);
  for (std::size_t p = 0; p < 3; ++p) {
    EXPECT_EQ(a.selections[p].selected_ids, b.selections[p].selected_ids);
    EXPECT_EQ(a.selections[p].selected_ids.size(), 6u);
  }
  ASSERT_EQ(a.report.routing_histogram.size(), 3u);
  EXPECT_EQ(a.model.experts.size(), 3u);
}

TEST(Pipeline, EveryMethodAndMixRuns) {
  for (SelectionMethod m : {SelectionMethod::kDpp, SelectionMethod::kDppNaive,
                            SelectionMethod::kRandom, SelectionMethod::kTopkRelevance}) {
    PipelineConfig cfg = tiny_config(1);
    cfg.selection = m;
    const PipelineResult r = run_pipeline(cfg);
    for (const auto& s : r.selections) EXPECT_EQ(s.method, m);
  }
  for (ProxyMix mix : {ProxyMix::kPrivateOnly, ProxyMix::kProxyOnly}) {
    PipelineConfig cfg = tiny_config(1);
    cfg.proxy_mix = mix;
    EXPECT_NO_THROW(run_pipeline(cfg));
  }
  PipelineConfig cfg = tiny_config(1);
  cfg.router_init = RouterInit::kRandom;
  cfg.pin_lambda_zero = true;
  const PipelineResult r = run_pipeline(cfg);
  EXPECT_EQ(r.model.router.lambda(), 0.0);
}

TEST(Pipeline, PoolLargerThanPublicSetFails) {
  PipelineConfig cfg = tiny_config(1);
  cfg.pool_size = 100000;
  EXPECT_EQ(kind_of([&] { run_pipeline(cfg); }), ErrorKind::kPoolTooSmall);
}

// Default desk-scale configuration over seeds 0-4.
class DefaultPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    for (std::uint64_t s = 0; s < 5; ++s) {
      PipelineConfig cfg;
      apply_seed(cfg, s);
      results_.push_back(run_pipeline(cfg));
    }
  }
  static std::vector<PipelineResult> results_;
};
std::vector<PipelineResult> DefaultPipeline::results_;

TEST_F(DefaultPipeline, ExpertsImproveOnTheirOwnDomain) {
  for (std::size_t p = 0; p < 3; ++p) {
    int wins = 0;
    for (const auto& r : results_) {
      wins += r.expert_reports[p].per_domain[p] >= r.seed_report.per_domain[p];
    }
    EXPECT_GE(wins, 3) << "domain " << p;
  }
}

TEST_F(DefaultPipeline, RoutersSpecialize) {
  for (std::size_t d = 0; d < 3; ++d) {
    int wins = 0;
    for (const auto& r : results_) {
      const auto& h = r.report.routing_histogram[d];
      wins += static_cast<std::size_t>(std::max_element(h.begin(), h.end()) -
                                       h.begin()) == d;
    }
    EXPECT_GE(wins, 3) << "domain " << d;
  }
}

}  // namespace
}  // namespace proxymoe
