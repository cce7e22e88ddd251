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


#include "proxymoe/toy_moe.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "proxymoe/error.h"
#include "proxymoe/rng.h"

namespace proxymoe {
namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t state = seed ^ (salt * 0x9e3779b97f4a7c15ULL);
  return splitmix64(state);
}

Vector tanh_layer(const Dense& layer, std::span<const double> x) {
  Vector h = layer.forward(x);
  for (double& v : h) v = std::tanh(v);
  return h;
}

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

// Cross-entropy of the sequence logits, and (p - onehot) in `dlogits`.
double cross_entropy(std::span<const double> logits, int label,
                     Vector* dlogits) {
  if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
    throw Error(ErrorKind::kInvalidArgument,
                "label " + std::to_string(label) + " outside [0, " +
                    std::to_string(logits.size()) + ")");
  }
  const Vector p = softmax(logits);
  const double mx = *std::max_element(logits.begin(), logits.end());
  double lse = 0.0;
  for (double v : logits) lse += std::exp(v - mx);
  lse = mx + std::log(lse);
  if (dlogits) {
    *dlogits = p;
    (*dlogits)[static_cast<std::size_t>(label)] -= 1.0;
  }
  return lse - logits[static_cast<std::size_t>(label)];
}

void add_scaled(Vector& dst, std::span<const double> src, double a = 1.0) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += a * src[i];
}

std::vector<Sample> labelled_samples(const EmbeddingSet& set) {
  auto samples = group_samples(set);
  for (const auto& s : samples) {
    if (!s.label) {
      throw Error(ErrorKind::kInvalidArgument,
                  "training sample '" + s.id + "' has no label");
    }
  }
  return samples;
}

ToyModel toy_zeros_like(const ToyModel& m) {
  return ToyModel{m.encoder.zeros_like(), m.ffn.zeros_like(),
                  m.head.zeros_like()};
}

ParamViews toy_params(ToyModel& m, ToyGradMask mask) {
  ParamViews v;
  if (mask.encoder) for (auto s : m.encoder.params()) v.push_back(s);
  if (mask.ffn) for (auto s : m.ffn.params()) v.push_back(s);
  if (mask.head) for (auto s : m.head.params()) v.push_back(s);
  return v;
}

ConstParamViews toy_params(const ToyModel& m, ToyGradMask mask) {
  ConstParamViews v;
  if (mask.encoder) for (auto s : m.encoder.params()) v.push_back(s);
  if (mask.ffn) for (auto s : m.ffn.params()) v.push_back(s);
  if (mask.head) for (auto s : m.head.params()) v.push_back(s);
  return v;
}

ParamViews moe_params(MoEModel& m, bool with_lambda) {
  ParamViews v;
  for (auto& f : m.experts) for (auto s : f.params()) v.push_back(s);
  for (auto& e : m.router.routing_vectors) v.push_back(e);
  if (with_lambda) v.push_back(std::span<double>(&m.router.lambda_raw, 1));
  return v;
}

ConstParamViews moe_grad_params(const MoeGradients& g, bool with_lambda) {
  ConstParamViews v;
  for (const auto& f : g.experts) for (auto s : f.params()) v.push_back(s);
  for (const auto& e : g.routing_vectors) v.push_back(e);
  if (with_lambda) v.push_back(std::span<const double>(&g.lambda_raw, 1));
  return v;
}

// Mini-batch gradient descent over `samples`. `step(batch)` computes the
// batch loss and applies one update.
template <typename Step>
void train_loop(std::size_t count, const TrainConfig& cfg, Step step) {
  if (cfg.epochs < 0 || !(cfg.learning_rate >= 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "bad training hyperparameters");
  }
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch =
      cfg.batch_size == 0 ? count : std::min(cfg.batch_size, count);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (batch < count) rng.shuffle(order);
    for (std::size_t start = 0; start < count; start += batch) {
      const std::size_t end = std::min(count, start + batch);
      const double loss = step(std::span<const std::size_t>(
          order.data() + start, end - start));
      if (!std::isfinite(loss)) {
        throw Error(ErrorKind::kDiverged,
                    "training loss is not finite at epoch " +
                        std::to_string(epoch));
      }
    }
  }
}

template <typename Model>
EvalReport evaluate_impl(const Model& model,
                         std::span<const EmbeddingSet> tests, bool routed) {
  EvalReport report;
  for (const auto& test : tests) {
    const auto samples = group_samples(test);
    std::size_t correct = 0;
    std::vector<std::size_t> hist;
    if constexpr (requires { model.router; }) {
      if (routed) hist.assign(model.router.num_experts(), 0);
    }
    for (const auto& s : samples) {
      const Vector logits = model.sequence_logits(s.tokens);
      if (s.label && static_cast<int>(argmax(logits)) == *s.label) ++correct;
      if constexpr (requires { model.router; }) {
        if (routed) {
          for (std::size_t p : model.token_routes(s.tokens)) ++hist[p];
        }
      }
    }
    report.per_domain.push_back(
        samples.empty() ? 0.0
                        : static_cast<double>(correct) /
                              static_cast<double>(samples.size()));
    if (routed) report.routing_histogram.push_back(std::move(hist));
  }
  if (!report.per_domain.empty()) {
    report.average =
        std::accumulate(report.per_domain.begin(), report.per_domain.end(),
                        0.0) /
        static_cast<double>(report.per_domain.size());
  }
  return report;
}

}  // namespace

ToyModel ToyModel::random(std::size_t input_dim, std::size_t hidden_dim,
                          std::size_t num_classes, std::uint64_t seed) {
  Rng rng(seed);
  ToyModel m;
  m.encoder = Dense::random(input_dim, hidden_dim, rng);
  m.ffn = Ffn::random(hidden_dim, hidden_dim, hidden_dim, rng);
  m.head = Dense::random(hidden_dim, num_classes, rng);
  return m;
}

Vector ToyModel::encode(std::span<const double> x) const {
  return tanh_layer(encoder, x);
}

Vector ToyModel::sequence_logits(std::span<const Vector> tokens) const {
  if (tokens.empty()) throw Error(ErrorKind::kEmptySequence, "no tokens");
  Vector out(num_classes(), 0.0);
  for (const auto& x : tokens) {
    add_scaled(out, head.forward(ffn.forward(encode(x))));
  }
  for (double& v : out) v /= static_cast<double>(tokens.size());
  return out;
}

Vector MoEModel::encode(std::span<const double> x) const {
  return tanh_layer(encoder, x);
}

Vector MoEModel::sequence_logits(std::span<const Vector> tokens) const {
  if (tokens.empty()) throw Error(ErrorKind::kEmptySequence, "no tokens");
  std::vector<Vector> h;
  for (const auto& x : tokens) h.push_back(encode(x));
  const Vector z_seq = sequence_embedding(h);
  Vector out(head.out(), 0.0);
  for (const auto& z : h) {
    add_scaled(out, head.forward(moe_forward(experts, router, z, z_seq)));
  }
  for (double& v : out) v /= static_cast<double>(tokens.size());
  return out;
}

std::vector<std::size_t> MoEModel::token_routes(
    std::span<const Vector> tokens) const {
  std::vector<Vector> h;
  for (const auto& x : tokens) h.push_back(encode(x));
  const Vector z_seq = sequence_embedding(h);
  std::vector<std::size_t> routes;
  for (const auto& z : h) {
    routes.push_back(routing_distribution(router, z, z_seq).chosen.front());
  }
  return routes;
}

std::string_view proxy_mix_name(ProxyMix mix) {
  switch (mix) {
    case ProxyMix::kUnion: return "union";
    case ProxyMix::kPrivateOnly: return "private_only";
    case ProxyMix::kProxyOnly: return "proxy_only";
  }
  return "unknown";
}

ProxyMix parse_proxy_mix(std::string_view name) {
  for (auto m : {ProxyMix::kUnion, ProxyMix::kPrivateOnly, ProxyMix::kProxyOnly}) {
    if (proxy_mix_name(m) == name) return m;
  }
  throw Error(ErrorKind::kInvalidArgument,
              "unknown proxy_mix '" + std::string(name) + "'");
}

std::string_view router_init_name(RouterInit init) {
  switch (init) {
    case RouterInit::kDomainAware: return "domain_aware";
    case RouterInit::kRandom: return "random";
  }
  return "unknown";
}

RouterInit parse_router_init(std::string_view name) {
  for (auto r : {RouterInit::kDomainAware, RouterInit::kRandom}) {
    if (router_init_name(r) == name) return r;
  }
  throw Error(ErrorKind::kInvalidArgument,
              "unknown router_init '" + std::string(name) + "'");
}

double toy_loss(const ToyModel& model, std::span<const Sample> samples,
                ToyModel* grad, ToyGradMask mask) {
  if (samples.empty()) return 0.0;
  const double inv_batch = 1.0 / static_cast<double>(samples.size());
  ToyModel scratch;
  if (grad) scratch = toy_zeros_like(model);
  double total = 0.0;
  for (const auto& s : samples) {
    const std::size_t len = s.tokens.size();
    if (len == 0) throw Error(ErrorKind::kEmptySequence, s.id);
    std::vector<Vector> h(len), u(len);
    std::vector<Ffn::Cache> caches(len);
    Vector logits(model.num_classes(), 0.0);
    for (std::size_t t = 0; t < len; ++t) {
      h[t] = model.encode(s.tokens[t]);
      u[t] = model.ffn.forward(h[t], caches[t]);
      add_scaled(logits, model.head.forward(u[t]));
    }
    for (double& v : logits) v /= static_cast<double>(len);
    Vector dlogits;
    total += cross_entropy(logits, *s.label, grad ? &dlogits : nullptr);
    if (!grad) continue;
    for (double& v : dlogits) v *= inv_batch / static_cast<double>(len);
    for (std::size_t t = 0; t < len; ++t) {
      const Vector du = model.head.backward(u[t], dlogits, scratch.head);
      Vector dh = model.ffn.backward(h[t], caches[t], du, scratch.ffn);
      if (mask.encoder) {
        for (std::size_t i = 0; i < dh.size(); ++i) {
          dh[i] *= 1.0 - h[t][i] * h[t][i];
        }
        model.encoder.backward(s.tokens[t], dh, scratch.encoder);
      }
    }
  }
  if (grad) {
    *grad = toy_zeros_like(model);
    if (mask.encoder) grad->encoder = std::move(scratch.encoder);
    if (mask.ffn) grad->ffn = std::move(scratch.ffn);
    if (mask.head) grad->head = std::move(scratch.head);
  }
  return total * inv_batch;
}

double moe_loss(const MoEModel& model, std::span<const Sample> samples,
                MoeGradients* grad) {
  if (samples.empty()) return 0.0;
  const double inv_batch = 1.0 / static_cast<double>(samples.size());
  double total = 0.0;
  for (const auto& s : samples) {
    const std::size_t len = s.tokens.size();
    if (len == 0) throw Error(ErrorKind::kEmptySequence, s.id);
    std::vector<Vector> h;
    for (const auto& x : s.tokens) h.push_back(model.encode(x));
    const Vector z_seq = sequence_embedding(h);
    Vector logits(model.head.out(), 0.0);
    for (const auto& z : h) {
      add_scaled(logits,
                 model.head.forward(moe_forward(model.experts, model.router, z, z_seq)));
    }
    for (double& v : logits) v /= static_cast<double>(len);
    Vector dlogits;
    total += cross_entropy(logits, *s.label, grad ? &dlogits : nullptr);
    if (!grad) continue;
    for (double& v : dlogits) v *= inv_batch / static_cast<double>(len);
    const Vector du = model.head.backward_input(dlogits);
    for (const auto& z : h) {
      moe_backward(model.experts, model.router, z, z_seq, du, *grad);
    }
  }
  return total * inv_batch;
}

ToyModel train_seed(const EmbeddingSet& public_set, const TrainConfig& cfg,
                    std::size_t hidden_dim) {
  if (public_set.empty()) {
    throw Error(ErrorKind::kEmptyTrainingSet, "seed training set is empty");
  }
  const auto samples = labelled_samples(public_set);
  int max_label = 1;
  for (const auto& s : samples) max_label = std::max(max_label, *s.label);
  ToyModel model =
      ToyModel::random(public_set.dimension(), hidden_dim,
                       static_cast<std::size_t>(max_label) + 1, cfg.seed);
  std::vector<Sample> batch;
  train_loop(samples.size(), cfg, [&](std::span<const std::size_t> idx) {
    batch.clear();
    for (std::size_t i : idx) batch.push_back(samples[i]);
    ToyModel grad;
    const double loss = toy_loss(model, batch, &grad);
    sgd_step(toy_params(model, {}), toy_params(std::as_const(grad), {}),
             cfg.learning_rate);
    return loss;
  });
  return model;
}

ToyModel branch_and_finetune_expert(const ToyModel& seed,
                                    const EmbeddingSet& private_set,
                                    const EmbeddingSet& proxy_set,
                                    const TrainConfig& cfg) {
  if (cfg.proxy_mix != ProxyMix::kPrivateOnly && proxy_set.empty()) {
    throw Error(ErrorKind::kEmptyTrainingSet,
                "proxy set is empty for proxy_mix=" +
                    std::string(proxy_mix_name(cfg.proxy_mix)));
  }
  std::vector<Sample> samples;
  if (cfg.proxy_mix != ProxyMix::kProxyOnly) {
    for (auto& s : labelled_samples(private_set)) samples.push_back(std::move(s));
  }
  if (cfg.proxy_mix != ProxyMix::kPrivateOnly) {
    for (auto& s : labelled_samples(proxy_set)) samples.push_back(std::move(s));
  }
  if (samples.empty()) {
    throw Error(ErrorKind::kEmptyTrainingSet, "expert training set is empty");
  }
  constexpr ToyGradMask kFfnOnly{false, true, false};
  ToyModel expert = seed;
  std::vector<Sample> batch;
  train_loop(samples.size(), cfg, [&](std::span<const std::size_t> idx) {
    batch.clear();
    for (std::size_t i : idx) batch.push_back(samples[i]);
    ToyModel grad;
    const double loss = toy_loss(expert, batch, &grad, kFfnOnly);
    sgd_step(expert.ffn.params(), std::as_const(grad).ffn.params(),
             cfg.learning_rate);
    return loss;
  });
  return expert;
}

MoEModel unify(std::span<const ToyModel> experts,
               std::vector<Vector> router_init, std::size_t top_k) {
  if (experts.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "no experts to unify");
  }
  for (const auto& e : experts) {
    if (!(e.encoder == experts.front().encoder) ||
        !(e.head == experts.front().head)) {
      throw Error(ErrorKind::kIncompatibleExperts,
                  "experts were not branched from one seed model");
    }
  }
  if (router_init.size() != experts.size()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "router_init has " + std::to_string(router_init.size()) +
                    " vectors for " + std::to_string(experts.size()) +
                    " experts");
  }
  MoEModel moe;
  moe.encoder = experts.front().encoder;
  moe.head = experts.front().head;
  for (const auto& e : experts) moe.experts.push_back(e.ffn);
  moe.router.routing_vectors = std::move(router_init);
  moe.router.lambda_raw = 0.0;
  moe.router.top_k = top_k;
  moe.router.validate();
  if (moe.router.dim() != moe.encoder.out()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "routing vectors do not match the hidden dimension");
  }
  return moe;
}

MoEModel finetune_moe(const MoEModel& moe, const EmbeddingSet& union_proxies,
                      const TrainConfig& cfg) {
  if (union_proxies.empty()) {
    throw Error(ErrorKind::kEmptyTrainingSet, "proxy union is empty");
  }
  const auto samples = labelled_samples(union_proxies);
  MoEModel model = moe;
  const bool with_lambda = !model.router.pinned_lambda.has_value();
  std::vector<Sample> batch;
  train_loop(samples.size(), cfg, [&](std::span<const std::size_t> idx) {
    batch.clear();
    for (std::size_t i : idx) batch.push_back(samples[i]);
    MoeGradients grad = MoeGradients::zeros(model.experts, model.router);
    const double loss = moe_loss(model, batch, &grad);
    sgd_step(moe_params(model, with_lambda), moe_grad_params(grad, with_lambda),
             cfg.learning_rate);
    return loss;
  });
  return model;
}

EvalReport evaluate(const ToyModel& model, std::span<const EmbeddingSet> tests) {
  return evaluate_impl(model, tests, false);
}

EvalReport evaluate(const MoEModel& model, std::span<const EmbeddingSet> tests) {
  return evaluate_impl(model, tests, true);
}

void apply_seed(PipelineConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.domains.seed = seed;
  cfg.relevance.seed = mix_seed(seed, 1);
  cfg.seed_train.seed = mix_seed(seed, 2);
  cfg.expert_train.seed = mix_seed(seed, 3);
  cfg.moe_train.seed = mix_seed(seed, 4);
}

ClientSelection run_client_selection(const EmbeddingSet& public_means,
                                     const EmbeddingSet& private_set,
                                     int client, const PipelineConfig& cfg) {
  const auto client_salt = static_cast<std::uint64_t>(client) + 1;
  const EmbeddingSet positives = sample_means(private_set);
  const EmbeddingSet negatives =
      draw_negatives(public_means, positives.size(),
                     mix_seed(cfg.relevance.seed, client_salt));
  ClientSelection out;
  out.relevance = train_relevance_classifier(positives, negatives, cfg.relevance);
  out.scores = score_set(out.relevance, public_means, client);
  const std::size_t m = cfg.proxies_per_client;

  ProxySelection& sel = out.selection;
  switch (cfg.selection) {
    case SelectionMethod::kRandom:
      sel = select_random(public_means, m, mix_seed(cfg.seed, 100 + client_salt));
      break;
    case SelectionMethod::kTopkRelevance:
      sel = select_topk_relevance(out.scores, m);
      break;
    case SelectionMethod::kDpp:
    case SelectionMethod::kDppNaive:
    case SelectionMethod::kBruteForce: {
      const EmbeddingSet pool =
          candidate_pool(out.scores, public_means, cfg.pool_size);
      for (const auto& r : pool.records()) out.pool.push_back(r.id);
      const WeightedKernel kernel =
          make_weighted_kernel(pool, out.scores, cfg.kernel);
      if (cfg.selection == SelectionMethod::kDpp) {
        sel = greedy_map(kernel, m);
      } else if (cfg.selection == SelectionMethod::kDppNaive) {
        sel = greedy_map_naive(kernel, m);
      } else {
        sel = brute_force_map(kernel, m);
      }
      break;
    }
  }
  sel.client = client;
  return out;
}

ProxySelection select_proxies(const EmbeddingSet& public_means,
                              const EmbeddingSet& private_set, int client,
                              const PipelineConfig& cfg) {
  return run_client_selection(public_means, private_set, client, cfg).selection;
}

PipelineResult run_pipeline(const PipelineConfig& cfg) {
  const SyntheticDomains data = generate_synthetic_domains(cfg.domains);
  const EmbeddingSet public_means = sample_means(data.public_set);
  const ToyModel seed =
      train_seed(data.public_set, cfg.seed_train, cfg.hidden_dim);

  PipelineResult result;
  result.seed_report = evaluate(seed, data.tests);

  std::vector<ToyModel> experts;
  std::vector<EmbeddingSet> unions;
  EmbeddingSet all_proxies(SetRole::kProxy, data.public_set.dimension());
  for (std::size_t p = 0; p < data.clients.size(); ++p) {
    const int client = static_cast<int>(p);
    ProxySelection sel =
        select_proxies(public_means, data.clients[p], client, cfg);
    const EmbeddingSet proxies =
        select_samples(data.public_set, sel.selected_ids, SetRole::kProxy);
    for (const auto& r : proxies.records()) {
      if (!all_proxies.contains(r.id)) all_proxies.add(r);
    }
    TrainConfig expert_cfg = cfg.expert_train;
    expert_cfg.seed = mix_seed(cfg.expert_train.seed, p + 1);
    expert_cfg.proxy_mix = cfg.proxy_mix;
    experts.push_back(
        branch_and_finetune_expert(seed, data.clients[p], proxies, expert_cfg));
    result.expert_reports.push_back(evaluate(experts.back(), data.tests));
    unions.push_back(concat(data.clients[p], proxies, SetRole::kPrivate));
    result.selections.push_back(std::move(sel));
  }

  std::vector<Vector> init;
  if (cfg.router_init == RouterInit::kDomainAware) {
    std::vector<Encoder> encoders;
    for (const auto& e : experts) {
      encoders.push_back([&e](std::span<const double> x) { return e.encode(x); });
    }
    init = init_routing_vectors(encoders, unions);
  } else {
    Rng rng(cfg.seed, 0x5eed);
    for (std::size_t p = 0; p < experts.size(); ++p) {
      Vector v(cfg.hidden_dim);
      for (double& x : v) x = rng.normal() / std::sqrt(double(cfg.hidden_dim));
      init.push_back(std::move(v));
    }
  }

  MoEModel moe = unify(experts, std::move(init), cfg.top_k);
  if (cfg.pin_lambda_zero) moe.router.pinned_lambda = 0.0;
  result.model = finetune_moe(moe, all_proxies, cfg.moe_train);
  result.report = evaluate(result.model, data.tests);
  return result;
}

}  // namespace proxymoe
