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


#include "proxymoe/serialize.h"

#include <cmath>
#include <set>
#include <string>
#include <type_traits>

#include "proxymoe/error.h"

namespace proxymoe {
namespace {

// Strict object reader: typed overrides plus rejection of unknown keys.
class Reader {
 public:
  Reader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail("", "expected a JSON object");
  }

  template <typename T>
  void field(const std::string& key, T& out) {
    known_.insert(key);
    if (!j_.contains(key)) return;
    const Json& v = j_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(key, "expected a boolean");
      out = v.get<bool>();
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned()) fail(key, "expected a non-negative integer");
      out = v.get<T>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail(key, "expected an integer");
      out = v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(key, "expected a number");
      out = v.get<T>();
    } else {
      try {
        out = v.get<T>();
      } catch (const nlohmann::json::exception&) {
        fail(key, "has the wrong type");
      }
    }
  }

  template <typename Parse>
  void enum_field(const std::string& key, Parse parse) {
    known_.insert(key);
    if (!j_.contains(key)) return;
    if (!j_.at(key).is_string()) fail(key, "expected a string");
    parse(j_.at(key).get<std::string>());
  }

  const Json* child(const std::string& key) {
    known_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!known_.contains(key)) fail(key, "unknown key");
    }
  }

 private:
  [[noreturn]] void fail(const std::string& key, const std::string& why) const {
    throw Error(ErrorKind::kInvalidArgument,
                where_ + (key.empty() ? "" : "." + key) + ": " + why);
  }

  const Json& j_;
  std::string where_;
  std::set<std::string> known_;
};

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(); }

}  // namespace

Json selection_to_json(const ProxySelection& sel) {
  Json j;
  j["client"] = sel.client;
  j["method"] = std::string(selection_method_name(sel.method));
  j["m"] = sel.selected_ids.size();
  j["selected_ids"] = sel.selected_ids;
  j["log_det"] = number_or_null(sel.log_det);
  j["gains"] = sel.gains;
  j["wall_ms"] = sel.wall_ms;
  return j;
}

Json report_to_json(const EvalReport& report) {
  Json j;
  Json per_domain = Json::object();
  for (std::size_t d = 0; d < report.per_domain.size(); ++d) {
    per_domain[std::to_string(d)] = report.per_domain[d];
  }
  j["per_domain"] = per_domain;
  j["average"] = report.average;
  Json hist = Json::object();
  for (std::size_t d = 0; d < report.routing_histogram.size(); ++d) {
    hist[std::to_string(d)] = report.routing_histogram[d];
  }
  j["routing_histogram"] = hist;
  return j;
}

Json router_to_json(const RouterLayer& router) {
  Json j;
  j["K"] = router.num_experts();
  j["dim"] = router.dim();
  j["lambda_raw"] = router.lambda_raw;
  j["routing_vectors"] = router.routing_vectors;
  j["top_k"] = router.top_k;
  if (router.pinned_lambda) j["pinned_lambda"] = *router.pinned_lambda;
  return j;
}

RouterLayer router_from_json(const Json& j) {
  RouterLayer r;
  std::size_t k = 0;
  std::size_t dim = 0;
  try {
    Reader in(j, "router");
    in.field("K", k);
    in.field("dim", dim);
    in.field("lambda_raw", r.lambda_raw);
    in.field("routing_vectors", r.routing_vectors);
    in.field("top_k", r.top_k);
    double pinned = 0.0;
    if (j.contains("pinned_lambda")) {
      in.field("pinned_lambda", pinned);
      r.pinned_lambda = pinned;
    } else {
      in.field("pinned_lambda", pinned);
    }
    in.finish();
    if (r.num_experts() != k || r.dim() != dim) {
      throw Error(ErrorKind::kInvalidArgument,
                  "K/dim do not match routing_vectors");
    }
    r.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::kParseError, e.what());
  }
  return r;
}

Json sensitivity_to_json(const SensitivityReport& r) {
  Json j;
  j["N"] = r.num_private;
  j["m"] = r.num_proxy;
  j["B"] = r.norm_bound;
  j["bound"] = r.bound;
  j["loose_bound"] = r.loose_bound;
  j["empirical_max"] = r.empirical_max;
  j["private_only_bound"] = r.private_only_bound;
  j["decomposition_residual"] = r.decomposition_residual;
  j["tightness_witness"] = r.tightness_witness;
  j["bound_holds"] = r.bound_holds;
  return j;
}

Json domain_spec_to_json(const DomainSpec& s) {
  Json j;
  j["num_domains"] = s.num_domains;
  j["tokens_per_sequence"] = s.tokens_per_sequence;
  j["sequences_per_domain"] = s.sequences_per_domain;
  j["test_sequences_per_domain"] = s.test_sequences_per_domain;
  j["dimension"] = s.dimension;
  j["cluster_centers"] = s.cluster_centers;
  j["center_radius"] = s.center_radius;
  j["intra_cluster_stddev"] = s.intra_cluster_stddev;
  j["collision_overlap"] = s.collision_overlap;
  j["seed"] = s.seed;
  j["num_classes"] = s.num_classes;
  j["class_signal"] = s.class_signal;
  j["shared_class_signal"] = s.shared_class_signal;
  j["submodes_per_domain"] = s.submodes_per_domain;
  j["submode_radius"] = s.submode_radius;
  j["submode_direction_spread"] = s.submode_direction_spread;
  j["public_sequences_per_domain"] = s.public_sequences_per_domain;
  j["public_distractor_sequences"] = s.public_distractor_sequences;
  j["distractor_modes"] = s.distractor_modes;
  j["public_spread"] = s.public_spread;
  j["public_label_noise"] = s.public_label_noise;
  j["public_shared_signal"] = s.public_shared_signal;
  j["public_shift"] = s.public_shift;
  j["duplicate_fraction"] = s.duplicate_fraction;
  j["duplicate_copies"] = s.duplicate_copies;
  j["duplicate_jitter"] = s.duplicate_jitter;
  return j;
}

DomainSpec domain_spec_from_json(const Json& j, DomainSpec s) {
  Reader in(j, "domains");
  in.field("num_domains", s.num_domains);
  in.field("tokens_per_sequence", s.tokens_per_sequence);
  in.field("sequences_per_domain", s.sequences_per_domain);
  in.field("test_sequences_per_domain", s.test_sequences_per_domain);
  in.field("dimension", s.dimension);
  in.field("cluster_centers", s.cluster_centers);
  in.field("center_radius", s.center_radius);
  in.field("intra_cluster_stddev", s.intra_cluster_stddev);
  in.field("collision_overlap", s.collision_overlap);
  in.field("seed", s.seed);
  in.field("num_classes", s.num_classes);
  in.field("class_signal", s.class_signal);
  in.field("shared_class_signal", s.shared_class_signal);
  in.field("submodes_per_domain", s.submodes_per_domain);
  in.field("submode_radius", s.submode_radius);
  in.field("submode_direction_spread", s.submode_direction_spread);
  in.field("public_sequences_per_domain", s.public_sequences_per_domain);
  in.field("public_distractor_sequences", s.public_distractor_sequences);
  in.field("distractor_modes", s.distractor_modes);
  in.field("public_spread", s.public_spread);
  in.field("public_label_noise", s.public_label_noise);
  in.field("public_shared_signal", s.public_shared_signal);
  in.field("public_shift", s.public_shift);
  in.field("duplicate_fraction", s.duplicate_fraction);
  in.field("duplicate_copies", s.duplicate_copies);
  in.field("duplicate_jitter", s.duplicate_jitter);
  in.finish();
  return s;
}

Json train_config_to_json(const TrainConfig& c) {
  Json j;
  j["learning_rate"] = c.learning_rate;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["seed"] = c.seed;
  j["proxy_mix"] = std::string(proxy_mix_name(c.proxy_mix));
  return j;
}

TrainConfig train_config_from_json(const Json& j, TrainConfig c) {
  Reader in(j, "train");
  in.field("learning_rate", c.learning_rate);
  in.field("epochs", c.epochs);
  in.field("batch_size", c.batch_size);
  in.field("seed", c.seed);
  in.enum_field("proxy_mix",
                [&](const std::string& v) { c.proxy_mix = parse_proxy_mix(v); });
  in.finish();
  return c;
}

Json pipeline_config_to_json(const PipelineConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["selection"] = std::string(selection_method_name(c.selection));
  j["proxy_mix"] = std::string(proxy_mix_name(c.proxy_mix));
  j["pool_size"] = c.pool_size;
  j["proxies_per_client"] = c.proxies_per_client;
  j["normalize_inputs"] = c.kernel.normalize_inputs;
  j["relevance"] = {{"learning_rate", c.relevance.learning_rate},
                    {"epochs", c.relevance.epochs},
                    {"seed", c.relevance.seed}};
  j["hidden_dim"] = c.hidden_dim;
  j["top_k"] = c.top_k;
  j["pin_lambda_zero"] = c.pin_lambda_zero;
  j["router_init"] = std::string(router_init_name(c.router_init));
  j["seed_train"] = train_config_to_json(c.seed_train);
  j["expert_train"] = train_config_to_json(c.expert_train);
  j["moe_train"] = train_config_to_json(c.moe_train);
  j["domains"] = domain_spec_to_json(c.domains);
  return j;
}

PipelineConfig pipeline_config_from_json(const Json& j, PipelineConfig c) {
  Reader in(j, "simulate");
  in.field("seed", c.seed);
  in.enum_field("selection", [&](const std::string& v) {
    c.selection = parse_selection_method(v);
  });
  in.enum_field("proxy_mix",
                [&](const std::string& v) { c.proxy_mix = parse_proxy_mix(v); });
  in.field("pool_size", c.pool_size);
  in.field("proxies_per_client", c.proxies_per_client);
  in.field("normalize_inputs", c.kernel.normalize_inputs);
  if (const Json* r = in.child("relevance")) {
    Reader rin(*r, "simulate.relevance");
    rin.field("learning_rate", c.relevance.learning_rate);
    rin.field("epochs", c.relevance.epochs);
    rin.field("seed", c.relevance.seed);
    rin.finish();
  }
  in.field("hidden_dim", c.hidden_dim);
  in.field("top_k", c.top_k);
  in.field("pin_lambda_zero", c.pin_lambda_zero);
  in.enum_field("router_init", [&](const std::string& v) {
    c.router_init = parse_router_init(v);
  });
  if (const Json* t = in.child("seed_train")) {
    c.seed_train = train_config_from_json(*t, c.seed_train);
  }
  if (const Json* t = in.child("expert_train")) {
    c.expert_train = train_config_from_json(*t, c.expert_train);
  }
  if (const Json* t = in.child("moe_train")) {
    c.moe_train = train_config_from_json(*t, c.moe_train);
  }
  if (const Json* d = in.child("domains")) {
    c.domains = domain_spec_from_json(*d, c.domains);
  }
  in.finish();
  return c;
}

}  // namespace proxymoe
