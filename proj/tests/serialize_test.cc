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


#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "proxymoe/error.h"
#include "proxymoe/serialize.h"
#include "test_util.h"

namespace proxymoe {
namespace {

using testing::kind_of;

TEST(Serialize, SelectionWritesNanAsNull) {
  ProxySelection sel;
  sel.client = 2;
  sel.method = SelectionMethod::kRandom;
  sel.selected_ids = {"a", "b"};
  sel.log_det = std::numeric_limits<double>::quiet_NaN();
  const Json j = selection_to_json(sel);
  EXPECT_EQ(j["client"], 2);
  EXPECT_EQ(j["method"], "random");
  EXPECT_EQ(j["m"], 2);
  EXPECT_TRUE(j["log_det"].is_null());
  sel.log_det = -1.5;
  EXPECT_EQ(selection_to_json(sel)["log_det"], -1.5);
}

TEST(Serialize, ReportKeysAreDomainStrings) {
  EvalReport r{{0.9, 0.5, 0.7}, 0.7, {{3, 1}, {0, 4}, {2, 2}}};
  const Json j = report_to_json(r);
  EXPECT_EQ(j["per_domain"]["1"], 0.5);
  EXPECT_EQ(j["average"], 0.7);
  EXPECT_EQ(j["routing_histogram"]["2"], Json::array({2, 2}));
}

TEST(Serialize, RouterRoundTrip) {
  RouterLayer r;
  r.routing_vectors = {{0.1, -2.0}, {3.5, 1e-17}};
  r.lambda_raw = -0.3125;
  r.top_k = 2;
  EXPECT_EQ(router_from_json(Json::parse(router_to_json(r).dump())), r);
  r.pinned_lambda = 0.0;
  EXPECT_EQ(router_from_json(Json::parse(router_to_json(r).dump())), r);

  Json bad = router_to_json(r);
  bad["K"] = 3;
  EXPECT_EQ(kind_of([&] { router_from_json(bad); }), ErrorKind::kParseError);
  EXPECT_EQ(kind_of([&] { router_from_json(Json::array()); }), ErrorKind::kParseError);
}

TEST(Serialize, PipelineConfigRoundTrip) {
  PipelineConfig cfg;
  apply_seed(cfg, 17);
  cfg.selection = SelectionMethod::kTopkRelevance;
  cfg.proxy_mix = ProxyMix::kProxyOnly;
  cfg.pin_lambda_zero = true;
  cfg.router_init = RouterInit::kRandom;
  cfg.domains.cluster_centers = {{1, 0}, {0, 1}};
  cfg.domains.dimension = 2;
  const Json j = pipeline_config_to_json(cfg);
  const PipelineConfig back = pipeline_config_from_json(Json::parse(j.dump()));
  EXPECT_EQ(pipeline_config_to_json(back), j);
}

TEST(Serialize, PartialOverridesKeepBase) {
  PipelineConfig base;
  base.pool_size = 50;
  const PipelineConfig cfg = pipeline_config_from_json(
      Json::parse(R"({"proxies_per_client": 5, "domains": {"dimension": 8}})"), base);
  EXPECT_EQ(cfg.pool_size, 50u);
  EXPECT_EQ(cfg.proxies_per_client, 5u);
  EXPECT_EQ(cfg.domains.dimension, 8);
  EXPECT_EQ(cfg.domains.num_domains, base.domains.num_domains);
}

TEST(Serialize, RejectsUnknownAndIllTyped) {
  for (const char* text : {R"({"pool_sise": 3})", R"({"domains": {"dimensions": 3}})",
                           R"({"pool_size": -1})", R"({"pool_size": "3"})",
                           R"({"selection": "greedy"})", R"({"pin_lambda_zero": 1})",
                           R"({"seed_train": {"lr": 0.1}})"}) {
    EXPECT_EQ(kind_of([&] { pipeline_config_from_json(Json::parse(text)); }),
              ErrorKind::kInvalidArgument)
        << text;
  }
}

TEST(Serialize, TrainConfigRoundTrip) {
  TrainConfig t{0.25, 7, 3, 99, ProxyMix::kPrivateOnly};
  const TrainConfig back = train_config_from_json(train_config_to_json(t));
  EXPECT_EQ(back.learning_rate, 0.25);
  EXPECT_EQ(back.epochs, 7);
  EXPECT_EQ(back.batch_size, 3u);
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(back.proxy_mix, ProxyMix::kPrivateOnly);
}

TEST(Serialize, SensitivityKeys) {
  SensitivityReport r;
  r.num_private = 3;
  r.num_proxy = 2;
  r.bound = 0.8;
  const Json j = sensitivity_to_json(r);
  EXPECT_EQ(j["N"], 3);
  EXPECT_EQ(j["m"], 2);
  EXPECT_EQ(j["bound"], 0.8);
  EXPECT_EQ(j["tightness_witness"], false);
}

}  // namespace
}  // namespace proxymoe
