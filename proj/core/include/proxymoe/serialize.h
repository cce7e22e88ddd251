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


// JSON forms of reports, selections, router state and pipeline configuration.

#ifndef PROXYMOE_SERIALIZE_H_
#define PROXYMOE_SERIALIZE_H_

#include <cstddef>

#include <nlohmann/json.hpp>

#include "proxymoe/dpp.h"
#include "proxymoe/embedding.h"
#include "proxymoe/privacy.h"
#include "proxymoe/router.h"
#include "proxymoe/toy_moe.h"

namespace proxymoe {

using Json = nlohmann::ordered_json;

// {client, method, m, selected_ids, log_det, gains, wall_ms}; a NaN log_det
// is written as null.
Json selection_to_json(const ProxySelection& sel);

// {per_domain: {"0": acc, ...}, average, routing_histogram: {"0": [...]}}.
Json report_to_json(const EvalReport& report);

// {K, dim, lambda_raw, routing_vectors, top_k}.
Json router_to_json(const RouterLayer& router);
// Throws ParseError on a malformed document.
RouterLayer router_from_json(const Json& j);

Json sensitivity_to_json(const SensitivityReport& report);

// Every field is written. Reading starts from `base` and overrides only the
// keys present; unknown keys and ill-typed values throw InvalidArgument.
Json domain_spec_to_json(const DomainSpec& spec);
DomainSpec domain_spec_from_json(const Json& j, DomainSpec base = {});

Json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const Json& j, TrainConfig base = {});

Json pipeline_config_to_json(const PipelineConfig& cfg);
PipelineConfig pipeline_config_from_json(const Json& j,
                                         PipelineConfig base = {});

}  // namespace proxymoe

#endif  // PROXYMOE_SERIALIZE_H_
