// Copyright 2026 The v2xcoop Authors
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

#pragma once

#include "v2xcoop/params.hpp"
#include "v2xcoop/scenario.hpp"

#include <string>

/**
 * JSON documents for parameters and scenarios.
 *
 * Parameters: a flat object whose keys match the Parameters field names;
 * absent keys keep the value of the base parameter set. Scenarios carry
 * "schema_version", "kind", "seed", "params", "max_duration", the lanes
 * (start point, start heading, and a list of [length, curvature] segments),
 * "lane_exit" (null for unbounded) and the vehicle list.
 */
namespace v2xcoop::io
{

inline constexpr int kScenarioSchemaVersion = 1;

std::string parameters_to_json(const Parameters & params, int indent = 2);
/// Throws ConfigError on malformed JSON, unknown keys or invalid values.
Parameters parameters_from_json(const std::string & text, const Parameters & base = {});

std::string scenario_to_json(const scenario::ScenarioConfig & sc, int indent = 2);
scenario::ScenarioConfig scenario_from_json(const std::string & text);

}  // namespace v2xcoop::io
