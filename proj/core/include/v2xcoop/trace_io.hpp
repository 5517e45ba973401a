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

#include "v2xcoop/planner.hpp"
#include "v2xcoop/sim_harness.hpp"

#include <string>

/**
 * Trace serialization.
 *
 * JSON (schema_version 1): run metadata, initial states, one record per
 * step and vehicle (applied control [a, psi], state [x, y, phi, v], nominal
 * digest, QP iterations per inner iteration, compute time, fail-safe flag),
 * the per-step minimum distance, planner variance history, collision
 * events, terminal checks and a summary block recomputable from the rest.
 * Non-finite numbers are written as null.
 *
 * CSV: one flat row per (step, vehicle), one row per step for the minimum
 * distance, one row per planner iteration for the variance.
 */
namespace v2xcoop::io
{

inline constexpr int kTraceSchemaVersion = 1;

std::string trace_to_json(const sim::SimTrace & trace, int indent = -1);
std::string plan_to_json(const planner::PlanResult & plan, int indent = -1);

std::string trace_steps_csv(const sim::SimTrace & trace);
std::string trace_min_distance_csv(const sim::SimTrace & trace);
std::string variance_csv(const std::vector<double> & variance);

}  // namespace v2xcoop::io
