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

#include "v2xcoop/dcimpc.hpp"
#include "v2xcoop/params.hpp"
#include "v2xcoop/planner.hpp"
#include "v2xcoop/scenario.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

/**
 * Run configuration document (schema_version 1):
 *
 *   {
 *     "schema_version": 1,
 *     "preset": "ramp" | "t_junction" | "crossroads",
 *     "vehicles": 10,            // ramp only
 *     "seed": 7,
 *     "params": { ... },         // any Parameters field
 *     "planner": {"iterations": 33, "snapshots": [1, 13, 23, 33], "threads": 1},
 *     "mpc": {"warm_start": true, "threads": 1, "proximal_weight": 10},
 *     "alphas": [1, 2, 3, 4, 5]  // sweep-alpha
 *   }
 *
 * Every key is optional; unknown keys are rejected. A run manifest is also
 * accepted, in which case its embedded "config" object is used.
 */
namespace v2xcoop::cli
{

inline constexpr int kConfigSchemaVersion = 1;

struct RunConfig
{
  scenario::ScenarioKind preset{scenario::ScenarioKind::ramp};
  int vehicles{10};
  std::uint64_t seed{7};
  Parameters params{};
  int planner_iterations{33};
  std::vector<int> snapshots{1, 13, 23, 33};
  int planner_threads{1};
  bool warm_start{true};
  int mpc_threads{1};
  double proximal_weight{10.0};
  std::vector<double> alphas{1.0, 2.0, 3.0, 4.0, 5.0};

  /// Throws ConfigError.
  void validate() const;
  scenario::ScenarioConfig make_scenario() const;
  planner::PlannerConfig planner_config() const;
  mpc::MpcSettings mpc_settings() const;
};

/// Throws ConfigError on malformed documents.
RunConfig run_config_from_json(const std::string & text);
std::string run_config_to_json(const RunConfig & config, int indent = 2);

/// Reads and parses a file; throws ConfigError when it cannot be read.
RunConfig load_run_config(const std::string & path);

/// Command-line overrides applied on top of a loaded or default config.
struct Overrides
{
  std::optional<std::string> preset;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::optional<int> iterations;
  std::optional<int> vehicles;
  std::optional<std::vector<double>> alphas;
  bool no_warm_start{false};
  std::optional<int> threads;
};

void apply_overrides(RunConfig & config, const Overrides & overrides);

}  // namespace v2xcoop::cli
