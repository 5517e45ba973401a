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

#include "v2xcoop/sim_harness.hpp"
#include "v2xcoop_cli/config.hpp"

#include <string>
#include <vector>

namespace v2xcoop::cli
{

enum ExitCode : int {
  exit_ok = 0,
  exit_internal = 1,
  exit_config_error = 2,
  exit_collision = 3,
  exit_solver_failure = 4,
};

struct RunManifest
{
  std::string command;
  std::string config_path;  // empty when running from defaults
  std::uint64_t seed{0};
  std::string out_dir;
  std::vector<std::string> artifacts;  // paths relative to out_dir
  RunConfig config;

  std::string to_json(int indent = 2) const;
};

struct CommandResult
{
  int exit_code{exit_ok};
  RunManifest manifest;
  std::string message;  // one-line summary
};

struct IterationStats
{
  double mean{0.0};
  int max{0};
  std::size_t solves{0};
};

IterationStats iteration_stats(const sim::SimTrace & trace);

struct WarmStartReport
{
  IterationStats warm;
  IterationStats cold;
  double mean_ratio{0.0};  // warm mean / cold mean
  double control_divergence{0.0};
  bool max_improved{false};  // warm max < cold max
};

WarmStartReport compare_warm_cold(const sim::SimTrace & warm, const sim::SimTrace & cold);

/// True if every value is at least the previous one minus tolerance.
bool non_decreasing(const std::vector<double> & values, double tolerance);

struct SweepRow
{
  double alpha{0.0};
  double run_min_distance{0.0};
  std::size_t collision_events{0};
};

inline constexpr double kSweepTolerance = 0.05;  // [m]

/// One full-length run per alpha (collisions do not stop the run).
std::vector<SweepRow> sweep_alpha(const RunConfig & config);

/// Each command writes its artifacts and manifest.json under out_dir.
CommandResult cmd_plan(const RunConfig & config, const std::string & out_dir, const std::string & config_path);
CommandResult cmd_run(const RunConfig & config, const std::string & out_dir, const std::string & config_path);
CommandResult cmd_bench_warmstart(
  const RunConfig & config, const std::string & out_dir, const std::string & config_path);
CommandResult cmd_sweep_alpha(
  const RunConfig & config, const std::string & out_dir, const std::string & config_path);

}  // namespace v2xcoop::cli
