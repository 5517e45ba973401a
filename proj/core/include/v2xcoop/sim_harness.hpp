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
#include "v2xcoop/dynamics.hpp"
#include "v2xcoop/planner.hpp"
#include "v2xcoop/scenario.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

/**
 * Full pipeline: plan once (ramp preset), then step every vehicle's DCIMPC
 * controller at the control period and advance the true states with the
 * same bicycle model.
 */
namespace v2xcoop::sim
{

/// Two discs of radius r_c centred at +-d_hk along the heading.
struct CollisionModel
{
  double d_hk{0.0};
  double r_c{0.0};

  static CollisionModel from(const Parameters & params);
};

/// Smallest distance over vehicle pairs and their four circle-center pairs.
/// Returns +inf for fewer than two vehicles.
double min_pair_distance(std::span<const dynamics::BicycleState> states, double d_hk);

/// True iff any cross-vehicle circle-center pair is closer than 2 r_c.
bool collision_check(std::span<const dynamics::BicycleState> states, const CollisionModel & model);

struct VehicleStepRecord
{
  bool active{false};
  dynamics::BicycleControl applied{};
  dynamics::BicycleState state{};  // after applying the control
  std::uint64_t nominal_digest{0};
  std::vector<int> qp_iterations;  // one entry per inner iteration
  double wall_time{0.0};           // [s] summed over inner iterations
  bool fail_safe{false};
  int max_iter_events{0};
};

struct CollisionEvent
{
  int step{0};
  int first{0};   // vehicle ids
  int second{0};
  double distance{0.0};
};

struct TerminalCheck
{
  int id{0};
  double s{0.0};
  scenario::Interval slot{};
  bool within{false};  // s in [lower - tol, upper + tol]
};

struct SimTrace
{
  scenario::ScenarioKind kind{scenario::ScenarioKind::ramp};
  std::uint64_t seed{0};
  double ts{0.1};
  bool warm_start{true};
  double alpha{0.0};
  std::vector<int> ids;
  std::vector<dynamics::BicycleState> initial;
  std::vector<std::vector<VehicleStepRecord>> steps;  // [step][vehicle]
  std::vector<double> min_distance;                  // per step, active vehicles
  std::vector<double> variance;                      // planner history (ramp only)
  std::optional<planner::PlanResult> plan;
  std::vector<CollisionEvent> collisions;
  std::vector<TerminalCheck> terminal;
  double planner_wall_time{0.0};  // [s]

  int step_count() const { return static_cast<int>(steps.size()); }
  double duration() const { return step_count() * ts; }
  bool collided() const { return !collisions.empty(); }
  double run_min_distance() const;
  int fail_safe_events() const;
  int max_iter_events() const;
  /// QP iteration counts over every (step, vehicle, inner iteration).
  std::vector<int> all_qp_iterations() const;
  /// FNV-1a digest over applied controls and true states.
  std::uint64_t digest() const;
};

struct SimConfig
{
  planner::PlannerConfig planner{};
  mpc::MpcSettings mpc{};
  std::optional<mpc::CostWeights> weights;  // from the scenario parameters when unset
  double terminal_tolerance{1.0};           // [m]
  bool stop_on_collision{true};
  std::function<void(int step, int total)> progress;
};

/// Runs the scenario to the end of its duration or until every vehicle has
/// left through its exit boundary. A collision finalizes the trace at that
/// step unless stop_on_collision is off. Throws SolverError if the planner cannot produce a plan.
SimTrace run(const scenario::ScenarioConfig & scenario, const SimConfig & config);

/// Largest applied-control difference between two traces of the same
/// scenario, over common steps and vehicles.
double control_divergence(const SimTrace & a, const SimTrace & b);

}  // namespace v2xcoop::sim
