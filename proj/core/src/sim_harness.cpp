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

#include "v2xcoop/sim_harness.hpp"

#include "v2xcoop/errors.hpp"
#include "v2xcoop/v2x_bus.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace v2xcoop::sim
{

using dynamics::BicycleState;

CollisionModel CollisionModel::from(const Parameters & params)
{
  const double d = params.circle_offset();
  const double hw = 0.5 * params.vehicle_width;
  const double rear = 0.5 * params.vehicle_length - d;
  return {d, std::max(std::hypot(d, hw), std::hypot(rear, hw))};
}

double min_pair_distance(std::span<const BicycleState> states, double d_hk)
{
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < states.size(); ++i) {
    for (std::size_t j = i + 1; j < states.size(); ++j) {
      for (const auto & off : mpc::circle_pair_offsets(states[i], states[j], d_hk)) {
        best = std::min(best, off.norm());
      }
    }
  }
  return best;
}

bool collision_check(std::span<const BicycleState> states, const CollisionModel & model)
{
  return min_pair_distance(states, model.d_hk) < 2.0 * model.r_c;
}

double SimTrace::run_min_distance() const
{
  double best = std::numeric_limits<double>::infinity();
  for (double d : min_distance) {
    best = std::min(best, d);
  }
  return best;
}

int SimTrace::fail_safe_events() const
{
  int count = 0;
  for (const auto & step : steps) {
    for (const auto & rec : step) {
      count += rec.fail_safe ? 1 : 0;
    }
  }
  return count;
}

int SimTrace::max_iter_events() const
{
  int count = 0;
  for (const auto & step : steps) {
    for (const auto & rec : step) {
      count += rec.max_iter_events;
    }
  }
  return count;
}

std::vector<int> SimTrace::all_qp_iterations() const
{
  std::vector<int> out;
  for (const auto & step : steps) {
    for (const auto & rec : step) {
      out.insert(out.end(), rec.qp_iterations.begin(), rec.qp_iterations.end());
    }
  }
  return out;
}

std::uint64_t SimTrace::digest() const
{
  std::vector<double> flat;
  flat.reserve(steps.size() * ids.size() * 7);
  for (const auto & step : steps) {
    for (const auto & rec : step) {
      flat.insert(
        flat.end(), {rec.active ? 1.0 : 0.0, rec.applied.a, rec.applied.psi, rec.state.x,
                     rec.state.y, rec.state.phi, rec.state.v});
    }
  }
  const Eigen::Map<const Eigen::VectorXd> view(flat.data(), static_cast<Eigen::Index>(flat.size()));
  return bus::fnv1a(bus::encode(view));
}

namespace
{

void check_collisions(
  const std::vector<int> & ids, const std::vector<BicycleState> & states,
  const std::vector<char> & active, const CollisionModel & model, int step,
  std::vector<CollisionEvent> & events)
{
  for (std::size_t i = 0; i < states.size(); ++i) {
    for (std::size_t j = i + 1; j < states.size(); ++j) {
      if (!active[i] || !active[j]) {
        continue;
      }
      const std::array<BicycleState, 2> pair{states[i], states[j]};
      const double d = min_pair_distance(pair, model.d_hk);
      if (d < 2.0 * model.r_c) {
        events.push_back({step, ids[i], ids[j], d});
      }
    }
  }
}

}  // namespace

SimTrace run(const scenario::ScenarioConfig & sc, const SimConfig & config)
{
  const Parameters & params = sc.params;
  params.validate();
  const std::size_t n = sc.vehicles.size();
  if (n == 0) {
    throw ConfigError("run: scenario has no vehicles");
  }
  if (sc.lane_exit.size() != sc.lanes.size()) {
    throw ConfigError("run: lane_exit must have one entry per lane");
  }
  const int total = static_cast<int>(std::lround(sc.max_duration / params.ts));
  const int horizon = params.control_horizon;
  const CollisionModel model = CollisionModel::from(params);

  SimTrace trace;
  trace.kind = sc.kind;
  trace.seed = sc.seed;
  trace.ts = params.ts;
  trace.warm_start = config.mpc.warm_start;
  const mpc::CostWeights weights = config.weights.value_or(mpc::CostWeights::from(params));
  trace.alpha = weights.alpha;

  std::vector<scenario::ReferenceTrajectory2D> refs;
  refs.reserve(n);
  if (sc.kind == scenario::ScenarioKind::ramp) {
    const auto t0 = std::chrono::steady_clock::now();
    trace.plan = planner::plan_distributed(sc, config.planner);
    trace.planner_wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    trace.variance = trace.plan->variance;
    for (const auto & vp : trace.plan->vehicles) {
      refs.push_back(vp.reference);
    }
  } else {
    for (const auto & v : sc.vehicles) {
      refs.push_back(scenario::constant_speed_reference(sc, v, total + horizon + 1));
    }
  }

  std::vector<BicycleState> states;
  std::vector<mpc::DcimpcAgent> agents;
  agents.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto & v = sc.vehicles[i];
    trace.ids.push_back(v.id);
    states.push_back(sc.initial_state(v));
    agents.push_back(mpc::make_dcimpc_agent(v.id, states.back(), &refs[i], params, config.mpc));
  }
  trace.initial = states;
  std::vector<char> active(n, 1);
  bus::V2xBus bus(trace.ids);

  for (int step = 0; step < total; ++step) {
    std::vector<mpc::DcimpcAgent *> live;
    std::vector<std::size_t> live_index;
    for (std::size_t i = 0; i < n; ++i) {
      if (active[i]) {
        live.push_back(&agents[i]);
        live_index.push_back(i);
      }
    }
    if (live.empty()) {
      break;
    }
    const auto results = mpc::dcimpc_step(live, bus, weights, params, config.mpc, step);

    std::vector<VehicleStepRecord> records(n);
    for (std::size_t i = 0; i < n; ++i) {
      records[i].state = states[i];
    }
    for (std::size_t r = 0; r < live.size(); ++r) {
      const std::size_t i = live_index[r];
      const auto & res = results[r];
      states[i] = dynamics::bicycle_step(states[i], res.applied, params.ts, params.vehicle_length);
      VehicleStepRecord & rec = records[i];
      rec.active = true;
      rec.applied = res.applied;
      rec.state = states[i];
      rec.nominal_digest = bus::fnv1a(bus::encode(res.nominal.x));
      rec.fail_safe = res.fail_safe;
      rec.max_iter_events = res.max_iter_events;
      for (const auto & inner : res.inner) {
        rec.qp_iterations.push_back(inner.qp_iterations);
        rec.wall_time += inner.wall_time;
      }
    }
    trace.steps.push_back(std::move(records));

    std::vector<BicycleState> live_states;
    for (std::size_t i : live_index) {
      live_states.push_back(states[i]);
    }
    trace.min_distance.push_back(min_pair_distance(live_states, model.d_hk));
    check_collisions(trace.ids, states, active, model, step + 1, trace.collisions);
    if (config.progress) {
      config.progress(step + 1, total);
    }
    if (trace.collided() && config.stop_on_collision) {
      break;
    }

    for (std::size_t i = 0; i < n; ++i) {
      if (!active[i]) {
        continue;
      }
      const auto & v = sc.vehicles[i];
      const double exit = sc.lane_exit[static_cast<std::size_t>(v.lane)];
      if (!std::isfinite(exit)) {
        continue;
      }
      const auto & lane = sc.lanes[static_cast<std::size_t>(v.lane)];
      const double s = lane.project(Eigen::Vector2d(states[i].x, states[i].y));
      if (s > exit + states[i].v * horizon * params.ts) {
        active[i] = 0;
        bus.remove_participant(v.id);
      }
    }
  }

  if (trace.plan) {
    const auto geom = scenario::RampGeometry::from(params);
    for (std::size_t i = 0; i < n; ++i) {
      const auto & v = sc.vehicles[i];
      const auto & lane = sc.lanes[static_cast<std::size_t>(v.lane)];
      TerminalCheck tc;
      tc.id = v.id;
      tc.s = lane.project(Eigen::Vector2d(states[i].x, states[i].y));
      tc.slot = scenario::terminal_bounds(trace.plan->schedule, geom, static_cast<int>(i));
      tc.within = tc.s >= tc.slot.lower - config.terminal_tolerance &&
                  tc.s <= tc.slot.upper + config.terminal_tolerance;
      trace.terminal.push_back(tc);
    }
  }
  return trace;
}

double control_divergence(const SimTrace & a, const SimTrace & b)
{
  double worst = 0.0;
  const std::size_t steps = std::min(a.steps.size(), b.steps.size());
  for (std::size_t k = 0; k < steps; ++k) {
    const std::size_t m = std::min(a.steps[k].size(), b.steps[k].size());
    for (std::size_t i = 0; i < m; ++i) {
      const auto & ra = a.steps[k][i];
      const auto & rb = b.steps[k][i];
      if (!ra.active || !rb.active) {
        continue;
      }
      worst = std::max(
        {worst, std::abs(ra.applied.a - rb.applied.a), std::abs(ra.applied.psi - rb.applied.psi)});
    }
  }
  return worst;
}

}  // namespace v2xcoop::sim
