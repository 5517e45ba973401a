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

#include "v2xcoop/scenario.hpp"

#include "v2xcoop/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace v2xcoop::scenario
{

namespace
{

constexpr double kPi = std::numbers::pi;
constexpr double kSpawnRange = 100.0;
constexpr double kFrontMin = 90.0;
constexpr double kGapMin = 15.0;
constexpr double kGapMax = 25.0;
constexpr double kSpeedMin = 40.0 / 3.6;
constexpr double kSpeedMax = 72.0 / 3.6;
constexpr double kRampExtra = 1500.0;

// junction layout
constexpr double kApproachLength = 100.0;
constexpr double kExitLength = 300.0;
constexpr double kExitBoundary = 20.0;
constexpr double kFirstArrival = 1.0;  // [s]
constexpr double kArrivalGap = 0.6;    // [s]

enum class Turn { straight, right, left };

// Path in the frame of the southern approach (northbound, x = +w/2),
// rotated into place for the other approaches.
LaneCurve junction_path(double w, int approach, Turn turn)
{
  LaneCurve local(Eigen::Vector2d(0.5 * w, -1.5 * w - kApproachLength), 0.5 * kPi);
  local.add_line(kApproachLength);
  switch (turn) {
    case Turn::straight:
      local.add_line(3.0 * w + kExitLength);
      break;
    case Turn::right:
      local.add_arc(0.5 * kPi * w, -1.0 / w).add_line(kExitLength);
      break;
    case Turn::left:
      local.add_arc(0.5 * kPi * 2.0 * w, 1.0 / (2.0 * w)).add_line(kExitLength);
      break;
  }
  return local.rotated(0.5 * kPi * approach);
}

double junction_exit(double w, Turn turn)
{
  switch (turn) {
    case Turn::straight:
      return kApproachLength + 3.0 * w + kExitBoundary;
    case Turn::right:
      return kApproachLength + 0.5 * kPi * w + kExitBoundary;
    case Turn::left:
      return kApproachLength + kPi * w + kExitBoundary;
  }
  return 0.0;
}

Turn turn_to(int approach, int destination)
{
  const int d = ((destination - approach) % 4 + 4) % 4;
  if (d == 1) {
    return Turn::right;
  }
  if (d == 3) {
    return Turn::left;
  }
  if (d == 2) {
    return Turn::straight;
  }
  throw ConfigError("junction: destination equals approach");
}

// arc length of the junction box entry along any path
double box_entry(double w) { return kApproachLength + 0.5 * w; }

ScenarioConfig make_ramp(int n, std::uint64_t seed, const Parameters & params)
{
  if (n < 1) {
    throw ConfigError("ramp scenario: need at least one vehicle");
  }
  ScenarioConfig sc;
  sc.kind = ScenarioKind::ramp;
  sc.seed = seed;
  sc.params = params;
  const RampGeometry geom = RampGeometry::from(params);
  sc.lanes = {make_main_lane(geom, kRampExtra), make_ramp_lane(geom, kRampExtra)};
  sc.lane_exit = {
    std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  sc.max_duration = params.planning_horizon * params.ts;

  UniformSampler draw(seed);
  const std::array<int, 2> counts{(n + 1) / 2, n / 2};
  int id = 0;
  for (int lane = 0; lane < 2; ++lane) {
    const int count = counts[static_cast<std::size_t>(lane)];
    if (count == 0) {
      continue;
    }
    std::vector<double> gaps;
    for (int k = 0; k + 1 < count; ++k) {
      gaps.push_back(draw(kGapMin, kGapMax));
    }
    const double span = std::accumulate(gaps.begin(), gaps.end(), 0.0);
    if (span > kSpawnRange) {
      throw ConfigError("ramp scenario: lane gaps do not fit in the spawn range");
    }
    double s = draw(std::max(span, kFrontMin), kSpawnRange);
    for (int k = 0; k < count; ++k) {
      VehicleSpec v;
      v.id = id++;
      v.lane = lane;
      v.main_road = lane == 0;
      v.initial = {s, draw(kSpeedMin, kSpeedMax), 0.0};
      sc.vehicles.push_back(v);
      if (k + 1 < count) {
        s -= gaps[static_cast<std::size_t>(k)];
      }
    }
  }
  return sc;
}

struct Arrival
{
  int approach;
  int destination;
  double time;   // box entry time of the reference [s]
  double speed;  // [m/s]
};

ScenarioConfig make_junction(
  ScenarioKind kind, const std::vector<Arrival> & arrivals, std::uint64_t seed,
  const Parameters & params, double duration)
{
  ScenarioConfig sc;
  sc.kind = kind;
  sc.seed = seed;
  sc.params = params;
  sc.max_duration = duration;
  const double w = params.lane_width;
  int id = 0;
  for (const Arrival & a : arrivals) {
    const Turn turn = turn_to(a.approach, a.destination);
    VehicleSpec v;
    v.id = id++;
    v.lane = static_cast<int>(sc.lanes.size());
    v.main_road = true;
    v.reference_speed = a.speed;
    const double s0 = box_entry(w) - a.speed * a.time;
    if (s0 < 0.0) {
      throw ConfigError("junction scenario: arrival too late for the approach length");
    }
    v.initial = {s0, a.speed, 0.0};
    sc.lanes.push_back(junction_path(w, a.approach, turn));
    sc.lane_exit.push_back(junction_exit(w, turn));
    sc.vehicles.push_back(v);
  }
  return sc;
}

ScenarioConfig make_t_junction(std::uint64_t seed, const Parameters & params)
{
  // approaches: 0 south, 1 east, 2 north, 3 west (counter-clockwise)
  UniformSampler draw(seed);
  std::vector<Arrival> arrivals{
    {0, 3, kFirstArrival, 0.0}, {3, 1, kFirstArrival + kArrivalGap, 0.0},
    {1, 0, kFirstArrival + 2.0 * kArrivalGap, 0.0}};
  for (Arrival & a : arrivals) {
    a.speed = draw(7.0, 9.0);
    a.time += draw(0.0, 0.2);
  }
  return make_junction(ScenarioKind::t_junction, arrivals, seed, params, 12.0);
}

ScenarioConfig make_crossroads(std::uint64_t seed, const Parameters & params)
{
  UniformSampler draw(seed);
  std::vector<Arrival> arrivals;
  std::array<double, 4> speed{};
  for (double & v : speed) {
    v = draw(7.0, 9.0);
  }
  for (int k = 0; k < 3; ++k) {
    for (int approach = 0; approach < 4; ++approach) {
      const int destination = (approach + 1 + draw.index(3)) % 4;
      const double t = kFirstArrival + (4 * k + approach) * kArrivalGap + draw(0.0, 0.2);
      arrivals.push_back({approach, destination, t, speed[static_cast<std::size_t>(approach)]});
    }
  }
  return make_junction(ScenarioKind::crossroads, arrivals, seed, params, 20.0);
}

}  // namespace

const char * to_string(ScenarioKind kind)
{
  switch (kind) {
    case ScenarioKind::ramp:
      return "ramp";
    case ScenarioKind::t_junction:
      return "t_junction";
    case ScenarioKind::crossroads:
      return "crossroads";
  }
  return "unknown";
}

ScenarioKind scenario_kind_from_string(const std::string & name)
{
  if (name == "ramp") {
    return ScenarioKind::ramp;
  }
  if (name == "t_junction") {
    return ScenarioKind::t_junction;
  }
  if (name == "crossroads") {
    return ScenarioKind::crossroads;
  }
  throw ConfigError("unknown scenario kind '" + name + "'");
}

dynamics::BicycleState ScenarioConfig::initial_state(const VehicleSpec & v) const
{
  const LaneCurve & lane = lanes.at(static_cast<std::size_t>(v.lane));
  const Eigen::Vector2d p = lane.point(v.initial.s);
  return {p.x(), p.y(), lane.heading(v.initial.s), v.initial.v};
}

int merge_step_for_slot(int slot, const Parameters & params)
{
  return params.planning_horizon - params.merge_spacing_steps() * (slot - 1) -
         params.merge_offset_steps();
}

MergeSchedule assign_merge_order(const ScenarioConfig & scenario)
{
  const int n = static_cast<int>(scenario.vehicles.size());
  MergeSchedule ms;
  ms.order.resize(static_cast<std::size_t>(n));
  std::iota(ms.order.begin(), ms.order.end(), 0);
  std::stable_sort(ms.order.begin(), ms.order.end(), [&](int a, int b) {
    const VehicleSpec & va = scenario.vehicles[static_cast<std::size_t>(a)];
    const VehicleSpec & vb = scenario.vehicles[static_cast<std::size_t>(b)];
    if (va.initial.s != vb.initial.s) {
      return va.initial.s > vb.initial.s;
    }
    if (va.main_road != vb.main_road) {
      return va.main_road;
    }
    return va.id < vb.id;
  });
  const auto un = static_cast<std::size_t>(n);
  ms.slot.assign(un, 0);
  ms.merge_step.assign(un, 0);
  ms.front_before.assign(un, std::nullopt);
  ms.front_after.assign(un, std::nullopt);
  ms.follower_before.assign(un, std::nullopt);
  ms.follower_after.assign(un, std::nullopt);
  for (int r = 0; r < n; ++r) {
    const auto i = static_cast<std::size_t>(ms.order[static_cast<std::size_t>(r)]);
    ms.slot[i] = n - r;
    ms.merge_step[i] = merge_step_for_slot(ms.slot[i], scenario.params);
    if (ms.merge_step[i] <= 0 || ms.merge_step[i] > scenario.params.planning_horizon) {
      throw ConfigError(
        "merge schedule: merge step out of range for slot " + std::to_string(ms.slot[i]));
    }
    if (r > 0) {
      const int front = ms.order[static_cast<std::size_t>(r - 1)];
      ms.front_after[i] = front;
      ms.follower_after[static_cast<std::size_t>(front)] = static_cast<int>(i);
    }
    for (int q = r - 1; q >= 0; --q) {
      const int cand = ms.order[static_cast<std::size_t>(q)];
      if (scenario.vehicles[static_cast<std::size_t>(cand)].lane == scenario.vehicles[i].lane) {
        ms.front_before[i] = cand;
        ms.follower_before[static_cast<std::size_t>(cand)] = static_cast<int>(i);
        break;
      }
    }
  }
  return ms;
}

Interval terminal_bounds(const MergeSchedule & schedule, const RampGeometry & geom, int i)
{
  const int slot = schedule.slot.at(static_cast<std::size_t>(i));
  const double base = geom.l1 + geom.l2;
  return {base + (slot - 1) * geom.lf, base + slot * geom.lf};
}

Interval avg_speed_bounds(double s0, const RampGeometry & geom, double ts)
{
  return {(geom.l1 - s0) / ts, (geom.l1 + geom.l2 - s0) / ts};
}

dynamics::BicycleState ReferenceTrajectory2D::at(int k) const
{
  if (states.empty()) {
    throw ConfigError("reference trajectory is empty");
  }
  if (k < 0) {
    return states.front();
  }
  if (k < size()) {
    return states[static_cast<std::size_t>(k)];
  }
  dynamics::BicycleState s = states.back();
  const double dt = (k - (size() - 1)) * ts;
  s.x += s.v * std::cos(s.phi) * dt;
  s.y += s.v * std::sin(s.phi) * dt;
  return s;
}

ReferenceTrajectory2D map_to_2d(std::span<const double> s, const LaneCurve & lane, double ts)
{
  if (s.empty()) {
    throw ConfigError("map_to_2d: empty arc-length sequence");
  }
  if (!(ts > 0.0)) {
    throw ConfigError("map_to_2d: sample time must be positive");
  }
  const double len = lane.length();
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (!std::isfinite(s[k]) || s[k] < -1e-9 || s[k] > len + 1e-9) {
      throw ConfigError("map_to_2d: arc length outside the lane curve");
    }
    if (k > 0 && s[k] < s[k - 1] - 1e-6) {
      throw ConfigError("map_to_2d: arc-length sequence is decreasing");
    }
  }
  ReferenceTrajectory2D ref;
  ref.ts = ts;
  ref.states.resize(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) {
    const Eigen::Vector2d p = lane.point(s[k]);
    auto & st = ref.states[k];
    st.x = p.x();
    st.y = p.y();
    st.phi = lane.heading(s[k]);
    st.v = k + 1 < s.size() ? (s[k + 1] - s[k]) / ts : (s.size() > 1 ? ref.states[k - 1].v : 0.0);
  }
  return ref;
}

ScenarioConfig make_scenario(
  ScenarioKind kind, int n, std::uint64_t seed, const Parameters & params)
{
  params.validate();
  switch (kind) {
    case ScenarioKind::ramp:
      return make_ramp(n, seed, params);
    case ScenarioKind::t_junction:
      return make_t_junction(seed, params);
    case ScenarioKind::crossroads:
      return make_crossroads(seed, params);
  }
  throw ConfigError("make_scenario: unknown kind");
}

ReferenceTrajectory2D constant_speed_reference(
  const ScenarioConfig & scenario, const VehicleSpec & v, int steps)
{
  const LaneCurve & lane = scenario.lanes.at(static_cast<std::size_t>(v.lane));
  std::vector<double> s(static_cast<std::size_t>(steps + 1));
  for (int k = 0; k <= steps; ++k) {
    s[static_cast<std::size_t>(k)] =
      std::min(v.initial.s + v.reference_speed * k * scenario.params.ts, lane.length());
  }
  return map_to_2d(s, lane, scenario.params.ts);
}

}  // namespace v2xcoop::scenario
