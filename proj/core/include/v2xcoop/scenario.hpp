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

#include "v2xcoop/dynamics.hpp"
#include "v2xcoop/params.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace v2xcoop::scenario
{

/// One piece of a lane-center curve: a line (curvature 0) or a circular arc.
struct CurveSegment
{
  Eigen::Vector2d start{Eigen::Vector2d::Zero()};
  double heading{0.0};
  double length{0.0};
  double curvature{0.0};
  double s_start{0.0};

  Eigen::Vector2d point(double t) const;
  double heading_at(double t) const { return heading + curvature * t; }
};

/// Arc-length parameterized chain of lines and arcs, C1 at every joint.
/// Queries outside [0, length()] extrapolate along the end tangents.
class LaneCurve
{
public:
  LaneCurve() = default;
  LaneCurve(const Eigen::Vector2d & start, double heading);

  LaneCurve & add_line(double length);
  LaneCurve & add_arc(double length, double curvature);

  double length() const;
  Eigen::Vector2d point(double s) const;
  double heading(double s) const;
  /// Arc length of the closest curve point.
  double project(const Eigen::Vector2d & p) const;

  /// Rigid rotation about the origin.
  LaneCurve rotated(double angle) const;

  const std::vector<CurveSegment> & segments() const { return segments_; }
  const Eigen::Vector2d & start() const { return start_; }
  double start_heading() const { return start_heading_; }

private:
  const CurveSegment & segment_for(double s, double & t) const;

  Eigen::Vector2d start_{Eigen::Vector2d::Zero()};
  double start_heading_{0.0};
  std::vector<CurveSegment> segments_;
};

struct RampGeometry
{
  double l1{110.0};
  double l2{40.0};
  double lf{15.0};
  double lane_width{4.5};
  double ramp_angle{0.0};
  double fillet_radius{100.0};

  static RampGeometry from(const Parameters & p)
  {
    return {p.l1, p.l2, p.lf, p.lane_width, p.ramp_angle, p.fillet_radius};
  }
};

/// Main lane: the line x = 0 heading +y, with s = y.
LaneCurve make_main_lane(const RampGeometry & geom, double extra_length);
/// On-ramp: straight approach, fillet arc onto a parallel course at the merge
/// point P (s = l1), then an S-shaped taper over the acceleration lane that
/// ends on the main lane center at Q, and the shared straight beyond.
LaneCurve make_ramp_lane(const RampGeometry & geom, double extra_length);

enum class ScenarioKind { ramp, t_junction, crossroads };

const char * to_string(ScenarioKind kind);
ScenarioKind scenario_kind_from_string(const std::string & name);

struct VehicleSpec
{
  int id{0};
  int lane{0};          // index into ScenarioConfig::lanes
  bool main_road{true};  // tie-break priority for merge ordering
  dynamics::LongitudinalState initial{};  // along the lane curve
  double reference_speed{0.0};            // junction presets: constant path speed
};

struct ScenarioConfig
{
  ScenarioKind kind{ScenarioKind::ramp};
  std::uint64_t seed{0};
  Parameters params{};
  std::vector<LaneCurve> lanes;
  std::vector<VehicleSpec> vehicles;
  double max_duration{9.0};  // [s]
  /// Per-lane arc length of the exit boundary (infinite when the run is
  /// bounded by duration only).
  std::vector<double> lane_exit;

  dynamics::BicycleState initial_state(const VehicleSpec & v) const;
};

/// Merge ordering and neighbor relations. Index i is the vehicle index in the
/// scenario's vehicle list.
struct MergeSchedule
{
  std::vector<int> order;  // vehicle indices, front-most first
  std::vector<int> slot;   // S_i in [1, N]
  std::vector<int> merge_step;  // t_M^i
  std::vector<std::optional<int>> front_before;
  std::vector<std::optional<int>> front_after;
  std::vector<std::optional<int>> follower_before;
  std::vector<std::optional<int>> follower_after;

  int size() const { return static_cast<int>(slot.size()); }
};

/// Sorts by descending initial position (ties: main road first, then id).
/// The front-most vehicle takes slot N and merges first.
MergeSchedule assign_merge_order(const ScenarioConfig & scenario);

int merge_step_for_slot(int slot, const Parameters & params);

struct Interval
{
  double lower{0.0};
  double upper{0.0};
};

Interval terminal_bounds(const MergeSchedule & schedule, const RampGeometry & geom, int i);
Interval avg_speed_bounds(double s0, const RampGeometry & geom, double ts);

/// Sampled 2-D reference; states past the end continue along the final
/// heading at the final speed.
struct ReferenceTrajectory2D
{
  std::vector<dynamics::BicycleState> states;
  double ts{0.1};

  dynamics::BicycleState at(int k) const;
  int size() const { return static_cast<int>(states.size()); }
};

/// Positions from arc-length lookup, heading from the curve tangent and speed
/// from forward differences (the last step repeats).
ReferenceTrajectory2D map_to_2d(std::span<const double> s, const LaneCurve & lane, double ts);

/// Builds a preset. n is honoured for the ramp preset only (the junction
/// presets have a fixed population). Deterministic in (kind, n, seed, params).
ScenarioConfig make_scenario(
  ScenarioKind kind, int n, std::uint64_t seed, const Parameters & params = {});

/// Constant-speed reference along a vehicle's lane curve.
ReferenceTrajectory2D constant_speed_reference(
  const ScenarioConfig & scenario, const VehicleSpec & v, int steps);

/// Uniform draw on [lo, hi). The 53-bit mantissa is taken directly from the
/// engine output so draws are identical across standard libraries.
class UniformSampler
{
public:
  explicit UniformSampler(std::uint64_t seed) : engine_(seed) {}
  double operator()(double lo, double hi)
  {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }
  int index(int count) { return static_cast<int>((*this)(0.0, 1.0) * count) % count; }

private:
  std::mt19937_64 engine_;
};

}  // namespace v2xcoop::scenario
