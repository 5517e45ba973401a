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

#include "v2xcoop/scenario_io.hpp"

#include "v2xcoop/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>
#include <set>
#include <string>

namespace v2xcoop::io
{

using nlohmann::json;

namespace
{

json params_to(const Parameters & p)
{
  json j;
  j["ts"] = p.ts;
  j["planning_horizon"] = p.planning_horizon;
  j["control_horizon"] = p.control_horizon;
  j["inner_iterations"] = p.inner_iterations;
  j["merge_offset"] = p.merge_offset;
  j["merge_spacing"] = p.merge_spacing;
  j["lag_time"] = p.lag_time;
  j["l1"] = p.l1;
  j["l2"] = p.l2;
  j["lf"] = p.lf;
  j["lane_width"] = p.lane_width;
  j["ramp_angle"] = p.ramp_angle;
  j["fillet_radius"] = p.fillet_radius;
  j["vehicle_length"] = p.vehicle_length;
  j["vehicle_width"] = p.vehicle_width;
  j["accel_max"] = p.accel_max;
  j["steer_max"] = p.steer_max;
  j["gap_distance"] = p.gap_distance;
  j["safety_distance"] = p.safety_distance;
  j["alpha"] = p.alpha;
  j["q_x"] = {p.q_x(0), p.q_x(1), p.q_x(2), p.q_x(3)};
  j["q_u"] = {p.q_u(0), p.q_u(1)};
  j["m_f"] = json::array();
  for (int r = 0; r < 2; ++r) {
    j["m_f"].push_back({p.m_f(r, 0), p.m_f(r, 1), p.m_f(r, 2), p.m_f(r, 3)});
  }
  j["k_x"] = p.k_x;
  j["k_u"] = p.k_u;
  return j;
}

template <class T>
void read(const json & j, const char * key, T & out)
{
  if (j.contains(key)) {
    out = j.at(key).get<T>();
  }
}

Parameters params_from(const json & j, Parameters p)
{
  static const std::set<std::string> known{
    "ts", "planning_horizon", "control_horizon", "inner_iterations", "merge_offset",
    "merge_spacing", "lag_time", "l1", "l2", "lf", "lane_width", "ramp_angle", "fillet_radius",
    "vehicle_length", "vehicle_width", "accel_max", "steer_max", "gap_distance",
    "safety_distance", "alpha", "q_x", "q_u", "m_f", "k_x", "k_u"};
  if (!j.is_object()) {
    throw ConfigError("parameters: expected a JSON object");
  }
  for (const auto & item : j.items()) {
    if (!known.count(item.key())) {
      throw ConfigError("parameters: unknown key '" + item.key() + "'");
    }
  }
  read(j, "ts", p.ts);
  read(j, "planning_horizon", p.planning_horizon);
  read(j, "control_horizon", p.control_horizon);
  read(j, "inner_iterations", p.inner_iterations);
  read(j, "merge_offset", p.merge_offset);
  read(j, "merge_spacing", p.merge_spacing);
  read(j, "lag_time", p.lag_time);
  read(j, "l1", p.l1);
  read(j, "l2", p.l2);
  read(j, "lf", p.lf);
  read(j, "lane_width", p.lane_width);
  read(j, "ramp_angle", p.ramp_angle);
  read(j, "fillet_radius", p.fillet_radius);
  read(j, "vehicle_length", p.vehicle_length);
  read(j, "vehicle_width", p.vehicle_width);
  read(j, "accel_max", p.accel_max);
  read(j, "steer_max", p.steer_max);
  read(j, "gap_distance", p.gap_distance);
  read(j, "safety_distance", p.safety_distance);
  read(j, "alpha", p.alpha);
  read(j, "k_x", p.k_x);
  read(j, "k_u", p.k_u);
  if (j.contains("q_x")) {
    const auto v = j.at("q_x").get<std::vector<double>>();
    if (v.size() != 4) {
      throw ConfigError("parameters: q_x needs 4 entries");
    }
    p.q_x = Eigen::Vector4d(v[0], v[1], v[2], v[3]);
  }
  if (j.contains("q_u")) {
    const auto v = j.at("q_u").get<std::vector<double>>();
    if (v.size() != 2) {
      throw ConfigError("parameters: q_u needs 2 entries");
    }
    p.q_u = Eigen::Vector2d(v[0], v[1]);
  }
  if (j.contains("m_f")) {
    const auto v = j.at("m_f").get<std::vector<std::vector<double>>>();
    if (v.size() != 2 || v[0].size() != 4 || v[1].size() != 4) {
      throw ConfigError("parameters: m_f must be 2 x 4");
    }
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 4; ++c) {
        p.m_f(r, c) = v[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      }
    }
  }
  p.validate();
  return p;
}

}  // namespace

std::string parameters_to_json(const Parameters & params, int indent)
{
  return params_to(params).dump(indent);
}

Parameters parameters_from_json(const std::string & text, const Parameters & base)
{
  try {
    return params_from(json::parse(text), base);
  } catch (const json::exception & e) {
    throw ConfigError(std::string("parameters: ") + e.what());
  }
}

std::string scenario_to_json(const scenario::ScenarioConfig & sc, int indent)
{
  json j;
  j["schema_version"] = kScenarioSchemaVersion;
  j["kind"] = scenario::to_string(sc.kind);
  j["seed"] = sc.seed;
  j["params"] = params_to(sc.params);
  j["max_duration"] = sc.max_duration;
  j["lanes"] = json::array();
  for (const auto & lane : sc.lanes) {
    json l;
    l["start"] = {lane.start().x(), lane.start().y()};
    l["heading"] = lane.start_heading();
    l["segments"] = json::array();
    for (const auto & seg : lane.segments()) {
      l["segments"].push_back({seg.length, seg.curvature});
    }
    j["lanes"].push_back(l);
  }
  j["lane_exit"] = json::array();
  for (double e : sc.lane_exit) {
    if (std::isfinite(e)) {
      j["lane_exit"].push_back(e);
    } else {
      j["lane_exit"].push_back(nullptr);
    }
  }
  j["vehicles"] = json::array();
  for (const auto & v : sc.vehicles) {
    j["vehicles"].push_back(
      {{"id", v.id},
       {"lane", v.lane},
       {"main_road", v.main_road},
       {"s0", v.initial.s},
       {"v0", v.initial.v},
       {"a0", v.initial.a},
       {"reference_speed", v.reference_speed}});
  }
  return j.dump(indent);
}

scenario::ScenarioConfig scenario_from_json(const std::string & text)
{
  try {
    const json j = json::parse(text);
    const int version = j.at("schema_version").get<int>();
    if (version != kScenarioSchemaVersion) {
      throw ConfigError("scenario: unsupported schema_version " + std::to_string(version));
    }
    scenario::ScenarioConfig sc;
    sc.kind = scenario::scenario_kind_from_string(j.at("kind").get<std::string>());
    sc.seed = j.at("seed").get<std::uint64_t>();
    sc.params = params_from(j.at("params"), Parameters{});
    sc.max_duration = j.at("max_duration").get<double>();
    for (const auto & l : j.at("lanes")) {
      const auto start = l.at("start").get<std::vector<double>>();
      if (start.size() != 2) {
        throw ConfigError("scenario: lane start must have 2 coordinates");
      }
      scenario::LaneCurve lane(Eigen::Vector2d(start[0], start[1]), l.at("heading").get<double>());
      for (const auto & seg : l.at("segments")) {
        lane.add_arc(seg.at(0).get<double>(), seg.at(1).get<double>());
      }
      sc.lanes.push_back(lane);
    }
    for (const auto & e : j.at("lane_exit")) {
      sc.lane_exit.push_back(e.is_null() ? std::numeric_limits<double>::infinity() : e.get<double>());
    }
    if (sc.lane_exit.size() != sc.lanes.size()) {
      throw ConfigError("scenario: lane_exit must have one entry per lane");
    }
    for (const auto & v : j.at("vehicles")) {
      scenario::VehicleSpec spec;
      spec.id = v.at("id").get<int>();
      spec.lane = v.at("lane").get<int>();
      spec.main_road = v.at("main_road").get<bool>();
      spec.initial = {v.at("s0").get<double>(), v.at("v0").get<double>(), v.at("a0").get<double>()};
      spec.reference_speed = v.value("reference_speed", 0.0);
      if (spec.lane < 0 || spec.lane >= static_cast<int>(sc.lanes.size())) {
        throw ConfigError("scenario: vehicle lane index out of range");
      }
      sc.vehicles.push_back(spec);
    }
    return sc;
  } catch (const json::exception & e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
}

}  // namespace v2xcoop::io
