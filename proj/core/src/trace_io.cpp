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

#include "v2xcoop/trace_io.hpp"

#include "v2xcoop/v2x_bus.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace v2xcoop::io
{

using nlohmann::json;

namespace
{

json number(double v)
{
  if (!std::isfinite(v)) {
    return nullptr;
  }
  return v;
}

json state_array(const dynamics::BicycleState & s) { return json::array({s.x, s.y, s.phi, s.v}); }

template <typename Vec>
json vector_array(const Vec & v)
{
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out.push_back(number(v(i)));
  }
  return out;
}

json summary(const sim::SimTrace & trace)
{
  const std::vector<int> its = trace.all_qp_iterations();
  const long long total = std::accumulate(its.begin(), its.end(), 0LL);
  double max_wall = 0.0;
  for (const auto & step : trace.steps) {
    for (const auto & rec : step) {
      max_wall = std::max(max_wall, rec.wall_time);
    }
  }
  json s;
  s["collided"] = trace.collided();
  s["collision_events"] = trace.collisions.size();
  s["run_min_distance"] = number(trace.run_min_distance());
  s["fail_safe_events"] = trace.fail_safe_events();
  s["max_iter_events"] = trace.max_iter_events();
  s["qp_solves"] = its.size();
  s["qp_iterations_total"] = total;
  s["qp_iterations_max"] = its.empty() ? 0 : *std::max_element(its.begin(), its.end());
  s["qp_iterations_mean"] =
    its.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(its.size());
  s["max_step_wall_time"] = max_wall;
  s["terminal_within"] = std::all_of(
    trace.terminal.begin(), trace.terminal.end(), [](const auto & t) { return t.within; });
  return s;
}

}  // namespace

std::string trace_to_json(const sim::SimTrace & trace, int indent)
{
  json j;
  j["schema_version"] = kTraceSchemaVersion;
  j["kind"] = scenario::to_string(trace.kind);
  j["seed"] = trace.seed;
  j["ts"] = trace.ts;
  j["warm_start"] = trace.warm_start;
  j["alpha"] = trace.alpha;
  j["step_count"] = trace.step_count();
  j["duration"] = trace.duration();
  j["digest"] = bus::hex_digest(trace.digest());
  j["ids"] = trace.ids;
  j["planner_wall_time"] = trace.planner_wall_time;
  json initial = json::array();
  for (const auto & s : trace.initial) {
    initial.push_back(state_array(s));
  }
  j["initial"] = std::move(initial);

  json steps = json::array();
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    json vehicles = json::array();
    for (std::size_t i = 0; i < trace.steps[k].size(); ++i) {
      const auto & rec = trace.steps[k][i];
      json v;
      v["id"] = trace.ids[i];
      v["active"] = rec.active;
      v["applied"] = json::array({rec.applied.a, rec.applied.psi});
      v["state"] = state_array(rec.state);
      v["nominal_digest"] = bus::hex_digest(rec.nominal_digest);
      v["qp_iterations"] = rec.qp_iterations;
      v["wall_time"] = rec.wall_time;
      v["fail_safe"] = rec.fail_safe;
      v["max_iter_events"] = rec.max_iter_events;
      vehicles.push_back(std::move(v));
    }
    steps.push_back({{"step", k + 1}, {"vehicles", std::move(vehicles)}});
  }
  j["steps"] = std::move(steps);

  json dist = json::array();
  for (double d : trace.min_distance) {
    dist.push_back(number(d));
  }
  j["min_distance"] = std::move(dist);
  j["variance"] = trace.variance;

  json events = json::array();
  for (const auto & c : trace.collisions) {
    events.push_back(
      {{"step", c.step}, {"first", c.first}, {"second", c.second}, {"distance", c.distance}});
  }
  j["collisions"] = std::move(events);

  json terminal = json::array();
  for (const auto & t : trace.terminal) {
    terminal.push_back(
      {{"id", t.id}, {"s", t.s}, {"slot", json::array({t.slot.lower, t.slot.upper})},
       {"within", t.within}});
  }
  j["terminal"] = std::move(terminal);
  j["summary"] = summary(trace);
  return j.dump(indent);
}

std::string plan_to_json(const planner::PlanResult & plan, int indent)
{
  json j;
  j["schema_version"] = kTraceSchemaVersion;
  j["iterations"] = plan.iterations;
  j["objective"] = plan.objective;
  j["qp_iterations"] = plan.qp_iterations;
  j["variance"] = plan.variance;
  j["schedule"] = {
    {"order", plan.schedule.order},
    {"slot", plan.schedule.slot},
    {"merge_step", plan.schedule.merge_step}};
  json vehicles = json::array();
  for (const auto & vp : plan.vehicles) {
    const auto t = vp.u.size();
    json v;
    v["u"] = vector_array(vp.u);
    v["s"] = vp.s;
    json speed = json::array();
    json accel = json::array();
    for (Eigen::Index k = 0; k < t; ++k) {
      speed.push_back(vp.x(3 * k + 1));
      accel.push_back(vp.x(3 * k + 2));
    }
    v["v"] = std::move(speed);
    v["a"] = std::move(accel);
    json ref = json::array();
    for (const auto & s : vp.reference.states) {
      ref.push_back(state_array(s));
    }
    v["reference"] = std::move(ref);
    vehicles.push_back(std::move(v));
  }
  j["vehicles"] = std::move(vehicles);
  json snaps = json::array();
  for (const auto & snap : plan.snapshots) {
    snaps.push_back({{"iteration", snap.iteration}, {"s", snap.s}});
  }
  j["snapshots"] = std::move(snaps);
  return j.dump(indent);
}

std::string trace_steps_csv(const sim::SimTrace & trace)
{
  std::ostringstream out;
  out << std::setprecision(17);
  out << "step,time,id,active,a,psi,x,y,phi,v,qp_iterations,wall_time,fail_safe,nominal_digest\n";
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    for (std::size_t i = 0; i < trace.steps[k].size(); ++i) {
      const auto & r = trace.steps[k][i];
      const int its = std::accumulate(r.qp_iterations.begin(), r.qp_iterations.end(), 0);
      out << k + 1 << ',' << static_cast<double>(k + 1) * trace.ts << ',' << trace.ids[i] << ','
          << (r.active ? 1 : 0) << ',' << r.applied.a << ',' << r.applied.psi << ',' << r.state.x
          << ',' << r.state.y << ',' << r.state.phi << ',' << r.state.v << ',' << its << ','
          << r.wall_time << ',' << (r.fail_safe ? 1 : 0) << ',' << bus::hex_digest(r.nominal_digest)
          << '\n';
    }
  }
  return out.str();
}

std::string trace_min_distance_csv(const sim::SimTrace & trace)
{
  std::ostringstream out;
  out << std::setprecision(17);
  out << "step,time,min_distance\n";
  for (std::size_t k = 0; k < trace.min_distance.size(); ++k) {
    out << k + 1 << ',' << static_cast<double>(k + 1) * trace.ts << ',';
    if (std::isfinite(trace.min_distance[k])) {
      out << trace.min_distance[k];
    }
    out << '\n';
  }
  return out.str();
}

std::string variance_csv(const std::vector<double> & variance)
{
  std::ostringstream out;
  out << std::setprecision(17);
  out << "iteration,variance\n";
  for (std::size_t k = 0; k < variance.size(); ++k) {
    out << k + 1 << ',' << variance[k] << '\n';
  }
  return out.str();
}

}  // namespace v2xcoop::io
