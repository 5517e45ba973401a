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

#include "v2xcoop_cli/commands.hpp"

#include "v2xcoop/errors.hpp"
#include "v2xcoop/planner.hpp"
#include "v2xcoop/trace_io.hpp"
#include "v2xcoop/v2x_bus.hpp"
#include "v2xcoop_cli/svg.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace v2xcoop::cli
{

using nlohmann::json;
namespace fs = std::filesystem;

namespace
{

class ArtifactWriter
{
public:
  ArtifactWriter(const std::string & dir, RunManifest & manifest) : dir_(dir), manifest_(manifest)
  {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) {
      throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
    }
  }

  void write(const std::string & name, const std::string & content)
  {
    std::ofstream out(dir_ / name, std::ios::binary);
    out << content;
    if (!out) {
      throw ConfigError("cannot write '" + (dir_ / name).string() + "'");
    }
    manifest_.artifacts.push_back(name);
  }

  void finish()
  {
    manifest_.artifacts.push_back("manifest.json");
    std::ofstream out(dir_ / "manifest.json");
    out << manifest_.to_json() << '\n';
  }

private:
  fs::path dir_;
  RunManifest & manifest_;
};

RunManifest make_manifest(
  const std::string & command, const RunConfig & config, const std::string & out_dir,
  const std::string & config_path)
{
  RunManifest m;
  m.command = command;
  m.config_path = config_path;
  m.seed = config.seed;
  m.out_dir = out_dir;
  m.config = config;
  return m;
}

json finite_or_null(double v)
{
  if (!std::isfinite(v)) {
    return nullptr;
  }
  return v;
}

std::string two_decimals(double v)
{
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << v;
  return out.str();
}

std::vector<svg::Series> lane_series(
  const scenario::ScenarioConfig & sc, const std::vector<dynamics::BicycleState> & last)
{
  std::vector<svg::Series> out;
  for (std::size_t i = 0; i < sc.vehicles.size(); ++i) {
    const auto & v = sc.vehicles[i];
    const auto & lane = sc.lanes[static_cast<std::size_t>(v.lane)];
    svg::Series s;
    s.label = "path " + std::to_string(v.id);
    s.dashed = true;
    const double end =
      std::min(lane.length(), lane.project(Eigen::Vector2d(last[i].x, last[i].y)) + 10.0);
    for (double a = std::max(0.0, v.initial.s - 10.0); a <= end; a += 0.5) {
      const Eigen::Vector2d p = lane.point(a);
      s.x.push_back(p.x());
      s.y.push_back(p.y());
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<svg::Series> reference_series(const planner::PlanResult & plan)
{
  std::vector<svg::Series> out;
  for (std::size_t i = 0; i < plan.vehicles.size(); ++i) {
    svg::Series s;
    s.label = "vehicle " + std::to_string(i);
    for (const auto & st : plan.vehicles[i].reference.states) {
      s.x.push_back(st.x);
      s.y.push_back(st.y);
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_plan_artifacts(
  ArtifactWriter & w, const planner::PlanResult & plan, const scenario::ScenarioConfig & sc)
{
  w.write("plan.json", io::plan_to_json(plan));
  w.write("variance.csv", io::variance_csv(plan.variance));
  std::vector<double> its(plan.variance.size());
  std::iota(its.begin(), its.end(), 1.0);
  w.write(
    "variance.svg", svg::line_chart(
                      {{"consensus variance", its, plan.variance, false}},
                      {"Consensus variance", "iteration", "variance", true, false}));
  w.write(
    "reference.svg",
    svg::line_chart(
      reference_series(plan), {"Planned 2-D reference trajectories", "x [m]", "y [m]", false, true}));
  const double ts = sc.params.ts;
  for (const auto & snap : plan.snapshots) {
    std::vector<svg::Series> series;
    for (std::size_t i = 0; i < snap.s.size(); ++i) {
      svg::Series s;
      s.label = "vehicle " + std::to_string(i);
      for (std::size_t k = 0; k < snap.s[i].size(); ++k) {
        s.x.push_back(static_cast<double>(k) * ts);
        s.y.push_back(snap.s[i][k]);
      }
      series.push_back(std::move(s));
    }
    w.write(
      "snapshot_" + std::to_string(snap.iteration) + ".svg",
      svg::line_chart(
        series, {"Longitudinal plan at iteration " + std::to_string(snap.iteration), "t [s]",
                 "s [m]", false, false}));
  }
}

void write_run_plots(ArtifactWriter & w, const sim::SimTrace & trace, const scenario::ScenarioConfig & sc)
{
  const std::size_t n = trace.ids.size();
  std::vector<dynamics::BicycleState> last = trace.initial;
  for (const auto & step : trace.steps) {
    for (std::size_t i = 0; i < n; ++i) {
      if (step[i].active) {
        last[i] = step[i].state;
      }
    }
  }
  const std::vector<svg::Series> paths = lane_series(sc, last);
  std::vector<svg::Series> accel(n);
  std::vector<svg::Series> steer(n);
  std::vector<svg::Series> driven(n);
  std::vector<std::vector<double>> heat(n);
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string name = "vehicle " + std::to_string(trace.ids[i]);
    labels.push_back(name);
    driven[i].label = accel[i].label = steer[i].label = name;
    driven[i].x.push_back(trace.initial[i].x);
    driven[i].y.push_back(trace.initial[i].y);
  }
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    const double t = static_cast<double>(k) * trace.ts;
    for (std::size_t i = 0; i < n; ++i) {
      const auto & r = trace.steps[k][i];
      const double nan = std::numeric_limits<double>::quiet_NaN();
      accel[i].x.push_back(t);
      accel[i].y.push_back(r.active ? r.applied.a : nan);
      steer[i].x.push_back(t);
      steer[i].y.push_back(r.active ? r.applied.psi * 180.0 / std::numbers::pi : nan);
      heat[i].push_back(r.active ? r.wall_time * 1e3 : nan);
      if (r.active) {
        driven[i].x.push_back(r.state.x);
        driven[i].y.push_back(r.state.y);
      }
    }
  }
  std::vector<svg::Series> traj = driven;
  traj.insert(traj.end(), paths.begin(), paths.end());
  w.write(
    "trajectories.svg",
    svg::line_chart(traj, {"Driven trajectories (dashed: reference paths)", "x [m]", "y [m]", false, true}));

  std::vector<double> times;
  for (std::size_t k = 0; k < trace.min_distance.size(); ++k) {
    times.push_back(static_cast<double>(k + 1) * trace.ts);
  }
  const auto model = sim::CollisionModel::from(sc.params);
  w.write(
    "min_distance.svg",
    svg::line_chart(
      {{"min circle-center distance", times, trace.min_distance, false},
       {"D_S", times, std::vector<double>(times.size(), sc.params.safety_distance), true},
       {"2 r_c", times, std::vector<double>(times.size(), 2.0 * model.r_c), true}},
      {"Minimum pair distance", "t [s]", "distance [m]", false, false}));
  w.write("acceleration.svg", svg::line_chart(accel, {"Acceleration", "t [s]", "a [m/s^2]", false, false}));
  w.write("steering.svg", svg::line_chart(steer, {"Steering angle", "t [s]", "psi [deg]", false, false}));
  w.write(
    "compute_time.svg",
    svg::heat_map(heat, labels, trace.ts, {"Per-step compute time", "t [s]", "ms", false, false}));
}

json trace_summary(const sim::SimTrace & trace)
{
  return json::parse(io::trace_to_json(trace)).at("summary");
}

}  // namespace

std::string RunManifest::to_json(int indent) const
{
  json j;
  j["command"] = command;
  j["config_path"] = config_path;
  j["seed"] = seed;
  j["out_dir"] = out_dir;
  j["artifacts"] = artifacts;
  j["config"] = json::parse(run_config_to_json(config));
  return j.dump(indent);
}

IterationStats iteration_stats(const sim::SimTrace & trace)
{
  const std::vector<int> its = trace.all_qp_iterations();
  IterationStats s;
  s.solves = its.size();
  if (!its.empty()) {
    s.mean = std::accumulate(its.begin(), its.end(), 0.0) / static_cast<double>(its.size());
    s.max = *std::max_element(its.begin(), its.end());
  }
  return s;
}

WarmStartReport compare_warm_cold(const sim::SimTrace & warm, const sim::SimTrace & cold)
{
  WarmStartReport r;
  r.warm = iteration_stats(warm);
  r.cold = iteration_stats(cold);
  r.mean_ratio = r.cold.mean > 0.0 ? r.warm.mean / r.cold.mean : 0.0;
  r.control_divergence = sim::control_divergence(warm, cold);
  r.max_improved = r.warm.max < r.cold.max;
  return r;
}

bool non_decreasing(const std::vector<double> & values, double tolerance)
{
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] < values[i - 1] - tolerance) {
      return false;
    }
  }
  return true;
}

std::vector<SweepRow> sweep_alpha(const RunConfig & config)
{
  if (config.alphas.empty()) {
    throw ConfigError("sweep-alpha: the alpha list is empty");
  }
  std::vector<SweepRow> rows;
  for (double alpha : config.alphas) {
    RunConfig c = config;
    c.params.alpha = alpha;
    c.validate();
    sim::SimConfig sc;
    sc.planner = c.planner_config();
    sc.mpc = c.mpc_settings();
    sc.stop_on_collision = false;
    const sim::SimTrace trace = sim::run(c.make_scenario(), sc);
    rows.push_back({alpha, trace.run_min_distance(), trace.collisions.size()});
  }
  return rows;
}

CommandResult cmd_plan(const RunConfig & config, const std::string & out_dir, const std::string & config_path)
{
  if (config.preset != scenario::ScenarioKind::ramp) {
    throw ConfigError("plan: only the ramp preset has a planning stage");
  }
  CommandResult res;
  res.manifest = make_manifest("plan", config, out_dir, config_path);
  ArtifactWriter w(out_dir, res.manifest);
  const auto sc = config.make_scenario();
  const auto plan = planner::plan_distributed(sc, config.planner_config());
  write_plan_artifacts(w, plan, sc);
  json s;
  s["iterations"] = plan.iterations;
  s["objective"] = plan.objective;
  s["qp_iterations"] = plan.qp_iterations;
  s["final_variance"] = plan.variance.empty() ? 0.0 : plan.variance.back();
  s["variance_ratio"] =
    plan.variance.empty() || plan.variance.front() <= 0.0
      ? json(nullptr)
      : json(plan.variance.back() / plan.variance.front());
  s["min_gap_residual"] = finite_or_null(planner::min_gap_residual(plan, sc.params));
  w.write("summary.json", s.dump(2));
  w.finish();
  std::ostringstream msg;
  msg << "plan: " << plan.iterations << " iterations, variance "
      << (plan.variance.empty() ? 0.0 : plan.variance.back()) << ", objective " << plan.objective;
  res.message = msg.str();
  return res;
}

CommandResult cmd_run(const RunConfig & config, const std::string & out_dir, const std::string & config_path)
{
  CommandResult res;
  res.manifest = make_manifest("run", config, out_dir, config_path);
  ArtifactWriter w(out_dir, res.manifest);
  const auto sc = config.make_scenario();
  sim::SimConfig simc;
  simc.planner = config.planner_config();
  simc.mpc = config.mpc_settings();
  const sim::SimTrace trace = sim::run(sc, simc);
  if (trace.plan) {
    write_plan_artifacts(w, *trace.plan, sc);
  }
  w.write("trace.json", io::trace_to_json(trace));
  w.write("steps.csv", io::trace_steps_csv(trace));
  w.write("min_distance.csv", io::trace_min_distance_csv(trace));
  write_run_plots(w, trace, sc);
  json s = trace_summary(trace);
  s["digest"] = bus::hex_digest(trace.digest());
  s["vehicles"] = trace.ids.size();
  s["steps"] = trace.step_count();
  w.write("summary.json", s.dump(2));
  w.finish();
  std::ostringstream msg;
  msg << "run " << scenario::to_string(config.preset) << ": " << trace.ids.size() << " vehicles, "
      << trace.step_count() << " steps, min distance " << trace.run_min_distance() << " m, "
      << trace.collisions.size() << " collision event(s), digest " << bus::hex_digest(trace.digest());
  res.message = msg.str();
  res.exit_code = trace.collided() ? exit_collision : exit_ok;
  return res;
}

CommandResult cmd_bench_warmstart(
  const RunConfig & config, const std::string & out_dir, const std::string & config_path)
{
  CommandResult res;
  res.manifest = make_manifest("bench-warmstart", config, out_dir, config_path);
  ArtifactWriter w(out_dir, res.manifest);
  const auto sc = config.make_scenario();
  sim::SimConfig simc;
  simc.planner = config.planner_config();
  simc.mpc = config.mpc_settings();
  simc.stop_on_collision = false;
  simc.mpc.warm_start = true;
  const sim::SimTrace warm = sim::run(sc, simc);
  simc.mpc.warm_start = false;
  const sim::SimTrace cold = sim::run(sc, simc);
  const WarmStartReport r = compare_warm_cold(warm, cold);

  std::ostringstream csv;
  csv << "mode,step,id,inner,iterations\n";
  std::vector<svg::Series> series;
  for (const auto * t : {&warm, &cold}) {
    const char * mode = t == &warm ? "warm" : "cold";
    svg::Series s;
    s.label = std::string(mode) + " (max per step)";
    for (std::size_t k = 0; k < t->steps.size(); ++k) {
      int step_max = 0;
      for (std::size_t i = 0; i < t->steps[k].size(); ++i) {
        const auto & its = t->steps[k][i].qp_iterations;
        for (std::size_t m = 0; m < its.size(); ++m) {
          csv << mode << ',' << k + 1 << ',' << t->ids[i] << ',' << m + 1 << ',' << its[m] << '\n';
          step_max = std::max(step_max, its[m]);
        }
      }
      s.x.push_back(static_cast<double>(k + 1) * t->ts);
      s.y.push_back(step_max);
    }
    series.push_back(std::move(s));
  }
  w.write("iterations.csv", csv.str());
  w.write(
    "iterations.svg",
    svg::line_chart(series, {"QP iterations, warm vs cold start", "t [s]", "iterations", false, false}));
  w.write("warm_trace.json", io::trace_to_json(warm));
  w.write("cold_trace.json", io::trace_to_json(cold));
  json rep;
  rep["warm"] = {{"mean", r.warm.mean}, {"max", r.warm.max}, {"solves", r.warm.solves},
                 {"collision_events", warm.collisions.size()}};
  rep["cold"] = {{"mean", r.cold.mean}, {"max", r.cold.max}, {"solves", r.cold.solves},
                 {"collision_events", cold.collisions.size()}};
  rep["mean_ratio"] = two_decimals(r.mean_ratio);
  rep["warm_max_below_cold_max"] = r.max_improved;
  rep["applied_control_divergence"] = r.control_divergence;
  w.write("report.json", rep.dump(2));
  w.finish();
  std::ostringstream msg;
  msg << "bench-warmstart: warm mean " << two_decimals(r.warm.mean) << " max " << r.warm.max
      << ", cold mean " << two_decimals(r.cold.mean) << " max " << r.cold.max << ", mean ratio "
      << two_decimals(r.mean_ratio);
  res.message = msg.str();
  return res;
}

CommandResult cmd_sweep_alpha(
  const RunConfig & config, const std::string & out_dir, const std::string & config_path)
{
  if (config.alphas.empty()) {
    throw ConfigError("sweep-alpha: the alpha list is empty");
  }
  CommandResult res;
  res.manifest = make_manifest("sweep-alpha", config, out_dir, config_path);
  ArtifactWriter w(out_dir, res.manifest);
  const auto rows = sweep_alpha(config);
  std::ostringstream csv;
  csv << std::setprecision(17) << "alpha,run_min_distance,collision_events\n";
  std::vector<double> alphas;
  std::vector<double> mins;
  json jrows = json::array();
  for (const auto & r : rows) {
    csv << r.alpha << ',' << r.run_min_distance << ',' << r.collision_events << '\n';
    alphas.push_back(r.alpha);
    mins.push_back(r.run_min_distance);
    jrows.push_back({{"alpha", r.alpha}, {"run_min_distance", finite_or_null(r.run_min_distance)},
                     {"collision_events", r.collision_events}});
  }
  const bool monotone = non_decreasing(mins, kSweepTolerance);
  w.write("sweep.csv", csv.str());
  w.write(
    "sweep.svg", svg::line_chart(
                   {{"run-minimum distance", alphas, mins, false}},
                   {"Minimum distance vs safety weight", "alpha", "distance [m]", false, false}));
  json s;
  s["rows"] = jrows;
  s["non_decreasing"] = monotone;
  s["tolerance"] = kSweepTolerance;
  w.write("summary.json", s.dump(2));
  w.finish();
  std::ostringstream msg;
  msg << "sweep-alpha: " << rows.size() << " runs, run-min distance "
      << (monotone ? "non-decreasing" : "not monotone") << " in alpha";
  res.message = msg.str();
  return res;
}

}  // namespace v2xcoop::cli
