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

#include "v2xcoop_cli/config.hpp"

#include "v2xcoop/errors.hpp"
#include "v2xcoop/scenario_io.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace v2xcoop::cli
{

using nlohmann::json;

void RunConfig::validate() const
{
  params.validate();
  if (preset == scenario::ScenarioKind::ramp && vehicles < 1) {
    throw ConfigError("config: vehicles must be >= 1");
  }
  if (planner_iterations < 1) {
    throw ConfigError("config: planner iterations must be >= 1");
  }
  if (!(proximal_weight >= 0.0) || !std::isfinite(proximal_weight)) {
    throw ConfigError("config: mpc.proximal_weight must be finite and >= 0");
  }
  if (planner_threads < 1 || mpc_threads < 1) {
    throw ConfigError("config: thread counts must be >= 1");
  }
  for (double a : alphas) {
    if (!(a >= 0.0)) {
      throw ConfigError("config: alphas must be non-negative");
    }
  }
  planner_config().validate();
}

scenario::ScenarioConfig RunConfig::make_scenario() const
{
  return scenario::make_scenario(preset, vehicles, seed, params);
}

planner::PlannerConfig RunConfig::planner_config() const
{
  planner::PlannerConfig pc;
  pc.iterations = planner_iterations;
  pc.snapshot_iterations = snapshots;
  pc.threads = planner_threads;
  return pc;
}

mpc::MpcSettings RunConfig::mpc_settings() const
{
  mpc::MpcSettings ms;
  ms.inner_iterations = params.inner_iterations;
  ms.warm_start = warm_start;
  ms.threads = mpc_threads;
  ms.proximal_weight = proximal_weight;
  return ms;
}

namespace
{

void reject_unknown(const json & j, const std::set<std::string> & known, const std::string & where)
{
  if (!j.is_object()) {
    throw ConfigError("config: '" + where + "' must be an object");
  }
  for (const auto & item : j.items()) {
    if (!known.contains(item.key())) {
      throw ConfigError("config: unknown key '" + item.key() + "' in " + where);
    }
  }
}

template <class T>
void read(const json & j, const char * key, T & out)
{
  if (j.contains(key)) {
    out = j.at(key).get<T>();
  }
}

}  // namespace

RunConfig run_config_from_json(const std::string & text)
{
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error & e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  if (j.is_object() && j.contains("command") && j.contains("config")) {
    j = j.at("config");
  }
  reject_unknown(
    j, {"schema_version", "preset", "vehicles", "seed", "params", "planner", "mpc", "alphas"},
    "config");
  RunConfig c;
  try {
    const int version = j.value("schema_version", kConfigSchemaVersion);
    if (version != kConfigSchemaVersion) {
      throw ConfigError("config: unsupported schema_version " + std::to_string(version));
    }
    if (j.contains("preset")) {
      c.preset = scenario::scenario_kind_from_string(j.at("preset").get<std::string>());
    }
    read(j, "vehicles", c.vehicles);
    read(j, "seed", c.seed);
    if (j.contains("params")) {
      c.params = io::parameters_from_json(j.at("params").dump());
    }
    if (j.contains("planner")) {
      const json & p = j.at("planner");
      reject_unknown(p, {"iterations", "snapshots", "threads"}, "planner");
      read(p, "iterations", c.planner_iterations);
      read(p, "snapshots", c.snapshots);
      read(p, "threads", c.planner_threads);
    }
    if (j.contains("mpc")) {
      const json & m = j.at("mpc");
      reject_unknown(m, {"warm_start", "threads", "proximal_weight"}, "mpc");
      read(m, "warm_start", c.warm_start);
      read(m, "threads", c.mpc_threads);
      read(m, "proximal_weight", c.proximal_weight);
    }
    read(j, "alphas", c.alphas);
  } catch (const json::exception & e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string run_config_to_json(const RunConfig & c, int indent)
{
  json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["preset"] = scenario::to_string(c.preset);
  j["vehicles"] = c.vehicles;
  j["seed"] = c.seed;
  j["params"] = json::parse(io::parameters_to_json(c.params));
  j["planner"] = {
    {"iterations", c.planner_iterations}, {"snapshots", c.snapshots}, {"threads", c.planner_threads}};
  j["mpc"] = {
    {"warm_start", c.warm_start}, {"threads", c.mpc_threads}, {"proximal_weight", c.proximal_weight}};
  j["alphas"] = c.alphas;
  return j.dump(indent);
}

RunConfig load_run_config(const std::string & path)
{
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("config: cannot read '" + path + "'");
  }
  std::ostringstream text;
  text << in.rdbuf();
  return run_config_from_json(text.str());
}

void apply_overrides(RunConfig & c, const Overrides & o)
{
  if (o.preset) {
    c.preset = scenario::scenario_kind_from_string(*o.preset);
  }
  if (o.seed) {
    c.seed = *o.seed;
  }
  if (o.alpha) {
    c.params.alpha = *o.alpha;
  }
  if (o.iterations) {
    c.planner_iterations = *o.iterations;
  }
  if (o.vehicles) {
    c.vehicles = *o.vehicles;
  }
  if (o.alphas) {
    c.alphas = *o.alphas;
  }
  if (o.no_warm_start) {
    c.warm_start = false;
  }
  if (o.threads) {
    c.planner_threads = *o.threads;
    c.mpc_threads = *o.threads;
  }
  c.validate();
}

}  // namespace v2xcoop::cli
