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

#include "v2xcoop/errors.hpp"
#include "v2xcoop_cli/commands.hpp"
#include "v2xcoop_cli/config.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace
{

using v2xcoop::cli::CommandResult;
using v2xcoop::cli::RunConfig;

struct Common
{
  std::string config_path;
  std::string out{"out"};
  v2xcoop::cli::Overrides overrides;
  std::uint64_t seed{0};
  double alpha{0.0};
  int iters{0};
  int vehicles{0};
  int threads{0};
  std::string preset;
  std::vector<double> alphas;
};

void add_common(CLI::App * cmd, Common & c)
{
  cmd->add_option("--config", c.config_path, "run configuration (JSON) or a previous manifest.json");
  cmd->add_option("--seed", c.seed, "scenario seed");
  cmd->add_option("--out", c.out, "output directory")->capture_default_str();
  cmd->add_option("--preset", c.preset, "scenario preset")
    ->check(CLI::IsMember({"ramp", "t_junction", "crossroads"}));
  cmd->add_option("--alpha", c.alpha, "safety weight");
  cmd->add_option("--iters", c.iters, "planner ADMM iterations");
  cmd->add_option("--vehicles", c.vehicles, "ramp vehicle count");
  cmd->add_option("--threads", c.threads, "worker threads for planner and controller");
  cmd->add_flag("--no-warm-start", c.overrides.no_warm_start, "cold-start every QP");
}

RunConfig resolve(CLI::App * cmd, Common & c)
{
  RunConfig config = c.config_path.empty() ? RunConfig{} : v2xcoop::cli::load_run_config(c.config_path);
  auto & o = c.overrides;
  if (cmd->count("--seed") > 0) {
    o.seed = c.seed;
  }
  if (cmd->count("--preset") > 0) {
    o.preset = c.preset;
  }
  if (cmd->count("--alpha") > 0) {
    o.alpha = c.alpha;
  }
  if (cmd->count("--iters") > 0) {
    o.iterations = c.iters;
  }
  if (cmd->count("--vehicles") > 0) {
    o.vehicles = c.vehicles;
  }
  if (cmd->count("--threads") > 0) {
    o.threads = c.threads;
  }
  if (cmd->get_option_no_throw("--alphas") != nullptr && cmd->count("--alphas") > 0) {
    o.alphas = c.alphas;
  }
  v2xcoop::cli::apply_overrides(config, o);
  return config;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Cooperative ramp-merge planning and distributed MPC simulator"};
  app.require_subcommand(1);
  Common common;
  auto * plan = app.add_subcommand("plan", "run the distributed longitudinal planner only");
  auto * run = app.add_subcommand("run", "plan (ramp) and run the closed-loop controller");
  auto * bench = app.add_subcommand("bench-warmstart", "compare warm- and cold-started QP iterations");
  auto * sweep = app.add_subcommand("sweep-alpha", "run-minimum distance over a list of safety weights");
  for (auto * cmd : {plan, run, bench, sweep}) {
    add_common(cmd, common);
  }
  sweep->add_option("--alphas", common.alphas, "safety weights (default 1 2 3 4 5)")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp & e) {
    return app.exit(e);
  } catch (const CLI::ParseError & e) {
    app.exit(e);
    return v2xcoop::cli::exit_config_error;
  }

  try {
    CLI::App * cmd = app.get_subcommands().front();
    const RunConfig config = resolve(cmd, common);
    CommandResult res;
    if (cmd == plan) {
      res = v2xcoop::cli::cmd_plan(config, common.out, common.config_path);
    } else if (cmd == run) {
      res = v2xcoop::cli::cmd_run(config, common.out, common.config_path);
    } else if (cmd == bench) {
      res = v2xcoop::cli::cmd_bench_warmstart(config, common.out, common.config_path);
    } else {
      res = v2xcoop::cli::cmd_sweep_alpha(config, common.out, common.config_path);
    }
    std::cout << res.message << '\n';
    return res.exit_code;
  } catch (const v2xcoop::ConfigError & e) {
    std::cerr << "config error: " << e.what() << '\n';
    return v2xcoop::cli::exit_config_error;
  } catch (const v2xcoop::SolverError & e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return v2xcoop::cli::exit_solver_failure;
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << '\n';
    return v2xcoop::cli::exit_internal;
  }
}
