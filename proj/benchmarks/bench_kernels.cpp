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

#include "v2xcoop/dcimpc.hpp"
#include "v2xcoop/planner.hpp"
#include "v2xcoop/qp_solver.hpp"
#include "v2xcoop/scenario.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

using namespace v2xcoop;

namespace
{

qp::QpProblem random_problem(int n, int m, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const Eigen::MatrixXd f = Eigen::MatrixXd::NullaryExpr(n, n, [&] { return unit(rng); });
  qp::QpProblem prob;
  prob.p = f.transpose() * f + 0.1 * Eigen::MatrixXd::Identity(n, n);
  prob.q = Eigen::VectorXd::NullaryExpr(n, [&] { return unit(rng); });
  prob.a = Eigen::MatrixXd::NullaryExpr(m, n, [&] { return unit(rng); });
  prob.l = Eigen::VectorXd::Constant(m, -0.5);
  prob.u = Eigen::VectorXd::Constant(m, 0.5);
  return prob;
}

void BM_QpCold(benchmark::State & state)
{
  const int n = static_cast<int>(state.range(0));
  const auto prob = random_problem(n, 2 * n, 11);
  for (auto _ : state) {
    qp::QpSolver solver;
    benchmark::DoNotOptimize(solver.solve(prob));
  }
}
BENCHMARK(BM_QpCold)->Arg(20)->Arg(60);

void BM_QpWarm(benchmark::State & state)
{
  const int n = static_cast<int>(state.range(0));
  auto prob = random_problem(n, 2 * n, 11);
  qp::QpSolver solver;
  const auto first = solver.solve(prob);
  const qp::WarmStart warm{first.x, first.y};
  prob.q *= 1.01;
  for (auto _ : state) {
    qp::QpSolver s;
    benchmark::DoNotOptimize(s.solve(prob, &warm));
  }
}
BENCHMARK(BM_QpWarm)->Arg(20)->Arg(60);

void BM_PlannerIteration(benchmark::State & state)
{
  const auto sc = scenario::make_scenario(scenario::ScenarioKind::ramp, static_cast<int>(state.range(0)), 7);
  const auto & p = sc.params;
  const auto pred =
    dynamics::build_prediction_matrices(dynamics::discretize_lag(p.lag_time, p.ts), p.planning_horizon);
  const auto ms = scenario::assign_merge_order(sc);
  const planner::PlannerConfig config;
  std::vector<planner::PlannerAgent> agents;
  for (std::size_t i = 0; i < sc.vehicles.size(); ++i) {
    agents.push_back(planner::make_agent(ms, pred, sc.vehicles[i].initial, static_cast<int>(i), p, config.qp));
  }
  int k = 1;
  for (auto _ : state) {
    const auto ph = config.phase_at(k);
    std::vector<Eigen::VectorXd> ys;
    for (const auto & a : agents) {
      ys.push_back(a.y);
    }
    for (std::size_t i = 0; i < agents.size(); ++i) {
      std::vector<Eigen::VectorXd> peers;
      for (std::size_t j = 0; j < agents.size(); ++j) {
        if (j != i) {
          peers.push_back(ys[j]);
        }
      }
      planner::admm_local_update(agents[i], peers, ph.rho, ph.sigma, k);
    }
    k = k % config.iterations + 1;
  }
}
BENCHMARK(BM_PlannerIteration)->Arg(3)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_DcimpcStep(benchmark::State & state)
{
  const Parameters p;
  const auto sc = scenario::make_scenario(scenario::ScenarioKind::crossroads, 12, 7, p);
  const int steps = 400;
  std::vector<scenario::ReferenceTrajectory2D> refs;
  for (const auto & v : sc.vehicles) {
    refs.push_back(scenario::constant_speed_reference(sc, v, steps + p.control_horizon + 1));
  }
  mpc::MpcSettings ms;
  ms.warm_start = state.range(0) != 0;
  std::vector<mpc::DcimpcAgent> agents;
  std::vector<int> ids;
  for (std::size_t i = 0; i < sc.vehicles.size(); ++i) {
    agents.push_back(
      mpc::make_dcimpc_agent(sc.vehicles[i].id, sc.initial_state(sc.vehicles[i]), &refs[i], p, ms));
    ids.push_back(sc.vehicles[i].id);
  }
  std::vector<mpc::DcimpcAgent *> ptrs;
  for (auto & a : agents) {
    ptrs.push_back(&a);
  }
  bus::V2xBus bus(ids);
  const auto w = mpc::CostWeights::from(p);
  int k = 0;
  for (auto _ : state) {
    if (k == steps) {
      state.PauseTiming();
      for (std::size_t i = 0; i < agents.size(); ++i) {
        agents[i] = mpc::make_dcimpc_agent(
          sc.vehicles[i].id, sc.initial_state(sc.vehicles[i]), &refs[i], p, ms);
      }
      k = 0;
      state.ResumeTiming();
    }
    benchmark::DoNotOptimize(mpc::dcimpc_step(ptrs, bus, w, p, ms, k));
    ++k;
  }
}
BENCHMARK(BM_DcimpcStep)->ArgName("warm")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
