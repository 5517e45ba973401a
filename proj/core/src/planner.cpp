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

#include "v2xcoop/planner.hpp"

#include "v2xcoop/errors.hpp"
#include "v2xcoop/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <numeric>
#include <string>

namespace v2xcoop::planner
{

namespace
{

using scenario::MergeSchedule;

std::vector<double> positions(
  const dynamics::PredictionMatrices & pred, const dynamics::LongitudinalState & x0,
  const Eigen::VectorXd & u, Eigen::VectorXd * x_out = nullptr)
{
  const Eigen::VectorXd x = pred.gamma * x0.vector() + pred.lambda * u;
  std::vector<double> s(static_cast<std::size_t>(pred.horizon + 1));
  s[0] = x0.s;
  for (int k = 1; k <= pred.horizon; ++k) {
    s[static_cast<std::size_t>(k)] = x(3 * (k - 1));
  }
  if (x_out != nullptr) {
    *x_out = x;
  }
  return s;
}

VehiclePlan make_vehicle_plan(
  const scenario::ScenarioConfig & sc, const dynamics::PredictionMatrices & pred, int i,
  const Eigen::VectorXd & u)
{
  const auto & spec = sc.vehicles[static_cast<std::size_t>(i)];
  VehiclePlan vp;
  vp.u = u;
  vp.s = positions(pred, spec.initial, u, &vp.x);
  // solver tolerance can leave sub-micrometre backward steps at standstill
  std::vector<double> mono = vp.s;
  for (std::size_t k = 1; k < mono.size(); ++k) {
    mono[k] = std::max(mono[k], mono[k - 1]);
  }
  vp.reference = scenario::map_to_2d(mono, sc.lanes.at(static_cast<std::size_t>(spec.lane)), sc.params.ts);
  return vp;
}

dynamics::PredictionMatrices prediction_for(const Parameters & params)
{
  return dynamics::build_prediction_matrices(
    dynamics::discretize_lag(params.lag_time, params.ts), params.planning_horizon);
}

Eigen::VectorXd coordinate_payload(const scenario::VehicleSpec & v)
{
  Eigen::VectorXd c(6);
  c << v.id, v.lane, v.main_road ? 1.0 : 0.0, v.initial.s, v.initial.v, v.initial.a;
  return c;
}

scenario::VehicleSpec spec_from_payload(const Eigen::VectorXd & c)
{
  scenario::VehicleSpec v;
  v.id = static_cast<int>(c(0));
  v.lane = static_cast<int>(c(1));
  v.main_road = c(2) != 0.0;
  v.initial = {c(3), c(4), c(5)};
  return v;
}

bool same_schedule(const MergeSchedule & a, const MergeSchedule & b)
{
  return a.order == b.order && a.slot == b.slot && a.merge_step == b.merge_step &&
         a.front_before == b.front_before && a.front_after == b.front_after;
}

}  // namespace

bool coupling_row_active(const MergeSchedule & schedule, int i, int k)
{
  const auto ui = static_cast<std::size_t>(i);
  const int tm = schedule.merge_step[ui];
  return (k <= tm && schedule.front_before[ui].has_value()) ||
         (k > tm && schedule.front_after[ui].has_value());
}

CouplingData build_coupling(
  const MergeSchedule & schedule, const dynamics::PredictionMatrices & pred,
  const dynamics::LongitudinalState & x0, int i, const Parameters & params)
{
  const int n = schedule.size();
  const int t = pred.horizon;
  CouplingData cd;
  cd.degree = n - 1;
  cd.g = Eigen::MatrixXd::Zero(n * t, 3 * t);
  cd.h = Eigen::VectorXd::Zero(n * t);
  for (int k = 1; k <= t; ++k) {
    if (coupling_row_active(schedule, i, k)) {
      const int row = coupling_row(i, k, t);
      cd.g(row, 3 * (k - 1)) = -1.0;
      cd.h(row) = params.gap_distance;
    }
  }
  for (int f = 0; f < n; ++f) {
    const auto uf = static_cast<std::size_t>(f);
    const int tm = schedule.merge_step[uf];
    for (int k = 1; k <= t; ++k) {
      const bool before = k <= tm && schedule.front_before[uf] == i;
      const bool after = k > tm && schedule.front_after[uf] == i;
      if (before || after) {
        cd.g(coupling_row(f, k, t), 3 * (k - 1)) = 1.0;
      }
    }
  }
  cd.a = cd.g * pred.lambda;
  cd.b = cd.h - cd.g * (pred.gamma * x0.vector());
  return cd;
}

LocalConstraints build_local_constraints(
  const MergeSchedule & schedule, const dynamics::PredictionMatrices & pred,
  const dynamics::LongitudinalState & x0, int i, const Parameters & params)
{
  const int t = pred.horizon;
  const scenario::RampGeometry geom = scenario::RampGeometry::from(params);
  const int tm = schedule.merge_step.at(static_cast<std::size_t>(i));
  const Eigen::VectorXd free = pred.gamma * x0.vector();

  Eigen::MatrixXd m_x = Eigen::MatrixXd::Zero(2, 3 * t);
  m_x(0, 3 * (t - 1)) = 1.0;
  for (int k = 1; k <= tm; ++k) {
    m_x(1, 3 * (k - 1) + 1) = 1.0;
  }
  LocalConstraints lc;
  lc.a = Eigen::MatrixXd::Zero(t + 2, t);
  lc.a.topRows(t).setIdentity();
  lc.a.bottomRows(2) = m_x * pred.lambda;
  lc.l.resize(t + 2);
  lc.u.resize(t + 2);
  lc.l.head(t).setConstant(-params.accel_max);
  lc.u.head(t).setConstant(params.accel_max);
  const Eigen::Vector2d shift = m_x * free;
  const scenario::Interval term = scenario::terminal_bounds(schedule, geom, i);
  const scenario::Interval avg = scenario::avg_speed_bounds(x0.s, geom, params.ts);
  lc.l(t) = term.lower - shift(0);
  lc.u(t) = term.upper - shift(0);
  lc.l(t + 1) = avg.lower - shift(1);
  lc.u(t + 1) = avg.upper - shift(1);
  return lc;
}

PenaltyPhase PlannerConfig::phase_at(int k) const
{
  for (const PenaltyPhase & ph : schedule) {
    if (k >= ph.first && k <= ph.last) {
      return ph;
    }
  }
  return k < schedule.front().first ? schedule.front() : schedule.back();
}

void PlannerConfig::validate() const
{
  if (schedule.empty()) {
    throw ConfigError("planner: empty penalty schedule");
  }
  for (const PenaltyPhase & ph : schedule) {
    if (!(ph.rho > 0.0) || !(ph.sigma > 0.0) || ph.last < ph.first) {
      throw ConfigError("planner: penalty phases need rho, sigma > 0 and first <= last");
    }
  }
  if (iterations < 0) {
    throw ConfigError("planner: iteration count must be non-negative");
  }
}

PlannerAgent make_agent(
  const MergeSchedule & schedule, const dynamics::PredictionMatrices & pred,
  const dynamics::LongitudinalState & x0, int i, const Parameters & params,
  const qp::QpSettings & qp_settings)
{
  PlannerAgent agent{
    i,
    build_coupling(schedule, pred, x0, i, params),
    build_local_constraints(schedule, pred, x0, i, params),
    {}, {}, {}, {}, {}, {},
    qp::QpSolver(qp_settings),
    0};
  const auto m = agent.coupling.h.size();
  agent.y = Eigen::VectorXd::Zero(m);
  agent.p = Eigen::VectorXd::Zero(m);
  agent.s = Eigen::VectorXd::Zero(m);
  agent.z = Eigen::VectorXd::Zero(m);
  agent.r = Eigen::VectorXd::Zero(m);
  agent.u = Eigen::VectorXd::Zero(pred.horizon);
  return agent;
}

void admm_local_update(
  PlannerAgent & agent, std::span<const Eigen::VectorXd> peer_y, double rho, double sigma,
  int iteration)
{
  const auto m = agent.y.size();
  const int d = agent.coupling.degree;
  Eigen::VectorXd sum_peers = Eigen::VectorXd::Zero(m);
  for (const auto & yj : peer_y) {
    sum_peers += yj;
  }
  const double dd = static_cast<double>(d);
  agent.p += rho * (dd * agent.y - sum_peers);
  agent.s += sigma * (agent.y - agent.z);
  agent.r = sigma * agent.z + rho * (dd * agent.y + sum_peers) - (agent.coupling.b + agent.p + agent.s);

  const double c = sigma + 2.0 * rho * dd;
  const Eigen::MatrixXd & a = agent.coupling.a;
  const auto t = a.cols();
  qp::QpProblem problem;
  problem.p = 2.0 * Eigen::MatrixXd::Identity(t, t) + a.transpose() * a / c;
  problem.q = a.transpose() * agent.r / c;
  problem.a = agent.local.a;
  problem.l = agent.local.l;
  problem.u = agent.local.u;
  qp::WarmStart warm{agent.u, std::nullopt};
  const qp::QpSolution sol = agent.solver.solve(problem, &warm);
  agent.qp_iterations += sol.iterations;
  if (sol.status == qp::Status::primal_infeasible || !sol.x.allFinite()) {
    throw SolverError(
      "planner: local QP of agent " + std::to_string(agent.index) + " failed at iteration " +
      std::to_string(iteration) + " (" + qp::to_string(sol.status) + ")");
  }
  agent.u = sol.x;
  agent.y = (a * agent.u + agent.r) / c;
  agent.z = project_polar(agent.y + agent.s / sigma);
  if (!agent.y.allFinite()) {
    throw SolverError(
      "planner: non-finite dual iterate at agent " + std::to_string(agent.index) +
      ", iteration " + std::to_string(iteration));
  }
}

double consensus_variance(std::span<const Eigen::VectorXd> ys)
{
  if (ys.empty()) {
    return 0.0;
  }
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(ys.front().size());
  for (const auto & y : ys) {
    mean += y;
  }
  mean /= static_cast<double>(ys.size());
  double v = 0.0;
  for (const auto & y : ys) {
    v += (y - mean).squaredNorm();
  }
  return v;
}

PlanResult plan_distributed(
  const scenario::ScenarioConfig & sc, const PlannerConfig & config, bus::V2xBus * external_bus)
{
  config.validate();
  sc.params.validate();
  const int n = static_cast<int>(sc.vehicles.size());
  if (n == 0) {
    throw ConfigError("planner: scenario has no vehicles");
  }
  std::vector<int> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), 0);
  std::unique_ptr<bus::V2xBus> own_bus;
  bus::V2xBus * link = external_bus;
  if (link == nullptr) {
    own_bus = std::make_unique<bus::V2xBus>(ids);
    link = own_bus.get();
  } else if (link->participants() != ids) {
    throw ConfigError("planner: bus participants must be the vehicle indices 0..N-1");
  }

  // coordinate exchange; every agent derives the merge order on its own
  std::uint64_t round = link->round();
  for (int i = 0; i < n; ++i) {
    link->broadcast(
      i, round, bus::PayloadKind::coordinate,
      bus::encode(coordinate_payload(sc.vehicles[static_cast<std::size_t>(i)])));
  }
  std::vector<MergeSchedule> local_schedules(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), config.threads, [&](std::size_t i) {
    const auto msgs = link->receive_all(static_cast<int>(i), round);
    scenario::ScenarioConfig view;
    view.params = sc.params;
    view.vehicles.resize(static_cast<std::size_t>(n));
    view.vehicles[i] = sc.vehicles[i];
    for (const auto & msg : msgs) {
      view.vehicles[static_cast<std::size_t>(msg.sender)] = spec_from_payload(bus::decode(msg.payload));
    }
    local_schedules[i] = scenario::assign_merge_order(view);
  });
  for (const auto & ms : local_schedules) {
    if (!same_schedule(ms, local_schedules.front())) {
      throw ProtocolError("planner: agents disagree on the merge order");
    }
  }
  ++round;

  PlanResult result;
  result.schedule = local_schedules.front();
  const dynamics::PredictionMatrices pred = prediction_for(sc.params);
  std::vector<PlannerAgent> agents;
  agents.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    agents.push_back(make_agent(
      result.schedule, pred, sc.vehicles[static_cast<std::size_t>(i)].initial, i, sc.params,
      config.qp));
  }

  std::vector<Eigen::VectorXd> ys(static_cast<std::size_t>(n));
  for (int k = 1; k <= config.iterations; ++k) {
    const PenaltyPhase ph = config.phase_at(k);
    for (int i = 0; i < n; ++i) {
      link->broadcast(
        i, round, bus::PayloadKind::dual_vector, bus::encode(agents[static_cast<std::size_t>(i)].y));
    }
    parallel_for(static_cast<std::size_t>(n), config.threads, [&](std::size_t i) {
      const auto msgs = link->receive_all(static_cast<int>(i), round);
      std::vector<Eigen::VectorXd> peers;
      peers.reserve(msgs.size());
      for (const auto & msg : msgs) {
        peers.push_back(bus::decode(msg.payload));
      }
      admm_local_update(agents[i], peers, ph.rho, ph.sigma, k);
    });
    ++round;
    for (int i = 0; i < n; ++i) {
      ys[static_cast<std::size_t>(i)] = agents[static_cast<std::size_t>(i)].y;
    }
    const double var = consensus_variance(ys);
    if (!std::isfinite(var)) {
      throw SolverError("planner: consensus variance became non-finite at iteration " + std::to_string(k));
    }
    result.variance.push_back(var);
    if (std::find(config.snapshot_iterations.begin(), config.snapshot_iterations.end(), k) !=
        config.snapshot_iterations.end()) {
      PlanSnapshot snap;
      snap.iteration = k;
      for (int i = 0; i < n; ++i) {
        snap.s.push_back(positions(
          pred, sc.vehicles[static_cast<std::size_t>(i)].initial, agents[static_cast<std::size_t>(i)].u));
      }
      result.snapshots.push_back(std::move(snap));
    }
  }
  result.iterations = config.iterations;
  for (int i = 0; i < n; ++i) {
    const auto & agent = agents[static_cast<std::size_t>(i)];
    result.vehicles.push_back(make_vehicle_plan(sc, pred, i, agent.u));
    result.objective += agent.u.squaredNorm();
    result.qp_iterations += agent.qp_iterations;
  }
  return result;
}

qp::QpSettings tight_settings()
{
  qp::QpSettings s;
  s.eps_abs = 1e-9;
  s.eps_rel = 1e-9;
  s.max_iter = 200000;
  s.polish = true;
  return s;
}

PlanResult plan_centralized(
  const scenario::ScenarioConfig & sc, const qp::QpSettings & settings, bool include_coupling)
{
  sc.params.validate();
  const int n = static_cast<int>(sc.vehicles.size());
  if (n == 0) {
    throw ConfigError("planner: scenario has no vehicles");
  }
  PlanResult result;
  result.schedule = scenario::assign_merge_order(sc);
  const dynamics::PredictionMatrices pred = prediction_for(sc.params);
  const int t = pred.horizon;
  const int local_rows = t + 2;

  std::vector<CouplingData> cds;
  Eigen::VectorXd b_sum = Eigen::VectorXd::Zero(n * t);
  for (int i = 0; i < n; ++i) {
    cds.push_back(build_coupling(result.schedule, pred, sc.vehicles[static_cast<std::size_t>(i)].initial, i, sc.params));
    b_sum += cds.back().b;
  }
  std::vector<int> active_rows;
  if (include_coupling) {
    for (int i = 0; i < n; ++i) {
      for (int k = 1; k <= t; ++k) {
        if (coupling_row_active(result.schedule, i, k)) {
          active_rows.push_back(coupling_row(i, k, t));
        }
      }
    }
  }
  const int nc = static_cast<int>(active_rows.size());
  qp::QpProblem problem;
  problem.p = 2.0 * Eigen::MatrixXd::Identity(n * t, n * t);
  problem.q = Eigen::VectorXd::Zero(n * t);
  problem.a = Eigen::MatrixXd::Zero(n * local_rows + nc, n * t);
  problem.l.resize(n * local_rows + nc);
  problem.u.resize(n * local_rows + nc);
  for (int i = 0; i < n; ++i) {
    const LocalConstraints lc =
      build_local_constraints(result.schedule, pred, sc.vehicles[static_cast<std::size_t>(i)].initial, i, sc.params);
    problem.a.block(i * local_rows, i * t, local_rows, t) = lc.a;
    problem.l.segment(i * local_rows, local_rows) = lc.l;
    problem.u.segment(i * local_rows, local_rows) = lc.u;
  }
  for (int r = 0; r < nc; ++r) {
    const int row = n * local_rows + r;
    for (int i = 0; i < n; ++i) {
      problem.a.block(row, i * t, 1, t) = cds[static_cast<std::size_t>(i)].a.row(active_rows[static_cast<std::size_t>(r)]);
    }
    problem.l(row) = b_sum(active_rows[static_cast<std::size_t>(r)]);
    problem.u(row) = qp::kInfinity;
  }

  qp::QpSolver solver(settings);
  const qp::QpSolution sol = solver.solve(problem);
  if (sol.status == qp::Status::primal_infeasible) {
    std::string cls = "gap (coupling)";
    if (include_coupling) {
      try {
        plan_centralized(sc, settings, false);
      } catch (const SolverError &) {
        cls = "input/terminal/average-speed (local)";
      }
    } else {
      cls = "input/terminal/average-speed (local)";
    }
    throw SolverError("centralized planner: infeasible, violated constraint class: " + cls);
  }
  result.iterations = sol.iterations;
  result.qp_iterations = sol.iterations;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd u = sol.x.segment(i * t, t);
    result.vehicles.push_back(make_vehicle_plan(sc, pred, i, u));
    result.objective += u.squaredNorm();
  }
  return result;
}

double min_gap_residual(const PlanResult & plan, const Parameters & params)
{
  const int n = plan.schedule.size();
  const int t = params.planning_horizon;
  double worst = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    for (int k = 1; k <= t; ++k) {
      std::optional<int> front;
      if (k <= plan.schedule.merge_step[ui]) {
        front = plan.schedule.front_before[ui];
      } else {
        front = plan.schedule.front_after[ui];
      }
      if (!front) {
        continue;
      }
      const double gap = plan.vehicles[static_cast<std::size_t>(*front)].s[static_cast<std::size_t>(k)] -
                         plan.vehicles[ui].s[static_cast<std::size_t>(k)];
      worst = std::min(worst, gap - params.gap_distance);
    }
  }
  return worst;
}

}  // namespace v2xcoop::planner
