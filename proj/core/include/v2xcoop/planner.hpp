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
#include "v2xcoop/qp_solver.hpp"
#include "v2xcoop/scenario.hpp"
#include "v2xcoop/v2x_bus.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

/**
 * Distributed longitudinal trajectory planner.
 *
 * Each vehicle minimizes the squared norm of its acceleration commands under
 * input bounds, a terminal-slot constraint and an average-speed window, while
 * the time-varying gap constraints couple vehicles through
 *   sum_i (A_i U_i - b_i) >= 0.
 * The dual is solved by consensus ADMM over the V2X bus: every agent keeps a
 * local copy y_i of the multiplier, exchanges it each round, and recovers its
 * primal controls from a small local QP.
 */
namespace v2xcoop::planner
{

/// Row index of (vehicle block, step k in [1, T]) in the stacked coupling space.
inline int coupling_row(int block, int k, int horizon) { return block * horizon + (k - 1); }

struct CouplingData
{
  Eigen::MatrixXd g;  // (N T) x (3 T)
  Eigen::VectorXd h;  // N T
  Eigen::MatrixXd a;  // (N T) x T
  Eigen::VectorXd b;  // N T
  int degree{0};
};

/// True when the gap row (i, k) constrains vehicle i against some front vehicle.
bool coupling_row_active(const scenario::MergeSchedule & schedule, int i, int k);

CouplingData build_coupling(
  const scenario::MergeSchedule & schedule, const dynamics::PredictionMatrices & pred,
  const dynamics::LongitudinalState & x0, int i, const Parameters & params);

/// Local constraint block [I; M_X Lambda] with bounds on U, the terminal
/// position and the summed speed over the first t_M steps.
struct LocalConstraints
{
  Eigen::MatrixXd a;  // (T + 2) x T
  Eigen::VectorXd l;
  Eigen::VectorXd u;
};

LocalConstraints build_local_constraints(
  const scenario::MergeSchedule & schedule, const dynamics::PredictionMatrices & pred,
  const dynamics::LongitudinalState & x0, int i, const Parameters & params);

struct PenaltyPhase
{
  int first{1};  // inclusive, 1-based iteration index
  int last{1};   // inclusive
  double rho{1.0};
  double sigma{1.0};
};

struct PlannerConfig
{
  std::vector<PenaltyPhase> schedule{
    {1, 1, 0.1, 0.1}, {2, 13, 1.0, 1.0}, {14, 23, 10.0, 10.0}, {24, 33, 100.0, 100.0}};
  int iterations{33};
  double consensus_tolerance{1e-5};
  std::vector<int> snapshot_iterations{1, 13, 23, 33};
  qp::QpSettings qp{make_default_qp_settings()};
  int threads{1};

  /// Penalties for iteration k; past the last phase the final values hold.
  PenaltyPhase phase_at(int k) const;
  void validate() const;

  static qp::QpSettings make_default_qp_settings()
  {
    qp::QpSettings s;
    s.eps_abs = 1e-8;
    s.eps_rel = 1e-8;
    s.max_iter = 20000;
    s.polish = true;
    return s;
  }
};

struct PlannerAgent
{
  int index{0};
  CouplingData coupling;
  LocalConstraints local;
  Eigen::VectorXd y;
  Eigen::VectorXd p;
  Eigen::VectorXd s;
  Eigen::VectorXd z;
  Eigen::VectorXd r;
  Eigen::VectorXd u;
  qp::QpSolver solver;
  int qp_iterations{0};
};

PlannerAgent make_agent(
  const scenario::MergeSchedule & schedule, const dynamics::PredictionMatrices & pred,
  const dynamics::LongitudinalState & x0, int i, const Parameters & params,
  const qp::QpSettings & qp_settings);

/// One ADMM round for one agent given the peers' y from the previous round.
/// Throws SolverError (with agent and iteration) if the local QP fails.
void admm_local_update(
  PlannerAgent & agent, std::span<const Eigen::VectorXd> peer_y, double rho, double sigma,
  int iteration);

/// Projection onto the nonpositive orthant.
inline Eigen::VectorXd project_polar(const Eigen::VectorXd & v) { return v.cwiseMin(0.0); }

double consensus_variance(std::span<const Eigen::VectorXd> ys);

struct VehiclePlan
{
  Eigen::VectorXd u;               // T accelerations
  Eigen::VectorXd x;               // 3 T stacked (s, v, a)
  std::vector<double> s;           // T + 1 positions including s0
  scenario::ReferenceTrajectory2D reference;
};

struct PlanSnapshot
{
  int iteration{0};
  std::vector<std::vector<double>> s;  // per vehicle
};

struct PlanResult
{
  scenario::MergeSchedule schedule;
  std::vector<VehiclePlan> vehicles;
  std::vector<double> variance;  // after iterations 1..K
  std::vector<PlanSnapshot> snapshots;
  double objective{0.0};
  int iterations{0};
  long long qp_iterations{0};
};

/// Distributed run. With a bus, its participants must be the vehicle indices
/// 0..N-1; otherwise an internal bus is used.
PlanResult plan_distributed(
  const scenario::ScenarioConfig & scenario, const PlannerConfig & config,
  bus::V2xBus * bus = nullptr);

qp::QpSettings tight_settings();

/// One QP over all vehicles with the same constraint set; a testing oracle.
/// Throws SolverError naming the violated constraint class if infeasible.
PlanResult plan_centralized(
  const scenario::ScenarioConfig & scenario, const qp::QpSettings & settings = tight_settings(),
  bool include_coupling = true);

/// Smallest gap residual s_front - s_i - d over all constrained rows.
double min_gap_residual(const PlanResult & plan, const Parameters & params);

}  // namespace v2xcoop::planner
