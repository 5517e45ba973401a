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
#include "v2xcoop/qp_solver.hpp"
#include "v2xcoop/scenario.hpp"
#include "v2xcoop/v2x_bus.hpp"

#include <Eigen/Dense>

#include <array>
#include <span>
#include <vector>

/**
 * Distributed cooperative iterative MPC.
 *
 * Every vehicle tracks its 2-D reference with a condensed QP in its own
 * control sequence u = [U_0; ...; U_{T-1}]:
 *
 *   J(u) = (X - Xr)' Qx (X - Xr) + u' Qu u + ||Mf X||^2 + alpha sum_j ||k_j X + b_j||^2
 *
 * with X = A x0 + B u + G from the bicycle model linearized along the
 * vehicle's nominal trajectory, and k_j, b_j the linearized four-circle
 * clearance shortfall against neighbor j's broadcast nominal. A proximal
 * term rho |u - u_nominal|^2 is added in the loop (MpcSettings). The loop
 * broadcast -> linearize -> solve -> re-roll is repeated T_iter times per
 * control step.
 */
namespace v2xcoop::mpc
{

struct NominalTrajectory
{
  dynamics::BicycleState anchor;
  Eigen::VectorXd x;  // 4 T stacked X_1..X_T
  Eigen::VectorXd u;  // 2 T stacked U_0..U_{T-1}
  int origin_step{0};

  int horizon() const { return static_cast<int>(u.size() / 2); }
  dynamics::BicycleState state(int l) const;  // l in [0, T]; 0 is the anchor
  dynamics::BicycleControl control(int l) const;  // l in [0, T-1]
};

/// Euler rollout of u from the anchor.
NominalTrajectory rollout_nominal(
  const dynamics::BicycleState & anchor, const Eigen::VectorXd & u, int origin_step, double ts,
  double vehicle_length);

/// Zero-input rollout (constant heading and speed).
NominalTrajectory constant_velocity_nominal(
  const dynamics::BicycleState & anchor, int horizon, int origin_step, double ts,
  double vehicle_length);

/// Shift by one step: drop the first control, repeat the last one, append an
/// Euler step from the last state.
NominalTrajectory extend_nominal(const NominalTrajectory & nominal, double ts, double vehicle_length);

struct CostWeights
{
  Eigen::Matrix4d q_x{Eigen::Matrix4d::Identity()};
  Eigen::Matrix2d q_u{Eigen::Matrix2d::Identity()};
  Eigen::Matrix<double, 2, 4> m_f{Eigen::Matrix<double, 2, 4>::Zero()};
  double k_x{1.0};
  double k_u{1.0};
  double alpha{0.0};

  static CostWeights from(const Parameters & p);
};

struct StackedWeights
{
  Eigen::MatrixXd bar_q_x;  // 4T x 4T
  Eigen::MatrixXd bar_q_u;  // 2T x 2T
  Eigen::MatrixXd bar_m_f;  // 2(T-1) x 4T
};

StackedWeights stack_weights(const CostWeights & w, int horizon);

/// Offsets between circle centers for (p, q) = (1,1), (1,-1), (-1,1), (-1,-1).
std::array<Eigen::Vector2d, 4> circle_pair_offsets(
  const dynamics::BicycleState & xi, const dynamics::BicycleState & xj, double d_hk);

/// min(|offset| - D_S, 0).
double tilde_d(
  const dynamics::BicycleState & xi, const dynamics::BicycleState & xj, int p, int q, double d_hk,
  double d_s);

/// Stacked clearance shortfall over the horizon (4 entries per step).
Eigen::VectorXd safety_residual(
  const Eigen::VectorXd & x_i, const Eigen::VectorXd & x_j, double d_hk, double d_s);

struct SafetyLinearization
{
  Eigen::MatrixXd k;  // 4T x 4T, block diagonal
  Eigen::VectorXd b;  // 4T
  bool active{false};  // any shortfall or boundary contact on the horizon
};

/// First-order model k X_i + b of the residual around the nominals, with
/// derivative 0.5 of min(., 0) at 0.
SafetyLinearization safety_linearization(
  const Eigen::VectorXd & x_i, const Eigen::VectorXd & x_j, double d_hk, double d_s);

struct AssembledQp
{
  qp::QpProblem problem;
  Eigen::VectorXd affine;  // c = A x0 + G, so X = B u + c
  Eigen::MatrixXd b_stack;
  Eigen::VectorXd reference;  // stacked X_ref
  Eigen::MatrixXd w;          // Qx + Mf'Mf + alpha sum k'k
  Eigen::VectorXd w_ref;      // Qx Xr - alpha sum k'b
  double constant{0.0};       // makes objective(u) match J(u)
  std::vector<SafetyLinearization> safety;

  /// Full cost J(u) including the constant terms.
  double objective(const Eigen::VectorXd & u) const;
};

/// Box bounds on every control; no other constraints.
AssembledQp assemble_qp(
  const dynamics::BicycleState & anchor, const NominalTrajectory & nominal,
  std::span<const Eigen::VectorXd> neighbor_states, const Eigen::VectorXd & reference,
  const CostWeights & weights, const StackedWeights & stacked_weights,
  const dynamics::StackedLinearDynamics & stacked, const Parameters & params);

/// Adds rho |u - u_nominal|^2, which keeps the solution near the
/// linearization point.
void add_proximal_term(AssembledQp & qp, const Eigen::VectorXd & u_nominal, double rho);

/// Reference window X_ref(k + 1 .. k + T) as a 4T vector.
Eigen::VectorXd reference_window(
  const scenario::ReferenceTrajectory2D & ref, int step, int horizon);

struct MpcSettings
{
  int inner_iterations{3};
  bool warm_start{true};
  qp::QpSettings qp{};
  int threads{1};
  double proximal_weight{10.0};  // rho in rho |u - u_nominal|^2, 0 disables
};

struct InnerRecord
{
  int qp_iterations{0};
  double wall_time{0.0};   // [s], compute only
  double objective{0.0};   // J at the new solution
  qp::Status status{qp::Status::solved};
  bool safety_active{false};
};

struct MpcStepResult
{
  int id{0};
  dynamics::BicycleControl applied;
  NominalTrajectory nominal;  // extended to the next step
  std::vector<InnerRecord> inner;
  bool fail_safe{false};
  int max_iter_events{0};
};

struct DcimpcAgent
{
  int id{0};
  NominalTrajectory nominal;
  dynamics::BicycleControl last_applied{};
  Eigen::VectorXd last_dual;
  qp::QpSolver solver;
  const scenario::ReferenceTrajectory2D * reference{nullptr};
  bool initialized{false};
};

DcimpcAgent make_dcimpc_agent(
  int id, const dynamics::BicycleState & initial, const scenario::ReferenceTrajectory2D * reference,
  const Parameters & params, const MpcSettings & settings);

/// One control step for all agents (all at the same step k). The bus
/// participants must equal the agent ids.
std::vector<MpcStepResult> dcimpc_step(
  std::span<DcimpcAgent * const> agents, bus::V2xBus & bus, const CostWeights & weights,
  const Parameters & params, const MpcSettings & settings, int step);

}  // namespace v2xcoop::mpc
