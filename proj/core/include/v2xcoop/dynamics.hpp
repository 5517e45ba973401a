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

#include <Eigen/Dense>

#include <span>

/**
 * Vehicle models used by the stack.
 *
 * Planning uses a longitudinal first-order-lag model
 *   s' = v, v' = a, a' = (a_ref - a) / T_l
 * discretized by zero-order hold and stacked over the planning horizon.
 *
 * Control uses a kinematic bicycle model referenced at the vehicle center:
 *   x' = v cos(phi + beta), y' = v sin(phi + beta),
 *   phi' = v sin(beta) / (L_V / 2), v' = a,   beta = atan(tan(psi) / 2)
 * discretized with forward Euler, linearized along a nominal trajectory and
 * stacked into a condensed prediction X = A x0 + B u + G.
 */
namespace v2xcoop::dynamics
{

using Vector4 = Eigen::Vector4d;
using Matrix4 = Eigen::Matrix4d;
using Matrix42 = Eigen::Matrix<double, 4, 2>;

struct LongitudinalState
{
  double s{0.0};  // [m]
  double v{0.0};  // [m/s]
  double a{0.0};  // [m/s^2]

  Eigen::Vector3d vector() const { return {s, v, a}; }
};

struct LagModel
{
  double lag_time{0.0};
  double sample_time{0.0};
  Eigen::Matrix3d a_bar{Eigen::Matrix3d::Identity()};
  Eigen::Vector3d b_bar{Eigen::Vector3d::Zero()};
};

/// Exact zero-order-hold discretization of the lag model.
/// Throws ConfigError for lag_time <= 0 or sample_time < 0.
LagModel discretize_lag(double lag_time, double sample_time);

/// Condensed planning prediction X = gamma * x0 + lambda * U, where X stacks
/// the states X_1..X_T (3 rows each) and U the inputs U_0..U_{T-1}.
struct PredictionMatrices
{
  Eigen::MatrixXd gamma;   // (3T) x 3
  Eigen::MatrixXd lambda;  // (3T) x T, lower block triangular
  int horizon{0};
};

PredictionMatrices build_prediction_matrices(const LagModel & model, int horizon);

struct BicycleState
{
  double x{0.0};    // lateral position [m]
  double y{0.0};    // longitudinal position [m]
  double phi{0.0};  // heading, unwrapped [rad]
  double v{0.0};    // speed [m/s]

  Vector4 vector() const { return {x, y, phi, v}; }
  static BicycleState from_vector(const Eigen::Ref<const Eigen::Vector4d> & w)
  {
    return {w(0), w(1), w(2), w(3)};
  }
};

struct BicycleControl
{
  double a{0.0};    // [m/s^2]
  double psi{0.0};  // front-wheel steering [rad]

  Eigen::Vector2d vector() const { return {a, psi}; }
  static BicycleControl from_vector(const Eigen::Ref<const Eigen::Vector2d> & w)
  {
    return {w(0), w(1)};
  }
};

/// Continuous-time bicycle dynamics. Throws ConfigError when |psi| >= 90 deg
/// or vehicle_length <= 0.
Vector4 bicycle_derivative(
  const BicycleState & state, const BicycleControl & control, double vehicle_length);

/// One forward-Euler step: state + ts * f(state, control).
BicycleState bicycle_step(
  const BicycleState & state, const BicycleControl & control, double ts, double vehicle_length);

/// Analytic Jacobians of the continuous dynamics.
struct BicycleJacobians
{
  Matrix4 state;
  Matrix42 control;
};

BicycleJacobians bicycle_jacobians(
  const BicycleState & state, const BicycleControl & control, double vehicle_length);

/// Affine model of the Euler step around (state_bar, control_bar):
///   X_{l+1} ~= a * X_l + b * U_l + g
/// exact at the linearization point.
struct LinearizedStep
{
  Matrix4 a{Matrix4::Identity()};
  Matrix42 b{Matrix42::Zero()};
  Vector4 g{Vector4::Zero()};
};

LinearizedStep linearize_bicycle(
  const BicycleState & state_bar, const BicycleControl & control_bar, double ts,
  double vehicle_length);

/// Condensed time-varying prediction over the control horizon:
///   X = a_stack * x0 + b_stack * u + g_stack
/// with X = [X_1; ...; X_T] and u = [U_0; ...; U_{T-1}].
struct StackedLinearDynamics
{
  Eigen::MatrixXd a_stack;  // (4T) x 4
  Eigen::MatrixXd b_stack;  // (4T) x (2T)
  Eigen::VectorXd g_stack;  // 4T
  int horizon{0};

  Eigen::VectorXd predict(const Eigen::Vector4d & x0, const Eigen::VectorXd & u) const
  {
    return a_stack * x0 + b_stack * u + g_stack;
  }
};

/// Throws ConfigError on an empty step list.
StackedLinearDynamics stack_linear_dynamics(std::span<const LinearizedStep> steps);

}  // namespace v2xcoop::dynamics
