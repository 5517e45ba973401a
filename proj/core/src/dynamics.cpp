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

#include "v2xcoop/dynamics.hpp"

#include "v2xcoop/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace v2xcoop::dynamics
{

LagModel discretize_lag(double lag_time, double sample_time)
{
  if (!(lag_time > 0.0) || !std::isfinite(lag_time)) {
    throw ConfigError("discretize_lag: lag time must be positive, got " + std::to_string(lag_time));
  }
  if (!(sample_time >= 0.0) || !std::isfinite(sample_time)) {
    throw ConfigError(
      "discretize_lag: sample time must be non-negative, got " + std::to_string(sample_time));
  }
  const double tau = lag_time;
  const double t = sample_time;
  const double e = std::exp(-t / tau);
  const double one_minus_e = -std::expm1(-t / tau);

  LagModel m;
  m.lag_time = lag_time;
  m.sample_time = sample_time;
  m.a_bar << 1.0, t, tau * t - tau * tau * one_minus_e,  //
    0.0, 1.0, tau * one_minus_e,                          //
    0.0, 0.0, e;
  // integral of the first column of exp(A s) B over [0, T]
  m.b_bar << 0.5 * t * t - tau * t + tau * tau * one_minus_e, t - tau * one_minus_e, one_minus_e;
  return m;
}

PredictionMatrices build_prediction_matrices(const LagModel & model, int horizon)
{
  if (horizon < 1) {
    throw ConfigError("build_prediction_matrices: horizon must be >= 1");
  }
  const int n = horizon;
  PredictionMatrices out;
  out.horizon = n;
  out.gamma = Eigen::MatrixXd::Zero(3 * n, 3);
  out.lambda = Eigen::MatrixXd::Zero(3 * n, n);

  // powers[k] = A_bar^k * B_bar
  std::vector<Eigen::Vector3d> powers(static_cast<std::size_t>(n));
  Eigen::Vector3d ab = model.b_bar;
  Eigen::Matrix3d ak = model.a_bar;
  for (int k = 0; k < n; ++k) {
    powers[static_cast<std::size_t>(k)] = ab;
    ab = model.a_bar * ab;
    out.gamma.block<3, 3>(3 * k, 0) = ak;
    ak = model.a_bar * ak;
  }
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c <= r; ++c) {
      out.lambda.block<3, 1>(3 * r, c) = powers[static_cast<std::size_t>(r - c)];
    }
  }
  return out;
}

namespace
{

void check_bicycle_args(const BicycleControl & control, double vehicle_length)
{
  if (!(vehicle_length > 0.0)) {
    throw ConfigError("bicycle model: vehicle length must be positive");
  }
  if (!(std::abs(control.psi) < 0.5 * std::numbers::pi)) {
    throw ConfigError(
      "bicycle model: steering angle out of range (|psi| >= 90 deg): " +
      std::to_string(control.psi));
  }
}

}  // namespace

Vector4 bicycle_derivative(
  const BicycleState & state, const BicycleControl & control, double vehicle_length)
{
  check_bicycle_args(control, vehicle_length);
  const double beta = std::atan(0.5 * std::tan(control.psi));
  const double h = state.phi + beta;
  return {
    state.v * std::cos(h), state.v * std::sin(h), state.v * std::sin(beta) / (0.5 * vehicle_length),
    control.a};
}

BicycleState bicycle_step(
  const BicycleState & state, const BicycleControl & control, double ts, double vehicle_length)
{
  const Vector4 f = bicycle_derivative(state, control, vehicle_length);
  return {
    state.x + ts * f(0), state.y + ts * f(1), state.phi + ts * f(2), state.v + ts * f(3)};
}

BicycleJacobians bicycle_jacobians(
  const BicycleState & state, const BicycleControl & control, double vehicle_length)
{
  check_bicycle_args(control, vehicle_length);
  const double tan_psi = std::tan(control.psi);
  const double beta = std::atan(0.5 * tan_psi);
  const double cos_psi = std::cos(control.psi);
  const double dbeta = 0.5 / (cos_psi * cos_psi) / (1.0 + 0.25 * tan_psi * tan_psi);
  const double h = state.phi + beta;
  const double ch = std::cos(h);
  const double sh = std::sin(h);
  const double half_l = 0.5 * vehicle_length;

  BicycleJacobians j;
  j.state.setZero();
  j.state(0, 2) = -state.v * sh;
  j.state(0, 3) = ch;
  j.state(1, 2) = state.v * ch;
  j.state(1, 3) = sh;
  j.state(2, 3) = std::sin(beta) / half_l;

  j.control.setZero();
  j.control(0, 1) = -state.v * sh * dbeta;
  j.control(1, 1) = state.v * ch * dbeta;
  j.control(2, 1) = state.v * std::cos(beta) * dbeta / half_l;
  j.control(3, 0) = 1.0;
  return j;
}

LinearizedStep linearize_bicycle(
  const BicycleState & state_bar, const BicycleControl & control_bar, double ts,
  double vehicle_length)
{
  const BicycleJacobians j = bicycle_jacobians(state_bar, control_bar, vehicle_length);
  const Vector4 f = bicycle_derivative(state_bar, control_bar, vehicle_length);
  const Vector4 x = state_bar.vector();
  const Eigen::Vector2d u = control_bar.vector();

  LinearizedStep step;
  step.a = ts * j.state + Matrix4::Identity();
  step.b = ts * j.control;
  step.g = ts * (f - j.state * x - j.control * u);
  return step;
}

StackedLinearDynamics stack_linear_dynamics(std::span<const LinearizedStep> steps)
{
  if (steps.empty()) {
    throw ConfigError("stack_linear_dynamics: empty step list");
  }
  const int n = static_cast<int>(steps.size());
  StackedLinearDynamics out;
  out.horizon = n;
  out.a_stack = Eigen::MatrixXd::Zero(4 * n, 4);
  out.b_stack = Eigen::MatrixXd::Zero(4 * n, 2 * n);
  out.g_stack = Eigen::VectorXd::Zero(4 * n);

  Matrix4 a_prev = Matrix4::Identity();
  Vector4 g_prev = Vector4::Zero();
  for (int l = 0; l < n; ++l) {
    const LinearizedStep & s = steps[static_cast<std::size_t>(l)];
    const Matrix4 a_cur = s.a * a_prev;
    const Vector4 g_cur = s.a * g_prev + s.g;
    out.a_stack.block<4, 4>(4 * l, 0) = a_cur;
    out.g_stack.segment<4>(4 * l) = g_cur;
    if (l > 0) {
      out.b_stack.block(4 * l, 0, 4, 2 * l) = s.a * out.b_stack.block(4 * (l - 1), 0, 4, 2 * l);
    }
    out.b_stack.block<4, 2>(4 * l, 2 * l) = s.b;
    a_prev = a_cur;
    g_prev = g_cur;
  }
  return out;
}

}  // namespace v2xcoop::dynamics
