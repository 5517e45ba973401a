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

#include "v2xcoop/errors.hpp"
#include "v2xcoop/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

namespace v2xcoop::mpc
{

using dynamics::BicycleControl;
using dynamics::BicycleState;

dynamics::BicycleState NominalTrajectory::state(int l) const
{
  if (l == 0) {
    return anchor;
  }
  return BicycleState::from_vector(x.segment<4>(4 * (l - 1)));
}

dynamics::BicycleControl NominalTrajectory::control(int l) const
{
  return BicycleControl::from_vector(u.segment<2>(2 * l));
}

NominalTrajectory rollout_nominal(
  const BicycleState & anchor, const Eigen::VectorXd & u, int origin_step, double ts,
  double vehicle_length)
{
  const int t = static_cast<int>(u.size() / 2);
  NominalTrajectory nom;
  nom.anchor = anchor;
  nom.u = u;
  nom.x.resize(4 * t);
  nom.origin_step = origin_step;
  BicycleState s = anchor;
  for (int l = 0; l < t; ++l) {
    s = dynamics::bicycle_step(s, BicycleControl::from_vector(u.segment<2>(2 * l)), ts, vehicle_length);
    nom.x.segment<4>(4 * l) = s.vector();
  }
  return nom;
}

NominalTrajectory constant_velocity_nominal(
  const BicycleState & anchor, int horizon, int origin_step, double ts, double vehicle_length)
{
  return rollout_nominal(anchor, Eigen::VectorXd::Zero(2 * horizon), origin_step, ts, vehicle_length);
}

NominalTrajectory extend_nominal(const NominalTrajectory & nominal, double ts, double vehicle_length)
{
  const int t = nominal.horizon();
  NominalTrajectory out;
  out.origin_step = nominal.origin_step + 1;
  out.anchor = nominal.state(1);
  out.u.resize(2 * t);
  out.x.resize(4 * t);
  if (t > 1) {
    out.u.head(2 * (t - 1)) = nominal.u.tail(2 * (t - 1));
    out.x.head(4 * (t - 1)) = nominal.x.tail(4 * (t - 1));
  }
  const Eigen::Vector2d last_u = nominal.u.tail<2>();
  out.u.tail<2>() = last_u;
  const BicycleState last = nominal.state(t);
  out.x.tail<4>() =
    dynamics::bicycle_step(last, BicycleControl::from_vector(last_u), ts, vehicle_length).vector();
  return out;
}

CostWeights CostWeights::from(const Parameters & p)
{
  CostWeights w;
  w.q_x = p.q_x.asDiagonal();
  w.q_u = p.q_u.asDiagonal();
  w.m_f = p.m_f;
  w.k_x = p.k_x;
  w.k_u = p.k_u;
  w.alpha = p.alpha;
  return w;
}

StackedWeights stack_weights(const CostWeights & w, int horizon)
{
  const int t = horizon;
  StackedWeights s;
  s.bar_q_x = Eigen::MatrixXd::Zero(4 * t, 4 * t);
  s.bar_q_u = Eigen::MatrixXd::Zero(2 * t, 2 * t);
  for (int l = 0; l < t; ++l) {
    const double kx = l + 1 == t ? w.k_x : 1.0;
    const double ku = l + 1 == t ? w.k_u : 1.0;
    s.bar_q_x.block<4, 4>(4 * l, 4 * l) = kx * w.q_x;
    s.bar_q_u.block<2, 2>(2 * l, 2 * l) = ku * w.q_u;
  }
  s.bar_m_f = Eigen::MatrixXd::Zero(2 * std::max(t - 1, 0), 4 * t);
  for (int l = 0; l + 1 < t; ++l) {
    s.bar_m_f.block<2, 4>(2 * l, 4 * l) = -w.m_f;
    s.bar_m_f.block<2, 4>(2 * l, 4 * (l + 1)) = w.m_f;
  }
  return s;
}

std::array<Eigen::Vector2d, 4> circle_pair_offsets(
  const BicycleState & xi, const BicycleState & xj, double d_hk)
{
  static constexpr std::array<std::array<int, 2>, 4> kPairs{{{1, 1}, {1, -1}, {-1, 1}, {-1, -1}}};
  std::array<Eigen::Vector2d, 4> out;
  const Eigen::Vector2d base(xi.x - xj.x, xi.y - xj.y);
  const Eigen::Vector2d hi(std::cos(xi.phi), std::sin(xi.phi));
  const Eigen::Vector2d hj(std::cos(xj.phi), std::sin(xj.phi));
  for (std::size_t n = 0; n < 4; ++n) {
    out[n] = base + d_hk * (kPairs[n][0] * hi - kPairs[n][1] * hj);
  }
  return out;
}

double tilde_d(
  const BicycleState & xi, const BicycleState & xj, int p, int q, double d_hk, double d_s)
{
  const Eigen::Vector2d off =
    Eigen::Vector2d(xi.x - xj.x, xi.y - xj.y) +
    d_hk * (p * Eigen::Vector2d(std::cos(xi.phi), std::sin(xi.phi)) -
            q * Eigen::Vector2d(std::cos(xj.phi), std::sin(xj.phi)));
  return std::min(off.norm() - d_s, 0.0);
}

namespace
{

constexpr std::array<int, 4> kP{1, 1, -1, -1};

}  // namespace

Eigen::VectorXd safety_residual(
  const Eigen::VectorXd & x_i, const Eigen::VectorXd & x_j, double d_hk, double d_s)
{
  const auto t = x_i.size() / 4;
  Eigen::VectorXd r(4 * t);
  for (Eigen::Index l = 0; l < t; ++l) {
    const auto offs = circle_pair_offsets(
      BicycleState::from_vector(x_i.segment<4>(4 * l)),
      BicycleState::from_vector(x_j.segment<4>(4 * l)), d_hk);
    for (int n = 0; n < 4; ++n) {
      r(4 * l + n) = std::min(offs[static_cast<std::size_t>(n)].norm() - d_s, 0.0);
    }
  }
  return r;
}

SafetyLinearization safety_linearization(
  const Eigen::VectorXd & x_i, const Eigen::VectorXd & x_j, double d_hk, double d_s)
{
  if (x_i.size() != x_j.size() || x_i.size() % 4 != 0) {
    throw ConfigError("safety_linearization: nominal lengths differ");
  }
  const auto t = x_i.size() / 4;
  SafetyLinearization lin;
  lin.k = Eigen::MatrixXd::Zero(4 * t, 4 * t);
  lin.b = Eigen::VectorXd::Zero(4 * t);
  const Eigen::VectorXd resid = safety_residual(x_i, x_j, d_hk, d_s);
  for (Eigen::Index l = 0; l < t; ++l) {
    const BicycleState si = BicycleState::from_vector(x_i.segment<4>(4 * l));
    const BicycleState sj = BicycleState::from_vector(x_j.segment<4>(4 * l));
    const auto offs = circle_pair_offsets(si, sj, d_hk);
    const Eigen::Vector2d dphi(-std::sin(si.phi), std::cos(si.phi));
    for (int n = 0; n < 4; ++n) {
      const Eigen::Vector2d & off = offs[static_cast<std::size_t>(n)];
      const double dist = off.norm();
      const double g = dist - d_s;
      double slope = 0.0;
      if (g < 0.0) {
        slope = 1.0;
      } else if (g == 0.0) {
        slope = 0.5;
      }
      if (slope == 0.0 || dist == 0.0) {
        continue;
      }
      lin.active = true;
      const Eigen::Vector2d unit = off / dist;
      const Eigen::Index row = 4 * l + n;
      lin.k(row, 4 * l + 0) = slope * unit.x();
      lin.k(row, 4 * l + 1) = slope * unit.y();
      lin.k(row, 4 * l + 2) = slope * d_hk * kP[static_cast<std::size_t>(n)] * unit.dot(dphi);
    }
  }
  if (lin.active) {
    lin.b = resid - lin.k * x_i;
  } else {
    lin.b = resid;
  }
  return lin;
}

double AssembledQp::objective(const Eigen::VectorXd & u) const
{
  return problem.objective(u) + constant;
}

AssembledQp assemble_qp(
  const BicycleState & anchor, const NominalTrajectory & nominal,
  std::span<const Eigen::VectorXd> neighbor_states, const Eigen::VectorXd & reference,
  const CostWeights & weights, const StackedWeights & sw,
  const dynamics::StackedLinearDynamics & stacked, const Parameters & params)
{
  const int t = nominal.horizon();
  if (stacked.horizon != t || reference.size() != 4 * t || sw.bar_q_x.rows() != 4 * t) {
    throw ConfigError("assemble_qp: horizon mismatch");
  }
  AssembledQp out;
  out.b_stack = stacked.b_stack;
  out.affine = stacked.a_stack * anchor.vector() + stacked.g_stack;
  out.reference = reference;
  out.w = sw.bar_q_x + sw.bar_m_f.transpose() * sw.bar_m_f;
  out.w_ref = sw.bar_q_x * reference;
  out.constant = reference.dot(sw.bar_q_x * reference);
  const double d_hk = params.circle_offset();
  for (const Eigen::VectorXd & xj : neighbor_states) {
    if (xj.size() != 4 * t) {
      throw ConfigError("assemble_qp: neighbor nominal has the wrong length");
    }
    SafetyLinearization lin = safety_linearization(nominal.x, xj, d_hk, params.safety_distance);
    if (lin.active && weights.alpha > 0.0) {
      out.w.noalias() += weights.alpha * lin.k.transpose() * lin.k;
      out.w_ref.noalias() -= weights.alpha * lin.k.transpose() * lin.b;
      out.constant += weights.alpha * lin.b.squaredNorm();
    }
    out.safety.push_back(std::move(lin));
  }
  const Eigen::MatrixXd & b = stacked.b_stack;
  const Eigen::VectorXd & c = out.affine;
  // J(u) = (Bu + c)' W (Bu + c) - 2 (Bu + c)' w_ref + u' Qu u + const
  out.problem.p = 2.0 * (b.transpose() * out.w * b + sw.bar_q_u);
  out.problem.p = 0.5 * (out.problem.p + out.problem.p.transpose()).eval();
  out.problem.q = 2.0 * b.transpose() * (out.w * c - out.w_ref);
  out.constant += c.dot(out.w * c) - 2.0 * c.dot(out.w_ref);
  out.problem.a = Eigen::MatrixXd::Identity(2 * t, 2 * t);
  out.problem.l.resize(2 * t);
  out.problem.u.resize(2 * t);
  for (int l = 0; l < t; ++l) {
    out.problem.l(2 * l) = -params.accel_max;
    out.problem.u(2 * l) = params.accel_max;
    out.problem.l(2 * l + 1) = -params.steer_max;
    out.problem.u(2 * l + 1) = params.steer_max;
  }
  return out;
}

void add_proximal_term(AssembledQp & qp, const Eigen::VectorXd & u_nominal, double rho)
{
  if (u_nominal.size() != qp.problem.q.size()) {
    throw ConfigError("add_proximal_term: nominal control length mismatch");
  }
  qp.problem.p.diagonal().array() += 2.0 * rho;
  qp.problem.q.noalias() -= 2.0 * rho * u_nominal;
  qp.constant += rho * u_nominal.squaredNorm();
}

Eigen::VectorXd reference_window(const scenario::ReferenceTrajectory2D & ref, int step, int horizon)
{
  Eigen::VectorXd w(4 * horizon);
  for (int l = 1; l <= horizon; ++l) {
    w.segment<4>(4 * (l - 1)) = ref.at(step + l).vector();
  }
  return w;
}

DcimpcAgent make_dcimpc_agent(
  int id, const BicycleState & initial, const scenario::ReferenceTrajectory2D * reference,
  const Parameters & params, const MpcSettings & settings)
{
  DcimpcAgent agent{
    id,
    constant_velocity_nominal(initial, params.control_horizon, 0, params.ts, params.vehicle_length),
    {},
    Eigen::VectorXd::Zero(2 * params.control_horizon),
    qp::QpSolver(settings.qp),
    reference,
    true};
  return agent;
}

namespace
{

Eigen::VectorXd clip_controls(const Eigen::VectorXd & u, const Parameters & params)
{
  Eigen::VectorXd out = u;
  for (Eigen::Index l = 0; l < u.size() / 2; ++l) {
    out(2 * l) = std::clamp(out(2 * l), -params.accel_max, params.accel_max);
    out(2 * l + 1) = std::clamp(out(2 * l + 1), -params.steer_max, params.steer_max);
  }
  return out;
}

}  // namespace

std::vector<MpcStepResult> dcimpc_step(
  std::span<DcimpcAgent * const> agents, bus::V2xBus & bus, const CostWeights & weights,
  const Parameters & params, const MpcSettings & settings, int step)
{
  const std::size_t n = agents.size();
  const int t = params.control_horizon;
  const StackedWeights sw = stack_weights(weights, t);
  std::vector<MpcStepResult> results(n);
  for (std::size_t a = 0; a < n; ++a) {
    results[a].id = agents[a]->id;
    if (agents[a]->reference == nullptr) {
      throw ConfigError("dcimpc_step: agent " + std::to_string(agents[a]->id) + " has no reference");
    }
    if (agents[a]->nominal.horizon() != t) {
      throw ConfigError("dcimpc_step: nominal horizon mismatch");
    }
  }
  std::vector<char> failed(n, 0);

  for (int it = 0; it < settings.inner_iterations; ++it) {
    const std::uint64_t round = bus.round();
    for (std::size_t a = 0; a < n; ++a) {
      bus.broadcast(
        agents[a]->id, round, bus::PayloadKind::nominal_trajectory, bus::encode(agents[a]->nominal.x));
    }
    parallel_for(n, settings.threads, [&](std::size_t a) {
      DcimpcAgent & agent = *agents[a];
      const auto msgs = bus.receive_all(agent.id, round);
      const auto t0 = std::chrono::steady_clock::now();
      std::vector<Eigen::VectorXd> neighbors;
      neighbors.reserve(msgs.size());
      for (const auto & msg : msgs) {
        neighbors.push_back(bus::decode(msg.payload));
      }
      InnerRecord rec;
      if (failed[a]) {
        results[a].inner.push_back(rec);
        return;
      }
      try {
        std::vector<dynamics::LinearizedStep> steps(static_cast<std::size_t>(t));
        for (int l = 0; l < t; ++l) {
          steps[static_cast<std::size_t>(l)] = dynamics::linearize_bicycle(
            agent.nominal.state(l), agent.nominal.control(l), params.ts, params.vehicle_length);
        }
        const auto stacked = dynamics::stack_linear_dynamics(steps);
        const Eigen::VectorXd ref = reference_window(*agent.reference, step, t);
        AssembledQp qp =
          assemble_qp(agent.nominal.anchor, agent.nominal, neighbors, ref, weights, sw, stacked, params);
        if (settings.proximal_weight > 0.0) {
          add_proximal_term(qp, agent.nominal.u, settings.proximal_weight);
        }
        qp::QpSolution sol;
        if (settings.warm_start) {
          const qp::WarmStart warm{agent.nominal.u, agent.last_dual};
          sol = agent.solver.solve(qp.problem, &warm);
        } else {
          sol = agent.solver.solve(qp.problem, nullptr);
        }
        rec.qp_iterations = sol.iterations;
        rec.status = sol.status;
        for (const auto & s : qp.safety) {
          rec.safety_active = rec.safety_active || s.active;
        }
        if (sol.status == qp::Status::primal_infeasible || !sol.x.allFinite()) {
          failed[a] = 1;
        } else {
          if (sol.status == qp::Status::max_iter) {
            ++results[a].max_iter_events;
          }
          const Eigen::VectorXd u = clip_controls(sol.x, params);
          agent.last_dual = sol.y;
          rec.objective = qp.objective(u);
          if (settings.proximal_weight > 0.0) {
            rec.objective -= settings.proximal_weight * (u - agent.nominal.u).squaredNorm();
          }
          agent.nominal = rollout_nominal(
            agent.nominal.anchor, u, agent.nominal.origin_step, params.ts, params.vehicle_length);
        }
      } catch (const Error &) {
        failed[a] = 1;
      }
      rec.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      results[a].inner.push_back(rec);
    });
  }

  for (std::size_t a = 0; a < n; ++a) {
    DcimpcAgent & agent = *agents[a];
    MpcStepResult & res = results[a];
    if (failed[a]) {
      // hold the previous control and rebuild the nominal around it
      res.fail_safe = true;
      res.applied = agent.last_applied;
      Eigen::VectorXd u = agent.nominal.u;
      u.head<2>() = agent.last_applied.vector();
      agent.nominal = rollout_nominal(
        agent.nominal.anchor, u, agent.nominal.origin_step, params.ts, params.vehicle_length);
    } else {
      res.applied = agent.nominal.control(0);
    }
    agent.last_applied = res.applied;
    agent.nominal = extend_nominal(agent.nominal, params.ts, params.vehicle_length);
    if (agent.last_dual.size() == 2 * t && t > 1) {
      // shift the bound multipliers with the controls
      const Eigen::VectorXd prev = agent.last_dual;
      agent.last_dual.head(2 * (t - 1)) = prev.tail(2 * (t - 1));
    }
    res.nominal = agent.nominal;
  }
  return results;
}

}  // namespace v2xcoop::mpc
