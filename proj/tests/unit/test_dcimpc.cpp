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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

using namespace v2xcoop;
using dynamics::BicycleControl;
using dynamics::BicycleState;

namespace
{

constexpr double kHalfPi = 0.5 * std::numbers::pi;

scenario::ReferenceTrajectory2D straight_reference(
  const BicycleState & start, int steps, double ts)
{
  scenario::ReferenceTrajectory2D ref;
  ref.ts = ts;
  for (int k = 0; k <= steps; ++k) {
    BicycleState s = start;
    s.x += k * ts * start.v * std::cos(start.phi);
    s.y += k * ts * start.v * std::sin(start.phi);
    ref.states.push_back(s);
  }
  return ref;
}

dynamics::StackedLinearDynamics stack_at(const mpc::NominalTrajectory & nom, const Parameters & p)
{
  std::vector<dynamics::LinearizedStep> steps;
  for (int l = 0; l < nom.horizon(); ++l) {
    steps.push_back(
      dynamics::linearize_bicycle(nom.state(l), nom.control(l), p.ts, p.vehicle_length));
  }
  return dynamics::stack_linear_dynamics(steps);
}

// J(u) evaluated directly from the prediction, independent of P and q.
double direct_cost(
  const Eigen::VectorXd & u, const mpc::NominalTrajectory & nom,
  const dynamics::StackedLinearDynamics & st, const mpc::StackedWeights & sw,
  const std::vector<mpc::SafetyLinearization> & safety, double alpha,
  const Eigen::VectorXd & ref)
{
  const Eigen::VectorXd x = st.predict(nom.anchor.vector(), u);
  const Eigen::VectorXd e = x - ref;
  double j = e.dot(sw.bar_q_x * e) + u.dot(sw.bar_q_u * u) + (sw.bar_m_f * x).squaredNorm();
  for (const auto & s : safety) {
    if (s.active) {
      j += alpha * (s.k * x + s.b).squaredNorm();
    }
  }
  return j;
}

double min_circle_distance(const Eigen::VectorXd & xi, const Eigen::VectorXd & xj, double d_hk)
{
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index l = 0; l < xi.size() / 4; ++l) {
    const auto offs = mpc::circle_pair_offsets(
      BicycleState::from_vector(xi.segment<4>(4 * l)),
      BicycleState::from_vector(xj.segment<4>(4 * l)), d_hk);
    for (const auto & o : offs) {
      best = std::min(best, o.norm());
    }
  }
  return best;
}

Eigen::VectorXd random_nominal_states(std::mt19937_64 & rng, int t, double spread)
{
  std::uniform_real_distribution<double> pos(-spread, spread);
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> spd(0.0, 10.0);
  Eigen::VectorXd x(4 * t);
  for (int l = 0; l < t; ++l) {
    x.segment<4>(4 * l) << pos(rng), pos(rng), ang(rng), spd(rng);
  }
  return x;
}

}  // namespace

TEST_SUITE("dcimpc")
{
  TEST_CASE("circle offsets for coincident vehicles")
  {
    const double d = 0.9;
    const BicycleState s{1.0, 2.0, 0.0, 5.0};
    const auto offs = mpc::circle_pair_offsets(s, s, d);
    CHECK(offs[0].norm() == doctest::Approx(0.0));
    CHECK(offs[1].x() == doctest::Approx(2.0 * d));
    CHECK(offs[1].y() == doctest::Approx(0.0));
    CHECK(offs[2].x() == doctest::Approx(-2.0 * d));
    CHECK(offs[3].norm() == doctest::Approx(0.0));
  }

  TEST_CASE("circle offsets are translation invariant")
  {
    const BicycleState a{1.0, 2.0, 0.3, 5.0};
    const BicycleState b{-0.5, 4.0, -1.1, 3.0};
    BicycleState a2 = a;
    BicycleState b2 = b;
    a2.x += 17.0;
    a2.y -= 3.0;
    b2.x += 17.0;
    b2.y -= 3.0;
    const auto o1 = mpc::circle_pair_offsets(a, b, 0.9);
    const auto o2 = mpc::circle_pair_offsets(a2, b2, 0.9);
    for (int n = 0; n < 4; ++n) {
      CHECK((o1[n] - o2[n]).norm() <= 1e-12);
    }
  }

  TEST_CASE("circle offset for the default vehicle")
  {
    CHECK(Parameters{}.circle_offset() == doctest::Approx(0.9));
  }

  TEST_CASE("clearance shortfall examples")
  {
    const double d = 0.9;
    const BicycleState a{0.0, 0.0, kHalfPi, 5.0};
    const BicycleState far{0.0, 10.0 + 2.0 * d, kHalfPi, 5.0};
    for (int p : {1, -1}) {
      for (int q : {1, -1}) {
        CHECK(mpc::tilde_d(a, far, p, q, d, 2.5) == 0.0);
      }
    }
    CHECK(mpc::tilde_d(a, a, 1, 1, d, 2.5) == doctest::Approx(-2.5));
    // front circle of a against rear circle of b, exactly D_S apart
    const BicycleState b{0.0, 2.5 + 2.0 * d, kHalfPi, 5.0};
    CHECK(mpc::tilde_d(a, b, 1, -1, d, 2.5) == doctest::Approx(0.0).epsilon(1e-12));
  }

  TEST_CASE("far-apart nominals give a zero linearization")
  {
    const int t = 5;
    Eigen::VectorXd xi(4 * t);
    Eigen::VectorXd xj(4 * t);
    for (int l = 0; l < t; ++l) {
      xi.segment<4>(4 * l) << 0.0, l * 1.0, kHalfPi, 10.0;
      xj.segment<4>(4 * l) << 20.0, l * 1.0, kHalfPi, 10.0;
    }
    const auto lin = mpc::safety_linearization(xi, xj, 0.9, 2.5);
    CHECK_FALSE(lin.active);
    CHECK(lin.k.isZero(0.0));
    CHECK(lin.b.isZero(0.0));
    CHECK_THROWS_AS(mpc::safety_linearization(xi, xj.head(8), 0.9, 2.5), ConfigError);
  }

  TEST_CASE("safety Jacobian matches finite differences away from the kink")
  {
    std::mt19937_64 rng(31);
    const double d = 0.9;
    const double d_s = 2.5;
    const double h = 1e-6;
    int checked = 0;
    for (int trial = 0; trial < 300; ++trial) {
      const int t = 3;
      const Eigen::VectorXd xi = random_nominal_states(rng, t, 1.5);
      const Eigen::VectorXd xj = random_nominal_states(rng, t, 1.5);
      // skip samples near the kink or at coincident centers
      bool near_kink = false;
      for (Eigen::Index l = 0; l < t; ++l) {
        const auto offs = mpc::circle_pair_offsets(
          BicycleState::from_vector(xi.segment<4>(4 * l)),
          BicycleState::from_vector(xj.segment<4>(4 * l)), d);
        for (const auto & o : offs) {
          near_kink = near_kink || std::abs(o.norm() - d_s) < 1e-3 || o.norm() < 1e-3;
        }
      }
      if (near_kink) {
        continue;
      }
      const auto lin = mpc::safety_linearization(xi, xj, d, d_s);
      Eigen::MatrixXd fd(4 * t, 4 * t);
      for (int c = 0; c < 4 * t; ++c) {
        Eigen::VectorXd xp = xi;
        Eigen::VectorXd xm = xi;
        xp(c) += h;
        xm(c) -= h;
        fd.col(c) =
          (mpc::safety_residual(xp, xj, d, d_s) - mpc::safety_residual(xm, xj, d, d_s)) / (2 * h);
      }
      for (int r = 0; r < 4 * t; ++r) {
        for (int c = 0; c < 4 * t; ++c) {
          CHECK(std::abs(fd(r, c) - lin.k(r, c)) <= 1e-5 * std::max(1.0, std::abs(fd(r, c))));
        }
      }
      ++checked;
    }
    CHECK(checked > 100);
  }

  TEST_CASE("the linearization reproduces the residual at the nominal")
  {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      const Eigen::VectorXd xi = random_nominal_states(rng, 4, 2.0);
      const Eigen::VectorXd xj = random_nominal_states(rng, 4, 2.0);
      const auto lin = mpc::safety_linearization(xi, xj, 0.9, 2.5);
      CHECK((lin.k * xi + lin.b - mpc::safety_residual(xi, xj, 0.9, 2.5)).norm() <= 1e-12);
    }
  }

  TEST_CASE("boundary contact uses slope one half")
  {
    Eigen::VectorXd xi(4);
    Eigen::VectorXd xj(4);
    // only the (1, -1) pair touches: its offset is exactly (-2.5, 0)
    xi << 0.0, 0.0, 0.0, 5.0;
    xj << 3.5, 0.0, 0.0, 5.0;
    const auto lin = mpc::safety_linearization(xi, xj, 0.5, 2.5);
    CHECK(lin.active);
    CHECK(lin.k(1, 0) == doctest::Approx(-0.5));
    CHECK(lin.k(1, 1) == doctest::Approx(0.0));
    CHECK(lin.k.row(0).isZero(0.0));
    CHECK(lin.k.row(2).isZero(0.0));
    CHECK(lin.k.row(3).isZero(0.0));
  }

  TEST_CASE("stacked weights structure")
  {
    Parameters p;
    const auto w = mpc::CostWeights::from(p);
    const auto sw = mpc::stack_weights(w, 4);
    CHECK(sw.bar_q_x.rows() == 16);
    CHECK(sw.bar_q_u.rows() == 8);
    CHECK(sw.bar_m_f.rows() == 6);
    CHECK(sw.bar_q_x(0, 0) == doctest::Approx(1.0));
    CHECK(sw.bar_q_x(12, 12) == doctest::Approx(p.k_x));
    CHECK(sw.bar_q_x(2, 2) == 0.0);
    CHECK(sw.bar_q_u(7, 7) == doctest::Approx(p.k_u * p.q_u(1)));
    CHECK(sw.bar_m_f.block<2, 4>(0, 0) == -p.m_f);
    CHECK(sw.bar_m_f.block<2, 4>(0, 4) == p.m_f);
    CHECK(sw.bar_m_f.block<2, 4>(0, 8).isZero(0.0));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sw.bar_q_u);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }

  TEST_CASE("extend_nominal examples")
  {
    const double ts = 0.1;
    const double len = 3.5;
    const BicycleState rest{1.0, 2.0, 0.4, 0.0};
    const auto still = mpc::constant_velocity_nominal(rest, 5, 0, ts, len);
    const auto ext = mpc::extend_nominal(still, ts, len);
    CHECK((ext.state(5).vector() - still.state(5).vector()).norm() <= 1e-12);
    CHECK(ext.origin_step == 1);

    const BicycleState moving{0.0, 0.0, kHalfPi, 8.0};
    const auto line = mpc::constant_velocity_nominal(moving, 5, 0, ts, len);
    const auto ext2 = mpc::extend_nominal(line, ts, len);
    CHECK(ext2.state(5).y == doctest::Approx(line.state(5).y + 8.0 * ts));
    CHECK(ext2.state(5).x == doctest::Approx(0.0).epsilon(1e-12));

    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> ua(-3.0, 3.0);
    std::uniform_real_distribution<double> us(-0.4, 0.4);
    Eigen::VectorXd u(2 * 8);
    for (int l = 0; l < 8; ++l) {
      u(2 * l) = ua(rng);
      u(2 * l + 1) = us(rng);
    }
    const auto nom = mpc::rollout_nominal(BicycleState{0.0, 0.0, 0.2, 6.0}, u, 3, ts, len);
    const auto e = mpc::extend_nominal(nom, ts, len);
    CHECK(e.control(7).vector() == nom.control(7).vector());
    const auto re = mpc::rollout_nominal(e.anchor, e.u, e.origin_step, ts, len);
    CHECK((re.x - e.x).cwiseAbs().maxCoeff() <= 1e-9);
  }

  TEST_CASE("assembled Hessian without neighbours")
  {
    Parameters p;
    p.alpha = 0.0;
    const int t = p.control_horizon;
    const auto w = mpc::CostWeights::from(p);
    const auto sw = mpc::stack_weights(w, t);
    const BicycleState s0{0.0, 0.0, kHalfPi, 10.0};
    const auto nom = mpc::constant_velocity_nominal(s0, t, 0, p.ts, p.vehicle_length);
    const auto st = stack_at(nom, p);
    const auto ref = straight_reference(s0, t + 1, p.ts);
    const Eigen::VectorXd win = mpc::reference_window(ref, 0, t);
    const auto qp = mpc::assemble_qp(nom.anchor, nom, {}, win, w, sw, st, p);
    const Eigen::MatrixXd expected =
      2.0 * (st.b_stack.transpose() * (sw.bar_q_x + sw.bar_m_f.transpose() * sw.bar_m_f) *
               st.b_stack +
             sw.bar_q_u);
    CHECK((qp.problem.p - expected).cwiseAbs().maxCoeff() <= 1e-9 * expected.cwiseAbs().maxCoeff());
    const Eigen::MatrixXd diff = 0.5 * qp.problem.p - sw.bar_q_u;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(diff);
    CHECK(es.eigenvalues().minCoeff() >= -1e-9 * diff.norm());
  }

  TEST_CASE("assembled gradient and objective match the direct cost")
  {
    Parameters p;
    p.control_horizon = 10;
    const int t = p.control_horizon;
    const auto w = mpc::CostWeights::from(p);
    const auto sw = mpc::stack_weights(w, t);
    const BicycleState s0{0.0, 0.0, kHalfPi, 10.0};
    Eigen::VectorXd u0 = Eigen::VectorXd::Zero(2 * t);
    for (int l = 0; l < t; ++l) {
      u0(2 * l) = 0.5;
      u0(2 * l + 1) = 0.05;
    }
    const auto nom = mpc::rollout_nominal(s0, u0, 0, p.ts, p.vehicle_length);
    const auto st = stack_at(nom, p);
    const auto ref = straight_reference(s0, t + 1, p.ts);
    const Eigen::VectorXd win = mpc::reference_window(ref, 0, t);
    // a neighbour driving alongside, close enough to engage the penalty
    const auto other = mpc::constant_velocity_nominal(
      BicycleState{1.2, 2.0, kHalfPi, 10.0}, t, 0, p.ts, p.vehicle_length);
    const std::vector<Eigen::VectorXd> neighbors{other.x};
    const auto qp = mpc::assemble_qp(nom.anchor, nom, neighbors, win, w, sw, st, p);
    REQUIRE(qp.safety.size() == 1);
    CHECK(qp.safety[0].active);

    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> du(-1.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
      Eigen::VectorXd u(2 * t);
      for (Eigen::Index i = 0; i < u.size(); ++i) {
        u(i) = du(rng);
      }
      const double j = direct_cost(u, nom, st, sw, qp.safety, w.alpha, win);
      CHECK(qp.objective(u) == doctest::Approx(j).epsilon(1e-9));
      const Eigen::VectorXd grad = qp.problem.p * u + qp.problem.q;
      Eigen::VectorXd fd(2 * t);
      const double h = 1e-5;
      for (int i = 0; i < 2 * t; ++i) {
        Eigen::VectorXd up = u;
        Eigen::VectorXd um = u;
        up(i) += h;
        um(i) -= h;
        fd(i) = (direct_cost(up, nom, st, sw, qp.safety, w.alpha, win) -
                 direct_cost(um, nom, st, sw, qp.safety, w.alpha, win)) /
                (2 * h);
      }
      CHECK((grad - fd).norm() <= 1e-6 * std::max(1.0, fd.norm()));
    }
  }

  TEST_CASE("inactive safety leaves the QP unchanged")
  {
    Parameters p;
    const int t = p.control_horizon;
    const auto w = mpc::CostWeights::from(p);
    const auto sw = mpc::stack_weights(w, t);
    const BicycleState s0{0.0, 0.0, kHalfPi, 10.0};
    const auto nom = mpc::constant_velocity_nominal(s0, t, 0, p.ts, p.vehicle_length);
    const auto st = stack_at(nom, p);
    const Eigen::VectorXd win = mpc::reference_window(straight_reference(s0, t + 1, p.ts), 0, t);
    const auto far = mpc::constant_velocity_nominal(
      BicycleState{30.0, 0.0, kHalfPi, 10.0}, t, 0, p.ts, p.vehicle_length);
    const std::vector<Eigen::VectorXd> neighbors{far.x};
    const auto a = mpc::assemble_qp(nom.anchor, nom, {}, win, w, sw, st, p);
    const auto b = mpc::assemble_qp(nom.anchor, nom, neighbors, win, w, sw, st, p);
    CHECK(a.problem.p == b.problem.p);
    CHECK(a.problem.q == b.problem.q);
  }

  TEST_CASE("assemble_qp rejects dimension mismatches")
  {
    Parameters p;
    const int t = p.control_horizon;
    const auto w = mpc::CostWeights::from(p);
    const auto sw = mpc::stack_weights(w, t);
    const BicycleState s0{0.0, 0.0, kHalfPi, 10.0};
    const auto nom = mpc::constant_velocity_nominal(s0, t, 0, p.ts, p.vehicle_length);
    const auto st = stack_at(nom, p);
    const Eigen::VectorXd win = mpc::reference_window(straight_reference(s0, t + 1, p.ts), 0, t);
    CHECK_THROWS_AS(
      mpc::assemble_qp(nom.anchor, nom, {}, win.head(8), w, sw, st, p), ConfigError);
    const std::vector<Eigen::VectorXd> bad{Eigen::VectorXd::Zero(8)};
    CHECK_THROWS_AS(mpc::assemble_qp(nom.anchor, nom, bad, win, w, sw, st, p), ConfigError);
  }

  TEST_CASE("an isolated vehicle on its reference stays on it")
  {
    Parameters p;
    p.m_f.setZero();
    const BicycleState s0{0.0, 0.0, kHalfPi, 10.0};
    const auto ref = straight_reference(s0, 200, p.ts);
    mpc::MpcSettings ms;
    auto agent = mpc::make_dcimpc_agent(0, s0, &ref, p, ms);
    bus::V2xBus bus({0});
    mpc::DcimpcAgent * agents[] = {&agent};
    const auto w = mpc::CostWeights::from(p);
    for (int k = 0; k < 5; ++k) {
      const auto res = mpc::dcimpc_step(agents, bus, w, p, ms, k);
      REQUIRE(res.size() == 1);
      CHECK(std::abs(res[0].applied.a) <= 1e-3);
      CHECK(std::abs(res[0].applied.psi) <= 1e-3);
      CHECK_FALSE(res[0].fail_safe);
      CHECK(res[0].inner.back().objective <= 1e-6);
    }
  }

  TEST_CASE("head-on vehicles separate")
  {
    Parameters p;
    const int t = p.control_horizon;
    const BicycleState a0{0.0, 0.0, kHalfPi, 5.0};
    const BicycleState b0{0.3, 20.0, -kHalfPi, 5.0};
    const auto ra = straight_reference(a0, 200, p.ts);
    const auto rb = straight_reference(b0, 200, p.ts);
    mpc::MpcSettings ms;
    auto a = mpc::make_dcimpc_agent(0, a0, &ra, p, ms);
    auto b = mpc::make_dcimpc_agent(1, b0, &rb, p, ms);
    const double before = min_circle_distance(a.nominal.x, b.nominal.x, p.circle_offset());
    CHECK(before < p.safety_distance);
    bus::V2xBus bus({0, 1});
    mpc::DcimpcAgent * agents[] = {&a, &b};
    const auto res = mpc::dcimpc_step(agents, bus, mpc::CostWeights::from(p), p, ms, 0);
    REQUIRE(res.size() == 2);
    CHECK(res[0].nominal.horizon() == t);
    const double after = min_circle_distance(a.nominal.x, b.nominal.x, p.circle_offset());
    CHECK(after >= p.safety_distance - 0.2);
  }

  TEST_CASE("junction run: warm start, bounds, Hessian and inner progress")
  {
    Parameters p;
    const auto sc = scenario::make_scenario(scenario::ScenarioKind::t_junction, 3, 7, p);
    const int t = p.control_horizon;
    const int steps = 60;
    std::vector<scenario::ReferenceTrajectory2D> refs;
    for (const auto & v : sc.vehicles) {
      refs.push_back(scenario::constant_speed_reference(sc, v, steps + t + 1));
    }
    mpc::MpcSettings ms;
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
    const auto sw = mpc::stack_weights(w, t);
    const double min_eig_qu = 2.0 * p.q_u.minCoeff();

    int compared = 0;
    int warm_wins = 0;
    int monotone = 0;
    int multi = 0;
    for (int k = 0; k < steps; ++k) {
      for (std::size_t i = 0; i < agents.size(); ++i) {
        const auto & ag = agents[i];
        std::vector<Eigen::VectorXd> nb;
        for (std::size_t j = 0; j < agents.size(); ++j) {
          if (j != i) {
            nb.push_back(agents[j].nominal.x);
          }
        }
        const auto st = stack_at(ag.nominal, p);
        auto qp = mpc::assemble_qp(
          ag.nominal.anchor, ag.nominal, nb, mpc::reference_window(refs[i], k, t), w, sw, st, p);
        if (k % 10 == 0) {
          Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(qp.problem.p);
          CHECK(es.eigenvalues().minCoeff() >= min_eig_qu * (1.0 - 1e-9));
        }
        mpc::add_proximal_term(qp, ag.nominal.u, ms.proximal_weight);
        qp::QpSolver warm_solver(ms.qp);
        qp::QpSolver cold_solver(ms.qp);
        const qp::WarmStart ws{ag.nominal.u, ag.last_dual};
        const auto sw_sol = warm_solver.solve(qp.problem, &ws);
        const auto sc_sol = cold_solver.solve(qp.problem, nullptr);
        ++compared;
        if (sw_sol.iterations <= sc_sol.iterations) {
          ++warm_wins;
        }
      }
      const auto res = mpc::dcimpc_step(ptrs, bus, w, p, ms, k);
      for (const auto & r : res) {
        CHECK(std::abs(r.applied.a) <= p.accel_max);
        CHECK(std::abs(r.applied.psi) <= p.steer_max);
        CHECK_FALSE(r.fail_safe);
        REQUIRE(r.inner.size() == static_cast<std::size_t>(ms.inner_iterations));
        ++multi;
        bool ok = true;
        for (std::size_t n = 1; n < r.inner.size(); ++n) {
          ok = ok && r.inner[n].objective <= r.inner[n - 1].objective * (1.0 + 1e-6) + 1e-9;
        }
        monotone += ok ? 1 : 0;
      }
    }
    CHECK(warm_wins >= 0.9 * compared);
    CHECK(monotone >= 0.95 * multi);
  }

  TEST_CASE("solver failure holds the previous control")
  {
    Parameters p;
    const BicycleState s0{0.0, 0.0, kHalfPi, 10.0};
    auto ref = straight_reference(s0, 200, p.ts);
    mpc::MpcSettings ms;
    auto agent = mpc::make_dcimpc_agent(0, s0, &ref, p, ms);
    bus::V2xBus bus({0});
    mpc::DcimpcAgent * agents[] = {&agent};
    const auto w = mpc::CostWeights::from(p);
    const auto first = mpc::dcimpc_step(agents, bus, w, p, ms, 0);
    CHECK_FALSE(first[0].fail_safe);
    for (auto & s : ref.states) {
      s.y = std::numeric_limits<double>::quiet_NaN();
    }
    const auto second = mpc::dcimpc_step(agents, bus, w, p, ms, 1);
    CHECK(second[0].fail_safe);
    CHECK(second[0].applied.vector() == first[0].applied.vector());
    CHECK(second[0].nominal.x.allFinite());
  }

  TEST_CASE("dcimpc_step rejects agents without a reference")
  {
    Parameters p;
    mpc::MpcSettings ms;
    auto agent = mpc::make_dcimpc_agent(0, BicycleState{}, nullptr, p, ms);
    bus::V2xBus bus({0});
    mpc::DcimpcAgent * agents[] = {&agent};
    CHECK_THROWS_AS(
      mpc::dcimpc_step(agents, bus, mpc::CostWeights::from(p), p, ms, 0), ConfigError);
  }
}
