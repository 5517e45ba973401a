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
#include "v2xcoop/planner.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

using namespace v2xcoop;
using namespace v2xcoop::planner;
using scenario::MergeSchedule;
using scenario::ScenarioConfig;

namespace
{

// three-step horizon: slot 1 merges at step 3, slot 2 at step 2, slot 3 at step 1
Parameters short_horizon()
{
  Parameters p;
  p.planning_horizon = 3;
  p.merge_offset = 0.0;
  p.merge_spacing = 0.1;
  return p;
}

ScenarioConfig lane_config(
  const Parameters & params, const std::vector<std::pair<int, double>> & lane_and_s)
{
  ScenarioConfig sc;
  sc.params = params;
  const scenario::RampGeometry geom = scenario::RampGeometry::from(params);
  sc.lanes = {scenario::make_main_lane(geom, 500.0), scenario::make_ramp_lane(geom, 500.0)};
  int id = 0;
  for (const auto & [lane, s] : lane_and_s) {
    scenario::VehicleSpec v;
    v.id = id++;
    v.lane = lane;
    v.main_road = lane == 0;
    v.initial = {s, 15.0, 0.0};
    sc.vehicles.push_back(v);
  }
  return sc;
}

dynamics::PredictionMatrices prediction(const Parameters & p)
{
  return dynamics::build_prediction_matrices(
    dynamics::discretize_lag(p.lag_time, p.ts), p.planning_horizon);
}

// sum_j (G_j X_j - H_j) for arbitrary stacked states
Eigen::VectorXd coupled_residual(
  const std::vector<CouplingData> & cds, const std::vector<Eigen::VectorXd> & xs)
{
  Eigen::VectorXd r = Eigen::VectorXd::Zero(cds.front().h.size());
  for (std::size_t j = 0; j < cds.size(); ++j) {
    r += cds[j].g * xs[j] - cds[j].h;
  }
  return r;
}

PlannerConfig quick_config(int iterations)
{
  PlannerConfig c;
  c.iterations = iterations;
  c.snapshot_iterations = {};
  return c;
}

}  // namespace

TEST_SUITE("planner")
{
  TEST_CASE("single vehicle has no coupling")
  {
    const Parameters p;
    const ScenarioConfig sc = lane_config(p, {{0, 40.0}});
    const MergeSchedule ms = scenario::assign_merge_order(sc);
    const CouplingData cd = build_coupling(ms, prediction(p), sc.vehicles[0].initial, 0, p);
    CHECK(cd.degree == 0);
    CHECK(cd.g.norm() == 0.0);
    CHECK(cd.h.norm() == 0.0);
    CHECK(cd.a.norm() == 0.0);
    CHECK(cd.b.norm() == 0.0);
  }

  TEST_CASE("coupling expands to the gap on a short horizon")
  {
    const Parameters p = short_horizon();
    const auto pred = prediction(p);
    // main-road leader at 40 m, follower at 20 m
    const ScenarioConfig sc = lane_config(p, {{0, 20.0}, {0, 40.0}});
    const MergeSchedule ms = scenario::assign_merge_order(sc);
    REQUIRE(ms.slot == std::vector<int>{1, 2});
    std::vector<CouplingData> cds;
    for (int i = 0; i < 2; ++i) {
      cds.push_back(build_coupling(ms, pred, sc.vehicles[static_cast<std::size_t>(i)].initial, i, p));
    }

    // selector entries, row by row
    const int t = 3;
    for (int k = 1; k <= t; ++k) {
      const int row = coupling_row(0, k, t);
      CHECK(cds[0].g(row, 3 * (k - 1)) == -1.0);
      CHECK(cds[1].g(row, 3 * (k - 1)) == 1.0);
      CHECK(cds[0].h(row) == p.gap_distance);
      CHECK(cds[1].h(row) == 0.0);
      CHECK(cds[0].g.row(row).cwiseAbs().sum() == 1.0);
      CHECK(cds[1].g.row(row).cwiseAbs().sum() == 1.0);
      // the leader's own block stays empty
      const int lead = coupling_row(1, k, t);
      CHECK(cds[0].g.row(lead).norm() == 0.0);
      CHECK(cds[1].g.row(lead).norm() == 0.0);
      CHECK(cds[0].h(lead) == 0.0);
      CHECK(cds[1].h(lead) == 0.0);
    }

    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> unit(-50.0, 50.0);
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<Eigen::VectorXd> xs;
      for (int i = 0; i < 2; ++i) {
        xs.push_back(Eigen::VectorXd::NullaryExpr(3 * t, [&] { return unit(rng); }));
      }
      const Eigen::VectorXd r = coupled_residual(cds, xs);
      for (int k = 1; k <= t; ++k) {
        const double expected = xs[1](3 * (k - 1)) - xs[0](3 * (k - 1)) - p.gap_distance;
        CHECK(r(coupling_row(0, k, t)) == doctest::Approx(expected).epsilon(1e-14));
        CHECK(r(coupling_row(1, k, t)) == 0.0);
      }
    }
  }

  TEST_CASE("coupling switches front vehicle at the merge step")
  {
    const Parameters p = short_horizon();
    const auto pred = prediction(p);
    // main 90 (slot 3), ramp 75 (slot 2), main 60 (slot 1, merges at step 3)
    const ScenarioConfig sc = lane_config(p, {{0, 60.0}, {0, 90.0}, {1, 75.0}});
    const MergeSchedule ms = scenario::assign_merge_order(sc);
    REQUIRE(ms.slot == std::vector<int>{1, 3, 2});
    REQUIRE(ms.merge_step == std::vector<int>{3, 1, 2});
    std::vector<CouplingData> cds;
    for (int i = 0; i < 3; ++i) {
      cds.push_back(build_coupling(ms, pred, sc.vehicles[static_cast<std::size_t>(i)].initial, i, p));
    }
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unit(-50.0, 50.0);
    std::vector<Eigen::VectorXd> xs;
    for (int i = 0; i < 3; ++i) {
      xs.push_back(Eigen::VectorXd::NullaryExpr(9, [&] { return unit(rng); }));
    }
    const Eigen::VectorXd r = coupled_residual(cds, xs);
    const auto s = [&](int i, int k) { return xs[static_cast<std::size_t>(i)](3 * (k - 1)); };
    const double d = p.gap_distance;
    // vehicle 0 follows main 90 up to its merge step, then the ramp vehicle
    CHECK(r(coupling_row(0, 1, 3)) == doctest::Approx(s(1, 1) - s(0, 1) - d));
    CHECK(r(coupling_row(0, 3, 3)) == doctest::Approx(s(1, 3) - s(0, 3) - d));
    // ramp vehicle: no front vehicle on its lane before merging, main 90 after
    CHECK(r(coupling_row(2, 1, 3)) == 0.0);
    CHECK(r(coupling_row(2, 2, 3)) == 0.0);
    CHECK(r(coupling_row(2, 3, 3)) == doctest::Approx(s(1, 3) - s(2, 3) - d));
    // front-most vehicle is exempt
    for (int k = 1; k <= 3; ++k) {
      CHECK(r(coupling_row(1, k, 3)) == 0.0);
    }

    // d_S^1 appears once per constrained row
    Eigen::VectorXd h_sum = Eigen::VectorXd::Zero(9);
    for (const auto & cd : cds) {
      h_sum += cd.h;
    }
    for (int i = 0; i < 3; ++i) {
      for (int k = 1; k <= 3; ++k) {
        const double expected = coupling_row_active(ms, i, k) ? d : 0.0;
        CHECK(h_sum(coupling_row(i, k, 3)) == expected);
      }
    }

    // A = G Lambda and b = H - G Gamma x0
    for (int i = 0; i < 3; ++i) {
      const auto & cd = cds[static_cast<std::size_t>(i)];
      CHECK((cd.a - cd.g * pred.lambda).norm() == 0.0);
      const Eigen::VectorXd x0 = sc.vehicles[static_cast<std::size_t>(i)].initial.vector();
      CHECK((cd.b - (cd.h - cd.g * pred.gamma * x0)).norm() <= 1e-12);
      CHECK(cd.degree == 2);
    }
  }

  TEST_CASE("local constraints")
  {
    const Parameters p;
    const auto pred = prediction(p);
    const ScenarioConfig sc = lane_config(p, {{0, 50.0}});
    const MergeSchedule ms = scenario::assign_merge_order(sc);
    const LocalConstraints lc = build_local_constraints(ms, pred, sc.vehicles[0].initial, 0, p);
    const int t = p.planning_horizon;
    REQUIRE(lc.a.rows() == t + 2);
    CHECK((lc.a.topRows(t) - Eigen::MatrixXd::Identity(t, t)).norm() == 0.0);
    CHECK(lc.l(0) == -p.accel_max);
    CHECK(lc.u(0) == p.accel_max);

    // rows t, t+1 measure the terminal position and the speed sum before merging
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const Eigen::VectorXd u = Eigen::VectorXd::NullaryExpr(t, [&] { return unit(rng); });
    const Eigen::VectorXd x = pred.gamma * sc.vehicles[0].initial.vector() + pred.lambda * u;
    double vsum = 0.0;
    for (int k = 1; k <= ms.merge_step[0]; ++k) {
      vsum += x(3 * (k - 1) + 1);
    }
    const double shift_term = lc.l(t) - 150.0;
    const double shift_avg = lc.l(t + 1) - (p.l1 - 50.0) / p.ts;
    CHECK(lc.a.row(t).dot(u) - shift_term == doctest::Approx(x(3 * (t - 1))).epsilon(1e-12));
    CHECK(lc.a.row(t + 1).dot(u) - shift_avg == doctest::Approx(vsum).epsilon(1e-12));
    CHECK(lc.u(t) - lc.l(t) == doctest::Approx(p.lf));
    CHECK(lc.u(t + 1) - lc.l(t + 1) == doctest::Approx(p.l2 / p.ts));
  }

  TEST_CASE("polar projection")
  {
    const Eigen::Vector3d z = project_polar(Eigen::Vector3d(1.0, -2.0, 0.0));
    CHECK(z == Eigen::Vector3d(0.0, -2.0, 0.0));
  }

  TEST_CASE("consensus variance")
  {
    const Eigen::Vector3d y(1.0, 2.0, -3.0);
    const std::vector<Eigen::VectorXd> same{y, y, y};
    CHECK(consensus_variance(same) == 0.0);
    const Eigen::VectorXd e1 = Eigen::Vector2d(1.0, 0.0);
    const std::vector<Eigen::VectorXd> pm{e1, -e1};
    CHECK(consensus_variance(pm) == doctest::Approx(2.0));
    const std::vector<Eigen::VectorXd> abc{Eigen::Vector2d(1, 2), Eigen::Vector2d(-4, 0), Eigen::Vector2d(3, 3)};
    const std::vector<Eigen::VectorXd> cab{abc[2], abc[0], abc[1]};
    CHECK(consensus_variance(abc) == doctest::Approx(consensus_variance(cab)).epsilon(1e-15));
  }

  TEST_CASE("penalty schedule")
  {
    const PlannerConfig c;
    CHECK(c.phase_at(1).rho == 0.1);
    CHECK(c.phase_at(2).rho == 1.0);
    CHECK(c.phase_at(13).sigma == 1.0);
    CHECK(c.phase_at(14).rho == 10.0);
    CHECK(c.phase_at(24).rho == 100.0);
    CHECK(c.phase_at(200).sigma == 100.0);
    CHECK(c.iterations == 33);
    CHECK(c.snapshot_iterations == std::vector<int>{1, 13, 23, 33});

    PlannerConfig bad;
    bad.schedule = {{1, 5, 0.0, 1.0}};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad.schedule = {};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }

  TEST_CASE("local update keeps the accumulator at zero disagreement")
  {
    const Parameters p;
    const auto pred = prediction(p);
    const ScenarioConfig sc = scenario::make_scenario(scenario::ScenarioKind::ramp, 3, 2);
    const MergeSchedule ms = scenario::assign_merge_order(sc);
    PlannerAgent agent = make_agent(ms, pred, sc.vehicles[0].initial, 0, p, PlannerConfig{}.qp);
    agent.y.setConstant(-0.25);
    agent.p.setConstant(0.5);
    const Eigen::VectorXd p_before = agent.p;
    const std::vector<Eigen::VectorXd> peers{agent.y, agent.y};
    admm_local_update(agent, peers, 1.0, 1.0, 1);
    CHECK((agent.p - p_before).norm() == 0.0);
  }

  TEST_CASE("uncoupled agent ignores the multipliers")
  {
    const Parameters p;
    const auto pred = prediction(p);
    const ScenarioConfig sc = lane_config(p, {{0, 60.0}});
    const MergeSchedule ms = scenario::assign_merge_order(sc);
    const qp::QpSettings qs = tight_settings();
    PlannerAgent a = make_agent(ms, pred, sc.vehicles[0].initial, 0, p, qs);
    PlannerAgent b = make_agent(ms, pred, sc.vehicles[0].initial, 0, p, qs);
    b.y.setConstant(-3.0);
    b.z.setConstant(-1.0);
    admm_local_update(a, {}, 1.0, 1.0, 1);
    admm_local_update(b, {}, 10.0, 0.5, 7);
    CHECK((a.u - b.u).lpNorm<Eigen::Infinity>() <= 1e-7);

    // min |u|^2 with the box rows inactive: enumerate free/lower/upper for
    // the terminal and average-speed rows, u = M' (M M')^-1 c
    const int t = p.planning_horizon;
    Eigen::VectorXd u_cf;
    double best = std::numeric_limits<double>::infinity();
    for (int pt = 0; pt < 3; ++pt) {
      for (int pv = 0; pv < 3; ++pv) {
        std::vector<int> rows_on;
        std::vector<double> vals;
        const int pattern[2] = {pt, pv};
        for (int q = 0; q < 2; ++q) {
          if (pattern[q] != 0) {
            rows_on.push_back(t + q);
            vals.push_back(pattern[q] == 1 ? a.local.l(t + q) : a.local.u(t + q));
          }
        }
        Eigen::VectorXd cand = Eigen::VectorXd::Zero(t);
        if (!rows_on.empty()) {
          Eigen::MatrixXd m(rows_on.size(), t);
          Eigen::VectorXd c(rows_on.size());
          for (std::size_t q = 0; q < rows_on.size(); ++q) {
            m.row(static_cast<Eigen::Index>(q)) = a.local.a.row(rows_on[q]);
            c(static_cast<Eigen::Index>(q)) = vals[q];
          }
          cand = m.transpose() * (m * m.transpose()).ldlt().solve(c);
        }
        const Eigen::VectorXd r = a.local.a * cand;
        bool feasible = true;
        for (int q = t; q < t + 2; ++q) {
          feasible = feasible && r(q) >= a.local.l(q) - 1e-9 && r(q) <= a.local.u(q) + 1e-9;
        }
        if (feasible && cand.squaredNorm() < best) {
          best = cand.squaredNorm();
          u_cf = cand;
        }
      }
    }
    REQUIRE(std::isfinite(best));
    REQUIRE(best > 0.0);
    const Eigen::VectorXd rows = a.local.a * u_cf;
    for (int r = 0; r < t; ++r) {
      REQUIRE(rows(r) > a.local.l(r));
      REQUIRE(rows(r) < a.local.u(r));
    }
    CHECK((a.u - u_cf).lpNorm<Eigen::Infinity>() <= 1e-6);
  }

  TEST_CASE("cone iterates stay nonpositive")
  {
    const Parameters p;
    const auto pred = prediction(p);
    const ScenarioConfig sc = scenario::make_scenario(scenario::ScenarioKind::ramp, 3, 9);
    const MergeSchedule ms = scenario::assign_merge_order(sc);
    const PlannerConfig config;
    std::vector<PlannerAgent> agents;
    for (int i = 0; i < 3; ++i) {
      agents.push_back(make_agent(ms, pred, sc.vehicles[static_cast<std::size_t>(i)].initial, i, p, config.qp));
    }
    std::vector<double> variance;
    for (int k = 1; k <= 33; ++k) {
      const PenaltyPhase ph = config.phase_at(k);
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
        admm_local_update(agents[i], peers, ph.rho, ph.sigma, k);
        CHECK(agents[i].z.maxCoeff() <= 0.0);
      }
      ys.clear();
      for (const auto & a : agents) {
        ys.push_back(a.y);
      }
      variance.push_back(consensus_variance(ys));
    }
    // same iterates as the bus-driven planner
    PlannerConfig c33 = config;
    c33.snapshot_iterations = {};
    const PlanResult plan = plan_distributed(sc, c33);
    REQUIRE(plan.variance.size() == variance.size());
    for (std::size_t k = 0; k < variance.size(); ++k) {
      CHECK(plan.variance[k] == doctest::Approx(variance[k]).epsilon(1e-12));
    }
    for (int i = 0; i < 3; ++i) {
      CHECK((plan.vehicles[static_cast<std::size_t>(i)].u - agents[static_cast<std::size_t>(i)].u).norm() <= 1e-12);
    }
  }

  TEST_CASE("single-vehicle plan")
  {
    const ScenarioConfig sc = scenario::make_scenario(scenario::ScenarioKind::ramp, 1, 4);
    const PlanResult dist = plan_distributed(sc, quick_config(33));
    REQUIRE(dist.variance.size() == 33);
    for (double v : dist.variance) {
      CHECK(v == 0.0);
    }
    const PlanResult cent = plan_centralized(sc);
    CHECK(dist.objective == doctest::Approx(cent.objective).epsilon(1e-6));
    CHECK((dist.vehicles[0].u - cent.vehicles[0].u).lpNorm<Eigen::Infinity>() <= 1e-5);
    const scenario::Interval slot =
      scenario::terminal_bounds(dist.schedule, scenario::RampGeometry::from(sc.params), 0);
    CHECK(dist.vehicles[0].s.back() >= slot.lower - 1e-4);
    CHECK(dist.vehicles[0].s.back() <= slot.upper + 1e-4);
  }

  TEST_CASE("centralized oracle")
  {
    const ScenarioConfig sc = scenario::make_scenario(scenario::ScenarioKind::ramp, 4, 12);
    const PlanResult with = plan_centralized(sc);
    const PlanResult without = plan_centralized(sc, tight_settings(), false);
    CHECK(min_gap_residual(with, sc.params) >= -1e-4);
    CHECK(without.objective <= with.objective + 1e-9);
  }

  TEST_CASE("distributed plan honours the local constraints")
  {
    const ScenarioConfig sc = scenario::make_scenario(scenario::ScenarioKind::ramp, 3, 21);
    PlannerConfig c = quick_config(33);
    c.snapshot_iterations = {1, 13, 23, 33};
    const PlanResult plan = plan_distributed(sc, c);
    const scenario::RampGeometry geom = scenario::RampGeometry::from(sc.params);
    for (int i = 0; i < 3; ++i) {
      const auto & v = plan.vehicles[static_cast<std::size_t>(i)];
      const scenario::Interval slot = scenario::terminal_bounds(plan.schedule, geom, i);
      CHECK(v.s.back() >= slot.lower - 1e-3);
      CHECK(v.s.back() <= slot.upper + 1e-3);
      const double s0 = sc.vehicles[static_cast<std::size_t>(i)].initial.s;
      const scenario::Interval avg = scenario::avg_speed_bounds(s0, geom, sc.params.ts);
      double vsum = 0.0;
      for (int k = 1; k <= plan.schedule.merge_step[static_cast<std::size_t>(i)]; ++k) {
        vsum += v.x(3 * (k - 1) + 1);
      }
      CHECK(vsum >= avg.lower - 1e-3);
      CHECK(vsum <= avg.upper + 1e-3);
      CHECK(v.u.cwiseAbs().maxCoeff() <= sc.params.accel_max + 1e-6);
      CHECK(v.reference.size() == sc.params.planning_horizon + 1);
    }
    REQUIRE(plan.snapshots.size() == 4);
    CHECK(plan.snapshots[3].iteration == 33);
    CHECK(plan.snapshots[3].s[0] == plan.vehicles[0].s);
  }

  TEST_CASE("relabelling vehicles permutes the plan")
  {
    const ScenarioConfig sc = scenario::make_scenario(scenario::ScenarioKind::ramp, 3, 5);
    ScenarioConfig swapped = sc;
    std::reverse(swapped.vehicles.begin(), swapped.vehicles.end());
    const PlanResult a = plan_distributed(sc, quick_config(20));
    const PlanResult b = plan_distributed(swapped, quick_config(20));
    for (int i = 0; i < 3; ++i) {
      const auto & ua = a.vehicles[static_cast<std::size_t>(i)].u;
      const auto & ub = b.vehicles[static_cast<std::size_t>(2 - i)].u;
      CHECK((ua - ub).lpNorm<Eigen::Infinity>() <= 1e-6);
    }
    for (std::size_t k = 0; k < a.variance.size(); ++k) {
      CHECK(a.variance[k] == doctest::Approx(b.variance[k]).epsilon(1e-6));
    }
  }

  TEST_CASE("planner talks over a caller-supplied bus")
  {
    const ScenarioConfig sc = scenario::make_scenario(scenario::ScenarioKind::ramp, 3, 5);
    bus::V2xBus link({0, 1, 2});
    plan_distributed(sc, quick_config(4), &link);
    // one coordinate round plus one round per iteration
    CHECK(link.round() == 5);
    CHECK(link.messages_sent() == 15);

    bus::V2xBus wrong({0, 1});
    CHECK_THROWS_AS(plan_distributed(sc, quick_config(4), &wrong), ConfigError);
  }

  TEST_CASE("parallel agents give identical plans")
  {
    const ScenarioConfig sc = scenario::make_scenario(scenario::ScenarioKind::ramp, 4, 8);
    PlannerConfig c = quick_config(10);
    const PlanResult serial = plan_distributed(sc, c);
    c.threads = 4;
    const PlanResult threaded = plan_distributed(sc, c);
    CHECK(serial.variance == threaded.variance);
    for (std::size_t i = 0; i < serial.vehicles.size(); ++i) {
      CHECK(serial.vehicles[i].u == threaded.vehicles[i].u);
    }
  }
}
