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

#include "v2xcoop/qp_solver.hpp"

#include "v2xcoop/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace v2xcoop::qp
{

namespace
{

constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;
constexpr double kRhoEqualityScale = 1e3;
constexpr double kScalingMin = 1e-4;
constexpr double kScalingMax = 1e4;
constexpr double kDivTiny = 1e-30;

double inf_norm(const Eigen::VectorXd & v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

bool is_lower_inf(double l) { return l <= -kInfinity; }
bool is_upper_inf(double u) { return u >= kInfinity; }

Eigen::VectorXd clamp(
  const Eigen::VectorXd & v, const Eigen::VectorXd & l, const Eigen::VectorXd & u)
{
  return v.cwiseMax(l).cwiseMin(u);
}

}  // namespace

const char * to_string(Status status)
{
  switch (status) {
    case Status::solved:
      return "solved";
    case Status::max_iter:
      return "max_iter";
    case Status::primal_infeasible:
      return "primal_infeasible";
  }
  return "unknown";
}

void QpProblem::validate() const
{
  const auto n = q.size();
  const auto m = l.size();
  if (p.rows() != n || p.cols() != n) {
    throw SolverError("QpProblem: P must be n x n with n = size(q)");
  }
  if (a.cols() != n || a.rows() != m || u.size() != m) {
    throw SolverError("QpProblem: A, l, u dimensions are inconsistent");
  }
  if (n > 0 && (p - p.transpose()).lpNorm<Eigen::Infinity>() > 1e-10 * std::max(1.0, p.lpNorm<Eigen::Infinity>())) {
    throw SolverError("QpProblem: P is not symmetric");
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(l(i) <= u(i))) {
      throw SolverError("QpProblem: l > u at row " + std::to_string(i));
    }
  }
  if (!p.allFinite() || !q.allFinite() || !a.allFinite()) {
    throw SolverError("QpProblem: non-finite problem data");
  }
}

QpSolver::QpSolver(QpSettings settings) : settings_(settings), rho_(settings.rho) {}

void QpSolver::setup_matrices(const QpProblem & problem)
{
  const auto n = problem.q.size();
  const auto m = problem.l.size();
  problem_.p = problem.p;
  problem_.a = problem.a;

  // ruiz equilibration of [P A'; A 0]
  d_ = Eigen::VectorXd::Ones(n);
  e_ = Eigen::VectorXd::Ones(m);
  Eigen::MatrixXd p_s = problem.p;
  Eigen::MatrixXd a_s = problem.a;
  for (int it = 0; it < settings_.scaling_iterations; ++it) {
    Eigen::VectorXd dd(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      double col = p_s.col(j).lpNorm<Eigen::Infinity>();
      if (m > 0) {
        col = std::max(col, a_s.col(j).lpNorm<Eigen::Infinity>());
      }
      col = std::clamp(col, kScalingMin, kScalingMax);
      dd(j) = 1.0 / std::sqrt(col);
    }
    Eigen::VectorXd ee(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double row = std::clamp(a_s.row(i).lpNorm<Eigen::Infinity>(), kScalingMin, kScalingMax);
      ee(i) = 1.0 / std::sqrt(row);
    }
    p_s = dd.asDiagonal() * p_s * dd.asDiagonal();
    a_s = ee.asDiagonal() * a_s * dd.asDiagonal();
    d_ = d_.cwiseProduct(dd);
    e_ = e_.cwiseProduct(ee);
  }
  c_ = 1.0;
  if (settings_.scaling_iterations > 0 && n > 0) {
    double mean_col = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      mean_col += p_s.col(j).lpNorm<Eigen::Infinity>();
    }
    mean_col /= static_cast<double>(n);
    if (mean_col > kScalingMin) {
      c_ = 1.0 / std::clamp(mean_col, kScalingMin, kScalingMax);
    }
  }
  p_s_ = c_ * p_s;
  a_s_ = a_s;

  // PSD check with a tiny shift; numerically semidefinite matrices still pass.
  if (n > 0) {
    const double shift = 1e-9 * std::max(1.0, p_s_.diagonal().cwiseAbs().maxCoeff());
    Eigen::LLT<Eigen::MatrixXd> check(p_s_ + shift * Eigen::MatrixXd::Identity(n, n));
    if (check.info() != Eigen::Success) {
      throw SolverError("QpSolver: P is not positive semidefinite (factorization failed)");
    }
  }
  rho_ = settings_.rho;
  rho_vec_.resize(0);
  factor_valid_ = false;
}

void QpSolver::setup_vectors(const QpProblem & problem)
{
  problem_.q = problem.q;
  problem_.l = problem.l;
  problem_.u = problem.u;
  q_s_ = c_ * d_.cwiseProduct(problem.q);
  const auto m = problem.l.size();
  l_s_.resize(m);
  u_s_.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    l_s_(i) = is_lower_inf(problem.l(i)) ? -kInfinity : e_(i) * problem.l(i);
    u_s_(i) = is_upper_inf(problem.u(i)) ? kInfinity : e_(i) * problem.u(i);
  }
  refresh_rho_vector();
}

void QpSolver::refresh_rho_vector()
{
  const auto m = l_s_.size();
  Eigen::VectorXd next(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (is_lower_inf(l_s_(i)) && is_upper_inf(u_s_(i))) {
      next(i) = kRhoMin;
    } else if (std::abs(u_s_(i) - l_s_(i)) < 1e-4 * std::max(1.0, std::abs(u_s_(i)))) {
      next(i) = kRhoEqualityScale * rho_;
    } else {
      next(i) = rho_;
    }
  }
  if (rho_vec_.size() != m || rho_vec_ != next) {
    rho_vec_ = next;
    factor_valid_ = false;
  }
}

void QpSolver::factorize()
{
  const auto n = p_s_.rows();
  Eigen::MatrixXd k = p_s_ + settings_.sigma * Eigen::MatrixXd::Identity(n, n);
  if (a_s_.rows() > 0) {
    k.noalias() += a_s_.transpose() * rho_vec_.asDiagonal() * a_s_;
  }
  llt_.compute(k);
  ++factorizations_;
  if (llt_.info() != Eigen::Success) {
    throw SolverError("QpSolver: reduced KKT factorization failed (P not positive semidefinite?)");
  }
  factor_valid_ = true;
}

QpSolution QpSolver::solve(const QpProblem & problem, const WarmStart * warm)
{
  problem.validate();
  const bool same_matrices = has_problem_ && problem_.p.rows() == problem.p.rows() &&
                             problem_.a.rows() == problem.a.rows() &&
                             problem_.a.cols() == problem.a.cols() && problem_.p == problem.p &&
                             problem_.a == problem.a;
  if (!same_matrices) {
    setup_matrices(problem);
  }
  setup_vectors(problem);
  has_problem_ = true;
  return iterate(warm);
}

QpSolution QpSolver::resolve_with_updates(
  const Eigen::VectorXd & q, const Eigen::VectorXd & l, const Eigen::VectorXd & u,
  const WarmStart * warm)
{
  if (!has_problem_) {
    throw SolverError("QpSolver: resolve_with_updates called before solve");
  }
  QpProblem next{problem_.p, q, problem_.a, l, u};
  next.validate();
  setup_vectors(next);
  return iterate(warm);
}

QpSolution QpSolver::iterate(const WarmStart * warm)
{
  const auto n = p_s_.rows();
  const auto m = a_s_.rows();
  const double alpha = settings_.relaxation;
  const double sigma = settings_.sigma;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
  if (warm != nullptr) {
    if (warm->x.size() != n) {
      throw SolverError("QpSolver: warm-start x has wrong dimension");
    }
    x = warm->x.cwiseQuotient(d_);
    if (warm->y) {
      if (warm->y->size() != m) {
        throw SolverError("QpSolver: warm-start y has wrong dimension");
      }
      y = c_ * warm->y->cwiseQuotient(e_);
    }
  }
  if (m > 0) {
    z = clamp(a_s_ * x, l_s_, u_s_);
  }
  if (!factor_valid_) {
    factorize();
  }

  QpSolution sol;
  sol.status = Status::max_iter;
  Eigen::VectorXd x_prev(n), z_prev(m), y_prev(m), rhs(n), xt(n), zr(m);
  Eigen::VectorXd ax(m), px(n), aty(n);
  double prim = 0.0;
  double dual = 0.0;
  int k = 0;
  for (k = 1; k <= settings_.max_iter; ++k) {
    x_prev = x;
    z_prev = z;
    y_prev = y;

    rhs = sigma * x - q_s_;
    if (m > 0) {
      rhs.noalias() += a_s_.transpose() * (rho_vec_.cwiseProduct(z) - y);
    }
    xt = llt_.solve(rhs);
    x = alpha * xt + (1.0 - alpha) * x_prev;
    if (m > 0) {
      zr = alpha * (a_s_ * xt) + (1.0 - alpha) * z_prev;
      z = clamp(zr + y.cwiseQuotient(rho_vec_), l_s_, u_s_);
      y += rho_vec_.cwiseProduct(zr - z);
    }

    // residuals in original units
    ax = a_s_ * x;
    px = p_s_ * x;
    aty = m > 0 ? Eigen::VectorXd(a_s_.transpose() * y) : Eigen::VectorXd::Zero(n);
    prim = m > 0 ? inf_norm((ax - z).cwiseQuotient(e_)) : 0.0;
    dual = inf_norm((px + q_s_ + aty).cwiseQuotient(d_)) / c_;
    const double eps_prim =
      settings_.eps_abs +
      settings_.eps_rel * std::max(inf_norm(ax.cwiseQuotient(e_)), inf_norm(z.cwiseQuotient(e_)));
    const double eps_dual =
      settings_.eps_abs +
      settings_.eps_rel / c_ *
        std::max(
          {inf_norm(px.cwiseQuotient(d_)), inf_norm(aty.cwiseQuotient(d_)),
           inf_norm(q_s_.cwiseQuotient(d_))});
    if (prim <= eps_prim && dual <= eps_dual) {
      sol.status = Status::solved;
      break;
    }

    if (m > 0) {
      const Eigen::VectorXd dy = y - y_prev;
      const double norm_dy = inf_norm(e_.cwiseProduct(dy));
      if (norm_dy > 1e-12) {
        const double eps = settings_.eps_primal_infeasible * norm_dy;
        if (inf_norm((a_s_.transpose() * dy).cwiseQuotient(d_)) <= eps) {
          double support = 0.0;
          bool bounded = true;
          for (Eigen::Index i = 0; i < m && bounded; ++i) {
            if (dy(i) > 0.0) {
              if (is_upper_inf(u_s_(i))) {
                bounded = false;
              } else {
                support += u_s_(i) * dy(i);
              }
            } else if (dy(i) < 0.0) {
              if (is_lower_inf(l_s_(i))) {
                bounded = false;
              } else {
                support += l_s_(i) * dy(i);
              }
            }
          }
          if (bounded && support < -eps) {
            sol.status = Status::primal_infeasible;
            break;
          }
        }
      }
    }

    if (settings_.adaptive_rho && m > 0 && settings_.adaptive_rho_interval > 0 &&
        k % settings_.adaptive_rho_interval == 0) {
      const double prim_s = inf_norm(ax - z) / std::max(std::max(inf_norm(ax), inf_norm(z)), kDivTiny);
      const double dual_s =
        inf_norm(px + q_s_ + aty) /
        std::max({inf_norm(px), inf_norm(aty), inf_norm(q_s_), kDivTiny});
      double next = rho_ * std::sqrt(prim_s / std::max(dual_s, kDivTiny));
      next = std::clamp(next, kRhoMin, kRhoMax);
      if (next > settings_.adaptive_rho_tolerance * rho_ ||
          next < rho_ / settings_.adaptive_rho_tolerance) {
        rho_ = next;
        refresh_rho_vector();
        if (!factor_valid_) {
          factorize();
        }
      }
    }
  }

  sol.iterations = std::min(k, settings_.max_iter);
  sol.x = d_.cwiseProduct(x);
  sol.y = m > 0 ? Eigen::VectorXd(e_.cwiseProduct(y) / c_) : Eigen::VectorXd::Zero(0);
  sol.primal_residual = prim;
  sol.dual_residual = dual;
  if (settings_.polish && sol.status != Status::primal_infeasible) {
    polish(sol);
  }
  sol.objective = 0.5 * sol.x.dot(problem_.p * sol.x) + problem_.q.dot(sol.x);
  if (!sol.x.allFinite()) {
    throw SolverError("QpSolver: iterates diverged to non-finite values");
  }
  return sol;
}

void QpSolver::polish(QpSolution & sol) const
{
  const auto n = problem_.p.rows();
  const auto m = problem_.a.rows();
  const Eigen::VectorXd z = clamp(problem_.a * sol.x, problem_.l, problem_.u);

  std::vector<Eigen::Index> rows;
  std::vector<double> targets;
  std::vector<int> sides;  // -1 lower, +1 upper
  for (Eigen::Index i = 0; i < m; ++i) {
    const bool lower = !is_lower_inf(problem_.l(i)) && z(i) - problem_.l(i) < -sol.y(i);
    const bool upper = !is_upper_inf(problem_.u(i)) && problem_.u(i) - z(i) < sol.y(i);
    if (lower) {
      rows.push_back(i);
      targets.push_back(problem_.l(i));
      sides.push_back(-1);
    } else if (upper) {
      rows.push_back(i);
      targets.push_back(problem_.u(i));
      sides.push_back(1);
    }
  }
  const auto na = static_cast<Eigen::Index>(rows.size());
  if (na > n) {
    return;
  }
  const double delta = settings_.polish_delta;
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + na, n + na);
  kkt.topLeftCorner(n, n) = problem_.p;
  Eigen::VectorXd rhs(n + na);
  rhs.head(n) = -problem_.q;
  for (Eigen::Index r = 0; r < na; ++r) {
    kkt.block(n + r, 0, 1, n) = problem_.a.row(rows[static_cast<std::size_t>(r)]);
    kkt.block(0, n + r, n, 1) = problem_.a.row(rows[static_cast<std::size_t>(r)]).transpose();
    rhs(n + r) = targets[static_cast<std::size_t>(r)];
  }
  Eigen::MatrixXd kkt_reg = kkt;
  kkt_reg.topLeftCorner(n, n).diagonal().array() += delta;
  kkt_reg.bottomRightCorner(na, na).diagonal().array() -= delta;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(kkt_reg);
  Eigen::VectorXd sol_kkt = lu.solve(rhs);
  for (int it = 0; it < settings_.polish_refine_iterations; ++it) {
    sol_kkt += lu.solve(rhs - kkt * sol_kkt);
  }
  if (!sol_kkt.allFinite()) {
    return;
  }
  Eigen::VectorXd x = sol_kkt.head(n);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
  for (Eigen::Index r = 0; r < na; ++r) {
    const double yr = sol_kkt(n + r);
    const int side = sides[static_cast<std::size_t>(r)];
    // a wrong active-set guess shows up as a multiplier with the wrong sign
    if (side * yr < -1e-6 * std::max(1.0, std::abs(yr))) {
      return;
    }
    y(rows[static_cast<std::size_t>(r)]) = yr;
  }
  const Eigen::VectorXd ax = problem_.a * x;
  const double prim = m > 0 ? inf_norm(ax - clamp(ax, problem_.l, problem_.u)) : 0.0;
  const double dual = inf_norm(problem_.p * x + problem_.q + problem_.a.transpose() * y);
  const double tol = settings_.eps_abs;
  if (prim <= std::max(sol.primal_residual, tol) && dual <= std::max(sol.dual_residual, tol)) {
    sol.x = x;
    sol.y = y;
    sol.primal_residual = prim;
    sol.dual_residual = dual;
    sol.polished = true;
    if (prim <= tol && dual <= tol) {
      sol.status = Status::solved;
    }
  }
}

QpSolution solve(const QpProblem & problem, const WarmStart * warm, const QpSettings & settings)
{
  QpSolver solver(settings);
  return solver.solve(problem, warm);
}

}  // namespace v2xcoop::qp
