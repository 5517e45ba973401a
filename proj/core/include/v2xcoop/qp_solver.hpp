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

#include <optional>

/**
 * Dense operator-splitting QP solver:
 *
 *   minimize    0.5 x' P x + q' x
 *   subject to  l <= A x <= u
 *
 * ADMM iterations on the split x / z = A x with over-relaxation, Ruiz
 * equilibration, per-row step sizes and residual-balancing step-size
 * adaptation. Bounds with magnitude >= kInfinity are treated as absent.
 */
namespace v2xcoop::qp
{

inline constexpr double kInfinity = 1e20;

struct QpProblem
{
  Eigen::MatrixXd p;
  Eigen::VectorXd q;
  Eigen::MatrixXd a;
  Eigen::VectorXd l;
  Eigen::VectorXd u;

  int num_variables() const { return static_cast<int>(q.size()); }
  int num_constraints() const { return static_cast<int>(l.size()); }
  double objective(const Eigen::VectorXd & x) const { return 0.5 * x.dot(p * x) + q.dot(x); }

  /// Throws SolverError on dimension mismatch, asymmetric P or l > u.
  void validate() const;
};

enum class Status { solved, max_iter, primal_infeasible };

const char * to_string(Status status);

struct QpSettings
{
  double rho{0.1};
  double sigma{1e-6};
  double relaxation{1.6};
  double eps_abs{1e-4};
  double eps_rel{1e-4};
  double eps_primal_infeasible{1e-5};
  int max_iter{4000};
  bool adaptive_rho{true};
  int adaptive_rho_interval{25};
  double adaptive_rho_tolerance{5.0};
  int scaling_iterations{10};
  bool polish{false};
  int polish_refine_iterations{3};
  double polish_delta{1e-6};
};

struct WarmStart
{
  Eigen::VectorXd x;
  std::optional<Eigen::VectorXd> y;
};

struct QpSolution
{
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  Status status{Status::max_iter};
  int iterations{0};
  double primal_residual{0.0};
  double dual_residual{0.0};
  double objective{0.0};
  bool polished{false};
};

/// Reusable solver instance. The scaled problem and the factorization of the
/// reduced linear system are cached and reused while P and A stay unchanged.
class QpSolver
{
public:
  explicit QpSolver(QpSettings settings = {});

  const QpSettings & settings() const { return settings_; }
  QpSettings & settings() { return settings_; }

  QpSolution solve(const QpProblem & problem, const WarmStart * warm = nullptr);

  /// Re-solve the last problem with a new q and bounds. Throws SolverError if
  /// no problem has been set up yet.
  QpSolution resolve_with_updates(
    const Eigen::VectorXd & q, const Eigen::VectorXd & l, const Eigen::VectorXd & u,
    const WarmStart * warm = nullptr);

  /// Number of matrix factorizations performed so far.
  int factorization_count() const { return factorizations_; }

private:
  void setup_matrices(const QpProblem & problem);
  void setup_vectors(const QpProblem & problem);
  void refresh_rho_vector();
  void factorize();
  QpSolution iterate(const WarmStart * warm);
  void polish(QpSolution & sol) const;

  QpSettings settings_;
  bool has_problem_{false};
  QpProblem problem_;

  // scaled data
  Eigen::VectorXd d_;
  Eigen::VectorXd e_;
  double c_{1.0};
  Eigen::MatrixXd p_s_;
  Eigen::MatrixXd a_s_;
  Eigen::VectorXd q_s_;
  Eigen::VectorXd l_s_;
  Eigen::VectorXd u_s_;

  double rho_{0.1};
  Eigen::VectorXd rho_vec_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  bool factor_valid_{false};
  int factorizations_{0};
};

/// Convenience one-shot solve.
QpSolution solve(
  const QpProblem & problem, const WarmStart * warm = nullptr, const QpSettings & settings = {});

}  // namespace v2xcoop::qp
