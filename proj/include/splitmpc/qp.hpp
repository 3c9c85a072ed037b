#pragma once

// Dense primal active-set solver for small convex QPs
//
//   min  1/2 x'Hx + g'x   s.t.  A_eq x = b_eq,  A_in x <= b_in
//
// A feasible start is not required: the inequalities are relaxed by a single
// nonnegative slack t with a large linear penalty (big-M), so the initial
// point (least-norm equality solution, t = max violation) is feasible and the
// method drives t to zero whenever the QP is feasible. The same machinery
// with a moderate penalty gives the elastic subproblem used by the SQP
// when a linearization is inconsistent.

#include <span>
#include <string_view>
#include <vector>

#include "splitmpc/dynamics.hpp"

namespace splitmpc {

struct QpProblem {
  Matrix H;
  Vector g;
  Matrix A_eq;
  Vector b_eq;
  Matrix A_in;
  Vector b_in;

  int num_variables() const { return static_cast<int>(g.size()); }
};

enum class QpStatus { optimal, infeasible, max_iterations, singular };

std::string_view to_string(QpStatus status);

struct QpOptions {
  int max_iters = 200;
  double feasibility_tol = 1e-9;
  /// Added to the Hessian diagonal when the KKT matrix of a working set is
  /// singular.
  double regularization = 1e-9;
  double big_m = 1e8;
};

struct QpSolution {
  Vector x;
  Vector lambda_eq;  // multipliers of A_eq x = b_eq
  Vector mu_in;      // multipliers of A_in x <= b_in, nonnegative
  std::vector<int> active;  // inequality rows in the final working set
  QpStatus status = QpStatus::optimal;
  int iterations = 0;
  bool regularized = false;
  double slack = 0.0;  // elastic slack t (0 for a feasible exact solve)
};

/// Exact solve. `seed` lists inequality rows believed active at the solution;
/// it is used when the corresponding equality-constrained point is feasible.
QpSolution solve_qp(const QpProblem& problem, std::span<const int> seed = {},
                    const QpOptions& options = {});

/// Minimizes the QP objective plus `penalty * t` with A_in x - t <= b_in,
/// t >= 0. The returned `slack` is the smallest uniform relaxation found.
QpSolution solve_elastic_qp(const QpProblem& problem, double penalty,
                            std::span<const int> seed = {}, const QpOptions& options = {});

}  // namespace splitmpc
