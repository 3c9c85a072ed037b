#pragma once

// Condensed optimal control problem. Both prediction models are linear, so
// every predicted state is an exact affine function of the input decision
// vector w; what remains is a quadratic objective, linear (in)equalities, and
// one nonconvex quadratic inequality per (obstacle, predicted position).
//
// Decision layout for a two-model plan (k_s detailed steps, k_f - k_s coarse):
//   w = [u_0, ..., u_{k_s}, v_{k_s+1}, ..., v_{k_f-1}]
// v_{k_s} is not free: it is the projection of (x_{k_s}, u_{k_s}).
// Single-model plans stack all inputs along the horizon.

#include <string_view>
#include <vector>

#include "splitmpc/horizon.hpp"
#include "splitmpc/qp.hpp"
#include "splitmpc/solver_config.hpp"

namespace splitmpc {

/// y = M w + c
struct AffineMap {
  Matrix M;
  Vector c;

  Vector operator()(const Vector& w) const { return M * w + c; }
};

/// g(w) = 1 - ellipse_margin(position(w)) <= 0
struct ObstacleConstraint {
  EllipsoidObstacle obstacle;
  AffineMap position;  // 2 x n, (p_x, p_y)
};

struct CondensedNlp {
  int n = 0;

  // f(w) = 1/2 w'Hw + g'w + constant
  Matrix H;
  Vector g;
  double constant = 0.0;

  Matrix A_eq;  // A_eq w = b_eq
  Vector b_eq;
  Matrix A_in;  // A_in w <= b_in
  Vector b_in;
  std::vector<ObstacleConstraint> obstacles;

  // Reconstruction of the predicted trajectory.
  std::vector<AffineMap> head_states;  // x_0 .. x_{k_s}
  std::vector<AffineMap> head_inputs;  // u_0 .. u_{k_s - 1} (.. u_{k_s} for two-model plans)
  std::vector<AffineMap> tail_states;  // boundary state .. end of horizon
  std::vector<AffineMap> tail_inputs;  // v_{k_s} .. v_{k_f - 1}

  /// Entries of w that move the robot laterally (F_y, v_y).
  std::vector<int> lateral_indices;

  int num_equalities() const { return static_cast<int>(A_eq.rows()); }
  int num_inequalities() const {
    return static_cast<int>(A_in.rows() + static_cast<Eigen::Index>(obstacles.size()));
  }
};

CondensedNlp condense(const HorizonPlan& plan, const Vector& x0);

struct ObjectiveEval {
  double value = 0.0;
  Vector gradient;
};

ObjectiveEval eval_objective(const CondensedNlp& nlp, const Vector& w);

/// Inequalities follow g(w) <= 0: linear rows first, then one row per
/// obstacle constraint.
struct ConstraintEval {
  Vector eq;
  Vector in;
  Matrix eq_jacobian;
  Matrix in_jacobian;
};

ConstraintEval eval_constraints(const CondensedNlp& nlp, const Vector& w);

/// max(|eq|, max(in, 0))
double max_violation(const ConstraintEval& c);

/// Affinely reconstructed states of w.
std::vector<Vector> head_trajectory(const CondensedNlp& nlp, const Vector& w);
std::vector<Vector> tail_trajectory(const CondensedNlp& nlp, const Vector& w);

enum class SolveStatus {
  converged,
  max_iterations,
  line_search_failed,
  qp_failed,
  locally_infeasible,  // relaxed subproblems stopped reducing the violation
};

std::string_view to_string(SolveStatus status);

struct OcpSolution {
  Vector w;
  std::vector<Vector> U;  // detailed inputs of the first segment
  std::vector<Vector> V;  // inputs of the second segment
  std::vector<Vector> X;  // x_0 .. x_{k_s}
  std::vector<Vector> Z;  // second-segment states, boundary included

  double objective = 0.0;
  double max_violation = 0.0;
  double stationarity = 0.0;     // ||grad L||_inf / (1 + ||grad f||_inf)
  double complementarity = 0.0;  // max |mu_i g_i| / (1 + ||grad f||_inf)
  double kkt_residual = 0.0;     // max of the two above
  Vector lambda_eq;
  Vector mu_in;

  SolveStatus status = SolveStatus::max_iterations;
  int iterations = 0;
  double wall_time_ms = 0.0;
  bool elastic = false;        // some subproblem had to be relaxed
  double elastic_slack = 0.0;  // slack of the last subproblem

  bool converged() const { return status == SolveStatus::converged; }
};

/// Stationarity and complementarity of (w, lambda, mu), scaled as in
/// OcpSolution.
struct KktResidual {
  double stationarity = 0.0;
  double complementarity = 0.0;
  double dual_infeasibility = 0.0;
};

KktResidual kkt_residual(const CondensedNlp& nlp, const Vector& w, const Vector& lambda_eq,
                         const Vector& mu_in);

/// SQP with exact Lagrangian Hessian (eigenvalue-clipped to stay positive
/// definite), linearized obstacle constraints, and an l1-merit backtracking
/// line search with a second-order correction.
OcpSolution solve(const CondensedNlp& nlp, const Vector& init, const SolverConfig& cfg = {});

/// Fills U, V, X, Z from a decision vector.
void fill_trajectories(const CondensedNlp& nlp, OcpSolution& sol);

}  // namespace splitmpc
