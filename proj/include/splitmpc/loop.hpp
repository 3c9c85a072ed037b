#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "splitmpc/nlp.hpp"

namespace splitmpc {

struct StepRecord {
  int step = 0;
  double t = 0.0;
  Vector state;  // plant state the input was applied at
  Vector input;
  double stage_cost = 0.0;  // l_s(x_{k+1}, u_k)
  SolveStatus status = SolveStatus::converged;
  int sqp_iters = 0;
  double solve_time_ms = 0.0;
  double objective = 0.0;
};

struct ClosedLoopTrace {
  std::string scheme;
  std::string scenario_id;
  double dt = 0.0;
  std::vector<StepRecord> records;
  Vector final_state;

  double converged_fraction() const;
};

/// Decision vector of the shifted previous solution.
struct WarmStart {
  Vector w;
  bool cold_start = false;  // previous solution unusable; w is all zeros
  std::vector<std::string> log;
};

/// Shifts the previous solution by one detailed step. When the end of the
/// first segment is in its control invariant set, the freed slots u_{k_s-1}
/// and u_{k_s} take the set's holding input and the second-segment inputs are
/// kept as they are, which reproduces the previous second-segment trajectory.
WarmStart shift_warm_start(const OcpSolution& prev, const HorizonPlan& plan,
                           double tol = kDefaultCiTolerance);

/// Decision vector whose predicted p_y trajectory mirrors that of w about
/// p_y = 0, changing only the lateral entries (least squares when the
/// current lateral state makes an exact mirror unreachable).
Vector reflect_lateral(const CondensedNlp& nlp, const Vector& w);

struct FeasibilityCertificate {
  Vector candidate;
  double max_violation = 0.0;
  bool valid = false;
  std::vector<std::string> log;
};

/// Evaluates the OCP at x1 with the shifted candidate built from `prev`.
FeasibilityCertificate certify_recursive_feasibility(const OcpSolution& prev,
                                                     const HorizonPlan& plan, const Vector& x1,
                                                     double tol = 1e-6);

struct MultiStartResult {
  OcpSolution solution;
  int winner = 0;
  std::vector<double> objectives;  // per candidate, NaN when the run failed
  double total_solve_ms = 0.0;
};

/// Solves from each candidate and keeps the feasible run with the lowest
/// objective; earlier candidates win ties.
MultiStartResult multi_start_solve(const CondensedNlp& nlp, const std::vector<Vector>& candidates,
                                   const SolverConfig& cfg = {});

struct ClosedLoopOptions {
  /// Simulation model; defaults to the first segment's model.
  std::optional<LinearModel> plant;
  /// Cost accumulated in the trace; defaults to the first segment's stage
  /// cost.
  std::optional<QuadraticCost> realized;
  SeedPolicy seeds = SeedPolicy::warm_reflect;
  std::string scenario_id = "default";
  /// Called after every solve with the step index, the current plant state,
  /// and the solution applied at it.
  std::function<void(int, const Vector&, const OcpSolution&)> on_step;
};

ClosedLoopTrace closed_loop(const HorizonPlan& plan, const Vector& x0, int steps,
                            const SolverConfig& cfg = {}, const ClosedLoopOptions& options = {});

/// Sum of l(x_{k+1}, u_k) over the trace.
double realized_cost(const ClosedLoopTrace& trace, const QuadraticCost& cost);

}  // namespace splitmpc
