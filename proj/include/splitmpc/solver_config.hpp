#pragma once

namespace splitmpc {

/// SQP / active-set settings. Tolerances are relative to the gradient scale
/// for stationarity and absolute for constraint violation.
struct SolverConfig {
  double kkt_tol = 1e-6;
  double constraint_tol = 1e-6;
  int max_sqp_iters = 100;
  int max_qp_iters = 200;
  double penalty_growth = 10.0;  // l1-merit penalty multiplier on update
  double line_search_shrink = 0.5;
  double min_step = 1e-8;

  bool operator==(const SolverConfig&) const = default;
};

/// Initial guesses handed to the multi-start solve at each closed-loop step.
enum class SeedPolicy {
  warm,          // shifted previous solution only
  warm_reflect,  // shifted solution and its lateral mirror image
};

}  // namespace splitmpc
