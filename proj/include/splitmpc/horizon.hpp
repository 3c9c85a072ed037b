#pragma once

// Horizon plans: each MPC scheme is one or two horizon segments, each with its
// own prediction model, sampling time, constraints, and quadratic costs.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "splitmpc/dynamics.hpp"
#include "splitmpc/scenario.hpp"

namespace splitmpc {

/// (x - ref)' Q (x - ref) + u' R u
struct QuadraticCost {
  Matrix Q;
  Matrix R;
  Vector ref;
};

double stage_cost(const QuadraticCost& cost, const Vector& x, const Vector& u);
double terminal_cost(const QuadraticCost& cost, const Vector& x);

/// Scales weights by dt_j / dt_1 so that segments with a longer sampling time
/// weigh the same per unit of time.
std::pair<Matrix, Matrix> adapt_weights(const Matrix& Q, const Matrix& R, double dt_j,
                                        double dt_1);

struct Segment {
  LinearModel model;
  int steps = 1;
  BoxSet state_box;
  BoxSet input_box;
  std::vector<EllipsoidObstacle> obstacles;
  QuadraticCost cost;
  /// Cost and set on the state at the end of the segment.
  std::optional<QuadraticCost> terminal_cost;
  std::optional<ControlInvariantSet> terminal_set;
};

struct HorizonPlan {
  Scheme scheme = Scheme::standard;
  std::string label;
  std::vector<Segment> segments;
  /// Link between the segment models; required when they differ.
  std::optional<ProjectionMap> projection;

  const Segment& first() const { return segments.front(); }
  const Segment& last() const { return segments.back(); }
  bool split() const { return segments.size() == 2; }
  /// Two segments with different prediction models, joined by the projection.
  bool two_model() const;
  /// Control invariant set at the end of the first of two segments.
  const std::optional<ControlInvariantSet>& boundary_ci() const;
  /// Total number of prediction steps.
  int total_steps() const;
};

/// Throws std::invalid_argument (DimensionMismatch / InvalidParameter) on a
/// malformed plan.
void validate_plan(const HorizonPlan& plan);

HorizonPlan build_plan(const SchemeSpec& spec, const Scenario& scenario);

int count_decision_variables(const HorizonPlan& plan);

/// Time covered by the prediction, in seconds.
double horizon_span(const HorizonPlan& plan);

}  // namespace splitmpc
