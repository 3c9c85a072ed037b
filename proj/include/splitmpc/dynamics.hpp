#pragma once

// System models of the point-mass robot, the projection between the detailed
// and coarse model, and the constraint-set predicates used by the OCP.
//
//   detailed:  x = [p_x, v_x, p_y, v_y],  u = [F_x, F_y]
//              x+ = A(dt) x + B(dt, m) u
//   coarse:    z = [p_x, p_y],            v = [v_x, v_y]
//              z+ = z + dt v

#include <Eigen/Dense>
#include <optional>
#include <string_view>
#include <vector>

namespace splitmpc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

using DetailedState = Eigen::Vector4d;
using DetailedInput = Eigen::Vector2d;
using CoarseState = Eigen::Vector2d;
using CoarseInput = Eigen::Vector2d;

/// Component indices of the detailed state.
namespace detailed {
inline constexpr int kPx = 0;
inline constexpr int kVx = 1;
inline constexpr int kPy = 2;
inline constexpr int kVy = 3;
inline constexpr int kStateDim = 4;
inline constexpr int kInputDim = 2;
}  // namespace detailed

/// Component indices of the coarse state.
namespace coarse {
inline constexpr int kPx = 0;
inline constexpr int kPy = 1;
inline constexpr int kStateDim = 2;
inline constexpr int kInputDim = 2;
}  // namespace coarse

enum class ModelKind { detailed, coarse };

std::string_view to_string(ModelKind kind);

/// Discrete-time linear model x+ = A x + B u sampled at `dt`.
struct LinearModel {
  Matrix A;
  Matrix B;
  double dt = 0.0;
  ModelKind kind = ModelKind::detailed;

  int state_dim() const { return static_cast<int>(A.rows()); }
  int input_dim() const { return static_cast<int>(B.cols()); }

  /// Indices of (p_x, p_y) in the state vector.
  std::pair<int, int> position_indices() const;
  /// Indices of velocity components that are part of the state (empty for
  /// the coarse model, whose velocities are inputs).
  std::vector<int> velocity_indices() const;
};

LinearModel make_detailed_model(double dt, double mass);
LinearModel make_coarse_model(double dt);

Vector step(const LinearModel& model, const Vector& x, const Vector& u);

/// Per-component bounds; +-infinity marks an unbounded side.
struct BoxSet {
  Vector lower;
  Vector upper;

  static BoxSet unbounded(int dim);
  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Vector& v, double tol = 0.0) const;
};

BoxSet make_box(const Vector& lower, const Vector& upper);

struct BoxViolation {
  int index = 0;
  double amount = 0.0;
  bool operator==(const BoxViolation&) const = default;
};

std::vector<BoxViolation> box_violations(const BoxSet& set, const Vector& v);

struct EllipsoidObstacle {
  double a = 1.0;
  double b = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  bool operator==(const EllipsoidObstacle&) const = default;
};

EllipsoidObstacle make_obstacle(double a, double b, double cx, double cy);

/// ((px-cx)/a)^2 + ((py-cy)/b)^2 - 1. Points outside the obstacle have a
/// nonnegative margin.
double ellipse_margin(const EllipsoidObstacle& obs, double px, double py);

/// Standstill set: velocities pinned to zero (when `zero_velocity`) and p_y
/// inside [py_lower, py_upper].
struct ControlInvariantSet {
  bool zero_velocity = true;
  double py_lower = -5.0;
  double py_upper = 5.0;
  bool operator==(const ControlInvariantSet&) const = default;
};

inline constexpr double kDefaultCiTolerance = 1e-6;

bool in_ci_set(const ControlInvariantSet& ci, ModelKind kind, const Vector& state,
               double tol = kDefaultCiTolerance);

/// Dimension-dispatching overload: 4-vectors are detailed states, 2-vectors
/// coarse states.
bool in_ci_set(const ControlInvariantSet& ci, const Vector& state,
               double tol = kDefaultCiTolerance);

/// Input that keeps `state` (already in `ci`) inside `ci` at the next step.
/// Throws Infeasible if `state` is not in `ci` or no such input exists.
Vector ci_holding_input(const ControlInvariantSet& ci, const LinearModel& model,
                        const Vector& state, double tol = kDefaultCiTolerance);

/// Linear map (z, v) = P (x, u).
struct ProjectionMap {
  Matrix P;
  int coarse_state_dim = coarse::kStateDim;
};

/// The selection z = (p_x, p_y), v = (v_x, v_y) read off the detailed state.
ProjectionMap make_default_projection();

struct CoarsePair {
  Vector z;
  Vector v;
};

CoarsePair project(const ProjectionMap& proj, const Vector& x, const Vector& u);

}  // namespace splitmpc
