#include "splitmpc/dynamics.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "splitmpc/errors.hpp"

namespace splitmpc {
namespace {

void require_dims(const LinearModel& model, const Vector& x, const Vector& u) {
  if (x.size() != model.state_dim() || u.size() != model.input_dim()) {
    throw DimensionMismatch("step: expected state of size " +
                            std::to_string(model.state_dim()) + " and input of size " +
                            std::to_string(model.input_dim()));
  }
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  return kind == ModelKind::detailed ? "detailed" : "coarse";
}

std::pair<int, int> LinearModel::position_indices() const {
  if (kind == ModelKind::detailed) return {detailed::kPx, detailed::kPy};
  return {coarse::kPx, coarse::kPy};
}

std::vector<int> LinearModel::velocity_indices() const {
  if (kind == ModelKind::detailed) return {detailed::kVx, detailed::kVy};
  return {};
}

LinearModel make_detailed_model(double dt, double mass) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidParameter("dt must be positive");
  if (!(mass > 0.0) || !std::isfinite(mass)) throw InvalidParameter("mass must be positive");

  LinearModel m;
  m.dt = dt;
  m.kind = ModelKind::detailed;
  m.A = Matrix::Identity(4, 4);
  m.A(detailed::kPx, detailed::kVx) = dt;
  m.A(detailed::kPy, detailed::kVy) = dt;
  m.B = Matrix::Zero(4, 2);
  m.B(detailed::kVx, 0) = dt / mass;
  m.B(detailed::kVy, 1) = dt / mass;
  return m;
}

LinearModel make_coarse_model(double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidParameter("dt must be positive");
  LinearModel m;
  m.dt = dt;
  m.kind = ModelKind::coarse;
  m.A = Matrix::Identity(2, 2);
  m.B = dt * Matrix::Identity(2, 2);
  return m;
}

Vector step(const LinearModel& model, const Vector& x, const Vector& u) {
  require_dims(model, x, u);
  return model.A * x + model.B * u;
}

BoxSet BoxSet::unbounded(int dim) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return BoxSet{Vector::Constant(dim, -inf), Vector::Constant(dim, inf)};
}

bool BoxSet::contains(const Vector& v, double tol) const {
  if (v.size() != lower.size()) throw DimensionMismatch("box: dimension mismatch");
  for (int i = 0; i < v.size(); ++i) {
    if (v[i] < lower[i] - tol || v[i] > upper[i] + tol) return false;
  }
  return true;
}

BoxSet make_box(const Vector& lower, const Vector& upper) {
  if (lower.size() != upper.size()) throw DimensionMismatch("box: bound sizes differ");
  for (int i = 0; i < lower.size(); ++i) {
    if (std::isnan(lower[i]) || std::isnan(upper[i]) || lower[i] > upper[i]) {
      throw InvalidParameter("box: lower bound exceeds upper bound at component " +
                             std::to_string(i));
    }
  }
  return BoxSet{lower, upper};
}

std::vector<BoxViolation> box_violations(const BoxSet& set, const Vector& v) {
  if (v.size() != set.dim()) throw DimensionMismatch("box: dimension mismatch");
  std::vector<BoxViolation> out;
  for (int i = 0; i < v.size(); ++i) {
    if (v[i] < set.lower[i]) {
      out.push_back({i, set.lower[i] - v[i]});
    } else if (v[i] > set.upper[i]) {
      out.push_back({i, v[i] - set.upper[i]});
    }
  }
  return out;
}

EllipsoidObstacle make_obstacle(double a, double b, double cx, double cy) {
  if (!(a > 0.0) || !(b > 0.0)) throw InvalidParameter("obstacle semi-axes must be positive");
  return EllipsoidObstacle{a, b, cx, cy};
}

double ellipse_margin(const EllipsoidObstacle& obs, double px, double py) {
  const double ex = (px - obs.cx) / obs.a;
  const double ey = (py - obs.cy) / obs.b;
  return ex * ex + ey * ey - 1.0;
}

bool in_ci_set(const ControlInvariantSet& ci, ModelKind kind, const Vector& state,
               double tol) {
  if (tol < 0.0) throw InvalidParameter("tolerance must be nonnegative");
  const int dim = kind == ModelKind::detailed ? detailed::kStateDim : coarse::kStateDim;
  if (state.size() != dim) throw DimensionMismatch("in_ci_set: dimension mismatch");

  if (kind == ModelKind::detailed && ci.zero_velocity) {
    if (std::abs(state[detailed::kVx]) > tol || std::abs(state[detailed::kVy]) > tol) {
      return false;
    }
  }
  const double py = kind == ModelKind::detailed ? state[detailed::kPy] : state[coarse::kPy];
  return py >= ci.py_lower - tol && py <= ci.py_upper + tol;
}

bool in_ci_set(const ControlInvariantSet& ci, const Vector& state, double tol) {
  if (state.size() == detailed::kStateDim) return in_ci_set(ci, ModelKind::detailed, state, tol);
  if (state.size() == coarse::kStateDim) return in_ci_set(ci, ModelKind::coarse, state, tol);
  throw DimensionMismatch("in_ci_set: state must have 4 or 2 components");
}

Vector ci_holding_input(const ControlInvariantSet& ci, const LinearModel& model,
                        const Vector& state, double tol) {
  if (!in_ci_set(ci, model.kind, state, tol)) {
    throw Infeasible("ci_holding_input: state is not in the control invariant set");
  }
  // Least-squares fixed point: B u = x - A x.
  const Vector drift = state - model.A * state;
  Vector u = model.B.completeOrthogonalDecomposition().solve(drift);
  if (!in_ci_set(ci, model.kind, step(model, state, u), tol)) {
    throw Infeasible("ci_holding_input: no input keeps the state in the set");
  }
  return u;
}

ProjectionMap make_default_projection() {
  ProjectionMap proj;
  proj.P = Matrix::Zero(4, 6);
  proj.P(0, detailed::kPx) = 1.0;
  proj.P(1, detailed::kPy) = 1.0;
  proj.P(2, detailed::kVx) = 1.0;
  proj.P(3, detailed::kVy) = 1.0;
  proj.coarse_state_dim = coarse::kStateDim;
  return proj;
}

CoarsePair project(const ProjectionMap& proj, const Vector& x, const Vector& u) {
  if (x.size() + u.size() != proj.P.cols()) {
    throw DimensionMismatch("project: stacked (x, u) does not match projection width");
  }
  Vector stacked(x.size() + u.size());
  stacked << x, u;
  const Vector out = proj.P * stacked;
  const int nz = proj.coarse_state_dim;
  return CoarsePair{out.head(nz), out.tail(out.size() - nz)};
}

}  // namespace splitmpc
