#pragma once

// Reference evaluation of a horizon plan by forward simulation, written
// against the model and cost primitives only. Used to check the condensed
// problem from the outside.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "splitmpc/horizon.hpp"

namespace splitmpc::testing {

struct Rollout {
  std::vector<Vector> x;  // x_0 .. x_{k_s}
  std::vector<Vector> u;  // inputs of the first segment
  std::vector<Vector> z;  // second segment, boundary state included
  std::vector<Vector> v;
};

inline Rollout simulate(const HorizonPlan& plan, const Vector& x0, const Vector& w) {
  const Segment& head = plan.first();
  Rollout r;
  int off = 0;
  auto take = [&](int dim) {
    Vector out = w.segment(off, dim);
    off += dim;
    return out;
  };
  r.x.push_back(x0);
  for (int k = 0; k < head.steps; ++k) {
    r.u.push_back(take(head.model.input_dim()));
    r.x.push_back(step(head.model, r.x.back(), r.u.back()));
  }
  if (!plan.split()) return r;

  const Segment& tail = plan.last();
  int first_free = 0;
  if (plan.two_model()) {
    r.u.push_back(take(head.model.input_dim()));
    const CoarsePair zv = project(*plan.projection, r.x.back(), r.u.back());
    r.z.push_back(zv.z);
    r.v.push_back(zv.v);
    first_free = 1;
  } else {
    r.z.push_back(r.x.back());
  }
  for (int j = first_free; j < tail.steps; ++j) r.v.push_back(take(tail.model.input_dim()));
  for (int j = 0; j < tail.steps; ++j) r.z.push_back(step(tail.model, r.z[j], r.v[j]));
  return r;
}

inline double rollout_cost(const HorizonPlan& plan, const Rollout& r) {
  const Segment& head = plan.first();
  double J = 0.0;
  for (int k = 0; k < head.steps; ++k) J += stage_cost(head.cost, r.x[k], r.u[k]);
  if (head.terminal_cost) J += terminal_cost(*head.terminal_cost, r.x.back());
  if (plan.split()) {
    const Segment& tail = plan.last();
    for (int j = 0; j < tail.steps; ++j) J += stage_cost(tail.cost, r.z[j], r.v[j]);
    if (tail.terminal_cost) J += terminal_cost(*tail.terminal_cost, r.z.back());
  }
  return J;
}

inline std::vector<int> velocity_components(const LinearModel& m) {
  return m.kind == ModelKind::detailed ? std::vector<int>{1, 3} : std::vector<int>{};
}

// Equality residuals: terminal velocities pinned to zero by each invariant set.
inline std::vector<double> rollout_equalities(const HorizonPlan& plan, const Rollout& r) {
  std::vector<double> out;
  auto pin = [&](const Segment& seg, const Vector& state) {
    if (!seg.terminal_set || !seg.terminal_set->zero_velocity) return;
    for (int i : velocity_components(seg.model)) out.push_back(state[i]);
  };
  pin(plan.first(), r.x.back());
  if (plan.split()) pin(plan.last(), r.z.back());
  return out;
}

inline double box_excess(const BoxSet& box, const Vector& v) {
  double e = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < v.size(); ++i) {
    e = std::max({e, v[i] - box.upper[i], box.lower[i] - v[i]});
  }
  return e;
}

inline double terminal_excess(const Segment& seg, const Vector& state) {
  if (!seg.terminal_set) return -std::numeric_limits<double>::infinity();
  const double py = state[seg.model.position_indices().second];
  return std::max(py - seg.terminal_set->py_upper, seg.terminal_set->py_lower - py);
}

inline double obstacle_excess(const Segment& seg, const Vector& state) {
  double e = -std::numeric_limits<double>::infinity();
  const auto [ix, iy] = seg.model.position_indices();
  for (const auto& o : seg.obstacles) e = std::max(e, -ellipse_margin(o, state[ix], state[iy]));
  return e;
}

// Largest inequality value g(w) over every constraint of the plan; negative
// when all of them are strictly satisfied.
inline double rollout_inequality_excess(const HorizonPlan& plan, const Rollout& r) {
  const Segment& head = plan.first();
  double e = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < head.steps; ++k) e = std::max(e, box_excess(head.input_box, r.u[k]));
  for (int k = 1; k <= head.steps; ++k) {
    e = std::max({e, box_excess(head.state_box, r.x[k]), obstacle_excess(head, r.x[k])});
  }
  e = std::max(e, terminal_excess(head, r.x.back()));
  if (plan.split()) {
    const Segment& tail = plan.last();
    if (plan.two_model()) {
      e = std::max({e, box_excess(head.input_box, r.u.back()), box_excess(tail.state_box, r.z[0]),
                    box_excess(tail.input_box, r.v[0])});
    }
    for (const auto& v : r.v) e = std::max(e, box_excess(tail.input_box, v));
    for (int j = 1; j <= tail.steps; ++j) {
      e = std::max({e, box_excess(tail.state_box, r.z[j]), obstacle_excess(tail, r.z[j])});
    }
    e = std::max(e, terminal_excess(tail, r.z.back()));
  }
  return e;
}

// Same, with the equality residuals in absolute value folded in.
inline double rollout_excess(const HorizonPlan& plan, const Rollout& r) {
  double e = rollout_inequality_excess(plan, r);
  for (double q : rollout_equalities(plan, r)) e = std::max(e, std::abs(q));
  return e;
}

// Weighted residual vector rho(w) with cost(w) = ||rho(w)||^2.
inline Vector weighted_residuals(const HorizonPlan& plan, const Rollout& r) {
  std::vector<double> out;
  auto add = [&](const Matrix& W, const Vector& d) {
    const Matrix S = Eigen::SelfAdjointEigenSolver<Matrix>(W).operatorSqrt();
    const Vector s = S * d;
    out.insert(out.end(), s.data(), s.data() + s.size());
  };
  const Segment& head = plan.first();
  for (int k = 0; k < head.steps; ++k) {
    add(head.cost.Q, r.x[k] - head.cost.ref);
    add(head.cost.R, r.u[k]);
  }
  if (head.terminal_cost) add(head.terminal_cost->Q, r.x.back() - head.terminal_cost->ref);
  if (plan.split()) {
    const Segment& tail = plan.last();
    for (int j = 0; j < tail.steps; ++j) {
      add(tail.cost.Q, r.z[j] - tail.cost.ref);
      add(tail.cost.R, r.v[j]);
    }
    if (tail.terminal_cost) add(tail.terminal_cost->Q, r.z.back() - tail.terminal_cost->ref);
  }
  return Eigen::Map<Vector>(out.data(), static_cast<Eigen::Index>(out.size()));
}

struct DenseOracle {
  Vector w;
  Vector lambda;
  double value = 0.0;
};

// Minimizer of the cost subject to the terminal equalities only, from the
// normal equations of the affine residual and equality maps. Both maps are
// recovered column by column from rollouts of unit inputs.
inline DenseOracle equality_only_minimizer(const HorizonPlan& plan, const Vector& x0, int n) {
  const Vector zero = Vector::Zero(n);
  const Rollout r0 = simulate(plan, x0, zero);
  const Vector rho0 = weighted_residuals(plan, r0);
  const std::vector<double> e0 = rollout_equalities(plan, r0);
  const int me = static_cast<int>(e0.size());

  Matrix Rm(rho0.size(), n);
  Matrix E(me, n);
  for (int i = 0; i < n; ++i) {
    const Rollout ri = simulate(plan, x0, Vector::Unit(n, i));
    Rm.col(i) = weighted_residuals(plan, ri) - rho0;
    const std::vector<double> ei = rollout_equalities(plan, ri);
    for (int k = 0; k < me; ++k) E(k, i) = ei[k] - e0[k];
  }
  Vector e(me);
  for (int k = 0; k < me; ++k) e[k] = e0[k];

  Matrix K = Matrix::Zero(n + me, n + me);
  K.topLeftCorner(n, n) = 2.0 * Rm.transpose() * Rm;
  K.topRightCorner(n, me) = E.transpose();
  K.bottomLeftCorner(me, n) = E;
  Vector rhs(n + me);
  rhs.head(n) = -2.0 * Rm.transpose() * rho0;
  rhs.tail(me) = -e;
  const Vector sol = K.fullPivLu().solve(rhs);

  DenseOracle out;
  out.w = sol.head(n);
  out.lambda = sol.tail(me);
  out.value = rollout_cost(plan, simulate(plan, x0, out.w));
  return out;
}

}  // namespace splitmpc::testing
