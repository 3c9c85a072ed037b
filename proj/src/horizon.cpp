#include "splitmpc/horizon.hpp"

#include <string>

#include "splitmpc/errors.hpp"

namespace splitmpc {
namespace {

void require_cost_dims(const QuadraticCost& cost, int nx, int nu, const char* what) {
  if (cost.Q.rows() != nx || cost.Q.cols() != nx || cost.ref.size() != nx ||
      cost.R.rows() != nu || cost.R.cols() != nu) {
    throw DimensionMismatch(std::string(what) + ": cost dimensions do not match the model");
  }
}

Segment detailed_segment(const Scenario& s, double dt, int steps, const QuadraticCost& cost) {
  Segment seg;
  seg.model = make_detailed_model(dt, s.mass);
  seg.steps = steps;
  seg.state_box = s.detailed_state_box;
  seg.input_box = s.detailed_input_box;
  seg.obstacles = s.obstacles;
  seg.cost = cost;
  return seg;
}

Segment coarse_segment(const Scenario& s, double dt, int steps, const QuadraticCost& cost) {
  Segment seg;
  seg.model = make_coarse_model(dt);
  seg.steps = steps;
  seg.state_box = s.coarse_state_box;
  seg.input_box = s.coarse_input_box;
  seg.obstacles = s.obstacles;
  seg.cost = cost;
  return seg;
}

}  // namespace

double stage_cost(const QuadraticCost& cost, const Vector& x, const Vector& u) {
  if (x.size() != cost.Q.rows() || x.size() != cost.ref.size() || u.size() != cost.R.rows()) {
    throw DimensionMismatch("stage_cost: dimension mismatch");
  }
  const Vector e = x - cost.ref;
  return e.dot(cost.Q * e) + u.dot(cost.R * u);
}

double terminal_cost(const QuadraticCost& cost, const Vector& x) {
  if (x.size() != cost.Q.rows() || x.size() != cost.ref.size()) {
    throw DimensionMismatch("terminal_cost: dimension mismatch");
  }
  const Vector e = x - cost.ref;
  return e.dot(cost.Q * e);
}

std::pair<Matrix, Matrix> adapt_weights(const Matrix& Q, const Matrix& R, double dt_j,
                                        double dt_1) {
  if (!(dt_j > 0.0) || !(dt_1 > 0.0)) throw InvalidParameter("sampling times must be positive");
  const double ratio = dt_j / dt_1;
  return {Q * ratio, R * ratio};
}

bool HorizonPlan::two_model() const {
  return segments.size() == 2 && segments[0].model.kind != segments[1].model.kind;
}

const std::optional<ControlInvariantSet>& HorizonPlan::boundary_ci() const {
  static const std::optional<ControlInvariantSet> none;
  return split() ? segments.front().terminal_set : none;
}

int HorizonPlan::total_steps() const {
  int n = 0;
  for (const auto& seg : segments) n += seg.steps;
  return n;
}

void validate_plan(const HorizonPlan& plan) {
  if (plan.segments.empty() || plan.segments.size() > 2) {
    throw InvalidParameter("plan must have one or two segments");
  }
  if (plan.first().model.kind != ModelKind::detailed) {
    throw InvalidParameter("first segment must use the detailed model");
  }
  for (const auto& seg : plan.segments) {
    if (seg.steps < 1) throw InvalidParameter("segment steps must be at least 1");
    const int nx = seg.model.state_dim();
    const int nu = seg.model.input_dim();
    if (seg.state_box.dim() != nx || seg.input_box.dim() != nu) {
      throw DimensionMismatch("segment box dimensions do not match the model");
    }
    require_cost_dims(seg.cost, nx, nu, "stage cost");
    if (seg.terminal_cost) require_cost_dims(*seg.terminal_cost, nx, nu, "terminal cost");
  }
  if (plan.two_model()) {
    if (!plan.projection) throw InvalidParameter("two-model plan requires a projection");
    const auto& a = plan.first().model;
    const auto& b = plan.last().model;
    const auto& P = plan.projection->P;
    if (P.cols() != a.state_dim() + a.input_dim() || P.rows() != b.state_dim() + b.input_dim() ||
        plan.projection->coarse_state_dim != b.state_dim()) {
      throw DimensionMismatch("projection does not match the segment models");
    }
  }
  if (plan.scheme == Scheme::proposed && !plan.boundary_ci()) {
    throw InvalidParameter("proposed scheme requires a control invariant set at the boundary");
  }
}

HorizonPlan build_plan(const SchemeSpec& spec, const Scenario& s) {
  const QuadraticCost detailed_cost{s.Q_s, s.R_s, s.x_ref};
  const QuadraticCost coarse_cost{s.Q_f, s.R_f, s.z_ref()};

  HorizonPlan plan;
  plan.scheme = spec.scheme;

  switch (spec.scheme) {
    case Scheme::standard: {
      const int n = spec.steps.value_or(s.standard_steps);
      const double dt = spec.dt.value_or(s.dt1);
      Segment seg = detailed_segment(s, dt, n, detailed_cost);
      seg.terminal_cost = detailed_cost;
      seg.terminal_set = s.ci;
      plan.segments = {std::move(seg)};
      plan.label = SchemeSpec{Scheme::standard, n, spec.dt}.to_string();
      break;
    }
    case Scheme::granular: {
      Segment head = detailed_segment(s, s.dt1, s.short_steps, detailed_cost);
      head.terminal_cost = detailed_cost;
      Segment tail = coarse_segment(s, s.dt1, s.granular_long_steps, coarse_cost);
      tail.terminal_cost = coarse_cost;
      tail.terminal_set = s.ci;
      plan.segments = {std::move(head), std::move(tail)};
      plan.projection = make_default_projection();
      plan.label = "granular";
      break;
    }
    case Scheme::nush: {
      Segment head = detailed_segment(s, s.dt1, s.short_steps, detailed_cost);
      auto [Q2, R2] = adapt_weights(s.Q_s, s.R_s, s.dt2, s.dt1);
      Segment tail = detailed_segment(s, s.dt2, s.long_steps, {Q2, R2, s.x_ref});
      tail.terminal_cost = detailed_cost;
      tail.terminal_set = s.ci;
      plan.segments = {std::move(head), std::move(tail)};
      plan.label = "nush";
      break;
    }
    case Scheme::proposed: {
      Segment head = detailed_segment(s, s.dt1, s.short_steps, detailed_cost);
      head.terminal_cost = detailed_cost;
      head.terminal_set = s.ci;
      auto [Q2, R2] = adapt_weights(s.Q_f, s.R_f, s.dt2, s.dt1);
      Segment tail = coarse_segment(s, s.dt2, s.long_steps, {Q2, R2, s.z_ref()});
      tail.terminal_cost = coarse_cost;
      tail.terminal_set = s.ci;
      plan.segments = {std::move(head), std::move(tail)};
      plan.projection = make_default_projection();
      plan.label = "proposed";
      break;
    }
  }
  validate_plan(plan);
  return plan;
}

int count_decision_variables(const HorizonPlan& plan) {
  const Segment& head = plan.first();
  if (!plan.split()) return head.steps * head.model.input_dim();
  const Segment& tail = plan.last();
  if (plan.two_model()) {
    // u_0..u_{k_s} plus v_{k_s}..v_{k_f-1}
    return (head.steps + 1) * head.model.input_dim() + tail.steps * tail.model.input_dim();
  }
  return head.steps * head.model.input_dim() + tail.steps * tail.model.input_dim();
}

double horizon_span(const HorizonPlan& plan) {
  double span = 0.0;
  for (const auto& seg : plan.segments) span += seg.steps * seg.model.dt;
  return span;
}

}  // namespace splitmpc
