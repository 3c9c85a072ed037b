#include "splitmpc/loop.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>

#include "splitmpc/errors.hpp"

namespace splitmpc {
namespace {

Vector stack(const std::vector<Vector>& parts) {
  Eigen::Index n = 0;
  for (const auto& p : parts) n += p.size();
  Vector out(n);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.segment(off, p.size()) = p;
    off += p.size();
  }
  return out;
}

Vector clip(const Vector& u, const BoxSet& box) {
  return u.cwiseMax(box.lower).cwiseMin(box.upper);
}

// Input holding `state` in `set` when possible, zero otherwise.
Vector holding_or_zero(const std::optional<ControlInvariantSet>& set, const LinearModel& model,
                       const Vector& state, double tol, std::vector<std::string>& log,
                       const char* slot) {
  if (set && in_ci_set(*set, model.kind, state, tol)) {
    log.push_back(fmt::format("{}: holding input of the invariant set", slot));
    return ci_holding_input(*set, model, state, tol);
  }
  log.push_back(fmt::format("{}: zero input", slot));
  return Vector::Zero(model.input_dim());
}

}  // namespace

double ClosedLoopTrace::converged_fraction() const {
  if (records.empty()) return 0.0;
  int ok = 0;
  for (const auto& r : records) ok += r.status == SolveStatus::converged;
  return static_cast<double>(ok) / static_cast<double>(records.size());
}

WarmStart shift_warm_start(const OcpSolution& prev, const HorizonPlan& plan, double tol) {
  validate_plan(plan);
  const Segment& head = plan.first();
  const int ks = head.steps;
  const bool two_model = plan.two_model();
  const int tail_steps = plan.split() ? plan.last().steps : 0;
  const std::size_t expected_u = two_model ? ks + 1 : ks;

  if (prev.U.size() != expected_u || prev.V.size() != static_cast<std::size_t>(tail_steps) ||
      prev.X.size() != static_cast<std::size_t>(ks + 1) ||
      prev.Z.size() != static_cast<std::size_t>(plan.split() ? tail_steps + 1 : 0)) {
    throw DimensionMismatch("shift_warm_start: solution does not belong to this plan");
  }

  WarmStart out;
  const int n = count_decision_variables(plan) - (two_model ? plan.last().model.input_dim() : 0);
  if (!(prev.max_violation <= tol) || !prev.w.allFinite()) {
    out.w = Vector::Zero(n);
    out.cold_start = true;
    out.log.push_back("previous solution infeasible: cold start");
    return out;
  }

  std::vector<Vector> parts;
  for (int k = 0; k + 1 < ks; ++k) parts.push_back(prev.U[k + 1]);
  out.log.push_back(fmt::format("u_0..u_{}: shifted", ks - 2));
  const Vector& x_end = prev.X[ks];
  const bool held = head.terminal_set && in_ci_set(*head.terminal_set, head.model.kind, x_end, tol);

  if (held) {
    // x_{k_s} stays put, so the second segment starts from the same state.
    const Vector hold = ci_holding_input(*head.terminal_set, head.model, x_end, tol);
    parts.push_back(hold);
    out.log.push_back(fmt::format("u_{}: holding input of the invariant set", ks - 1));
    if (two_model) {
      parts.push_back(hold);
      out.log.push_back(fmt::format("u_{}: holding input of the invariant set", ks));
    }
    if (plan.split()) {
      const int first_free = two_model ? 1 : 0;
      for (int j = first_free; j < tail_steps; ++j) parts.push_back(prev.V[j]);
      out.log.push_back("second segment: inputs kept");
    }
  } else if (two_model) {
    // Advance x_{k_s} by one detailed step, matching the previous coarse
    // prediction at k_s + 1 as closely as the input box allows.
    const Segment& tail = plan.last();
    const auto& P = plan.projection->P;
    const int nx = head.model.state_dim();
    const int nu = head.model.input_dim();
    const Matrix Px = P.leftCols(nx);
    Vector target(P.rows());
    const Vector z_next = prev.Z.size() > 1 ? prev.Z[1] : prev.Z[0];
    const Vector v_next =
        prev.V.size() > 1 ? prev.V[1] : Vector(Vector::Zero(tail.model.input_dim()));
    target << z_next, v_next;
    const Vector resid = target - Px * (head.model.A * x_end);
    Vector u = (Px * head.model.B).completeOrthogonalDecomposition().solve(resid);
    u = clip(u.allFinite() ? u : Vector::Zero(nu), head.input_box);
    parts.push_back(u);
    parts.push_back(prev.U[ks]);
    out.log.push_back(fmt::format("u_{}: matched to the coarse prediction", ks - 1));
    for (int j = 1; j + 1 < tail_steps; ++j) parts.push_back(prev.V[j + 1]);
    if (tail_steps > 1) {
      parts.push_back(
          holding_or_zero(tail.terminal_set, tail.model, prev.Z.back(), tol, out.log, "v_last"));
    }
  } else if (plan.split()) {
    // One model, two sampling times: shift the whole input sequence.
    const Segment& tail = plan.last();
    if (tail_steps > 0) parts.push_back(prev.V[0]);
    for (int j = 0; j + 1 < tail_steps; ++j) parts.push_back(prev.V[j + 1]);
    parts.push_back(
        holding_or_zero(tail.terminal_set, tail.model, prev.Z.back(), tol, out.log, "u_last"));
  } else {
    parts.push_back(holding_or_zero(head.terminal_set, head.model, x_end, tol, out.log, "u_last"));
  }

  out.w = stack(parts);
  if (out.w.size() != n) throw DimensionMismatch("shift_warm_start: layout mismatch");
  return out;
}

Vector reflect_lateral(const CondensedNlp& nlp, const Vector& w) {
  if (w.size() != nlp.n) throw DimensionMismatch("reflect_lateral: decision vector size");
  // Lateral position rows p_y = M w + c of every predicted state.
  std::vector<const AffineMap*> maps;
  for (const auto& m : nlp.head_states) maps.push_back(&m);
  for (const auto& m : nlp.tail_states) maps.push_back(&m);
  const int lat = static_cast<int>(nlp.lateral_indices.size());
  Matrix M(static_cast<Eigen::Index>(maps.size()), lat);
  Vector target(M.rows());
  for (std::size_t r = 0; r < maps.size(); ++r) {
    const AffineMap& m = *maps[r];
    const int row = m.M.rows() == detailed::kStateDim ? detailed::kPy : coarse::kPy;
    for (int j = 0; j < lat; ++j) M(r, j) = m.M(row, nlp.lateral_indices[j]);
    target[r] = -2.0 * m.c[row] - m.M.row(row).dot(w);
  }
  // Plain sign flip plus the minimum-norm least-squares correction toward the
  // mirror image. The correction vanishes when the current p_y and v_y are
  // zero, and inputs that reach no predicted p_y stay flipped.
  Vector flipped(lat);
  for (int j = 0; j < lat; ++j) flipped[j] = -w[nlp.lateral_indices[j]];
  const Vector lateral =
      flipped + M.completeOrthogonalDecomposition().solve(target - M * flipped);
  Vector out = w;
  for (int j = 0; j < lat; ++j) out[nlp.lateral_indices[j]] = lateral[j];
  return out;
}

FeasibilityCertificate certify_recursive_feasibility(const OcpSolution& prev,
                                                     const HorizonPlan& plan, const Vector& x1,
                                                     double tol) {
  FeasibilityCertificate cert;
  WarmStart ws = shift_warm_start(prev, plan, tol);
  cert.candidate = ws.w;
  cert.log = std::move(ws.log);
  const CondensedNlp nlp = condense(plan, x1);
  cert.max_violation = max_violation(eval_constraints(nlp, cert.candidate));
  cert.valid = !ws.cold_start && cert.max_violation <= tol;
  return cert;
}

MultiStartResult multi_start_solve(const CondensedNlp& nlp, const std::vector<Vector>& candidates,
                                   const SolverConfig& cfg) {
  if (candidates.empty()) throw InvalidParameter("multi_start_solve: no candidates");
  MultiStartResult res;
  std::vector<OcpSolution> runs;
  std::vector<int> source;  // index into runs per candidate

  for (std::size_t i = 0; i < candidates.size(); ++i) {
    int same = -1;
    for (std::size_t j = 0; j < i; ++j) {
      if (candidates[j] == candidates[i]) {
        same = source[j];
        break;
      }
    }
    if (same >= 0) {
      source.push_back(same);
      continue;
    }
    runs.push_back(solve(nlp, candidates[i], cfg));
    res.total_solve_ms += runs.back().wall_time_ms;
    source.push_back(static_cast<int>(runs.size()) - 1);
  }

  auto feasible = [&](const OcpSolution& s) { return s.max_violation <= cfg.constraint_tol; };
  int best = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const OcpSolution& s = runs[source[i]];
    res.objectives.push_back(feasible(s) ? s.objective
                                         : std::numeric_limits<double>::quiet_NaN());
    if (i == 0) continue;
    const OcpSolution& b = runs[source[best]];
    if (feasible(s) && feasible(b)) {
      if (s.objective < b.objective - 1e-9 * std::max(1.0, std::abs(b.objective))) {
        best = static_cast<int>(i);
      }
    } else if (feasible(s) || (!feasible(b) && s.max_violation < b.max_violation)) {
      best = static_cast<int>(i);
    }
  }
  res.winner = best;
  res.solution = runs[source[best]];
  return res;
}

ClosedLoopTrace closed_loop(const HorizonPlan& plan, const Vector& x0, int steps,
                            const SolverConfig& cfg, const ClosedLoopOptions& options) {
  if (steps < 1) throw InvalidParameter("closed_loop: steps must be at least 1");
  const LinearModel plant = options.plant.value_or(plan.first().model);
  const QuadraticCost cost = options.realized.value_or(plan.first().cost);

  ClosedLoopTrace trace;
  trace.scheme = plan.label;
  trace.scenario_id = options.scenario_id;
  trace.dt = plant.dt;

  Vector x = x0;
  std::optional<OcpSolution> prev;
  for (int k = 0; k < steps; ++k) {
    const CondensedNlp nlp = condense(plan, x);
    Vector base = Vector::Zero(nlp.n);
    if (prev) {
      WarmStart ws = shift_warm_start(*prev, plan);
      if (!ws.cold_start) base = std::move(ws.w);
    }
    std::vector<Vector> candidates{base};
    if (options.seeds == SeedPolicy::warm_reflect) {
      candidates.push_back(reflect_lateral(nlp, base));
    }
    MultiStartResult ms = multi_start_solve(nlp, candidates, cfg);
    const OcpSolution& sol = ms.solution;
    if (options.on_step) options.on_step(k, x, sol);

    const Vector u = sol.U.front();
    const Vector x_next = step(plant, x, u);
    if (!x_next.allFinite()) {
      throw SolverAbort(fmt::format("closed_loop: non-finite plant state at step {}", k));
    }

    StepRecord rec;
    rec.step = k;
    rec.t = k * plant.dt;
    rec.state = x;
    rec.input = u;
    rec.stage_cost = stage_cost(cost, x_next, u);
    rec.status = sol.status;
    rec.sqp_iters = sol.iterations;
    rec.solve_time_ms = ms.total_solve_ms;
    rec.objective = sol.objective;
    trace.records.push_back(std::move(rec));

    x = x_next;
    prev = sol;
  }
  trace.final_state = x;
  return trace;
}

double realized_cost(const ClosedLoopTrace& trace, const QuadraticCost& cost) {
  double total = 0.0;
  for (std::size_t k = 0; k < trace.records.size(); ++k) {
    const Vector& next =
        k + 1 < trace.records.size() ? trace.records[k + 1].state : trace.final_state;
    total += stage_cost(cost, next, trace.records[k].input);
  }
  return total;
}

}  // namespace splitmpc
