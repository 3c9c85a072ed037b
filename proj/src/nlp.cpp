#include "splitmpc/nlp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "splitmpc/errors.hpp"

namespace splitmpc {
namespace {

AffineMap selection(int n, int offset, int dim) {
  AffineMap map{Matrix::Zero(dim, n), Vector::Zero(dim)};
  for (int i = 0; i < dim; ++i) map.M(i, offset + i) = 1.0;
  return map;
}

AffineMap propagate(const LinearModel& model, const AffineMap& x, const AffineMap& u) {
  return AffineMap{model.A * x.M + model.B * u.M, model.A * x.c + model.B * u.c};
}

class Builder {
 public:
  explicit Builder(int n) : n_(n), H_(Matrix::Zero(n, n)), g_(Vector::Zero(n)) {}

  void add_cost(const AffineMap& y, const Vector& ref, const Matrix& W) {
    const Vector offset = y.c - ref;
    const Matrix WM = W * y.M;
    H_ += 2.0 * y.M.transpose() * WM;
    g_ += 2.0 * WM.transpose() * offset;
    constant_ += offset.dot(W * offset);
  }

  void add_box(const AffineMap& y, const BoxSet& box) {
    for (int i = 0; i < box.dim(); ++i) {
      if (std::isfinite(box.upper[i])) add_row(y.M.row(i), box.upper[i] - y.c[i]);
      if (std::isfinite(box.lower[i])) add_row(-y.M.row(i), y.c[i] - box.lower[i]);
    }
  }

  void add_zero(const AffineMap& y, int component) {
    eq_rows_.emplace_back(y.M.row(component), -y.c[component]);
  }

  void add_obstacles(const AffineMap& state, const LinearModel& model,
                     const std::vector<EllipsoidObstacle>& obstacles) {
    const auto [ix, iy] = model.position_indices();
    AffineMap pos{Matrix(2, n_), Vector(2)};
    pos.M.row(0) = state.M.row(ix);
    pos.M.row(1) = state.M.row(iy);
    pos.c << state.c[ix], state.c[iy];
    for (const auto& obs : obstacles) obstacles_.push_back({obs, pos});
  }

  CondensedNlp finish() {
    CondensedNlp nlp;
    nlp.n = n_;
    nlp.H = 0.5 * (H_ + H_.transpose());
    nlp.g = g_;
    nlp.constant = constant_;
    nlp.A_eq.resize(static_cast<Eigen::Index>(eq_rows_.size()), n_);
    nlp.b_eq.resize(static_cast<Eigen::Index>(eq_rows_.size()));
    for (std::size_t k = 0; k < eq_rows_.size(); ++k) {
      nlp.A_eq.row(k) = eq_rows_[k].first;
      nlp.b_eq[k] = eq_rows_[k].second;
    }
    nlp.A_in.resize(static_cast<Eigen::Index>(in_rows_.size()), n_);
    nlp.b_in.resize(static_cast<Eigen::Index>(in_rows_.size()));
    for (std::size_t k = 0; k < in_rows_.size(); ++k) {
      nlp.A_in.row(k) = in_rows_[k].first;
      nlp.b_in[k] = in_rows_[k].second;
    }
    nlp.obstacles = std::move(obstacles_);
    return nlp;
  }

 private:
  void add_row(const Eigen::RowVectorXd& a, double b) {
    // Rows that do not depend on w are dropped when satisfied; the same
    // constraint reached through two routes (e.g. x_{k_s} and its projection)
    // is kept once.
    if (a.isZero(0.0) && b >= 0.0) return;
    for (const auto& [ra, rb] : in_rows_) {
      if (rb == b && ra == a) return;
    }
    in_rows_.emplace_back(a, b);
  }

  int n_;
  Matrix H_;
  Vector g_;
  double constant_ = 0.0;
  std::vector<std::pair<Eigen::RowVectorXd, double>> eq_rows_;
  std::vector<std::pair<Eigen::RowVectorXd, double>> in_rows_;
  std::vector<ObstacleConstraint> obstacles_;
};

BoxSet with_terminal_set(BoxSet box, const LinearModel& model,
                         const std::optional<ControlInvariantSet>& set) {
  if (!set) return box;
  const int iy = model.position_indices().second;
  box.lower[iy] = std::max(box.lower[iy], set->py_lower);
  box.upper[iy] = std::min(box.upper[iy], set->py_upper);
  return box;
}

void add_terminal_equalities(Builder& b, const AffineMap& state, const LinearModel& model,
                             const std::optional<ControlInvariantSet>& set) {
  if (!set || !set->zero_velocity) return;
  for (int i : model.velocity_indices()) b.add_zero(state, i);
}

double l1_violation(const ConstraintEval& c) {
  return c.eq.lpNorm<1>() + c.in.cwiseMax(0.0).sum();
}

}  // namespace

CondensedNlp condense(const HorizonPlan& plan, const Vector& x0) {
  validate_plan(plan);
  const Segment& head = plan.first();
  if (x0.size() != head.model.state_dim()) throw DimensionMismatch("condense: x0 size");
  if (!x0.allFinite()) throw InvalidParameter("condense: x0 must be finite");

  const int nu = head.model.input_dim();
  const int ks = head.steps;
  const bool two_model = plan.two_model();
  const Segment* tail = plan.split() ? &plan.last() : nullptr;
  const int nv = tail ? tail->model.input_dim() : 0;
  const int tail_steps = tail ? tail->steps : 0;

  int n = ks * nu;
  if (two_model) {
    n += nu + (tail_steps - 1) * nv;
  } else if (tail) {
    n += tail_steps * nv;
  }

  Builder b(n);
  std::vector<int> lateral;
  std::vector<AffineMap> xs{AffineMap{Matrix::Zero(x0.size(), n), x0}};
  std::vector<AffineMap> us;
  int offset = 0;
  auto next_input = [&](int dim) {
    AffineMap u = selection(n, offset, dim);
    lateral.push_back(offset + 1);
    offset += dim;
    return u;
  };

  for (int k = 0; k < ks; ++k) {
    us.push_back(next_input(nu));
    xs.push_back(propagate(head.model, xs.back(), us.back()));
  }

  // Head segment: stage costs, constraints on x_1..x_{k_s} and u_0..u_{k_s-1}.
  for (int k = 0; k < ks; ++k) {
    b.add_cost(xs[k], head.cost.ref, head.cost.Q);
    b.add_cost(us[k], Vector::Zero(nu), head.cost.R);
    b.add_box(us[k], head.input_box);
  }
  for (int k = 1; k <= ks; ++k) {
    const bool last = k == ks;
    b.add_box(xs[k], last ? with_terminal_set(head.state_box, head.model, head.terminal_set)
                          : head.state_box);
    b.add_obstacles(xs[k], head.model, head.obstacles);
  }
  if (head.terminal_cost) b.add_cost(xs[ks], head.terminal_cost->ref, head.terminal_cost->Q);
  add_terminal_equalities(b, xs[ks], head.model, head.terminal_set);

  std::vector<AffineMap> zs;
  std::vector<AffineMap> vs;
  if (tail) {
    if (two_model) {
      // u_{k_s} only feeds the projection and its own input box.
      us.push_back(next_input(nu));
      b.add_box(us.back(), head.input_box);
      const auto& P = plan.projection->P;
      const int nx = head.model.state_dim();
      const int nz = plan.projection->coarse_state_dim;
      const Matrix Px = P.leftCols(nx);
      const Matrix Pu = P.rightCols(nu);
      const AffineMap zv{Px * xs[ks].M + Pu * us.back().M, Px * xs[ks].c + Pu * us.back().c};
      zs.push_back(AffineMap{zv.M.topRows(nz), zv.c.head(nz)});
      vs.push_back(AffineMap{zv.M.bottomRows(nv), zv.c.tail(nv)});
      b.add_box(zs[0], tail->state_box);
      b.add_box(vs[0], tail->input_box);
      for (int j = 1; j < tail_steps; ++j) vs.push_back(next_input(nv));
    } else {
      zs.push_back(xs[ks]);
      for (int j = 0; j < tail_steps; ++j) vs.push_back(next_input(nv));
    }
    for (int j = 0; j < tail_steps; ++j) {
      zs.push_back(propagate(tail->model, zs[j], vs[j]));
    }

    for (int j = 0; j < tail_steps; ++j) {
      b.add_cost(zs[j], tail->cost.ref, tail->cost.Q);
      b.add_cost(vs[j], Vector::Zero(nv), tail->cost.R);
      if (j > 0 || !two_model) b.add_box(vs[j], tail->input_box);
    }
    for (int j = 1; j <= tail_steps; ++j) {
      const bool last = j == tail_steps;
      b.add_box(zs[j], last ? with_terminal_set(tail->state_box, tail->model, tail->terminal_set)
                            : tail->state_box);
      b.add_obstacles(zs[j], tail->model, tail->obstacles);
    }
    if (tail->terminal_cost) {
      b.add_cost(zs.back(), tail->terminal_cost->ref, tail->terminal_cost->Q);
    }
    add_terminal_equalities(b, zs.back(), tail->model, tail->terminal_set);
  }

  CondensedNlp nlp = b.finish();
  nlp.head_states = std::move(xs);
  nlp.head_inputs = std::move(us);
  nlp.tail_states = std::move(zs);
  nlp.tail_inputs = std::move(vs);
  nlp.lateral_indices = std::move(lateral);
  return nlp;
}

ObjectiveEval eval_objective(const CondensedNlp& nlp, const Vector& w) {
  if (w.size() != nlp.n) throw DimensionMismatch("eval_objective: decision size");
  const Vector Hw = nlp.H * w;
  return ObjectiveEval{0.5 * w.dot(Hw) + nlp.g.dot(w) + nlp.constant, Hw + nlp.g};
}

ConstraintEval eval_constraints(const CondensedNlp& nlp, const Vector& w) {
  if (w.size() != nlp.n) throw DimensionMismatch("eval_constraints: decision size");
  ConstraintEval out;
  out.eq = nlp.A_eq * w - nlp.b_eq;
  out.eq_jacobian = nlp.A_eq;

  const int lin = static_cast<int>(nlp.A_in.rows());
  const int m = nlp.num_inequalities();
  out.in.resize(m);
  out.in_jacobian.resize(m, nlp.n);
  out.in.head(lin) = nlp.A_in * w - nlp.b_in;
  out.in_jacobian.topRows(lin) = nlp.A_in;
  for (std::size_t k = 0; k < nlp.obstacles.size(); ++k) {
    const auto& oc = nlp.obstacles[k];
    const Vector p = oc.position(w);
    const double ex = (p[0] - oc.obstacle.cx) / oc.obstacle.a;
    const double ey = (p[1] - oc.obstacle.cy) / oc.obstacle.b;
    const int row = lin + static_cast<int>(k);
    out.in[row] = -ellipse_margin(oc.obstacle, p[0], p[1]);
    out.in_jacobian.row(row) = -2.0 * (ex / oc.obstacle.a) * oc.position.M.row(0) -
                               2.0 * (ey / oc.obstacle.b) * oc.position.M.row(1);
  }
  return out;
}

double max_violation(const ConstraintEval& c) {
  double v = 0.0;
  if (c.eq.size() > 0) v = c.eq.lpNorm<Eigen::Infinity>();
  if (c.in.size() > 0) v = std::max(v, c.in.maxCoeff());
  return std::max(v, 0.0);
}

std::vector<Vector> head_trajectory(const CondensedNlp& nlp, const Vector& w) {
  std::vector<Vector> out;
  for (const auto& m : nlp.head_states) out.push_back(m(w));
  return out;
}

std::vector<Vector> tail_trajectory(const CondensedNlp& nlp, const Vector& w) {
  std::vector<Vector> out;
  for (const auto& m : nlp.tail_states) out.push_back(m(w));
  return out;
}

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iterations: return "max_iterations";
    case SolveStatus::line_search_failed: return "line_search_failed";
    case SolveStatus::qp_failed: return "qp_failed";
    case SolveStatus::locally_infeasible: return "locally_infeasible";
  }
  return "unknown";
}

KktResidual kkt_residual(const CondensedNlp& nlp, const Vector& w, const Vector& lambda_eq,
                         const Vector& mu_in) {
  const auto obj = eval_objective(nlp, w);
  const auto con = eval_constraints(nlp, w);
  const double scale = 1.0 + obj.gradient.lpNorm<Eigen::Infinity>();
  Vector grad_l = obj.gradient;
  if (lambda_eq.size() > 0) grad_l += con.eq_jacobian.transpose() * lambda_eq;
  if (mu_in.size() > 0) grad_l += con.in_jacobian.transpose() * mu_in;

  KktResidual r;
  r.stationarity = grad_l.lpNorm<Eigen::Infinity>() / scale;
  for (int i = 0; i < mu_in.size(); ++i) {
    r.complementarity = std::max(r.complementarity, std::abs(mu_in[i] * con.in[i]) / scale);
    r.dual_infeasibility = std::max(r.dual_infeasibility, -mu_in[i]);
  }
  return r;
}

void fill_trajectories(const CondensedNlp& nlp, OcpSolution& sol) {
  sol.X = head_trajectory(nlp, sol.w);
  sol.Z = tail_trajectory(nlp, sol.w);
  sol.U.clear();
  sol.V.clear();
  for (const auto& m : nlp.head_inputs) sol.U.push_back(m(sol.w));
  for (const auto& m : nlp.tail_inputs) sol.V.push_back(m(sol.w));
}

OcpSolution solve(const CondensedNlp& nlp, const Vector& init, const SolverConfig& cfg) {
  if (init.size() != nlp.n) throw DimensionMismatch("solve: initial guess size");
  if (!init.allFinite()) throw InvalidParameter("solve: initial guess must be finite");

  const auto start = std::chrono::steady_clock::now();
  const int me = nlp.num_equalities();
  const int mi = nlp.num_inequalities();
  const int lin = static_cast<int>(nlp.A_in.rows());

  QpOptions qp_opt;
  qp_opt.max_iters = cfg.max_qp_iters;

  Vector w = init;
  Vector lambda = Vector::Zero(me);
  Vector mu = Vector::Zero(mi);
  std::vector<int> seed;
  double rho = 1.0;
  bool have_multipliers = false;
  bool last_elastic = false;
  constexpr int kStallLimit = 3;
  int stalled = 0;
  double prev_viol = std::numeric_limits<double>::infinity();

  OcpSolution sol;
  sol.status = SolveStatus::max_iterations;

  auto obj = eval_objective(nlp, w);
  auto con = eval_constraints(nlp, w);

  Vector best_w = w;
  double best_viol = max_violation(con);
  double best_obj = obj.value;
  auto consider_best = [&](const Vector& cand, double f, double viol) {
    const bool cand_feasible = viol <= cfg.constraint_tol;
    const bool best_feasible = best_viol <= cfg.constraint_tol;
    if ((cand_feasible && (!best_feasible || f < best_obj)) ||
        (!cand_feasible && !best_feasible && viol < best_viol)) {
      best_w = cand;
      best_viol = viol;
      best_obj = f;
    }
  };

  int iter = 0;
  for (; iter < cfg.max_sqp_iters; ++iter) {
    const double viol = max_violation(con);
    if (have_multipliers && !last_elastic && viol <= cfg.constraint_tol) {
      const KktResidual r = kkt_residual(nlp, w, lambda, mu);
      if (r.stationarity <= cfg.kkt_tol && r.complementarity <= cfg.kkt_tol) {
        sol.status = SolveStatus::converged;
        break;
      }
    }

    // Lagrangian Hessian; obstacle rows contribute negative curvature.
    Matrix HL = nlp.H;
    for (std::size_t k = 0; k < nlp.obstacles.size(); ++k) {
      const double m_k = mu[lin + static_cast<int>(k)];
      if (m_k <= 0.0) continue;
      const auto& oc = nlp.obstacles[k];
      const auto r0 = oc.position.M.row(0);
      const auto r1 = oc.position.M.row(1);
      HL -= (2.0 * m_k / (oc.obstacle.a * oc.obstacle.a)) * (r0.transpose() * r0);
      HL -= (2.0 * m_k / (oc.obstacle.b * oc.obstacle.b)) * (r1.transpose() * r1);
    }
    {
      Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (HL + HL.transpose()));
      Vector ev = eig.eigenvalues().cwiseAbs();
      const double floor = 1e-8 * std::max(1.0, ev.maxCoeff());
      ev = ev.cwiseMax(floor);
      HL = eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
    }

    QpProblem qp{HL, obj.gradient, con.eq_jacobian, -con.eq, con.in_jacobian, -con.in};
    QpSolution step = solve_qp(qp, seed, qp_opt);
    last_elastic = false;
    if (step.status == QpStatus::infeasible) {
      step = solve_elastic_qp(qp, std::max(rho, 1e3), seed, qp_opt);
      last_elastic = true;
      sol.elastic = true;
    }
    if (step.status != QpStatus::optimal) {
      sol.status = SolveStatus::qp_failed;
      break;
    }
    sol.elastic_slack = step.slack;
    const Vector& d = step.x;

    // Relaxed subproblems that no longer reduce the violation: w is close to
    // a local minimizer of infeasibility.
    if (last_elastic) {
      stalled = viol > prev_viol - 1e-6 * (1.0 + prev_viol) ? stalled + 1 : 0;
      if (stalled >= kStallLimit) {
        sol.status = SolveStatus::locally_infeasible;
        break;
      }
    } else {
      stalled = 0;
    }
    prev_viol = viol;

    if (d.lpNorm<Eigen::Infinity>() <= 1e-12 * (1.0 + w.lpNorm<Eigen::Infinity>())) {
      // The subproblem certifies w as stationary; its multipliers decide.
      lambda = step.lambda_eq;
      mu = step.mu_in;
      have_multipliers = true;
      const KktResidual r = kkt_residual(nlp, w, lambda, mu);
      if (!last_elastic && viol <= cfg.constraint_tol && r.stationarity <= cfg.kkt_tol &&
          r.complementarity <= cfg.kkt_tol) {
        sol.status = SolveStatus::converged;
      } else if (last_elastic && step.slack > cfg.constraint_tol) {
        sol.status = SolveStatus::locally_infeasible;
      } else {
        sol.status = SolveStatus::line_search_failed;
      }
      break;
    }

    // l1 penalty must dominate the multipliers for d to be a merit descent
    // direction.
    double mult_norm = 0.0;
    if (me > 0) mult_norm = step.lambda_eq.lpNorm<Eigen::Infinity>();
    if (mi > 0) mult_norm = std::max(mult_norm, step.mu_in.lpNorm<Eigen::Infinity>());
    if (rho < 1.1 * mult_norm) rho = std::max(1.1 * mult_norm, rho * cfg.penalty_growth);

    const double phi0 = obj.value + rho * l1_violation(con);
    double lin_viol = 0.0;
    if (me > 0) lin_viol += (con.eq + con.eq_jacobian * d).lpNorm<1>();
    if (mi > 0) lin_viol += (con.in + con.in_jacobian * d).cwiseMax(0.0).sum();
    const double dphi = obj.gradient.dot(d) + rho * (lin_viol - l1_violation(con));

    auto merit = [&](const Vector& trial, ObjectiveEval& o, ConstraintEval& c) {
      o = eval_objective(nlp, trial);
      c = eval_constraints(nlp, trial);
      return o.value + rho * l1_violation(c);
    };

    constexpr double armijo = 1e-4;
    double alpha = 1.0;
    bool accepted = false;
    Vector trial;
    ObjectiveEval trial_obj;
    ConstraintEval trial_con;
    while (alpha >= cfg.min_step) {
      trial = w + alpha * d;
      if (merit(trial, trial_obj, trial_con) <= phi0 + armijo * alpha * std::min(dphi, 0.0)) {
        accepted = true;
        break;
      }
      if (alpha == 1.0 && !step.active.empty()) {
        // Second-order correction: least-norm move back onto the active
        // constraints, evaluated at the full step.
        std::vector<int> rows;
        for (int i : step.active) rows.push_back(i);
        Matrix J(me + static_cast<int>(rows.size()), nlp.n);
        Vector r(J.rows());
        if (me > 0) {
          J.topRows(me) = trial_con.eq_jacobian;
          r.head(me) = trial_con.eq;
        }
        for (std::size_t k = 0; k < rows.size(); ++k) {
          J.row(me + k) = trial_con.in_jacobian.row(rows[k]);
          r[me + k] = trial_con.in[rows[k]];
        }
        const Vector corr = -J.completeOrthogonalDecomposition().solve(r);
        Vector soc = trial + corr;
        ObjectiveEval soc_obj;
        ConstraintEval soc_con;
        if (corr.allFinite() &&
            merit(soc, soc_obj, soc_con) <= phi0 + armijo * std::min(dphi, 0.0)) {
          trial = std::move(soc);
          trial_obj = std::move(soc_obj);
          trial_con = std::move(soc_con);
          accepted = true;
          break;
        }
      }
      alpha *= cfg.line_search_shrink;
    }

    if (!accepted) {
      sol.status = SolveStatus::line_search_failed;
      break;
    }

    w = std::move(trial);
    obj = std::move(trial_obj);
    con = std::move(trial_con);
    lambda = step.lambda_eq;
    mu = step.mu_in;
    have_multipliers = true;
    seed = step.active;
    consider_best(w, obj.value, max_violation(con));
  }

  if (sol.status != SolveStatus::converged && best_w != w) {
    w = best_w;
    obj = eval_objective(nlp, w);
    con = eval_constraints(nlp, w);
  }

  sol.w = w;
  sol.objective = obj.value;
  sol.max_violation = max_violation(con);
  sol.lambda_eq = lambda;
  sol.mu_in = mu;
  const KktResidual r = kkt_residual(nlp, w, lambda, mu);
  sol.stationarity = r.stationarity;
  sol.complementarity = r.complementarity;
  sol.kkt_residual = std::max(r.stationarity, r.complementarity);
  if (sol.status == SolveStatus::converged && !last_elastic) sol.elastic_slack = 0.0;
  sol.iterations = iter;
  fill_trajectories(nlp, sol);
  sol.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return sol;
}

}  // namespace splitmpc
