#include "splitmpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>

#include "splitmpc/errors.hpp"

namespace splitmpc {
namespace {

// Working problem in y = (x, t):
//   min 1/2 y'Gy + c'y  s.t.  E y = f (always in the working set),  C y <= h
// Row `bound_row` of C is the bound -t <= 0. While it is in the working set t
// is held fixed and dropped from the KKT system; its multiplier is recovered
// afterwards. This keeps the large slack penalty out of the linear solves.
struct Core {
  Matrix G;
  Vector c;
  Matrix E;
  Vector f;
  Matrix C;
  Vector h;
  int bound_row = -1;
};

struct CoreState {
  Vector y;
  std::vector<int> working;
  Vector nu_eq;
  Vector mu;  // one entry per row of C
  QpStatus status = QpStatus::max_iterations;
  int iterations = 0;
  bool regularized = false;
};

// Cholesky can succeed on a numerically singular matrix; such factors give
// inaccurate Schur complements, so they are rejected in favour of the LU path.
bool well_conditioned(const Eigen::LLT<Matrix>& llt) {
  if (llt.rows() == 0) return true;
  const Vector d = llt.matrixLLT().diagonal();
  return d.minCoeff() > 1e-6 * d.maxCoeff();
}

// Cholesky factor of the leading nv x nv block of G with G^-1 applied to the
// constraint rows [E; C] on demand. Columns are cached because the working
// set changes by one row per iteration.
struct Factor {
  std::optional<Eigen::LLT<Matrix>> llt;  // empty when not positive definite
  Matrix cols;
  std::vector<char> have;

  Factor(const Matrix& G, int nv, int rows) : cols(nv, rows), have(rows, 0) {
    Eigen::LLT<Matrix> f(G.topLeftCorner(nv, nv));
    if (f.info() == Eigen::Success && well_conditioned(f)) llt = std::move(f);
  }

  const Matrix& apply(const Core& p, std::span<const int> rows) {
    const int me = static_cast<int>(p.E.rows());
    const int nv = static_cast<int>(cols.rows());
    for (int r : rows) {
      if (have[r]) continue;
      const Vector d = r < me ? Vector(p.E.row(r).head(nv).transpose())
                              : Vector(p.C.row(r - me).head(nv).transpose());
      cols.col(r) = llt->solve(d);
      have[r] = 1;
    }
    return cols;
  }
};

// Newton step and multipliers of the equality-constrained subproblem
//   G p + A' nu = -grad,  A p = 0,
// where A stacks the constraint rows `rows` of [E; C]. Uses the Schur
// complement A G^-1 A' when G has a Cholesky factor and falls back to a
// full-pivoting LU of the KKT matrix otherwise.
bool solve_eqp(const Core& core, const Matrix& G, Factor& factor, const std::vector<int>& rows,
               const Vector& grad, Vector& p, Vector& nu) {
  const int n = static_cast<int>(G.rows());
  const int m = static_cast<int>(rows.size());
  const int me = static_cast<int>(core.E.rows());
  Matrix A(m, n);
  for (int k = 0; k < m; ++k) {
    const int r = rows[k];
    A.row(k) = r < me ? core.E.row(r).head(n) : core.C.row(r - me).head(n);
  }
  if (factor.llt) {
    const Eigen::LLT<Matrix>& chol = *factor.llt;
    if (m == 0) {
      p = -chol.solve(grad);
      nu = Vector(0);
      return true;
    }
    const Matrix& cols = factor.apply(core, rows);
    Matrix GAt(n, m);
    for (int k = 0; k < m; ++k) GAt.col(k) = cols.col(rows[k]);
    const Matrix S = A * GAt;
    Eigen::LDLT<Matrix> ldlt(S);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() &&
        ldlt.vectorD().minCoeff() > 1e-13 * std::max(1.0, ldlt.vectorD().maxCoeff())) {
      // Solves G p + A' nu = r1, A p = r2 through the factors.
      auto schur = [&](const Vector& r1, const Vector& r2, Vector& dp, Vector& dnu) {
        const Vector Gr = chol.solve(r1);
        dnu = ldlt.solve(A * Gr - r2);
        dp = Gr - GAt * dnu;
      };
      schur(-grad, Vector::Zero(m), p, nu);
      Vector dp;
      Vector dnu;
      schur(-grad - G * p - A.transpose() * nu, -(A * p), dp, dnu);  // refinement
      p += dp;
      nu += dnu;
      return p.allFinite() && nu.allFinite();
    }
  }
  Matrix K = Matrix::Zero(n + m, n + m);
  K.topLeftCorner(n, n) = G;
  K.topRightCorner(n, m) = A.transpose();
  K.bottomLeftCorner(m, n) = A;
  Vector rhs = Vector::Zero(n + m);
  rhs.head(n) = -grad;
  Eigen::FullPivLU<Matrix> lu(K);
  if (!lu.isInvertible()) return false;
  Vector sol = lu.solve(rhs);
  sol += lu.solve(rhs - K * sol);  // one step of iterative refinement
  p = sol.head(n);
  nu = sol.tail(m);
  return true;
}

void run_active_set(const Core& p, CoreState& s, int max_iters, double reg) {
  const int n = static_cast<int>(p.c.size());
  const int me = static_cast<int>(p.E.rows());
  const int mc = static_cast<int>(p.C.rows());
  Matrix G = p.G;

  // Factors with the slack free (0) and fixed (1), built on first use.
  std::optional<Factor> factors[2];
  auto factor = [&](bool fixed) -> Factor& {
    auto& f = factors[fixed ? 1 : 0];
    if (!f) f.emplace(G, fixed ? n - 1 : n, me + mc);
    return *f;
  };

  bool at_minimizer = false;
  std::vector<char> in_working(mc, 0);
  for (int i : s.working) in_working[i] = 1;

  for (; s.iterations < max_iters; ++s.iterations) {
    const bool fixed = p.bound_row >= 0 && in_working[p.bound_row];
    std::vector<int> rows;
    std::vector<int> kkt_rows;  // indices into [E; C]
    for (int i = 0; i < me; ++i) kkt_rows.push_back(i);
    for (int i : s.working) {
      if (i == p.bound_row) continue;
      rows.push_back(i);
      kkt_rows.push_back(me + i);
    }
    const int nv = fixed ? n - 1 : n;
    const int mw = static_cast<int>(rows.size());
    const Vector grad = G * s.y + p.c;

    Vector pv;
    Vector nu;
    if (!solve_eqp(p, G.topLeftCorner(nv, nv), factor(fixed), kkt_rows, grad.head(nv), pv, nu)) {
      if (s.regularized) {
        s.status = QpStatus::singular;
        return;
      }
      G.diagonal().array() += reg;
      s.regularized = true;
      factors[0].reset();
      factors[1].reset();
      continue;
    }
    Vector step = Vector::Zero(n);
    step.head(nv) = pv;

    // Multipliers of the working rows, bound row included.
    std::vector<int> work_rows = rows;
    Vector work_nu(mw + (fixed ? 1 : 0));
    work_nu.head(mw) = nu.tail(mw);
    if (fixed) {
      double r = -grad[n - 1];
      for (int i = 0; i < me; ++i) r -= p.E(i, n - 1) * nu[i];
      for (int k = 0; k < mw; ++k) r -= p.C(rows[k], n - 1) * nu[me + k];
      work_nu[mw] = r / p.C(p.bound_row, n - 1);
      work_rows.push_back(p.bound_row);
    }

    const double y_scale = 1.0 + s.y.lpNorm<Eigen::Infinity>();
    // After a full unblocked step y already minimizes over the working set;
    // the recomputed step is rounding noise scaled by the slack penalty.
    if (at_minimizer || step.lpNorm<Eigen::Infinity>() <= 1e-12 * y_scale) {
      at_minimizer = false;
      int drop = -1;
      // Scale by the constraint multipliers only; the slack bound's multiplier
      // is of the order of the penalty and would hide real sign errors.
      const double nu_scale = mw > 0 ? work_nu.head(mw).lpNorm<Eigen::Infinity>() : 0.0;
      double most_negative = -1e-10 * (1.0 + nu_scale);
      for (int k = 0; k < work_nu.size(); ++k) {
        if (work_nu[k] < most_negative) {
          most_negative = work_nu[k];
          drop = work_rows[k];
        }
      }
      if (drop < 0) {
        s.nu_eq = nu.head(me);
        s.mu = Vector::Zero(mc);
        for (int k = 0; k < work_nu.size(); ++k) s.mu[work_rows[k]] = std::max(0.0, work_nu[k]);
        s.status = QpStatus::optimal;
        ++s.iterations;
        return;
      }
      s.working.erase(std::find(s.working.begin(), s.working.end(), drop));
      in_working[drop] = 0;
      continue;
    }

    double alpha = 1.0;
    int blocking = -1;
    const double step_norm = step.norm();
    const Vector Cs = p.C * step;
    const Vector Cy = p.C * s.y;
    for (int i = 0; i < mc; ++i) {
      if (in_working[i]) continue;
      const double ap = Cs[i];
      if (ap <= 1e-14 * p.C.row(i).norm() * step_norm) continue;
      const double room = std::max(0.0, p.h[i] - Cy[i]);
      const double t = room / ap;
      if (t < alpha) {
        alpha = t;
        blocking = i;
      }
    }
    s.y += alpha * step;
    at_minimizer = blocking < 0;
    if (blocking >= 0) {
      s.working.push_back(blocking);
      in_working[blocking] = 1;
    }
  }
  s.status = QpStatus::max_iterations;
}

// Rows of A that are linearly independent, in order of appearance.
std::vector<int> independent_rows(const Matrix& A, const std::vector<int>& candidates,
                                  const Matrix& base) {
  // Gram-Schmidt with one reorthogonalization pass; rows of Q are orthonormal.
  Matrix Q(base.rows() + static_cast<Eigen::Index>(candidates.size()), A.cols());
  int rank = 0;
  auto add = [&](const Vector& a) {
    const double scale = a.norm();
    if (scale == 0.0) return false;
    Vector r = a;
    for (int pass = 0; pass < 2; ++pass) {
      r -= Q.topRows(rank).transpose() * (Q.topRows(rank) * r);
    }
    const double len = r.norm();
    if (len <= 1e-10 * scale) return false;
    Q.row(rank++) = r / len;
    return true;
  };
  for (Eigen::Index i = 0; i < base.rows(); ++i) add(base.row(i).transpose());
  std::vector<int> kept;
  for (int idx : candidates) {
    if (add(A.row(idx).transpose())) kept.push_back(idx);
  }
  return kept;
}

// Minimizer of 1/2 x'Hx + g'x subject to A x = b, or nothing when the KKT
// matrix is singular even after regularizing H.
std::optional<Vector> seed_point(const Matrix& H, const Matrix& A, const Vector& g,
                                 const Vector& b, double reg) {
  const Eigen::Index n = H.rows();
  const Eigen::Index m = A.rows();
  Eigen::LLT<Matrix> chol(H);
  if (chol.info() == Eigen::Success && well_conditioned(chol)) {
    const Matrix HAt = chol.solve(A.transpose());
    Eigen::LDLT<Matrix> ldlt(A * HAt);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive() &&
        ldlt.vectorD().minCoeff() > 1e-13 * std::max(1.0, ldlt.vectorD().maxCoeff())) {
      const Vector Hg = chol.solve(g);
      const Vector nu = ldlt.solve(-(A * Hg) - b);
      return Vector(-Hg - HAt * nu);
    }
  }
  Matrix K = Matrix::Zero(n + m, n + m);
  K.topLeftCorner(n, n) = H;
  K.topRightCorner(n, m) = A.transpose();
  K.bottomLeftCorner(m, n) = A;
  Vector rhs(n + m);
  rhs << -g, b;
  Eigen::FullPivLU<Matrix> lu(K);
  if (!lu.isInvertible()) {
    K.topLeftCorner(n, n).diagonal().array() += reg;
    lu.compute(K);
  }
  if (!lu.isInvertible()) return std::nullopt;
  return Vector(lu.solve(rhs).head(n));
}

QpSolution solve_impl(const QpProblem& prob, double penalty, bool exact,
                      std::span<const int> seed, const QpOptions& opt) {
  const int n = prob.num_variables();
  const int me = static_cast<int>(prob.A_eq.rows());
  const int mi = static_cast<int>(prob.A_in.rows());
  if (prob.H.rows() != n || prob.H.cols() != n || prob.A_eq.cols() != n ||
      prob.A_in.cols() != n || prob.b_eq.size() != me || prob.b_in.size() != mi) {
    throw DimensionMismatch("qp: inconsistent problem dimensions");
  }

  QpSolution out;
  out.x = Vector::Zero(n);
  out.lambda_eq = Vector::Zero(me);
  out.mu_in = Vector::Zero(mi);

  // Independent, consistent equality rows.
  std::vector<int> eq_all(me);
  for (int i = 0; i < me; ++i) eq_all[i] = i;
  const std::vector<int> eq_rows = independent_rows(prob.A_eq, eq_all, Matrix(0, n));
  Matrix A_eq(eq_rows.size(), n);
  Vector b_eq(eq_rows.size());
  for (std::size_t k = 0; k < eq_rows.size(); ++k) {
    A_eq.row(k) = prob.A_eq.row(eq_rows[k]);
    b_eq[k] = prob.b_eq[eq_rows[k]];
  }
  Vector x0 = Vector::Zero(n);
  if (me > 0) {
    x0 = prob.A_eq.completeOrthogonalDecomposition().solve(prob.b_eq);
    const double resid = (prob.A_eq * x0 - prob.b_eq).lpNorm<Eigen::Infinity>();
    if (resid > 1e-9 * (1.0 + prob.b_eq.lpNorm<Eigen::Infinity>())) {
      out.status = QpStatus::infeasible;
      return out;
    }
  }

  Core core;
  core.G = Matrix::Zero(n + 1, n + 1);
  core.G.topLeftCorner(n, n) = 0.5 * (prob.H + prob.H.transpose());
  core.G(n, n) = 1.0;
  core.c = Vector::Zero(n + 1);
  core.c.head(n) = prob.g;
  core.c[n] = penalty;
  core.E = Matrix::Zero(A_eq.rows(), n + 1);
  core.E.leftCols(n) = A_eq;
  core.f = b_eq;
  core.C = Matrix::Zero(mi + 1, n + 1);
  core.C.topLeftCorner(mi, n) = prob.A_in;
  core.C.block(0, n, mi, 1).setConstant(-1.0);
  core.C(mi, n) = -1.0;  // t >= 0
  core.h = Vector::Zero(mi + 1);
  core.h.head(mi) = prob.b_in;
  const int slack_row = mi;
  core.bound_row = slack_row;

  CoreState state;
  bool seeded = false;

  if (!seed.empty()) {
    std::vector<int> candidates;
    for (int i : seed) {
      if (i >= 0 && i < mi &&
          std::find(candidates.begin(), candidates.end(), i) == candidates.end()) {
        candidates.push_back(i);
      }
    }
    const std::vector<int> rows = independent_rows(prob.A_in, candidates, A_eq);
    if (!rows.empty()) {
      // Equality-constrained minimizer with the seed rows held active.
      const int m = static_cast<int>(A_eq.rows() + rows.size());
      Matrix A(m, n);
      Vector b(m);
      A.topRows(A_eq.rows()) = A_eq;
      b.head(A_eq.rows()) = b_eq;
      for (std::size_t k = 0; k < rows.size(); ++k) {
        A.row(A_eq.rows() + k) = prob.A_in.row(rows[k]);
        b[A_eq.rows() + k] = prob.b_in[rows[k]];
      }
      std::optional<Vector> x = seed_point(core.G.topLeftCorner(n, n), A, prob.g, b,
                                           opt.regularization);
      if (x) {
        const Vector& xs = *x;
        const double viol = mi > 0 ? (prob.A_in * xs - prob.b_in).maxCoeff() : 0.0;
        if (viol <= opt.feasibility_tol) {
          state.y = Vector::Zero(n + 1);
          state.y.head(n) = xs;
          state.working = rows;
          state.working.push_back(slack_row);
          seeded = true;
        }
      }
    }
  }

  if (!seeded) {
    state.y = Vector::Zero(n + 1);
    state.y.head(n) = x0;
    const double t0 = mi > 0 ? std::max(0.0, (prob.A_in * x0 - prob.b_in).maxCoeff()) : 0.0;
    state.y[n] = t0;
    if (t0 == 0.0) state.working.push_back(slack_row);
  }

  double m_penalty = penalty;
  for (int attempt = 0;; ++attempt) {
    run_active_set(core, state, opt.max_iters, opt.regularization);
    if (!exact || state.status != QpStatus::optimal) break;
    const double t = state.y[n];
    if (t <= opt.feasibility_tol) break;
    if (attempt == 2) {
      state.status = QpStatus::infeasible;
      break;
    }
    // Multipliers exceeded the penalty; raise it and continue from here.
    m_penalty *= 1e4;
    core.c[n] = m_penalty;
  }

  out.x = state.y.head(n);
  out.slack = std::max(0.0, state.y[n]);
  out.status = state.status;
  out.iterations = state.iterations;
  out.regularized = state.regularized;
  if (state.status == QpStatus::optimal) {
    for (std::size_t k = 0; k < eq_rows.size(); ++k) out.lambda_eq[eq_rows[k]] = state.nu_eq[k];
    out.mu_in = state.mu.head(mi);
  }
  for (int i : state.working) {
    if (i < mi) out.active.push_back(i);
  }
  std::sort(out.active.begin(), out.active.end());
  return out;
}

}  // namespace

std::string_view to_string(QpStatus status) {
  switch (status) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::infeasible: return "infeasible";
    case QpStatus::max_iterations: return "max_iterations";
    case QpStatus::singular: return "singular";
  }
  return "unknown";
}

QpSolution solve_qp(const QpProblem& problem, std::span<const int> seed,
                    const QpOptions& options) {
  return solve_impl(problem, options.big_m, true, seed, options);
}

QpSolution solve_elastic_qp(const QpProblem& problem, double penalty, std::span<const int> seed,
                            const QpOptions& options) {
  if (!(penalty > 0.0)) throw InvalidParameter("elastic penalty must be positive");
  return solve_impl(problem, penalty, false, seed, options);
}

}  // namespace splitmpc
