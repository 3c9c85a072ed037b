#include "splitmpc/scenario.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <limits>

#include "splitmpc/errors.hpp"

namespace splitmpc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Matrix diag(std::initializer_list<double> values) {
  Vector d(static_cast<Eigen::Index>(values.size()));
  int i = 0;
  for (double v : values) d[i++] = v;
  return d.asDiagonal();
}

Vector vec(std::initializer_list<double> values) {
  Vector out(static_cast<Eigen::Index>(values.size()));
  int i = 0;
  for (double v : values) out[i++] = v;
  return out;
}

bool same_matrix(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

bool same_box(const BoxSet& a, const BoxSet& b) {
  return same_matrix(a.lower, b.lower) && same_matrix(a.upper, b.upper);
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key, fmt::format("invalid '{}': {}", key, what));
}

void require_positive(double v, const std::string& key) {
  require(std::isfinite(v) && v > 0.0, key, "must be a positive finite number");
}

void require_box(const BoxSet& box, int dim, const std::string& key) {
  require(box.lower.size() == dim && box.upper.size() == dim, key,
          fmt::format("expected {} components", dim));
  for (int i = 0; i < dim; ++i) {
    require(!std::isnan(box.lower[i]) && !std::isnan(box.upper[i]) &&
                box.lower[i] <= box.upper[i],
            key, fmt::format("lower bound exceeds upper bound at component {}", i));
  }
}

void require_psd(const Matrix& m, int dim, const std::string& key) {
  require(m.rows() == dim && m.cols() == dim, key, fmt::format("expected a {0}x{0} matrix", dim));
  require(m.allFinite(), key, "entries must be finite");
  require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12, key, "must be symmetric");
  const double min_eig = Eigen::SelfAdjointEigenSolver<Matrix>(m).eigenvalues().minCoeff();
  require(min_eig >= -1e-12, key, "must be positive semidefinite");
}

}  // namespace

std::string_view to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::standard: return "standard";
    case Scheme::granular: return "granular";
    case Scheme::nush: return "nush";
    case Scheme::proposed: return "proposed";
  }
  return "unknown";
}

SchemeSpec SchemeSpec::parse(std::string_view text) {
  auto unknown = [&] {
    return ConfigError("schemes", fmt::format("unknown scheme '{}'", text));
  };
  if (text == "granular") return {Scheme::granular, {}, {}};
  if (text == "nush") return {Scheme::nush, {}, {}};
  if (text == "proposed") return {Scheme::proposed, {}, {}};
  if (text == "standard") return {Scheme::standard, {}, {}};

  constexpr std::string_view prefix = "standard-";
  if (!text.starts_with(prefix)) throw unknown();
  std::string_view rest = text.substr(prefix.size());

  SchemeSpec spec{Scheme::standard, {}, {}};
  const auto at = rest.find('@');
  const std::string_view steps_part = rest.substr(0, at);
  int steps = 0;
  auto [p, ec] = std::from_chars(steps_part.data(), steps_part.data() + steps_part.size(), steps);
  if (ec != std::errc{} || p != steps_part.data() + steps_part.size() || steps < 1) throw unknown();
  spec.steps = steps;

  if (at != std::string_view::npos) {
    const std::string dt_part(rest.substr(at + 1));
    char* end = nullptr;
    const double dt = std::strtod(dt_part.c_str(), &end);
    if (dt_part.empty() || end != dt_part.c_str() + dt_part.size() || !(dt > 0.0)) throw unknown();
    spec.dt = dt;
  }
  return spec;
}

std::string SchemeSpec::to_string() const {
  std::string out(splitmpc::to_string(scheme));
  if (steps) out += fmt::format("-{}", *steps);
  if (dt) out += fmt::format("@{}", *dt);
  return out;
}

Scenario Scenario::defaults() {
  Scenario s;
  // x = [p_x, v_x, p_y, v_y]; p_x is unconstrained.
  s.detailed_state_box = make_box(vec({-kInf, -3.0, -5.0, -3.0}), vec({kInf, 3.0, 5.0, 3.0}));
  s.detailed_input_box = make_box(vec({-3.0, -0.5}), vec({3.0, 0.5}));
  s.coarse_state_box = make_box(vec({-kInf, -5.0}), vec({kInf, 5.0}));
  s.coarse_input_box = make_box(vec({-3.0, -3.0}), vec({3.0, 3.0}));
  s.obstacles = {make_obstacle(1.5, 1.5, 10.0, -0.1), make_obstacle(5.0, 1.4, 15.2, 1.3)};
  s.ci = ControlInvariantSet{true, -5.0, 5.0};
  s.Q_s = diag({1.0, 0.0, 5.0, 0.0});
  s.R_s = diag({0.1, 0.1});
  s.Q_f = diag({1.0, 5.0});
  s.R_f = diag({0.01, 0.01});
  s.x_ref = vec({20.0, 0.0, 0.0, 0.0});
  s.x0 = vec({0.0, 0.0, 0.0, 0.0});
  s.schemes = {SchemeSpec::parse("standard"), SchemeSpec::parse("granular"),
               SchemeSpec::parse("proposed")};
  return s;
}

Vector Scenario::z_ref() const {
  return project(make_default_projection(), x_ref, Vector::Zero(detailed::kInputDim)).z;
}

bool operator==(const Scenario& a, const Scenario& b) {
  return a.mass == b.mass && a.dt1 == b.dt1 && a.dt2 == b.dt2 &&
         a.standard_steps == b.standard_steps && a.short_steps == b.short_steps &&
         a.granular_long_steps == b.granular_long_steps && a.long_steps == b.long_steps &&
         same_box(a.detailed_state_box, b.detailed_state_box) &&
         same_box(a.detailed_input_box, b.detailed_input_box) &&
         same_box(a.coarse_state_box, b.coarse_state_box) &&
         same_box(a.coarse_input_box, b.coarse_input_box) && a.obstacles == b.obstacles &&
         a.ci == b.ci && same_matrix(a.Q_s, b.Q_s) && same_matrix(a.R_s, b.R_s) &&
         same_matrix(a.Q_f, b.Q_f) && same_matrix(a.R_f, b.R_f) &&
         same_matrix(a.x_ref, b.x_ref) && same_matrix(a.x0, b.x0) && a.steps == b.steps &&
         a.schemes == b.schemes && a.solver == b.solver && a.seed_policy == b.seed_policy;
}

void validate(const Scenario& s) {
  require_positive(s.mass, "mass");
  require_positive(s.dt1, "dt1");
  require_positive(s.dt2, "dt2");
  require(s.standard_steps >= 1, "horizon.N", "must be at least 1");
  require(s.short_steps >= 1, "horizon.k_s", "must be at least 1");
  require(s.granular_long_steps >= 1, "horizon.granular_long_steps", "must be at least 1");
  require(s.long_steps >= 1, "horizon.long_steps", "must be at least 1");

  require_box(s.detailed_state_box, detailed::kStateDim, "detailed.state");
  require_box(s.detailed_input_box, detailed::kInputDim, "detailed.input");
  require_box(s.coarse_state_box, coarse::kStateDim, "coarse.state");
  require_box(s.coarse_input_box, coarse::kInputDim, "coarse.input");

  for (std::size_t i = 0; i < s.obstacles.size(); ++i) {
    const auto& o = s.obstacles[i];
    const std::string key = fmt::format("obstacles[{}]", i);
    require(std::isfinite(o.a) && o.a > 0.0 && std::isfinite(o.b) && o.b > 0.0, key,
            "semi-axes must be positive");
    require(std::isfinite(o.cx) && std::isfinite(o.cy), key, "center must be finite");
  }
  require(!std::isnan(s.ci.py_lower) && !std::isnan(s.ci.py_upper) &&
              s.ci.py_lower <= s.ci.py_upper,
          "ci.p_y", "position box is empty");

  require_psd(s.Q_s, detailed::kStateDim, "weights.Q_s");
  require_psd(s.R_s, detailed::kInputDim, "weights.R_s");
  require_psd(s.Q_f, coarse::kStateDim, "weights.Q_f");
  require_psd(s.R_f, coarse::kInputDim, "weights.R_f");

  require(s.x_ref.size() == detailed::kStateDim && s.x_ref.allFinite(), "x_ref",
          "expected 4 finite components");
  require(s.x0.size() == detailed::kStateDim && s.x0.allFinite(), "x0",
          "expected 4 finite components");
  require(s.steps >= 1, "steps", "must be at least 1");

  const auto& c = s.solver;
  require(c.kkt_tol > 0.0 && c.kkt_tol < 1.0, "solver.kkt_tol", "must lie in (0, 1)");
  require(c.constraint_tol > 0.0 && c.constraint_tol < 1.0, "solver.constraint_tol",
          "must lie in (0, 1)");
  require(c.max_sqp_iters >= 1, "solver.max_sqp_iters", "must be at least 1");
  require(c.max_qp_iters >= 1, "solver.max_qp_iters", "must be at least 1");
  require(c.penalty_growth > 1.0, "solver.penalty_growth", "must exceed 1");
  require(c.line_search_shrink > 0.0 && c.line_search_shrink < 1.0, "solver.line_search_shrink",
          "must lie in (0, 1)");
  require(c.min_step > 0.0 && c.min_step < 1.0, "solver.min_step", "must lie in (0, 1)");
}

std::vector<SchemeSpec> all_table_schemes() {
  std::vector<SchemeSpec> out;
  for (const char* tag : {"standard-10", "standard-13", "standard-16", "standard-8@0.4", "nush",
                          "granular", "proposed"}) {
    out.push_back(SchemeSpec::parse(tag));
  }
  return out;
}

}  // namespace splitmpc
