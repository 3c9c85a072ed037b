#include "splitmpc/bench.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "splitmpc/errors.hpp"

namespace splitmpc {
namespace {

using nlohmann::json;

constexpr double kInf = std::numeric_limits<double>::infinity();

// --- reading ---------------------------------------------------------------

std::string join(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

void reject_unknown(const json& obj, const std::string& where,
                    std::initializer_list<const char*> known) {
  const std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) {
      const std::string full = join(where, key);
      throw ConfigError(full, fmt::format("unknown key '{}'", full));
    }
  }
}

const json& require_object(const json& j, const std::string& key) {
  if (!j.is_object()) throw ConfigError(key, fmt::format("'{}' must be an object", key));
  return j;
}

double read_number(const json& j, const std::string& key) {
  if (!j.is_number()) throw ConfigError(key, fmt::format("'{}' must be a number", key));
  return j.get<double>();
}

int read_int(const json& j, const std::string& key) {
  if (!j.is_number_integer()) {
    throw ConfigError(key, fmt::format("'{}' must be an integer", key));
  }
  return j.get<int>();
}

Vector read_vector(const json& j, const std::string& key, int dim) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim) {
    throw ConfigError(key, fmt::format("'{}' must be an array of {} numbers", key, dim));
  }
  Vector v(dim);
  for (int i = 0; i < dim; ++i) v[i] = read_number(j[i], fmt::format("{}[{}]", key, i));
  return v;
}

// null entries are unbounded sides.
Vector read_bounds(const json& j, const std::string& key, int dim, double missing) {
  if (!j.is_array() || static_cast<int>(j.size()) != dim) {
    throw ConfigError(key, fmt::format("'{}' must be an array of {} numbers or nulls", key, dim));
  }
  Vector v(dim);
  for (int i = 0; i < dim; ++i) {
    v[i] = j[i].is_null() ? missing : read_number(j[i], fmt::format("{}[{}]", key, i));
  }
  return v;
}

// Either the diagonal as a flat array or the full matrix as rows.
Matrix read_weight(const json& j, const std::string& key, int dim) {
  if (j.is_array() && static_cast<int>(j.size()) == dim &&
      std::all_of(j.begin(), j.end(), [](const json& e) { return e.is_number(); })) {
    return read_vector(j, key, dim).asDiagonal();
  }
  if (!j.is_array() || static_cast<int>(j.size()) != dim) {
    throw ConfigError(key, fmt::format("'{}' must be a {}-vector diagonal or a {}x{} matrix", key,
                                       dim, dim, dim));
  }
  Matrix m(dim, dim);
  for (int r = 0; r < dim; ++r) {
    m.row(r) = read_vector(j[r], fmt::format("{}[{}]", key, r), dim).transpose();
  }
  return m;
}

void read_box_group(const json& j, const std::string& key, int nx, int nu, BoxSet& state,
                    BoxSet& input) {
  require_object(j, key);
  reject_unknown(j, key, {"state_lower", "state_upper", "input_lower", "input_upper"});
  if (j.contains("state_lower")) {
    state.lower = read_bounds(j["state_lower"], key + ".state_lower", nx, -kInf);
  }
  if (j.contains("state_upper")) {
    state.upper = read_bounds(j["state_upper"], key + ".state_upper", nx, kInf);
  }
  if (j.contains("input_lower")) {
    input.lower = read_bounds(j["input_lower"], key + ".input_lower", nu, -kInf);
  }
  if (j.contains("input_upper")) {
    input.upper = read_bounds(j["input_upper"], key + ".input_upper", nu, kInf);
  }
}

Scenario from_json(const json& root) {
  Scenario s = Scenario::defaults();
  require_object(root, "(root)");
  reject_unknown(root, "",
                 {"version", "mass", "dt1", "dt2", "horizon", "detailed", "coarse", "obstacles",
                  "ci", "weights", "x_ref", "x0", "steps", "schemes", "solver", "seed_policy"});

  if (root.contains("version") && read_int(root["version"], "version") != kScenarioVersion) {
    throw ConfigError("version", fmt::format("unsupported scenario version (expected {})",
                                             kScenarioVersion));
  }
  if (root.contains("mass")) s.mass = read_number(root["mass"], "mass");
  if (root.contains("dt1")) s.dt1 = read_number(root["dt1"], "dt1");
  if (root.contains("dt2")) s.dt2 = read_number(root["dt2"], "dt2");

  if (root.contains("horizon")) {
    const json& h = require_object(root["horizon"], "horizon");
    reject_unknown(h, "horizon", {"N", "k_s", "granular_long_steps", "long_steps"});
    if (h.contains("N")) s.standard_steps = read_int(h["N"], "horizon.N");
    if (h.contains("k_s")) s.short_steps = read_int(h["k_s"], "horizon.k_s");
    if (h.contains("granular_long_steps")) {
      s.granular_long_steps = read_int(h["granular_long_steps"], "horizon.granular_long_steps");
    }
    if (h.contains("long_steps")) s.long_steps = read_int(h["long_steps"], "horizon.long_steps");
  }

  if (root.contains("detailed")) {
    read_box_group(root["detailed"], "detailed", detailed::kStateDim, detailed::kInputDim,
                   s.detailed_state_box, s.detailed_input_box);
  }
  if (root.contains("coarse")) {
    read_box_group(root["coarse"], "coarse", coarse::kStateDim, coarse::kInputDim,
                   s.coarse_state_box, s.coarse_input_box);
  }

  if (root.contains("obstacles")) {
    const json& list = root["obstacles"];
    if (!list.is_array()) throw ConfigError("obstacles", "'obstacles' must be an array");
    s.obstacles.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string key = fmt::format("obstacles[{}]", i);
      const json& o = require_object(list[i], key);
      reject_unknown(o, key, {"a", "b", "cx", "cy"});
      for (const char* field : {"a", "b", "cx", "cy"}) {
        if (!o.contains(field)) {
          throw ConfigError(key + "." + field, fmt::format("missing '{}.{}'", key, field));
        }
      }
      s.obstacles.push_back(EllipsoidObstacle{
          read_number(o["a"], key + ".a"), read_number(o["b"], key + ".b"),
          read_number(o["cx"], key + ".cx"), read_number(o["cy"], key + ".cy")});
    }
  }

  if (root.contains("ci")) {
    const json& c = require_object(root["ci"], "ci");
    reject_unknown(c, "ci", {"zero_velocity", "p_y"});
    if (c.contains("zero_velocity")) {
      if (!c["zero_velocity"].is_boolean()) {
        throw ConfigError("ci.zero_velocity", "'ci.zero_velocity' must be a boolean");
      }
      s.ci.zero_velocity = c["zero_velocity"].get<bool>();
    }
    if (c.contains("p_y")) {
      const Vector py = read_vector(c["p_y"], "ci.p_y", 2);
      s.ci.py_lower = py[0];
      s.ci.py_upper = py[1];
    }
  }

  if (root.contains("weights")) {
    const json& w = require_object(root["weights"], "weights");
    reject_unknown(w, "weights", {"Q_s", "R_s", "Q_f", "R_f"});
    if (w.contains("Q_s")) s.Q_s = read_weight(w["Q_s"], "weights.Q_s", detailed::kStateDim);
    if (w.contains("R_s")) s.R_s = read_weight(w["R_s"], "weights.R_s", detailed::kInputDim);
    if (w.contains("Q_f")) s.Q_f = read_weight(w["Q_f"], "weights.Q_f", coarse::kStateDim);
    if (w.contains("R_f")) s.R_f = read_weight(w["R_f"], "weights.R_f", coarse::kInputDim);
  }

  if (root.contains("x_ref")) s.x_ref = read_vector(root["x_ref"], "x_ref", detailed::kStateDim);
  if (root.contains("x0")) s.x0 = read_vector(root["x0"], "x0", detailed::kStateDim);
  if (root.contains("steps")) s.steps = read_int(root["steps"], "steps");

  if (root.contains("schemes")) {
    const json& list = root["schemes"];
    if (!list.is_array()) throw ConfigError("schemes", "'schemes' must be an array of strings");
    s.schemes.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (!list[i].is_string()) {
        throw ConfigError("schemes", fmt::format("'schemes[{}]' must be a string", i));
      }
      s.schemes.push_back(SchemeSpec::parse(list[i].get<std::string>()));
    }
  }

  if (root.contains("solver")) {
    const json& c = require_object(root["solver"], "solver");
    reject_unknown(c, "solver",
                   {"kkt_tol", "constraint_tol", "max_sqp_iters", "max_qp_iters",
                    "penalty_growth", "line_search_shrink", "min_step"});
    auto& cfg = s.solver;
    if (c.contains("kkt_tol")) cfg.kkt_tol = read_number(c["kkt_tol"], "solver.kkt_tol");
    if (c.contains("constraint_tol")) {
      cfg.constraint_tol = read_number(c["constraint_tol"], "solver.constraint_tol");
    }
    if (c.contains("max_sqp_iters")) {
      cfg.max_sqp_iters = read_int(c["max_sqp_iters"], "solver.max_sqp_iters");
    }
    if (c.contains("max_qp_iters")) {
      cfg.max_qp_iters = read_int(c["max_qp_iters"], "solver.max_qp_iters");
    }
    if (c.contains("penalty_growth")) {
      cfg.penalty_growth = read_number(c["penalty_growth"], "solver.penalty_growth");
    }
    if (c.contains("line_search_shrink")) {
      cfg.line_search_shrink = read_number(c["line_search_shrink"], "solver.line_search_shrink");
    }
    if (c.contains("min_step")) cfg.min_step = read_number(c["min_step"], "solver.min_step");
  }

  if (root.contains("seed_policy")) {
    if (!root["seed_policy"].is_string()) {
      throw ConfigError("seed_policy", "'seed_policy' must be a string");
    }
    try {
      s.seed_policy = parse_seed_policy(root["seed_policy"].get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError("seed_policy", e.what());
    }
  }

  validate(s);
  return s;
}

// --- writing ---------------------------------------------------------------

json bounds_json(const Vector& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) {
    if (std::isinf(v[i])) {
      out.push_back(nullptr);
    } else {
      out.push_back(v[i]);
    }
  }
  return out;
}

json vector_json(const Vector& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

json weight_json(const Matrix& m) {
  if (m.isDiagonal(0.0)) return vector_json(m.diagonal());
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) rows.push_back(vector_json(m.row(r).transpose()));
  return rows;
}

json box_group_json(const BoxSet& state, const BoxSet& input) {
  return json{{"state_lower", bounds_json(state.lower)},
              {"state_upper", bounds_json(state.upper)},
              {"input_lower", bounds_json(input.lower)},
              {"input_upper", bounds_json(input.upper)}};
}

json to_json(const Scenario& s) {
  json obstacles = json::array();
  for (const auto& o : s.obstacles) {
    obstacles.push_back(json{{"a", o.a}, {"b", o.b}, {"cx", o.cx}, {"cy", o.cy}});
  }
  json schemes = json::array();
  for (const auto& spec : s.schemes) schemes.push_back(spec.to_string());
  const auto& c = s.solver;
  return json{
      {"version", kScenarioVersion},
      {"mass", s.mass},
      {"dt1", s.dt1},
      {"dt2", s.dt2},
      {"horizon",
       {{"N", s.standard_steps},
        {"k_s", s.short_steps},
        {"granular_long_steps", s.granular_long_steps},
        {"long_steps", s.long_steps}}},
      {"detailed", box_group_json(s.detailed_state_box, s.detailed_input_box)},
      {"coarse", box_group_json(s.coarse_state_box, s.coarse_input_box)},
      {"obstacles", obstacles},
      {"ci", {{"zero_velocity", s.ci.zero_velocity}, {"p_y", {s.ci.py_lower, s.ci.py_upper}}}},
      {"weights",
       {{"Q_s", weight_json(s.Q_s)},
        {"R_s", weight_json(s.R_s)},
        {"Q_f", weight_json(s.Q_f)},
        {"R_f", weight_json(s.R_f)}}},
      {"x_ref", vector_json(s.x_ref)},
      {"x0", vector_json(s.x0)},
      {"steps", s.steps},
      {"schemes", schemes},
      {"solver",
       {{"kkt_tol", c.kkt_tol},
        {"constraint_tol", c.constraint_tol},
        {"max_sqp_iters", c.max_sqp_iters},
        {"max_qp_iters", c.max_qp_iters},
        {"penalty_growth", c.penalty_growth},
        {"line_search_shrink", c.line_search_shrink},
        {"min_step", c.min_step}}},
      {"seed_policy", std::string(to_string(s.seed_policy))},
  };
}

// JSON has no NaN; failed numbers become null.
json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json summary_object(const RunResult& r) {
  return json{{"scheme", r.label},
              {"V_star", number_or_null(r.V_star)},
              {"median_solve_ms", number_or_null(r.median_solve_ms)},
              {"n_decision_vars", r.n_decision_vars},
              {"horizon_span_s", number_or_null(r.horizon_span_s)},
              {"converged_fraction", number_or_null(r.converged_fraction)}};
}

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  f << content;
  if (!f) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
}

void prepare_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw std::runtime_error(fmt::format("cannot create output directory '{}'", dir.string()));
  }
}

std::string file_stem(const std::string& label) {
  std::string out = label;
  std::replace(out.begin(), out.end(), '@', '_');
  return out;
}

ReportRow describe(const Scenario& scenario, const SchemeSpec& spec) {
  ReportRow row;
  row.scheme = spec.to_string();
  switch (spec.scheme) {
    case Scheme::standard:
      row.k_s = spec.steps.value_or(scenario.standard_steps);
      row.dt1 = spec.dt.value_or(scenario.dt1);
      break;
    case Scheme::granular:
      row.k_s = scenario.short_steps;
      row.dt1 = scenario.dt1;
      row.long_steps = scenario.granular_long_steps;
      row.long_model = "cor.";
      row.dt2 = scenario.dt1;
      break;
    case Scheme::nush:
      row.k_s = scenario.short_steps;
      row.dt1 = scenario.dt1;
      row.long_steps = scenario.long_steps;
      row.long_model = "det.";
      row.dt2 = scenario.dt2;
      break;
    case Scheme::proposed:
      row.k_s = scenario.short_steps;
      row.dt1 = scenario.dt1;
      row.long_steps = scenario.long_steps;
      row.long_model = "cor.";
      row.dt2 = scenario.dt2;
      break;
  }
  return row;
}

}  // namespace

Scenario parse_scenario_text(std::string_view text) {
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError("", fmt::format("malformed JSON: {}", e.what()));
  }
  return from_json(root);
}

Scenario parse_scenario(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("", fmt::format("cannot open scenario file '{}'", path.string()));
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_scenario_text(buf.str());
}

std::string serialize_scenario(const Scenario& scenario) { return to_json(scenario).dump(2); }

std::string_view to_string(SeedPolicy policy) {
  return policy == SeedPolicy::warm ? "warm" : "warm+reflect";
}

SeedPolicy parse_seed_policy(std::string_view text) {
  if (text == "warm") return SeedPolicy::warm;
  if (text == "warm+reflect") return SeedPolicy::warm_reflect;
  throw InvalidParameter(fmt::format("unknown seed policy '{}'", text));
}

RunResult run_scheme(const Scenario& scenario, const SchemeSpec& spec, std::optional<int> steps) {
  const HorizonPlan plan = build_plan(spec, scenario);
  ClosedLoopOptions options;
  options.plant = make_detailed_model(scenario.dt1, scenario.mass);
  options.realized = QuadraticCost{scenario.Q_s, scenario.R_s, scenario.x_ref};
  options.seeds = scenario.seed_policy;

  RunResult r;
  r.label = plan.label;
  r.trace = closed_loop(plan, scenario.x0, steps.value_or(scenario.steps), scenario.solver,
                        options);
  r.V_star = realized_cost(r.trace, *options.realized);
  std::vector<double> times;
  for (const auto& rec : r.trace.records) times.push_back(rec.solve_time_ms);
  r.median_solve_ms = median(times);
  r.mean_solve_ms = std::accumulate(times.begin(), times.end(), 0.0) /
                    static_cast<double>(std::max<std::size_t>(times.size(), 1));
  r.n_decision_vars = count_decision_variables(plan);
  r.horizon_span_s = horizon_span(plan);
  r.converged_fraction = r.trace.converged_fraction();
  return r;
}

ComparisonReport compare_schemes(const Scenario& scenario, const std::vector<SchemeSpec>& schemes,
                                 std::optional<int> steps) {
  if (schemes.empty()) throw InvalidParameter("compare: no schemes requested");
  ComparisonReport report;
  for (const auto& spec : schemes) {
    ReportRow row = describe(scenario, spec);
    try {
      row.result = run_scheme(scenario, spec, steps);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

void write_trace_csv(std::ostream& os, const ClosedLoopTrace& trace) {
  os << "step,t,p_x,v_x,p_y,v_y,F_x,F_y,stage_cost,solver_status,sqp_iters,solve_time_ms\n";
  for (const auto& r : trace.records) {
    os << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", r.step, r.t, r.state[0], r.state[1],
                      r.state[2], r.state[3], r.input[0], r.input[1], r.stage_cost,
                      to_string(r.status), r.sqp_iters, r.solve_time_ms);
  }
}

std::string summary_json(const RunResult& result) { return summary_object(result).dump(2); }

std::string report_json(const ComparisonReport& report) {
  json rows = json::array();
  for (const auto& row : report.rows) {
    json j{{"scheme", row.scheme},
           {"k_s", row.k_s},
           {"dt1", row.dt1},
           {"long_steps", row.long_steps},
           {"long_model", row.long_model},
           {"dt2", row.dt2}};
    if (row.result) {
      j.update(summary_object(*row.result));
      j["scheme"] = row.scheme;
      j["mean_solve_ms"] = number_or_null(row.result->mean_solve_ms);
    } else {
      j["error"] = row.error;
    }
    rows.push_back(std::move(j));
  }
  return json{{"rows", rows}}.dump(2);
}

std::string report_table(const ComparisonReport& report) {
  std::string out = fmt::format("{:<16} {:>4} {:>5} {:>10} {:>5} {:>10} {:>10} {:>10} {:>5} {:>6}\n",
                                "scheme", "k_s", "dt1", "long", "dt2", "V*", "median_ms",
                                "mean_ms", "vars", "conv");
  for (const auto& row : report.rows) {
    const std::string long_seg =
        row.long_steps > 0 ? fmt::format("{} ({})", row.long_steps, row.long_model) : "";
    const std::string dt2 = row.long_steps > 0 ? fmt::format("{}", row.dt2) : "";
    if (row.result) {
      const auto& r = *row.result;
      out += fmt::format("{:<16} {:>4} {:>5} {:>10} {:>5} {:>10.1f} {:>10.3f} {:>10.3f} {:>5} {:>6.2f}\n",
                         row.scheme, row.k_s, row.dt1, long_seg, dt2, r.V_star, r.median_solve_ms,
                         r.mean_solve_ms, r.n_decision_vars, r.converged_fraction);
    } else {
      out += fmt::format("{:<16} {:>4} {:>5} {:>10} {:>5} failed: {}\n", row.scheme, row.k_s,
                         row.dt1, long_seg, dt2, row.error);
    }
  }
  return out;
}

CertifyResult certify_scheme(const Scenario& scenario, const SchemeSpec& spec,
                             std::optional<int> steps) {
  const HorizonPlan plan = build_plan(spec, scenario);
  if (!plan.split()) throw InvalidParameter("certify: scheme has a single horizon segment");

  CertifyResult result;
  std::optional<OcpSolution> prev;
  auto check = [&](int step, const Vector& x) {
    const FeasibilityCertificate cert = certify_recursive_feasibility(*prev, plan, x);
    result.records.push_back(CertificateRecord{step - 1, cert.valid, cert.max_violation});
    if (!cert.valid && !result.first_failure) result.first_failure = step - 1;
  };

  ClosedLoopOptions options;
  options.plant = make_detailed_model(scenario.dt1, scenario.mass);
  options.realized = QuadraticCost{scenario.Q_s, scenario.R_s, scenario.x_ref};
  options.seeds = scenario.seed_policy;
  options.on_step = [&](int k, const Vector& x, const OcpSolution& sol) {
    if (prev) check(k, x);
    prev = sol;
  };
  const ClosedLoopTrace trace =
      closed_loop(plan, scenario.x0, steps.value_or(scenario.steps), scenario.solver, options);
  check(static_cast<int>(trace.records.size()), trace.final_state);
  return result;
}

int run_command(const Scenario& scenario, const SchemeSpec& spec,
                const std::optional<std::filesystem::path>& out_dir, std::optional<int> steps,
                std::ostream& out) {
  if (out_dir) prepare_dir(*out_dir);
  const RunResult r = run_scheme(scenario, spec, steps);
  out << fmt::format("{}: V* = {}, median solve {:.3f} ms, mean solve {:.3f} ms, converged {:.0f}%\n",
                     r.label, r.V_star, r.median_solve_ms, r.mean_solve_ms,
                     100.0 * r.converged_fraction);
  if (out_dir) {
    std::ostringstream csv;
    write_trace_csv(csv, r.trace);
    const std::string stem = file_stem(r.label);
    write_file(*out_dir / (stem + ".csv"), csv.str());
    write_file(*out_dir / (stem + ".summary.json"), summary_json(r) + "\n");
  }
  return kExitOk;
}

int compare_command(const Scenario& scenario, const std::vector<SchemeSpec>& schemes,
                    const std::optional<std::filesystem::path>& out_dir, std::optional<int> steps,
                    std::ostream& out) {
  if (out_dir) prepare_dir(*out_dir);
  const ComparisonReport report = compare_schemes(scenario, schemes, steps);
  out << report_table(report);
  if (out_dir) {
    write_file(*out_dir / "report.json", report_json(report) + "\n");
    write_file(*out_dir / "report.txt", report_table(report));
    for (const auto& row : report.rows) {
      if (!row.result) continue;
      std::ostringstream csv;
      write_trace_csv(csv, row.result->trace);
      write_file(*out_dir / (file_stem(row.result->label) + ".csv"), csv.str());
    }
  }
  const bool any_failed = std::any_of(report.rows.begin(), report.rows.end(),
                                      [](const ReportRow& r) { return !r.result; });
  return any_failed ? kExitSolverAbort : kExitOk;
}

int certify_command(const Scenario& scenario, const SchemeSpec& spec,
                    const std::optional<std::filesystem::path>& out_dir, std::optional<int> steps,
                    std::ostream& out) {
  if (out_dir) prepare_dir(*out_dir);
  const CertifyResult result = certify_scheme(scenario, spec, steps);
  std::ostringstream csv;
  csv << "step,valid,max_violation\n";
  for (const auto& rec : result.records) {
    csv << fmt::format("{},{},{}\n", rec.step, rec.valid ? 1 : 0, rec.max_violation);
    out << fmt::format("step {:>3}: {} (max violation {:.3e})\n", rec.step,
                       rec.valid ? "valid" : "INVALID", rec.max_violation);
  }
  if (out_dir) write_file(*out_dir / (file_stem(spec.to_string()) + ".certificates.csv"), csv.str());
  if (result.first_failure) {
    out << fmt::format("certificate failed first at step {}\n", *result.first_failure);
    return kExitCertification;
  }
  out << fmt::format("all {} certificates valid\n", result.records.size());
  return kExitOk;
}

}  // namespace splitmpc
