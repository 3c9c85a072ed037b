#pragma once

// Scenario files, batch runs of the scheme comparison, and their
// machine-readable outputs.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "splitmpc/loop.hpp"
#include "splitmpc/scenario.hpp"

namespace splitmpc {

inline constexpr int kScenarioVersion = 1;

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitValidation = 2,
  kExitSolverAbort = 3,
  kExitCertification = 4,
};

/// Reads a JSON scenario. Missing keys keep their defaults. Throws ConfigError
/// naming the offending key; file-level problems carry an empty key.
Scenario parse_scenario(const std::filesystem::path& path);
Scenario parse_scenario_text(std::string_view text);

/// Complete JSON document that parses back to an equal Scenario.
std::string serialize_scenario(const Scenario& scenario);

std::string_view to_string(SeedPolicy policy);
SeedPolicy parse_seed_policy(std::string_view text);  // "warm" | "warm+reflect"

struct RunResult {
  std::string label;
  ClosedLoopTrace trace;
  double V_star = 0.0;
  double median_solve_ms = 0.0;
  double mean_solve_ms = 0.0;
  int n_decision_vars = 0;
  double horizon_span_s = 0.0;
  double converged_fraction = 0.0;
};

/// Closed loop of one scheme on the detailed plant at dt1, scored with the
/// detailed stage cost. `steps` overrides scenario.steps.
RunResult run_scheme(const Scenario& scenario, const SchemeSpec& spec,
                     std::optional<int> steps = std::nullopt);

struct ReportRow {
  std::string scheme;
  int k_s = 0;
  double dt1 = 0.0;
  int long_steps = 0;      // 0 for single-segment schemes
  std::string long_model;  // "det.", "cor." or empty
  double dt2 = 0.0;        // 0 for single-segment schemes
  std::optional<RunResult> result;
  std::string error;  // set when the run failed
};

struct ComparisonReport {
  std::vector<ReportRow> rows;
};

/// Runs every scheme in order. Failures are recorded in their row. Throws
/// InvalidParameter on an empty scheme list.
ComparisonReport compare_schemes(const Scenario& scenario, const std::vector<SchemeSpec>& schemes,
                                 std::optional<int> steps = std::nullopt);

void write_trace_csv(std::ostream& os, const ClosedLoopTrace& trace);
std::string summary_json(const RunResult& result);
std::string report_json(const ComparisonReport& report);
std::string report_table(const ComparisonReport& report);

struct CertificateRecord {
  int step = 0;  // the certificate is for the OCP solved at this step
  bool valid = false;
  double max_violation = 0.0;
};

struct CertifyResult {
  std::vector<CertificateRecord> records;
  std::optional<int> first_failure;
};

/// Runs the closed loop and checks, for every step, that the shifted previous
/// solution is feasible at the new state. Throws InvalidParameter for
/// single-segment schemes.
CertifyResult certify_scheme(const Scenario& scenario, const SchemeSpec& spec,
                             std::optional<int> steps = std::nullopt);

/// Command entry points. They print human-readable progress to `out`, write
/// files under `out_dir` when given, and return an ExitCode. Scenario and
/// solver exceptions propagate to the caller.
int run_command(const Scenario& scenario, const SchemeSpec& spec,
                const std::optional<std::filesystem::path>& out_dir, std::optional<int> steps,
                std::ostream& out);
int compare_command(const Scenario& scenario, const std::vector<SchemeSpec>& schemes,
                    const std::optional<std::filesystem::path>& out_dir, std::optional<int> steps,
                    std::ostream& out);
int certify_command(const Scenario& scenario, const SchemeSpec& spec,
                    const std::optional<std::filesystem::path>& out_dir, std::optional<int> steps,
                    std::ostream& out);

}  // namespace splitmpc
