#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "splitmpc/dynamics.hpp"
#include "splitmpc/solver_config.hpp"

namespace splitmpc {

enum class Scheme { standard, granular, nush, proposed };

std::string_view to_string(Scheme scheme);

/// A scheme tag plus the optional horizon override used by the extra
/// standard-MPC rows: "standard", "standard-13", "standard-8@0.4",
/// "granular", "nush", "proposed".
struct SchemeSpec {
  Scheme scheme = Scheme::proposed;
  std::optional<int> steps;
  std::optional<double> dt;

  /// Throws ConfigError on unknown tags.
  static SchemeSpec parse(std::string_view text);
  std::string to_string() const;
  bool operator==(const SchemeSpec&) const = default;
};

/// Everything needed to build plans and run the obstacle-avoidance study.
/// Defaults reproduce the point-mass scenario exactly.
struct Scenario {
  double mass = 0.5;
  double dt1 = 0.2;
  double dt2 = 0.4;

  int standard_steps = 10;       // N
  int short_steps = 10;          // k_s
  int granular_long_steps = 6;   // k_f - k_s for the granular scheme (at dt1)
  int long_steps = 3;            // coarse/long steps at dt2 (proposed, nush)

  BoxSet detailed_state_box;
  BoxSet detailed_input_box;
  BoxSet coarse_state_box;
  BoxSet coarse_input_box;
  std::vector<EllipsoidObstacle> obstacles;
  ControlInvariantSet ci;

  Matrix Q_s;
  Matrix R_s;
  Matrix Q_f;
  Matrix R_f;
  Vector x_ref;
  Vector x0;

  int steps = 50;
  std::vector<SchemeSpec> schemes;
  SolverConfig solver;
  SeedPolicy seed_policy = SeedPolicy::warm_reflect;

  static Scenario defaults();

  /// Reference of the coarse model, the projection of (x_ref, 0).
  Vector z_ref() const;
};

bool operator==(const Scenario& a, const Scenario& b);

/// Throws ConfigError naming the first inconsistent field.
void validate(const Scenario& scenario);

/// The seven configurations compared in the study.
std::vector<SchemeSpec> all_table_schemes();

}  // namespace splitmpc
