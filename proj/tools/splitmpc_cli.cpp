// splitmpc: run, compare and certify MPC schemes on the point-mass scenario.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "splitmpc/bench.hpp"
#include "splitmpc/errors.hpp"

namespace {

using namespace splitmpc;

struct Options {
  std::string scenario_path;
  std::vector<std::string> schemes;
  std::string out_dir;
  std::optional<int> steps;
  std::string seed_policy;
};

Scenario load(const Options& o) {
  Scenario s = o.scenario_path.empty() ? Scenario::defaults() : parse_scenario(o.scenario_path);
  if (!o.seed_policy.empty()) s.seed_policy = parse_seed_policy(o.seed_policy);
  return s;
}

std::optional<std::filesystem::path> out_dir(const Options& o) {
  if (o.out_dir.empty()) return std::nullopt;
  return std::filesystem::path(o.out_dir);
}

// Scheme tags given on the command line; "all" expands to every table row.
std::vector<SchemeSpec> parse_schemes(const std::vector<std::string>& tags) {
  std::vector<SchemeSpec> out;
  for (const auto& tag : tags) {
    if (tag == "all") {
      for (const auto& spec : all_table_schemes()) out.push_back(spec);
    } else {
      out.push_back(SchemeSpec::parse(tag));
    }
  }
  return out;
}

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Split-horizon MPC benchmark"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--scenario", opt.scenario_path, "JSON scenario file (defaults if omitted)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", opt.out_dir, "Output directory");
    cmd->add_option("--steps", opt.steps, "Closed-loop steps (overrides the scenario)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--seed-policy", opt.seed_policy, "Multi-start seeds")
        ->check(CLI::IsMember({"warm", "warm+reflect"}));
  };

  CLI::App* run = app.add_subcommand("run", "Closed loop of one scheme");
  add_common(run);
  run->add_option("--scheme", opt.schemes, "Scheme tag, e.g. proposed or standard-13")
      ->required()
      ->expected(1);

  CLI::App* compare = app.add_subcommand("compare", "Run several schemes and tabulate");
  add_common(compare);
  compare->add_option("--scheme", opt.schemes,
                      "Scheme tags (repeatable; 'all' for every table row; "
                      "default: the scenario's list)");

  CLI::App* certify = app.add_subcommand("certify", "Check the shifted candidate at every step");
  add_common(certify);
  certify->add_option("--scheme", opt.schemes, "Two-segment scheme tag")->required()->expected(1);

  CLI::App* defaults = app.add_subcommand("print-defaults", "Print the default scenario");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (defaults->parsed()) {
      std::cout << serialize_scenario(Scenario::defaults()) << '\n';
      return kExitOk;
    }

    std::vector<SchemeSpec> specs;
    try {
      specs = parse_schemes(opt.schemes);
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
    const Scenario scenario = load(opt);

    if (run->parsed()) return run_command(scenario, specs.front(), out_dir(opt), opt.steps, std::cout);
    if (compare->parsed()) {
      if (specs.empty()) specs = scenario.schemes;
      if (specs.empty()) throw UsageError("no schemes to compare");
      return compare_command(scenario, specs, out_dir(opt), opt.steps, std::cout);
    }
    if (certify->parsed()) {
      if (specs.front().scheme == Scheme::standard) {
        throw UsageError("certify needs a two-segment scheme (granular, nush, proposed)");
      }
      return certify_command(scenario, specs.front(), out_dir(opt), opt.steps, std::cout);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "scenario error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const SolverAbort& e) {
    std::cerr << "solver abort: " << e.what() << '\n';
    return kExitSolverAbort;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
