#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "brflow/bench.hpp"
#include "brflow/schemes.hpp"

namespace brflow {

/// Everything a command-line run needs. Zero or empty fields mean "use the
/// case default".
struct RunConfig {
  std::string command = "solve";  // solve | bench | mesh-info
  std::string case_id;
  std::string scheme;
  std::vector<double> nus;
  double epsilon = 1e-10;
  std::string pattern;  // right | crisscross | unionjack
  int nx = 0;
  int ny = 0;
  int n = 0;       // 3D cubes per axis
  int level = 1;   // solve: mesh level
  int levels = 0;  // bench: number of levels
  double tau = 0.0;
  double t_end = 0.0;
  int max_iterations = 50;
  double tolerance = 1e-6;
  std::string eafe_diagonal = "row-sum";  // row-sum | column-sum
  std::string lift = "flux-matching";     // flux-matching | none
  std::string output_dir = ".";
  std::string out;        // CSV table; empty writes to stdout
  std::string vtk;        // optional VTK field dump (solve)
  std::string field_csv;  // optional vertex CSV dump (solve)
  int jobs = 1;

  bool operator==(const RunConfig&) const = default;
};

/// Environment variable that replaces output_dir when set.
inline constexpr const char* kOutputDirEnv = "BRFLOW_OUTPUT_DIR";

/// Flat "key = value" text; '#' starts a comment. Lists are comma separated.
/// Throws ConfigError naming the line on unknown keys or malformed values.
RunConfig parse_config(std::istream& is);
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);
/// Every key, in a fixed order, with round-trippable numbers.
std::string serialize_config(const RunConfig& config);

/// Throws ConfigError with an actionable message.
void validate(const RunConfig& config);

SolverControls controls_of(const RunConfig& config);
GridPattern parse_pattern(const std::string& name);
/// Builtin case with the mesh, viscosity and time-stepping overrides applied.
BenchmarkCase case_of(const RunConfig& config);
/// Path under output_dir (absolute paths are kept).
std::string output_path(const RunConfig& config, const std::string& file);

/// Execute a validated config. Returns the process exit code: 0 on success,
/// 3 when a solve did not converge. Progress goes to log.
int run(const RunConfig& config, std::ostream& log);

}  // namespace brflow
