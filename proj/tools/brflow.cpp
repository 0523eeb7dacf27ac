// Command-line front end: single solves, convergence tables and mesh summaries.

#include <functional>
#include <iostream>
#include <vector>

#include <CLI11.hpp>

#include "brflow/cli.hpp"
#include "brflow/error.hpp"

int main(int argc, char** argv) {
  using brflow::RunConfig;

  CLI::App app{"Bernardi-Raugel / EAFE incompressible flow solver"};
  app.require_subcommand(1);
  app.fallthrough();
  auto* solve = app.add_subcommand("solve", "solve one case on one mesh and report its errors");
  auto* bench = app.add_subcommand("bench", "convergence table over mesh levels and viscosities");
  auto* info = app.add_subcommand("mesh-info", "print mesh and dof counts");

  std::string config_path;
  app.add_option("--config", config_path, "key = value config file; flags override it");

  // Flags land in `flags`; after parsing, the ones actually given are copied
  // over the file (or default) values.
  RunConfig flags;
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> given;
  auto bind = [&](CLI::Option* opt, auto member) {
    given.emplace_back(opt, [&flags, member](RunConfig& c) { c.*member = flags.*member; });
  };
  bind(app.add_option("--case", flags.case_id, "benchmark case id"), &RunConfig::case_id);
  bind(app.add_option("--scheme", flags.scheme, "scheme variant (default: the case's)"), &RunConfig::scheme);
  bind(app.add_option("--nu", flags.nus, "viscosity; bench accepts a list")->delimiter(','), &RunConfig::nus);
  bind(app.add_option("--epsilon", flags.epsilon, "EAFE artificial diffusion"), &RunConfig::epsilon);
  bind(app.add_option("--pattern", flags.pattern, "right, crisscross or unionjack"), &RunConfig::pattern);
  bind(app.add_option("--nx", flags.nx, "squares along x of the base mesh"), &RunConfig::nx);
  bind(app.add_option("--ny", flags.ny, "squares along y of the base mesh"), &RunConfig::ny);
  bind(app.add_option("--n", flags.n, "cubes per axis of the 3D base mesh"), &RunConfig::n);
  bind(app.add_option("--level", flags.level, "mesh level for solve and mesh-info (1 = base)"), &RunConfig::level);
  bind(app.add_option("--levels", flags.levels, "number of mesh levels for bench"), &RunConfig::levels);
  bind(app.add_option("--tau", flags.tau, "time step"), &RunConfig::tau);
  bind(app.add_option("--t-end", flags.t_end, "final time"), &RunConfig::t_end);
  bind(app.add_option("--max-iter", flags.max_iterations, "Picard iteration limit"), &RunConfig::max_iterations);
  bind(app.add_option("--tol", flags.tolerance, "relative Picard increment tolerance"), &RunConfig::tolerance);
  bind(app.add_option("--eafe-diagonal", flags.eafe_diagonal, "row-sum or column-sum"), &RunConfig::eafe_diagonal);
  bind(app.add_option("--lift", flags.lift, "boundary bubble lift: flux-matching or none"), &RunConfig::lift);
  bind(app.add_option("--output-dir", flags.output_dir, "directory for relative output paths"), &RunConfig::output_dir);
  bind(app.add_option("--out", flags.out, "CSV table (stdout when omitted)"), &RunConfig::out);
  bind(app.add_option("--vtk", flags.vtk, "legacy VTK dump of the mesh or solution"), &RunConfig::vtk);
  bind(app.add_option("--field-csv", flags.field_csv, "vertex CSV dump of the velocity"), &RunConfig::field_csv);
  bind(app.add_option("--jobs", flags.jobs, "parallel solves in bench"), &RunConfig::jobs);

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : brflow::load_config(config_path);
    for (auto& [opt, apply] : given)
      if (opt->count() > 0) apply(cfg);
    cfg.command = solve->parsed() ? "solve" : bench->parsed() ? "bench" : "mesh-info";
    (void)info;
    brflow::validate(cfg);
    return brflow::run(cfg, std::cerr);
  } catch (const brflow::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
