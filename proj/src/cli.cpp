#include "brflow/cli.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "brflow/error.hpp"
#include "brflow/io.hpp"

namespace brflow {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end)
    throw ConfigError("'" + key + "': cannot parse '" + text + "' as a number");
  return value;
}

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_number<double>(key, item));
  }
  return out;
}

std::string format_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_number(v[i]);
  return s;
}

// Key table shared by the parser and the serializer so the two cannot drift.
struct Field {
  const char* key;
  void (*set)(RunConfig&, const std::string& key, const std::string& value);
  std::string (*get)(const RunConfig&);
};

#define BRFLOW_STRING(name) \
  Field { #name, [](RunConfig& c, const std::string&, const std::string& v) { c.name = v; }, \
          [](const RunConfig& c) { return c.name; } }
#define BRFLOW_NUMBER(key, name, type) \
  Field { key, [](RunConfig& c, const std::string& k, const std::string& v) { c.name = parse_number<type>(k, v); }, \
          [](const RunConfig& c) { return format_number(static_cast<double>(c.name)); } }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      BRFLOW_STRING(command),
      Field{"case", [](RunConfig& c, const std::string&, const std::string& v) { c.case_id = v; },
            [](const RunConfig& c) { return c.case_id; }},
      BRFLOW_STRING(scheme),
      Field{"nu", [](RunConfig& c, const std::string& k, const std::string& v) { c.nus = parse_list(k, v); },
            [](const RunConfig& c) { return format_list(c.nus); }},
      BRFLOW_NUMBER("epsilon", epsilon, double),
      BRFLOW_STRING(pattern),
      BRFLOW_NUMBER("nx", nx, int),
      BRFLOW_NUMBER("ny", ny, int),
      BRFLOW_NUMBER("n", n, int),
      BRFLOW_NUMBER("level", level, int),
      BRFLOW_NUMBER("levels", levels, int),
      BRFLOW_NUMBER("tau", tau, double),
      BRFLOW_NUMBER("t_end", t_end, double),
      BRFLOW_NUMBER("max_iterations", max_iterations, int),
      BRFLOW_NUMBER("tolerance", tolerance, double),
      BRFLOW_STRING(eafe_diagonal),
      BRFLOW_STRING(lift),
      BRFLOW_STRING(output_dir),
      BRFLOW_STRING(out),
      BRFLOW_STRING(vtk),
      BRFLOW_STRING(field_csv),
      BRFLOW_NUMBER("jobs", jobs, int),
  };
  return table;
}

#undef BRFLOW_STRING
#undef BRFLOW_NUMBER

std::ofstream open_file(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write '" + path + "' (does the directory exist?)");
  return os;
}

void emit_table(const RunConfig& cfg, const std::vector<ErrorRecord>& rows, std::ostream& log) {
  if (cfg.out.empty()) {
    write_csv(std::cout, rows);
    return;
  }
  const std::string path = output_path(cfg, cfg.out);
  auto os = open_file(path);
  write_csv(os, rows);
  log << "wrote " << rows.size() << " rows to " << path << '\n';
}

std::string describe(const BenchmarkCase& c, const std::string& scheme, int levels) {
  std::ostringstream os;
  os << "# case " << c.id << ", scheme " << scheme << ", nu " << format_list(c.nus);
  if (c.mesh.dim == 2)
    os << ", base mesh " << c.mesh.nx << "x" << c.mesh.ny;
  else
    os << ", base mesh " << c.mesh.n << "^3 cubes";
  os << ", levels " << levels;
  if (c.kind == ProblemKind::Unsteady) os << ", tau " << c.tau << ", t_end " << c.t_end;
  os << '\n';
  return os.str();
}

int mesh_info(const RunConfig& cfg, std::ostream& log) {
  std::unique_ptr<SimplicialMesh> mesh;
  if (!cfg.case_id.empty()) {
    mesh = std::make_unique<SimplicialMesh>(case_mesh(case_of(cfg), cfg.level));
  } else if (cfg.n > 0 && cfg.pattern.empty()) {
    mesh = std::make_unique<SimplicialMesh>(uniform_box_mesh({0, 1}, {0, 1}, {0, 1}, cfg.n));
  } else {
    const GridPattern p = cfg.pattern.empty() ? GridPattern::RightDiagonal : parse_pattern(cfg.pattern);
    mesh = std::make_unique<SimplicialMesh>(uniform_rectangle_mesh(
        {0, 1}, {0, 1}, cfg.nx > 0 ? cfg.nx : 8, cfg.ny > 0 ? cfg.ny : 8, p));
  }
  const DofLayout layout(*mesh);
  const Index condensed = layout.linear_size() + layout.pressure_size() - 1;
  std::cout << "dim " << mesh->dim() << '\n'
            << "cells " << mesh->num_cells() << '\n'
            << "vertices " << mesh->num_vertices() << '\n'
            << "faces " << mesh->num_faces() << '\n'
            << "edges " << mesh->num_edges() << '\n'
            << "interior_vertices " << layout.num_interior_vertices() << '\n'
            << "interior_faces " << layout.num_interior_faces() << '\n'
            << "condensed_dof " << condensed << '\n'
            << "full_dof " << condensed + layout.bubble_size() << '\n'
            << "measure " << mesh->measure() << '\n'
            << "mesh_size " << mesh->mesh_size() << '\n';
  if (!cfg.vtk.empty()) {
    const std::string path = output_path(cfg, cfg.vtk);
    auto os = open_file(path);
    write_vtk_mesh(os, *mesh);
    log << "wrote mesh to " << path << '\n';
  }
  return 0;
}

int solve(const RunConfig& cfg, std::ostream& log) {
  const BenchmarkCase c = case_of(cfg);
  const std::string scheme = cfg.scheme.empty() ? c.default_scheme : cfg.scheme;
  const double nu = c.nus.front();
  log << describe(c, scheme, cfg.level);
  CaseSolution kept;
  auto rows = run_case(c, scheme, nu, cfg.level, controls_of(cfg), &kept);
  emit_table(cfg, rows, log);
  if (kept.mesh) {
    const Solution& s = kept.solution;
    if (!cfg.vtk.empty()) {
      const std::string path = output_path(cfg, cfg.vtk);
      write_vtk_fields(path, *kept.mesh, &s.velocity, &s.pressure);
      log << "wrote fields to " << path << '\n';
    }
    if (!cfg.field_csv.empty()) {
      const std::string path = output_path(cfg, cfg.field_csv);
      write_field_csv(path, s.velocity);
      log << "wrote vertex values to " << path << '\n';
    }
  }
  bool ok = true;
  for (const auto& r : rows) ok = ok && r.status == "converged";
  if (!ok) log << "solve did not converge (status " << rows.back().status << ")\n";
  return ok ? 0 : 3;
}

int bench(const RunConfig& cfg, std::ostream& log) {
  const BenchmarkCase c = case_of(cfg);
  const std::string scheme = cfg.scheme.empty() ? c.default_scheme : cfg.scheme;
  const int levels = cfg.levels > 0 ? cfg.levels : c.levels;
  log << describe(c, scheme, levels);
  const SolverControls controls = controls_of(cfg);

  struct Task {
    double nu;
    int level;
  };
  std::vector<Task> tasks;
  for (double nu : c.nus)
    for (int level = 1; level <= levels; ++level) tasks.push_back({nu, level});

  std::vector<std::vector<ErrorRecord>> results(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        results[i] = run_case(c, scheme, tasks[i].nu, tasks[i].level, controls);
        std::lock_guard<std::mutex> lock(log_mutex);
        log << "  nu " << tasks[i].nu << " level " << tasks[i].level << ": "
            << results[i].back().status << '\n';
      } catch (...) {
        std::lock_guard<std::mutex> lock(log_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int workers = std::max(1, std::min<int>(cfg.jobs, static_cast<int>(tasks.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  // Task order is (nu, level), independent of which worker finished first.
  std::vector<ErrorRecord> rows;
  for (auto& r : results) rows.insert(rows.end(), r.begin(), r.end());
  compute_orders(rows);
  emit_table(cfg, rows, log);
  return 0;
}

}  // namespace

RunConfig parse_config(std::istream& is) {
  RunConfig cfg;
  std::string line;
  int number = 0;
  while (std::getline(is, line)) {
    ++number;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(number) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto& table = fields();
    auto it = std::find_if(table.begin(), table.end(), [&](const Field& f) { return key == f.key; });
    if (it == table.end())
      throw ConfigError("config line " + std::to_string(number) + ": unknown key '" + key + "'");
    try {
      it->set(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(number) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig parse_config_text(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file '" + path + "'");
  return parse_config(is);
}

std::string serialize_config(const RunConfig& config) {
  std::string s;
  for (const Field& f : fields()) s += std::string(f.key) + " = " + f.get(config) + '\n';
  return s;
}

GridPattern parse_pattern(const std::string& name) {
  if (name == "right" || name == "rightdiagonal") return GridPattern::RightDiagonal;
  if (name == "crisscross") return GridPattern::Crisscross;
  if (name == "unionjack") return GridPattern::UnionJack;
  throw ConfigError("unknown mesh pattern '" + name + "' (expected right, crisscross or unionjack)");
}

void validate(const RunConfig& c) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (c.command != "solve" && c.command != "bench" && c.command != "mesh-info")
    fail("command must be solve, bench or mesh-info, got '" + c.command + "'");
  if (c.command != "mesh-info" && c.case_id.empty())
    fail(c.command + " needs a case (--case), one of: stokes-sinusoidal, oseen-exponential, "
                     "oseen-rotational, kovasznay, potential2d, potential3d");
  if (!c.case_id.empty()) builtin_case(c.case_id);
  for (double nu : c.nus)
    if (!(nu > 0)) fail("nu must be positive, got " + format_number(nu));
  if (c.command == "solve" && c.nus.size() > 1) fail("solve takes a single nu; use bench for a list");
  if (!(c.epsilon > 0)) fail("epsilon must be positive");
  if (!c.pattern.empty()) parse_pattern(c.pattern);
  if (c.nx < 0 || c.ny < 0 || c.n < 0) fail("mesh resolutions must be positive");
  if (c.level < 1) fail("level must be >= 1");
  if (c.levels < 0) fail("levels must be >= 1");
  if (c.tau < 0) fail("tau must be positive");
  if (c.t_end < 0) fail("t_end must be positive");
  if (c.max_iterations < 1) fail("max_iterations must be >= 1");
  if (!(c.tolerance > 0 && c.tolerance < 1)) fail("tolerance must lie in (0, 1)");
  if (c.eafe_diagonal != "row-sum" && c.eafe_diagonal != "column-sum")
    fail("eafe_diagonal must be row-sum or column-sum");
  if (c.lift != "flux-matching" && c.lift != "none") fail("lift must be flux-matching or none");
  if (c.jobs < 1) fail("jobs must be >= 1");
  if (c.command != "solve" && !c.field_csv.empty()) fail("field_csv is only written by solve");
  const std::string dir = output_path(c, ".");
  if (!std::filesystem::is_directory(dir)) fail("output directory '" + dir + "' does not exist");
}

SolverControls controls_of(const RunConfig& config) {
  SolverControls s;
  s.max_iterations = config.max_iterations;
  s.tolerance = config.tolerance;
  s.epsilon = config.epsilon;
  s.eafe_diagonal = config.eafe_diagonal == "column-sum" ? EafeDiagonal::ColumnSum : EafeDiagonal::RowSum;
  s.lift = config.lift == "none" ? BubbleLift::None : BubbleLift::FluxMatching;
  return s;
}

BenchmarkCase case_of(const RunConfig& config) {
  BenchmarkCase c = builtin_case(config.case_id);
  if (!config.pattern.empty()) c.mesh.pattern = parse_pattern(config.pattern);
  if (config.nx > 0) c.mesh.nx = config.nx;
  if (config.ny > 0) c.mesh.ny = config.ny;
  if (config.n > 0) c.mesh.n = config.n;
  if (!config.nus.empty()) c.nus = config.nus;
  if (config.tau > 0) c.tau = config.tau;
  if (config.t_end > 0 && c.kind == ProblemKind::Unsteady) {
    c.t_end = config.t_end;
    std::erase_if(c.record_times, [&](double t) { return t > c.t_end + 1e-12; });
    if (c.record_times.empty() || std::abs(c.record_times.back() - c.t_end) > 1e-12)
      c.record_times.push_back(c.t_end);
  }
  return c;
}

std::string output_path(const RunConfig& config, const std::string& file) {
  std::filesystem::path p(file);
  if (p.is_absolute()) return p.string();
  const char* env = std::getenv(kOutputDirEnv);
  const std::filesystem::path dir = env && *env ? std::filesystem::path(env) : std::filesystem::path(config.output_dir);
  return (dir / p).lexically_normal().string();
}

int run(const RunConfig& config, std::ostream& log) {
  log << "# configuration\n";
  std::istringstream lines(serialize_config(config));
  for (std::string line; std::getline(lines, line);) log << "#   " << line << '\n';
  if (const char* env = std::getenv(kOutputDirEnv); env && *env)
    log << "# output directory from " << kOutputDirEnv << ": " << env << '\n';
  if (config.command == "mesh-info") return mesh_info(config, log);
  if (config.command == "solve") return solve(config, log);
  return bench(config, log);
}

}  // namespace brflow
