#pragma once

#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "brflow/fespace.hpp"
#include "brflow/mesh.hpp"
#include "brflow/schemes.hpp"

namespace brflow {

enum class ProblemKind { Stokes, Oseen, NavierStokes, Unsteady };

/// Geometry and resolution of a benchmark's mesh sequence.
struct MeshFamily {
  int dim = 2;
  std::array<double, 2> x{0.0, 1.0}, y{0.0, 1.0}, z{0.0, 1.0};
  GridPattern pattern = GridPattern::RightDiagonal;
  int nx = 8, ny = 8;  // 2D base grid, refined by quad refinement
  int n = 8;           // 3D cubes per axis, doubled per level
};

struct BenchmarkCase {
  std::string id;
  ProblemKind kind = ProblemKind::Stokes;
  MeshFamily mesh;
  /// Exact solution for a given viscosity; cases without one use a reference solve.
  std::function<ExactSolution(double nu)> exact;
  bool has_exact = true;
  VectorFunction forcing;  // used when has_exact is false
  Vec convection = Vec::Zero();
  std::vector<double> nus;
  int levels = 1;
  std::string default_scheme;
  std::vector<std::string> schemes;
  double tau = 0.0;
  double t_end = 0.0;
  std::vector<double> record_times;
  /// Reference mesh resolution per axis when has_exact is false.
  int reference_n = 0;
};

/// Throws ConfigError for unknown ids.
BenchmarkCase builtin_case(const std::string& id);
std::vector<std::string> builtin_case_ids();

/// Mesh of the given level (1 = base mesh).
SimplicialMesh case_mesh(const BenchmarkCase& c, int level);

struct ErrorRecord {
  std::string case_id;
  std::string scheme;
  int level = 1;
  Index ndof = 0;
  Index condensed_dof = 0;
  Index full_dof = 0;
  double nu = 0.0;
  std::optional<double> t;
  double err_u_l2 = 0.0;       // || u - u_h^l ||
  double err_u_h1 = 0.0;       // | u - u_h^l |_1
  double err_u_h1_full = 0.0;  // | u - u_h |_1 with the bubbles
  double err_p_l2 = 0.0;       // zero-mean pressures
  std::optional<double> order_u;  // from err_u_l2
  std::optional<double> order_p;
  int picard_iters = 0;
  std::string status = "converged";
};

/// Error norms of a discrete solution against exact data at time t.
ErrorRecord compute_errors(const ExactSolution& exact, const FeField& velocity,
                           const FeField& pressure, double t = 0.0);

/// Error norms against a discrete reference solution on a nested finer mesh.
ErrorRecord compute_errors(const Solution& reference, const FeField& velocity, const FeField& pressure);

/// Solution of a single run, for export.
struct CaseSolution {
  std::unique_ptr<SimplicialMesh> mesh;  // owned on the heap so the fields can point at it
  Solution solution;
};

/// Solve one (case, scheme, nu, level) tuple. Unsteady cases return one record
/// per entry of record_times. When keep is given it receives the mesh and the
/// final discrete solution (the last accepted time step for unsteady cases).
std::vector<ErrorRecord> run_case(const BenchmarkCase& c, const std::string& scheme, double nu,
                                  int level, const SolverControls& controls = {},
                                  CaseSolution* keep = nullptr);

/// All (level, nu) tuples with empirical orders between consecutive levels.
std::vector<ErrorRecord> run_convergence(const BenchmarkCase& c, const std::string& scheme,
                                         const std::vector<double>& nus, int levels,
                                         const SolverControls& controls = {});

CaseSolution solve_case(const BenchmarkCase& c, const std::string& scheme, double nu, int level,
                        const SolverControls& controls = {});

/// Fill order_u / order_p from consecutive levels with the same (nu, t).
void compute_orders(std::vector<ErrorRecord>& records);

extern const char* const kCsvHeader;
void write_csv(std::ostream& os, const std::vector<ErrorRecord>& records);

/// Cell containing a point and its barycentric coordinates there.
class PointLocator {
 public:
  explicit PointLocator(const SimplicialMesh& mesh);
  /// Returns -1 when the point lies outside the mesh.
  Index locate(const Vec& x, std::array<double, 4>& lambda) const;

 private:
  const SimplicialMesh* mesh_;
  Vec lo_, hi_;
  std::array<int, 3> bins_{1, 1, 1};
  std::vector<std::vector<Index>> buckets_;
  std::array<int, 3> bin_of(const Vec& x) const;
};

}  // namespace brflow
