#pragma once

#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "brflow/fespace.hpp"
#include "brflow/forms.hpp"

namespace brflow {

enum class StokesVariant { StabilizedRobust, StabilizedPlain, UnmodifiedRobust };
enum class OseenVariant { EafeStabilized, EafeUnstabilized, Classical };
enum class NavierStokesVariant { Eafe, Classical };
enum class UnsteadyScheme { TD1, TD2, Classical };
enum class SolveStatus { Converged, MaxIterations, Diverged };

std::string to_string(StokesVariant v);
std::string to_string(OseenVariant v);
std::string to_string(NavierStokesVariant v);
std::string to_string(UnsteadyScheme v);
std::string to_string(SolveStatus s);

/// Knobs shared by all solvers. Defaults follow the published experiments.
struct SolverControls {
  int max_iterations = 50;
  double tolerance = 1e-6;       // relative Picard increment
  int divergence_window = 5;     // consecutive growing (or non-contracting) increments before giving up
  double epsilon = 1e-10;        // EAFE artificial diffusion
  EafeDiagonal eafe_diagonal = EafeDiagonal::RowSum;
  BubbleLift lift = BubbleLift::FluxMatching;
  bool force_full_solve = false;  // skip static condensation even when possible
};

struct SolverReport {
  std::string scheme;
  Index num_cells = 0;
  Index num_vertices = 0;
  Index num_faces = 0;
  Index ndof = 0;            // size of the linear system that was factorized
  Index condensed_dof = 0;   // d N_v + N_t - 1
  Index full_dof = 0;        // N_f + d N_v + N_t - 1
  int iterations = 0;        // Picard iterations (0 for linear problems)
  std::vector<double> increments;
  double final_increment = 0.0;
  double linear_residual = 0.0;  // worst relative residual over all solves
  SolveStatus status = SolveStatus::Converged;
  double wall_seconds = 0.0;
};

struct Solution {
  FeField velocity;  // BRFull, boundary values included
  FeField pressure;  // P0Pressure with zero mean
  SolverReport report;
};

// ---- block systems ----------------------------------------------------------

/// The 3x3 block saddle system restricted to the unknowns of a DofLayout,
/// ordered (bubble, linear, pressure):
///   [ A_bb    A_bl    A_bp ] [U_b]   [F_b]
///   [ A_lb    A_ll    A_lp ] [U_l] = [F_l]
///   [ A_bp^T  A_lp^T  0    ] [ P ]   [F_p]
/// F_p is nonzero only through the Dirichlet lift.
struct BlockSaddleSystem {
  const DofLayout* layout = nullptr;
  SparseMatrix a_bb, a_bl, a_lb, a_ll, a_bp, a_lp;
  Eigen::VectorXd f_b, f_l, f_p;

  bool bubble_block_diagonal() const;
};

/// Restrict forms assembled over the full index spaces to the unknowns,
/// moving the contribution of the lifted boundary data to the right-hand side.
BlockSaddleSystem restrict_system(const DofLayout& layout, const VelocityBlocks& a,
                                  const DivergenceBlocks& div, const LoadVector& load,
                                  const FeField& lift);

/// Reduced (linear, pressure) system after eliminating the diagonal bubble block.
struct CondensedSystem {
  SparseMatrix matrix;
  Eigen::VectorXd rhs;
  Eigen::VectorXd inv_bubble_diag;
};

/// Throws SolveError naming the face when a bubble diagonal entry vanishes, and
/// Error when A_bb is not diagonal.
CondensedSystem condense(const BlockSaddleSystem& sys);

/// U_b = A_bb^{-1} (F_b - A_bl U_l - A_bp P).
Eigen::VectorXd recover_bubbles(const BlockSaddleSystem& sys, const CondensedSystem& red,
                                const Eigen::VectorXd& u_l, const Eigen::VectorXd& p);

/// Sparse LU solve with a post-solve residual check (relative residual <= 1e-9,
/// after at most two refinement sweeps). Throws SolveError otherwise.
Eigen::VectorXd linear_solve(const SparseMatrix& a, const Eigen::VectorXd& b,
                             double* residual = nullptr);

/// Solve with the pressure dof of cell 0 removed. Both return (U_b, U_l, P)
/// in system order with P shifted to zero volume-weighted mean.
Eigen::VectorXd solve_condensed(const BlockSaddleSystem& sys, double* residual = nullptr);
Eigen::VectorXd solve_full(const BlockSaddleSystem& sys, double* residual = nullptr);

// ---- schemes ----------------------------------------------------------------

Solution solve_stokes(const SimplicialMesh& mesh, double nu, const VectorFunction& f,
                      const VectorFunction& g, StokesVariant variant,
                      const SolverControls& controls = {});

/// Oseen problem with a cellwise constant convection field b.
Solution solve_oseen(const SimplicialMesh& mesh, double nu, const std::vector<Vec>& b,
                     const VectorFunction& f, const VectorFunction& g, OseenVariant variant,
                     const SolverControls& controls = {});

/// Stationary Navier-Stokes by Picard iteration started from a Stokes solve.
Solution solve_navier_stokes(const SimplicialMesh& mesh, double nu, const VectorFunction& f,
                             const VectorFunction& g, NavierStokesVariant variant,
                             const SolverControls& controls = {});

using TimeVectorFunction = std::function<Vec(const Vec&, double)>;

struct UnsteadyState {
  FeField velocity;  // BRFull
  FeField pressure;  // P0Pressure
  double t = 0.0;
};

/// One backward Euler step from state.t to state.t + tau. The Picard loop for
/// the convection argument starts from the previous step.
Solution step_unsteady(const SimplicialMesh& mesh, const UnsteadyState& state, double tau,
                       double nu, const TimeVectorFunction& f, const TimeVectorFunction& g,
                       UnsteadyScheme scheme, const SolverControls& controls = {});

// ---- diagnostics --------------------------------------------------------------

/// max_T |(div u_h, 1_T)| / (sum of the absolute values of the terms of that
/// sum), with the scale floored by its mean over all cells.
double weak_divergence_residual(const FeField& velocity);

/// Smallest nonzero singular value of the divergence operator on the BR space,
/// measured in the H^1_0 seminorm for velocities and the L^2 norm for pressures.
double inf_sup_constant(const SimplicialMesh& mesh);

}  // namespace brflow
