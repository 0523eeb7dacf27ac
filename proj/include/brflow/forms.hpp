#pragma once

#include <vector>

#include <Eigen/Sparse>

#include "brflow/fespace.hpp"
#include "brflow/mesh.hpp"

namespace brflow {

using SparseMatrix = Eigen::SparseMatrix<double>;

// All forms are assembled over the full index spaces of DofLayout (every
// vertex, every face): rows are test functions, columns trial functions.
//   linear index : k * num_vertices + v   (basis lambda_v e_k)
//   bubble index : face id                (basis phi_F n_F)
//   pressure     : cell id

/// Velocity-velocity blocks of a bilinear form on the BR space.
struct VelocityBlocks {
  SparseMatrix bb;  // bubble test  x bubble trial
  SparseMatrix bl;  // bubble test  x linear trial
  SparseMatrix lb;  // linear test  x bubble trial
  SparseMatrix ll;  // linear test  x linear trial

  static VelocityBlocks zero(const SimplicialMesh& mesh);
  VelocityBlocks& operator+=(const VelocityBlocks& other);
  VelocityBlocks scaled(double s) const;
};

/// Pressure coupling -(div v, q) for bubble and linear test functions.
struct DivergenceBlocks {
  SparseMatrix bp;  // faces x cells
  SparseMatrix lp;  // linear x cells
};

struct LoadVector {
  Eigen::VectorXd linear;  // (f, lambda_v e_k)
  Eigen::VectorXd bubble;  // (f, test bubble of face F)
};

/// Piecewise constant convection b|_T plus the artificial diffusion used by EAFE.
struct ConvectionField {
  std::vector<Vec> b;  // one vector per cell
  double epsilon = 1e-10;

  static ConvectionField constant(const SimplicialMesh& mesh, const Vec& b, double epsilon);
};

/// Which sum of the local EAFE matrix the diagonal is chosen to annihilate.
///   ColumnSum : b(lambda_i, lambda_i) = -sum_{j != i} b(lambda_i, lambda_j),
///               the diagonal rule of the local recipe (test constants are
///               in the left kernel).
///   RowSum    : the diagonal that follows from the edge-average definition
///               (trial constants are in the kernel).
/// Off-diagonal entries are identical in both.
enum class EafeDiagonal { ColumnSum, RowSum };

/// Test functions for the load and the mass terms.
enum class BubbleTest { Plain, Bdm };

/// Scalar P1 stiffness over all vertices.
SparseMatrix p1_stiffness(const SimplicialMesh& mesh);

/// (grad v_l, grad w_l), (grad v_b, grad w_l), (grad v_l, grad w_b); the bb block is left empty.
VelocityBlocks assemble_grad_grad(const SimplicialMesh& mesh);

/// Diagonal (grad(phi_F n_F), grad(phi_F n_F)) for every face.
Eigen::VectorXd assemble_bubble_diag(const SimplicialMesh& mesh);

/// Full bubble-bubble stiffness (grad(phi_F n_F), grad(phi_G n_G)).
SparseMatrix assemble_bubble_grad_grad(const SimplicialMesh& mesh);

enum class ViscousForm { Modified, Full };
/// Viscous form with either the diagonal bubble block (Modified) or the full one.
VelocityBlocks assemble_viscous(const SimplicialMesh& mesh, ViscousForm form);

DivergenceBlocks assemble_div(const SimplicialMesh& mesh);

/// Bernoulli function B(s) = s / (e^s - 1), B(0) = 1. Throws on NaN.
double bernoulli(double s);

/// Local scalar EAFE matrix of one cell: entry (i, j) = b_T(lambda_j, lambda_i).
Eigen::MatrixXd eafe_local_matrix(const SimplicialMesh& mesh, Index cell, const Vec& b,
                                  double epsilon, EafeDiagonal diagonal = EafeDiagonal::ColumnSum);

/// EAFE convection block on the linear space (scalar matrix replicated per component).
SparseMatrix assemble_eafe(const SimplicialMesh& mesh, const ConvectionField& conv,
                           EafeDiagonal diagonal = EafeDiagonal::ColumnSum);

/// (b . grad v_l, Pi_h w_b): bubble test rows, linear trial columns.
SparseMatrix assemble_conv_stab(const SimplicialMesh& mesh, const ConvectionField& conv);

/// Classical convection (w . grad u_h, Pi_h v_h) on the whole BR space with a
/// cellwise constant wind.
VelocityBlocks assemble_bdm_convection(const SimplicialMesh& mesh, const std::vector<Vec>& wind);
/// Same with the wind given by a BRFull field (Picard linearization).
VelocityBlocks assemble_bdm_convection(const SimplicialMesh& mesh, const FeField& wind);

LoadVector assemble_load(const SimplicialMesh& mesh, const VectorFunction& f,
                         BubbleTest test = BubbleTest::Bdm);

/// Lumped inner product (u, v)_h (Plain) or (u, Pi_h v)_h (Bdm) evaluated with
/// the face-barycenter quadrature.
VelocityBlocks assemble_lumped_mass(const SimplicialMesh& mesh, BubbleTest test);

/// Exact (Pi_h u, Pi_h v).
VelocityBlocks assemble_bdm_mass(const SimplicialMesh& mesh);

/// Face-barycenter quadrature of a scalar function over the mesh.
double lumped_integral(const SimplicialMesh& mesh, const ScalarFunction& f);

}  // namespace brflow
