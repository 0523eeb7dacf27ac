#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "brflow/mesh.hpp"

namespace brflow {

using ScalarFunction = std::function<double(const Vec&)>;
using VectorFunction = std::function<Vec(const Vec&)>;
using Mat = Eigen::Matrix3d;

/// Exact data of a benchmark problem; every callable takes (x, t).
struct ExactSolution {
  std::function<Vec(const Vec&, double)> u;
  std::function<Mat(const Vec&, double)> grad_u;  // grad_u(k, m) = d u_k / d x_m
  std::function<double(const Vec&, double)> p;
  std::function<Vec(const Vec&, double)> f;
};

enum class SpaceTag { VectorP1, BRBubble, BRFull, P0Pressure, RT0 };

/// Unknown numbering for the condensable saddle system.
///
/// Only interior vertices carry velocity unknowns and only interior faces carry
/// bubble unknowns. The global vector is ordered (bubble, linear, pressure);
/// inside the linear block component k of interior vertex v sits at
/// k * N_v + vertex_dof(v).
///
/// Forms are assembled over the "full" index spaces instead: linear entry
/// k * num_vertices + v for every vertex and bubble entry f for every face.
/// The index lists below map between the two.
class DofLayout {
 public:
  explicit DofLayout(const SimplicialMesh& mesh);

  const SimplicialMesh& mesh() const { return *mesh_; }
  int dim() const { return mesh_->dim(); }

  Index num_interior_vertices() const { return n_vertices_; }
  Index num_interior_faces() const { return n_faces_; }
  Index num_cells() const { return mesh_->num_cells(); }

  Index bubble_size() const { return n_faces_; }
  Index linear_size() const { return dim() * n_vertices_; }
  Index pressure_size() const { return num_cells(); }
  Index bubble_offset() const { return 0; }
  Index linear_offset() const { return bubble_size(); }
  Index pressure_offset() const { return bubble_size() + linear_size(); }
  Index total_size() const { return bubble_size() + linear_size() + pressure_size(); }

  /// Interior numbering of a vertex or face, -1 on the boundary.
  Index vertex_dof(Index v) const { return vertex_dof_[v]; }
  Index face_dof(Index f) const { return face_dof_[f]; }

  Index full_linear_size() const { return dim() * mesh_->num_vertices(); }
  Index full_bubble_size() const { return mesh_->num_faces(); }
  Index full_linear_index(Index v, int k) const { return k * mesh_->num_vertices() + v; }

  /// Full linear indices of the unknowns, in unknown order.
  const std::vector<Index>& interior_linear() const { return interior_linear_; }
  const std::vector<Index>& boundary_linear() const { return boundary_linear_; }
  /// Face ids of the bubble unknowns, in unknown order.
  const std::vector<Index>& interior_faces() const { return interior_faces_; }
  const std::vector<Index>& boundary_faces() const { return boundary_faces_; }

 private:
  const SimplicialMesh* mesh_;
  Index n_vertices_ = 0;
  Index n_faces_ = 0;
  std::vector<Index> vertex_dof_;
  std::vector<Index> face_dof_;
  std::vector<Index> interior_linear_;
  std::vector<Index> boundary_linear_;
  std::vector<Index> interior_faces_;
  std::vector<Index> boundary_faces_;
};

/// Coefficient vector tagged with its space.
///
/// Layouts (always over all vertices/faces/cells, boundary entries included):
///   VectorP1   : d * num_vertices, component-major
///   BRBubble   : num_faces, coefficient u_F of phi_F n_F
///   BRFull     : VectorP1 block followed by the BRBubble block
///   P0Pressure : num_cells
///   RT0        : num_faces, coefficient of the unit-flux basis function
struct FeField {
  SpaceTag space = SpaceTag::VectorP1;
  Eigen::VectorXd coefficients;
  const SimplicialMesh* mesh = nullptr;

  static Index size_for(SpaceTag space, const SimplicialMesh& mesh);
  static FeField zero(SpaceTag space, const SimplicialMesh& mesh);

  Eigen::VectorXd linear_part() const;
  Eigen::VectorXd bubble_part() const;
  /// Vertex value of the linear part (BRFull or VectorP1).
  Vec vertex_value(Index v) const;
};

/// Split a BRFull field into its VectorP1 and BRBubble parts.
std::pair<FeField, FeField> split_br(const FeField& field);
FeField combine_br(const FeField& linear, const FeField& bubble);

/// Output of the BDM interpolation of a BR field: the linear part is kept and
/// every face bubble becomes a multiple of the RT0 face function.
struct BdmImage {
  FeField linear;  // VectorP1
  FeField rt;      // RT0
};

// ---- basis functions ------------------------------------------------------

/// Mean value of the face bubble phi_F over its face: 1/6 in 2D, 1/60 in 3D.
/// The BDM interpolant of phi_F n_F is bubble_flux_factor(d) * |F| * phi_F^RT.
double bubble_flux_factor(int dim);

/// phi_F for local face i (product of the barycentric coordinates of its vertices).
double bubble_value(int dim, const std::array<double, 4>& lambda, int local_face);
Vec bubble_gradient(int dim, const std::array<double, 4>& lambda, const CellGeometry& geo,
                    int local_face);
/// RT0 function of local face i of `cell` at the physical point x; normalized
/// to unit flux through the face in the direction of its stored normal.
Vec rt0_value(const SimplicialMesh& mesh, Index cell, int local_face, const Vec& x);
/// Physical point of barycentric coordinates in `cell`.
Vec barycentric_point(const SimplicialMesh& mesh, Index cell, const std::array<double, 4>& lambda);

// ---- operations -----------------------------------------------------------

/// Vertex values of g, boundary vertices included.
FeField nodal_interpolate(const SimplicialMesh& mesh, const VectorFunction& g);

enum class BubbleLift { None, FluxMatching };

/// Dirichlet lifting: the P1 part carries g at boundary vertices (zero inside).
/// With FluxMatching the boundary-face bubbles additionally restore the exact
/// normal flux of g through every boundary face, so the lifted data has the
/// same net flux as g.
FeField dirichlet_lift(const SimplicialMesh& mesh, const VectorFunction& g,
                       BubbleLift bubbles = BubbleLift::FluxMatching);

BdmImage bdm_interpolate(const FeField& br_field);

/// Cellwise mean of a scalar function (degree-4 quadrature).
FeField p0_project(const SimplicialMesh& mesh, const ScalarFunction& w);
/// Cellwise mean of each component of a VectorP1, BRFull or RT0 field.
std::vector<Vec> p0_project(const FeField& field);

struct PointValue {
  Vec value = Vec::Zero();
  Mat gradient = Mat::Zero();  // gradient(k, m) = d value_k / d x_m
};

/// Evaluate a field at a point of the reference simplex of `cell`
/// (local coordinates xi; barycentric lambda_i = xi_i, lambda_0 = 1 - sum xi).
/// Pressures report their value in value.x().
PointValue evaluate(const FeField& field, Index cell, const Vec& local_point);
/// Same, with the point given in barycentric coordinates.
PointValue evaluate_barycentric(const FeField& field, Index cell, const std::array<double, 4>& lambda);

/// Cellwise divergence of the BDM image (constant per cell).
Eigen::VectorXd bdm_divergence(const BdmImage& image);

}  // namespace brflow
