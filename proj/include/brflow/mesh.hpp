#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace brflow {

using Index = int;
/// Points and vectors are stored with three components; the third is zero in 2D.
using Vec = Eigen::Vector3d;

/// RightDiagonal: two triangles per square split along (i,j)-(i+1,j+1).
/// Crisscross: four triangles per square around an added center vertex.
/// UnionJack: two triangles per square with the diagonal direction alternating
/// in a checkerboard, so every 2x2 block of squares forms a union-jack star.
enum class GridPattern { RightDiagonal, Crisscross, UnionJack };

/// A (d-1)-simplex of the mesh. Vertex ids are sorted ascending.
struct Face {
  std::array<Index, 3> vertices{-1, -1, -1};
  Vec normal = Vec::Zero();      // unit, outward for cells[0]
  Vec barycenter = Vec::Zero();
  double measure = 0.0;
  std::array<Index, 2> cells{-1, -1};

  bool on_boundary() const { return cells[1] < 0; }
};

/// Edge with tangent pointing from the lower to the higher vertex id.
struct Edge {
  std::array<Index, 2> vertices{-1, -1};
  Vec tangent = Vec::Zero();  // x_hi - x_lo, i.e. |E| t_E
  double length = 0.0;
};

struct CellGeometry {
  double volume = 0.0;
  std::array<Vec, 4> grad_lambda{};       // gradients of the barycentric coordinates
  std::array<Vec, 4> face_barycenter{};   // face i is opposite local vertex i
  Vec barycenter = Vec::Zero();
};

/// Conforming simplicial mesh in 2D (triangles) or 3D (tetrahedra).
///
/// Faces and edges are derived from the cell list at construction. Local face
/// i of a cell is the face opposite its local vertex i. The mesh is immutable
/// after construction.
class SimplicialMesh {
 public:
  SimplicialMesh(int dim, std::vector<Vec> vertices, std::vector<std::array<Index, 4>> cells);

  int dim() const { return dim_; }
  int vertices_per_cell() const { return dim_ + 1; }

  Index num_vertices() const { return static_cast<Index>(vertices_.size()); }
  Index num_cells() const { return static_cast<Index>(cells_.size()); }
  Index num_faces() const { return static_cast<Index>(faces_.size()); }
  Index num_edges() const { return static_cast<Index>(edges_.size()); }

  const Vec& vertex(Index v) const { return vertices_[v]; }
  const std::vector<Vec>& vertices() const { return vertices_; }
  std::span<const Index> cell(Index c) const {
    return {cells_[c].data(), static_cast<std::size_t>(dim_ + 1)};
  }
  const Face& face(Index f) const { return faces_[f]; }
  const Edge& edge(Index e) const { return edges_[e]; }
  const CellGeometry& geometry(Index c) const { return geometry_[c]; }

  /// Face opposite local vertex `local` of cell `c`.
  Index cell_face(Index c, int local) const { return cell_faces_[c][local]; }
  /// +1 when the stored normal of that face points out of cell `c`, -1 otherwise.
  int face_sign(Index c, int local) const { return face_signs_[c][local]; }
  /// Edge joining local vertices a and b of cell `c`.
  Index cell_edge(Index c, int a, int b) const;

  bool boundary_vertex(Index v) const { return boundary_vertex_[v]; }

  /// Sum of cell volumes.
  double measure() const;
  /// max_T |T|^{1/d}
  double mesh_size() const;

 private:
  void build_geometry();
  void build_faces();
  void build_edges();

  int dim_;
  std::vector<Vec> vertices_;
  std::vector<std::array<Index, 4>> cells_;
  std::vector<CellGeometry> geometry_;
  std::vector<Face> faces_;
  std::vector<std::array<Index, 4>> cell_faces_;
  std::vector<std::array<int, 4>> face_signs_;
  std::vector<Edge> edges_;
  std::vector<std::array<Index, 6>> cell_edges_;
  std::vector<bool> boundary_vertex_;
};

/// Geometry of one cell computed from its vertex coordinates.
/// Throws MeshError naming the cell when it is degenerate.
CellGeometry cell_geometry(const SimplicialMesh& mesh, Index cell);

/// Triangulation of [x0,x1]x[y0,y1] with nx*ny squares (rectangles).
SimplicialMesh uniform_rectangle_mesh(std::array<double, 2> x_range, std::array<double, 2> y_range,
                                      int nx, int ny, GridPattern pattern);

/// Kuhn (Freudenthal) tetrahedralization of a box: six tetrahedra per cube.
SimplicialMesh uniform_box_mesh(std::array<double, 2> x_range, std::array<double, 2> y_range,
                                std::array<double, 2> z_range, int n);

/// Red refinement of a triangle mesh: each triangle is split into four
/// congruent children through the edge midpoints.
SimplicialMesh quad_refine(const SimplicialMesh& mesh);

}  // namespace brflow
