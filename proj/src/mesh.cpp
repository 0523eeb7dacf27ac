#include "brflow/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "brflow/error.hpp"

namespace brflow {

namespace {

// Local index of the vertex pair (a, b), a != b, among the 6 pairs of a tetrahedron.
int pair_index(int a, int b) {
  if (a > b) std::swap(a, b);
  static constexpr int table[4][4] = {{-1, 0, 1, 2}, {0, -1, 3, 4}, {1, 3, -1, 5}, {2, 4, 5, -1}};
  return table[a][b];
}

double signed_volume(int dim, const std::array<Vec, 4>& x) {
  if (dim == 2) {
    const Vec a = x[1] - x[0];
    const Vec b = x[2] - x[0];
    return 0.5 * (a.x() * b.y() - a.y() * b.x());
  }
  return (x[1] - x[0]).dot((x[2] - x[0]).cross(x[3] - x[0])) / 6.0;
}

}  // namespace

CellGeometry cell_geometry(const SimplicialMesh& mesh, Index cell) {
  if (cell < 0 || cell >= mesh.num_cells()) {
    throw MeshError("cell id " + std::to_string(cell) + " out of range");
  }
  const int d = mesh.dim();
  const auto ids = mesh.cell(cell);
  std::array<Vec, 4> x;
  x.fill(Vec::Zero());
  for (int i = 0; i <= d; ++i) x[i] = mesh.vertex(ids[i]);

  CellGeometry g;
  const double vol = signed_volume(d, x);
  // scale-aware degeneracy test: compare against the size of the cell
  double diam = 0.0;
  for (int i = 0; i <= d; ++i)
    for (int j = i + 1; j <= d; ++j) diam = std::max(diam, (x[i] - x[j]).norm());
  if (!(std::abs(vol) > 1e-14 * std::pow(diam, d))) {
    throw MeshError("degenerate cell " + std::to_string(cell));
  }
  g.volume = std::abs(vol);

  if (d == 2) {
    Eigen::Matrix2d jac;
    jac.col(0) = (x[1] - x[0]).head<2>();
    jac.col(1) = (x[2] - x[0]).head<2>();
    const Eigen::Matrix2d inv = jac.inverse();
    g.grad_lambda[1] << inv(0, 0), inv(0, 1), 0.0;
    g.grad_lambda[2] << inv(1, 0), inv(1, 1), 0.0;
  } else {
    Eigen::Matrix3d jac;
    jac.col(0) = x[1] - x[0];
    jac.col(1) = x[2] - x[0];
    jac.col(2) = x[3] - x[0];
    const Eigen::Matrix3d inv = jac.inverse();
    for (int i = 1; i <= 3; ++i) g.grad_lambda[i] = inv.row(i - 1).transpose();
  }
  g.grad_lambda[0] = Vec::Zero();
  for (int i = 1; i <= d; ++i) g.grad_lambda[0] -= g.grad_lambda[i];

  g.barycenter = Vec::Zero();
  for (int i = 0; i <= d; ++i) g.barycenter += x[i];
  g.barycenter /= (d + 1);
  for (int i = 0; i <= d; ++i) {
    Vec s = Vec::Zero();
    for (int j = 0; j <= d; ++j)
      if (j != i) s += x[j];
    g.face_barycenter[i] = s / d;
  }
  return g;
}

SimplicialMesh::SimplicialMesh(int dim, std::vector<Vec> vertices,
                               std::vector<std::array<Index, 4>> cells)
    : dim_(dim), vertices_(std::move(vertices)), cells_(std::move(cells)) {
  if (dim_ != 2 && dim_ != 3) throw MeshError("mesh dimension must be 2 or 3");
  if (cells_.empty()) throw MeshError("mesh has no cells");
  for (Index c = 0; c < num_cells(); ++c) {
    for (int i = 0; i <= dim_; ++i) {
      const Index v = cells_[c][i];
      if (v < 0 || v >= num_vertices())
        throw MeshError("cell " + std::to_string(c) + " references invalid vertex");
    }
    if (dim_ == 2) cells_[c][3] = -1;
    // store every cell positively oriented
    std::array<Vec, 4> x{};
    for (int i = 0; i <= dim_; ++i) x[i] = vertices_[cells_[c][i]];
    if (signed_volume(dim_, x) < 0.0) std::swap(cells_[c][0], cells_[c][1]);
  }
  build_geometry();
  build_faces();
  build_edges();
}

void SimplicialMesh::build_geometry() {
  geometry_.resize(cells_.size());
  for (Index c = 0; c < num_cells(); ++c) geometry_[c] = cell_geometry(*this, c);
}

void SimplicialMesh::build_faces() {
  std::map<std::array<Index, 3>, Index> lookup;
  cell_faces_.assign(cells_.size(), {-1, -1, -1, -1});
  face_signs_.assign(cells_.size(), {0, 0, 0, 0});
  for (Index c = 0; c < num_cells(); ++c) {
    for (int i = 0; i <= dim_; ++i) {
      std::array<Index, 3> key{-1, -1, -1};
      int k = 0;
      for (int j = 0; j <= dim_; ++j)
        if (j != i) key[k++] = cells_[c][j];
      std::sort(key.begin(), key.begin() + dim_);
      auto [it, inserted] = lookup.try_emplace(key, num_faces());
      if (inserted) {
        Face f;
        f.vertices = key;
        f.cells = {c, -1};
        const Vec& a = vertices_[key[0]];
        const Vec& b = vertices_[key[1]];
        if (dim_ == 2) {
          const Vec t = b - a;
          f.measure = t.norm();
          f.normal = Vec(t.y(), -t.x(), 0.0) / f.measure;
          f.barycenter = 0.5 * (a + b);
        } else {
          const Vec& e = vertices_[key[2]];
          const Vec cr = (b - a).cross(e - a);
          f.measure = 0.5 * cr.norm();
          f.normal = cr.normalized();
          f.barycenter = (a + b + e) / 3.0;
        }
        const Vec& opposite = vertices_[cells_[c][i]];
        if ((opposite - a).dot(f.normal) > 0.0) f.normal = -f.normal;
        faces_.push_back(f);
        face_signs_[c][i] = 1;
      } else {
        Face& f = faces_[it->second];
        if (f.cells[1] >= 0) {
          throw MeshError("non-conforming mesh: face shared by more than two cells (cell " +
                          std::to_string(c) + ")");
        }
        f.cells[1] = c;
        face_signs_[c][i] = -1;
      }
      cell_faces_[c][i] = it->second;
    }
  }
  boundary_vertex_.assign(vertices_.size(), false);
  for (const Face& f : faces_) {
    if (!f.on_boundary()) continue;
    for (int k = 0; k < dim_; ++k) boundary_vertex_[f.vertices[k]] = true;
  }
}

void SimplicialMesh::build_edges() {
  std::map<std::array<Index, 2>, Index> lookup;
  cell_edges_.assign(cells_.size(), {-1, -1, -1, -1, -1, -1});
  for (Index c = 0; c < num_cells(); ++c) {
    for (int a = 0; a <= dim_; ++a) {
      for (int b = a + 1; b <= dim_; ++b) {
        std::array<Index, 2> key{cells_[c][a], cells_[c][b]};
        if (key[0] > key[1]) std::swap(key[0], key[1]);
        auto [it, inserted] = lookup.try_emplace(key, num_edges());
        if (inserted) {
          Edge e;
          e.vertices = key;
          e.tangent = vertices_[key[1]] - vertices_[key[0]];
          e.length = e.tangent.norm();
          edges_.push_back(e);
        }
        cell_edges_[c][pair_index(a, b)] = it->second;
      }
    }
  }
}

Index SimplicialMesh::cell_edge(Index c, int a, int b) const {
  return cell_edges_[c][pair_index(a, b)];
}

double SimplicialMesh::measure() const {
  double s = 0.0;
  for (const auto& g : geometry_) s += g.volume;
  return s;
}

double SimplicialMesh::mesh_size() const {
  double h = 0.0;
  for (const auto& g : geometry_) h = std::max(h, std::pow(g.volume, 1.0 / dim_));
  return h;
}

SimplicialMesh uniform_rectangle_mesh(std::array<double, 2> x_range, std::array<double, 2> y_range,
                                      int nx, int ny, GridPattern pattern) {
  if (nx < 1 || ny < 1) throw MeshError("grid counts must be positive");
  if (!(x_range[1] > x_range[0]) || !(y_range[1] > y_range[0]))
    throw MeshError("empty rectangle");
  const double hx = (x_range[1] - x_range[0]) / nx;
  const double hy = (y_range[1] - y_range[0]) / ny;
  std::vector<Vec> verts;
  verts.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1) + nx * ny));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) verts.emplace_back(x_range[0] + i * hx, y_range[0] + j * hy, 0.0);
  auto node = [nx](int i, int j) { return j * (nx + 1) + i; };

  std::vector<std::array<Index, 4>> cells;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const Index a = node(i, j), b = node(i + 1, j), c = node(i + 1, j + 1), d = node(i, j + 1);
      if (pattern == GridPattern::RightDiagonal) {
        cells.push_back({a, b, c, -1});
        cells.push_back({a, c, d, -1});
      } else if (pattern == GridPattern::UnionJack) {
        if ((i + j) % 2 == 0) {
          cells.push_back({a, b, c, -1});
          cells.push_back({a, c, d, -1});
        } else {
          cells.push_back({a, b, d, -1});
          cells.push_back({b, c, d, -1});
        }
      } else {
        const Index m = static_cast<Index>(verts.size());
        verts.emplace_back(x_range[0] + (i + 0.5) * hx, y_range[0] + (j + 0.5) * hy, 0.0);
        cells.push_back({a, b, m, -1});
        cells.push_back({b, c, m, -1});
        cells.push_back({c, d, m, -1});
        cells.push_back({d, a, m, -1});
      }
    }
  }
  return SimplicialMesh(2, std::move(verts), std::move(cells));
}

SimplicialMesh uniform_box_mesh(std::array<double, 2> x_range, std::array<double, 2> y_range,
                                std::array<double, 2> z_range, int n) {
  if (n < 1) throw MeshError("box subdivision count must be positive");
  const double hx = (x_range[1] - x_range[0]) / n;
  const double hy = (y_range[1] - y_range[0]) / n;
  const double hz = (z_range[1] - z_range[0]) / n;
  std::vector<Vec> verts;
  verts.reserve(static_cast<std::size_t>((n + 1) * (n + 1) * (n + 1)));
  for (int k = 0; k <= n; ++k)
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i)
        verts.emplace_back(x_range[0] + i * hx, y_range[0] + j * hy, z_range[0] + k * hz);
  auto node = [n](int i, int j, int k) { return (k * (n + 1) + j) * (n + 1) + i; };

  // one tetrahedron per axis permutation, all sharing the main diagonal
  static constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                      {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  std::vector<std::array<Index, 4>> cells;
  cells.reserve(static_cast<std::size_t>(6 * n * n * n));
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        for (const auto& p : perms) {
          std::array<int, 3> o{i, j, k};
          std::array<Index, 4> tet{};
          tet[0] = node(o[0], o[1], o[2]);
          for (int s = 0; s < 3; ++s) {
            ++o[p[s]];
            tet[s + 1] = node(o[0], o[1], o[2]);
          }
          cells.push_back(tet);
        }
      }
    }
  }
  return SimplicialMesh(3, std::move(verts), std::move(cells));
}

SimplicialMesh quad_refine(const SimplicialMesh& mesh) {
  if (mesh.dim() != 2) throw MeshError("quad refinement is only available for triangle meshes");
  std::vector<Vec> verts = mesh.vertices();
  // new vertex per edge midpoint, numbered after the old vertices in edge order
  const Index base = mesh.num_vertices();
  for (Index e = 0; e < mesh.num_edges(); ++e) {
    const Edge& edge = mesh.edge(e);
    verts.push_back(0.5 * (mesh.vertex(edge.vertices[0]) + mesh.vertex(edge.vertices[1])));
  }
  std::vector<std::array<Index, 4>> cells;
  cells.reserve(static_cast<std::size_t>(4 * mesh.num_cells()));
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const auto v = mesh.cell(c);
    const Index m01 = base + mesh.cell_edge(c, 0, 1);
    const Index m12 = base + mesh.cell_edge(c, 1, 2);
    const Index m02 = base + mesh.cell_edge(c, 0, 2);
    cells.push_back({v[0], m01, m02, -1});
    cells.push_back({m01, v[1], m12, -1});
    cells.push_back({m02, m12, v[2], -1});
    cells.push_back({m01, m12, m02, -1});
  }
  return SimplicialMesh(2, std::move(verts), std::move(cells));
}

}  // namespace brflow
