#include "brflow/fespace.hpp"

#include <string>

#include "brflow/error.hpp"
#include "brflow/quadrature.hpp"

namespace brflow {

DofLayout::DofLayout(const SimplicialMesh& mesh) : mesh_(&mesh) {
  const int d = mesh.dim();
  vertex_dof_.assign(mesh.num_vertices(), -1);
  for (Index v = 0; v < mesh.num_vertices(); ++v)
    if (!mesh.boundary_vertex(v)) vertex_dof_[v] = n_vertices_++;
  face_dof_.assign(mesh.num_faces(), -1);
  for (Index f = 0; f < mesh.num_faces(); ++f) {
    if (mesh.face(f).on_boundary()) {
      boundary_faces_.push_back(f);
    } else {
      face_dof_[f] = n_faces_++;
      interior_faces_.push_back(f);
    }
  }
  interior_linear_.resize(static_cast<std::size_t>(d * n_vertices_));
  for (int k = 0; k < d; ++k) {
    for (Index v = 0; v < mesh.num_vertices(); ++v) {
      if (vertex_dof_[v] >= 0)
        interior_linear_[k * n_vertices_ + vertex_dof_[v]] = full_linear_index(v, k);
      else
        boundary_linear_.push_back(full_linear_index(v, k));
    }
  }
}

Index FeField::size_for(SpaceTag space, const SimplicialMesh& mesh) {
  const Index nl = mesh.dim() * mesh.num_vertices();
  switch (space) {
    case SpaceTag::VectorP1: return nl;
    case SpaceTag::BRBubble: return mesh.num_faces();
    case SpaceTag::BRFull: return nl + mesh.num_faces();
    case SpaceTag::P0Pressure: return mesh.num_cells();
    case SpaceTag::RT0: return mesh.num_faces();
  }
  return 0;
}

FeField FeField::zero(SpaceTag space, const SimplicialMesh& mesh) {
  FeField f;
  f.space = space;
  f.mesh = &mesh;
  f.coefficients = Eigen::VectorXd::Zero(size_for(space, mesh));
  return f;
}

Eigen::VectorXd FeField::linear_part() const {
  if (space == SpaceTag::VectorP1) return coefficients;
  if (space != SpaceTag::BRFull) throw Error("linear_part: field has no linear part");
  return coefficients.head(mesh->dim() * mesh->num_vertices());
}

Eigen::VectorXd FeField::bubble_part() const {
  if (space == SpaceTag::BRBubble) return coefficients;
  if (space != SpaceTag::BRFull) throw Error("bubble_part: field has no bubble part");
  return coefficients.tail(mesh->num_faces());
}

Vec FeField::vertex_value(Index v) const {
  if (space != SpaceTag::VectorP1 && space != SpaceTag::BRFull)
    throw Error("vertex_value: field has no nodal part");
  Vec out = Vec::Zero();
  const Index n = mesh->num_vertices();
  for (int k = 0; k < mesh->dim(); ++k) out[k] = coefficients[k * n + v];
  return out;
}

std::pair<FeField, FeField> split_br(const FeField& field) {
  if (field.space != SpaceTag::BRFull) throw Error("split_br: expected a BRFull field");
  FeField lin{SpaceTag::VectorP1, field.linear_part(), field.mesh};
  FeField bub{SpaceTag::BRBubble, field.bubble_part(), field.mesh};
  return {lin, bub};
}

FeField combine_br(const FeField& linear, const FeField& bubble) {
  if (linear.space != SpaceTag::VectorP1 || bubble.space != SpaceTag::BRBubble)
    throw Error("combine_br: expected VectorP1 and BRBubble parts");
  FeField out = FeField::zero(SpaceTag::BRFull, *linear.mesh);
  out.coefficients << linear.coefficients, bubble.coefficients;
  return out;
}

double bubble_flux_factor(int dim) { return dim == 2 ? 1.0 / 6.0 : 1.0 / 60.0; }

double bubble_value(int dim, const std::array<double, 4>& lambda, int local_face) {
  double v = 1.0;
  for (int j = 0; j <= dim; ++j)
    if (j != local_face) v *= lambda[j];
  return v;
}

Vec bubble_gradient(int dim, const std::array<double, 4>& lambda, const CellGeometry& geo,
                    int local_face) {
  Vec g = Vec::Zero();
  for (int a = 0; a <= dim; ++a) {
    if (a == local_face) continue;
    double prod = 1.0;
    for (int b = 0; b <= dim; ++b)
      if (b != local_face && b != a) prod *= lambda[b];
    g += prod * geo.grad_lambda[a];
  }
  return g;
}

Vec rt0_value(const SimplicialMesh& mesh, Index cell, int local_face, const Vec& x) {
  const int d = mesh.dim();
  const Vec& opposite = mesh.vertex(mesh.cell(cell)[local_face]);
  return mesh.face_sign(cell, local_face) * (x - opposite) / (d * mesh.geometry(cell).volume);
}

Vec barycentric_point(const SimplicialMesh& mesh, Index cell, const std::array<double, 4>& lambda) {
  Vec x = Vec::Zero();
  const auto ids = mesh.cell(cell);
  for (int i = 0; i <= mesh.dim(); ++i) x += lambda[i] * mesh.vertex(ids[i]);
  return x;
}

FeField nodal_interpolate(const SimplicialMesh& mesh, const VectorFunction& g) {
  FeField out = FeField::zero(SpaceTag::VectorP1, mesh);
  const Index n = mesh.num_vertices();
  for (Index v = 0; v < n; ++v) {
    const Vec val = g(mesh.vertex(v));
    for (int k = 0; k < mesh.dim(); ++k) out.coefficients[k * n + v] = val[k];
  }
  return out;
}

FeField dirichlet_lift(const SimplicialMesh& mesh, const VectorFunction& g, BubbleLift bubbles) {
  const int d = mesh.dim();
  const Index n = mesh.num_vertices();
  FeField out = FeField::zero(SpaceTag::BRFull, mesh);
  std::vector<Vec> gv(static_cast<std::size_t>(n), Vec::Zero());
  for (Index v = 0; v < n; ++v) {
    if (!mesh.boundary_vertex(v)) continue;
    gv[v] = g(mesh.vertex(v));
    for (int k = 0; k < d; ++k) out.coefficients[k * n + v] = gv[v][k];
  }
  if (bubbles == BubbleLift::None) return out;

  const QuadratureRule& rule = simplex_rule(d - 1, 6);
  const Index off = d * n;
  for (Index f = 0; f < mesh.num_faces(); ++f) {
    const Face& face = mesh.face(f);
    if (!face.on_boundary()) continue;
    double exact_flux = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      Vec x = Vec::Zero();
      for (int k = 0; k < d; ++k) x += rule.points[q][k] * mesh.vertex(face.vertices[k]);
      exact_flux += rule.weights[q] * g(x).dot(face.normal);
    }
    exact_flux *= face.measure;
    double linear_flux = 0.0;
    for (int k = 0; k < d; ++k) linear_flux += gv[face.vertices[k]].dot(face.normal);
    linear_flux *= face.measure / d;
    out.coefficients[off + f] = (exact_flux - linear_flux) / (bubble_flux_factor(d) * face.measure);
  }
  return out;
}

BdmImage bdm_interpolate(const FeField& br_field) {
  if (br_field.space != SpaceTag::BRFull) throw Error("bdm_interpolate: expected a BRFull field");
  const SimplicialMesh& mesh = *br_field.mesh;
  BdmImage img{FeField{SpaceTag::VectorP1, br_field.linear_part(), &mesh},
               FeField::zero(SpaceTag::RT0, mesh)};
  const Eigen::VectorXd bub = br_field.bubble_part();
  const double c = bubble_flux_factor(mesh.dim());
  for (Index f = 0; f < mesh.num_faces(); ++f) img.rt.coefficients[f] = c * mesh.face(f).measure * bub[f];
  return img;
}

Eigen::VectorXd bdm_divergence(const BdmImage& image) {
  const SimplicialMesh& mesh = *image.linear.mesh;
  const int d = mesh.dim();
  const Index n = mesh.num_vertices();
  Eigen::VectorXd div(mesh.num_cells());
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const auto& geo = mesh.geometry(c);
    const auto ids = mesh.cell(c);
    double s = 0.0;
    for (int i = 0; i <= d; ++i)
      for (int k = 0; k < d; ++k) s += image.linear.coefficients[k * n + ids[i]] * geo.grad_lambda[i][k];
    for (int i = 0; i <= d; ++i)
      s += image.rt.coefficients[mesh.cell_face(c, i)] * mesh.face_sign(c, i) / geo.volume;
    div[c] = s;
  }
  return div;
}

FeField p0_project(const SimplicialMesh& mesh, const ScalarFunction& w) {
  FeField out = FeField::zero(SpaceTag::P0Pressure, mesh);
  const QuadratureRule& rule = simplex_rule(mesh.dim(), 4);
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    double s = 0.0;
    for (std::size_t q = 0; q < rule.size(); ++q)
      s += rule.weights[q] * w(barycentric_point(mesh, c, rule.points[q]));
    out.coefficients[c] = s;
  }
  return out;
}

std::vector<Vec> p0_project(const FeField& field) {
  const SimplicialMesh& mesh = *field.mesh;
  const int d = mesh.dim();
  if (field.space == SpaceTag::P0Pressure || field.space == SpaceTag::BRBubble)
    throw Error("p0_project: unsupported field space");
  // exact for the polynomial degrees of all supported spaces (<= d)
  const QuadratureRule& rule = simplex_rule(d, d);
  std::vector<Vec> out(static_cast<std::size_t>(mesh.num_cells()), Vec::Zero());
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    for (std::size_t q = 0; q < rule.size(); ++q)
      out[c] += rule.weights[q] * evaluate_barycentric(field, c, rule.points[q]).value;
  }
  return out;
}

PointValue evaluate_barycentric(const FeField& field, Index cell, const std::array<double, 4>& lambda) {
  const SimplicialMesh& mesh = *field.mesh;
  if (cell < 0 || cell >= mesh.num_cells())
    throw Error("evaluate: invalid cell id " + std::to_string(cell));
  const int d = mesh.dim();
  const Index n = mesh.num_vertices();
  const auto ids = mesh.cell(cell);
  const CellGeometry& geo = mesh.geometry(cell);
  PointValue pv;
  switch (field.space) {
    case SpaceTag::P0Pressure:
      pv.value.x() = field.coefficients[cell];
      return pv;
    case SpaceTag::RT0: {
      const Vec x = barycentric_point(mesh, cell, lambda);
      for (int i = 0; i <= d; ++i) {
        const double coef = field.coefficients[mesh.cell_face(cell, i)];
        pv.value += coef * rt0_value(mesh, cell, i, x);
        const double s = coef * mesh.face_sign(cell, i) / (d * geo.volume);
        for (int k = 0; k < d; ++k) pv.gradient(k, k) += s;
      }
      return pv;
    }
    default: break;
  }
  if (field.space == SpaceTag::VectorP1 || field.space == SpaceTag::BRFull) {
    for (int i = 0; i <= d; ++i) {
      for (int k = 0; k < d; ++k) {
        const double u = field.coefficients[k * n + ids[i]];
        pv.value[k] += u * lambda[i];
        pv.gradient.row(k) += u * geo.grad_lambda[i].transpose();
      }
    }
  }
  if (field.space == SpaceTag::BRBubble || field.space == SpaceTag::BRFull) {
    const Index off = field.space == SpaceTag::BRFull ? d * n : 0;
    for (int i = 0; i <= d; ++i) {
      const Index f = mesh.cell_face(cell, i);
      const double u = field.coefficients[off + f];
      if (u == 0.0) continue;
      const Vec& nf = mesh.face(f).normal;
      pv.value += u * bubble_value(d, lambda, i) * nf;
      pv.gradient += u * nf * bubble_gradient(d, lambda, geo, i).transpose();
    }
  }
  return pv;
}

PointValue evaluate(const FeField& field, Index cell, const Vec& local_point) {
  const int d = field.mesh->dim();
  std::array<double, 4> lambda{0.0, 0.0, 0.0, 0.0};
  lambda[0] = 1.0;
  for (int i = 0; i < d; ++i) {
    lambda[i + 1] = local_point[i];
    lambda[0] -= local_point[i];
  }
  return evaluate_barycentric(field, cell, lambda);
}

}  // namespace brflow
