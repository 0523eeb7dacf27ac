#include "brflow/forms.hpp"

#include <cmath>
#include <stdexcept>

#include "brflow/error.hpp"
#include "brflow/quadrature.hpp"

namespace brflow {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

SparseMatrix from_triplets(Index rows, Index cols, const Triplets& t) {
  SparseMatrix m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

Index nlin(const SimplicialMesh& mesh) { return mesh.dim() * mesh.num_vertices(); }

// Barycentric coordinates of the barycenter of local face i.
std::array<double, 4> face_point(int dim, int local_face) {
  std::array<double, 4> lam{0.0, 0.0, 0.0, 0.0};
  for (int j = 0; j <= dim; ++j) lam[j] = j == local_face ? 0.0 : 1.0 / dim;
  return lam;
}

// Basis functions of the BR space restricted to one cell, evaluated at a point.
// Local numbering: linear (i, k) -> i * d + k, then bubble of local face i -> (d+1)*d + i.
struct LocalBasis {
  int d = 0;
  int n = 0;
  std::array<Index, 16> global{};
  std::array<Vec, 16> value{};
  std::array<Vec, 16> bdm_value{};  // Pi_h of the basis function
  std::array<Mat, 16> grad{};
};

void fill_indices(const SimplicialMesh& mesh, Index c, LocalBasis& lb) {
  const int d = mesh.dim();
  const Index nv = mesh.num_vertices();
  const auto ids = mesh.cell(c);
  lb.d = d;
  lb.n = (d + 1) * (d + 1);
  for (int i = 0; i <= d; ++i) {
    for (int k = 0; k < d; ++k) lb.global[i * d + k] = k * nv + ids[i];
    lb.global[(d + 1) * d + i] = d * nv + mesh.cell_face(c, i);
  }
}

void eval_basis(const SimplicialMesh& mesh, Index c, const std::array<double, 4>& lam, LocalBasis& lb) {
  const int d = mesh.dim();
  const CellGeometry& geo = mesh.geometry(c);
  const Vec x = barycentric_point(mesh, c, lam);
  const double cf = bubble_flux_factor(d);
  for (int i = 0; i <= d; ++i) {
    for (int k = 0; k < d; ++k) {
      const int a = i * d + k;
      lb.value[a] = Vec::Unit(k) * lam[i];
      lb.bdm_value[a] = lb.value[a];
      lb.grad[a] = Mat::Zero();
      lb.grad[a].row(k) = geo.grad_lambda[i].transpose();
    }
    const int a = (d + 1) * d + i;
    const Face& face = mesh.face(mesh.cell_face(c, i));
    lb.value[a] = bubble_value(d, lam, i) * face.normal;
    lb.bdm_value[a] = cf * face.measure * rt0_value(mesh, c, i, x);
    lb.grad[a] = face.normal * bubble_gradient(d, lam, geo, i).transpose();
  }
}

// Splits a full (linear + bubble) local assembly into VelocityBlocks.
void scatter(const SimplicialMesh& mesh, const LocalBasis& lb, const Eigen::MatrixXd& local,
             Triplets& bb, Triplets& bl, Triplets& lb_, Triplets& ll) {
  const Index off = nlin(mesh);
  for (int s = 0; s < lb.n; ++s) {
    for (int t = 0; t < lb.n; ++t) {
      const double v = local(s, t);
      if (v == 0.0) continue;
      const Index r = lb.global[s], col = lb.global[t];
      const bool rb = r >= off, cb = col >= off;
      if (rb && cb) bb.emplace_back(r - off, col - off, v);
      else if (rb) bl.emplace_back(r - off, col, v);
      else if (cb) lb_.emplace_back(r, col - off, v);
      else ll.emplace_back(r, col, v);
    }
  }
}

VelocityBlocks blocks_from(const SimplicialMesh& mesh, const Triplets& bb, const Triplets& bl,
                           const Triplets& lb, const Triplets& ll) {
  const Index nl = nlin(mesh), nf = mesh.num_faces();
  VelocityBlocks out;
  out.bb = from_triplets(nf, nf, bb);
  out.bl = from_triplets(nf, nl, bl);
  out.lb = from_triplets(nl, nf, lb);
  out.ll = from_triplets(nl, nl, ll);
  return out;
}

}  // namespace

VelocityBlocks VelocityBlocks::zero(const SimplicialMesh& mesh) {
  return blocks_from(mesh, {}, {}, {}, {});
}

VelocityBlocks& VelocityBlocks::operator+=(const VelocityBlocks& o) {
  bb += o.bb;
  bl += o.bl;
  lb += o.lb;
  ll += o.ll;
  return *this;
}

VelocityBlocks VelocityBlocks::scaled(double s) const {
  VelocityBlocks out;
  out.bb = s * bb;
  out.bl = s * bl;
  out.lb = s * lb;
  out.ll = s * ll;
  return out;
}

ConvectionField ConvectionField::constant(const SimplicialMesh& mesh, const Vec& b, double epsilon) {
  ConvectionField c;
  c.b.assign(static_cast<std::size_t>(mesh.num_cells()), b);
  c.epsilon = epsilon;
  return c;
}

SparseMatrix p1_stiffness(const SimplicialMesh& mesh) {
  const int d = mesh.dim();
  Triplets t;
  t.reserve(static_cast<std::size_t>(mesh.num_cells() * (d + 1) * (d + 1)));
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const auto& geo = mesh.geometry(c);
    const auto ids = mesh.cell(c);
    for (int i = 0; i <= d; ++i)
      for (int j = 0; j <= d; ++j)
        t.emplace_back(ids[i], ids[j], geo.volume * geo.grad_lambda[i].dot(geo.grad_lambda[j]));
  }
  return from_triplets(mesh.num_vertices(), mesh.num_vertices(), t);
}

VelocityBlocks assemble_grad_grad(const SimplicialMesh& mesh) {
  const int d = mesh.dim();
  const Index nv = mesh.num_vertices();
  const QuadratureRule& rule = simplex_rule(d, d - 1);
  Triplets ll, lb, bl;
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const auto& geo = mesh.geometry(c);
    const auto ids = mesh.cell(c);
    for (int i = 0; i <= d; ++i) {
      for (int j = 0; j <= d; ++j) {
        const double a = geo.volume * geo.grad_lambda[i].dot(geo.grad_lambda[j]);
        for (int k = 0; k < d; ++k) ll.emplace_back(k * nv + ids[i], k * nv + ids[j], a);
      }
    }
    // (grad phi_F, grad lambda_i) n_F,k
    for (int fl = 0; fl <= d; ++fl) {
      const Index f = mesh.cell_face(c, fl);
      const Vec& nf = mesh.face(f).normal;
      Vec mean_grad = Vec::Zero();
      for (std::size_t q = 0; q < rule.size(); ++q)
        mean_grad += rule.weights[q] * bubble_gradient(d, rule.points[q], geo, fl);
      for (int i = 0; i <= d; ++i) {
        const double s = geo.volume * mean_grad.dot(geo.grad_lambda[i]);
        for (int k = 0; k < d; ++k) {
          lb.emplace_back(k * nv + ids[i], f, s * nf[k]);
          bl.emplace_back(f, k * nv + ids[i], s * nf[k]);
        }
      }
    }
  }
  return blocks_from(mesh, {}, bl, lb, ll);
}

Eigen::VectorXd assemble_bubble_diag(const SimplicialMesh& mesh) {
  const int d = mesh.dim();
  const QuadratureRule& rule = simplex_rule(d, 2 * (d - 1));
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(mesh.num_faces());
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const auto& geo = mesh.geometry(c);
    for (int fl = 0; fl <= d; ++fl) {
      double s = 0.0;
      for (std::size_t q = 0; q < rule.size(); ++q)
        s += rule.weights[q] * bubble_gradient(d, rule.points[q], geo, fl).squaredNorm();
      diag[mesh.cell_face(c, fl)] += geo.volume * s;
    }
  }
  return diag;
}

SparseMatrix assemble_bubble_grad_grad(const SimplicialMesh& mesh) {
  const int d = mesh.dim();
  const QuadratureRule& rule = simplex_rule(d, 2 * (d - 1));
  Triplets t;
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const auto& geo = mesh.geometry(c);
    Eigen::Matrix4d local = Eigen::Matrix4d::Zero();
    for (std::size_t q = 0; q < rule.size(); ++q) {
      std::array<Vec, 4> g;
      for (int a = 0; a <= d; ++a) g[a] = bubble_gradient(d, rule.points[q], geo, a);
      for (int a = 0; a <= d; ++a)
        for (int b = 0; b <= d; ++b) local(a, b) += rule.weights[q] * g[a].dot(g[b]);
    }
    for (int a = 0; a <= d; ++a) {
      const Index fa = mesh.cell_face(c, a);
      for (int b = 0; b <= d; ++b) {
        const Index fb = mesh.cell_face(c, b);
        const double nn = mesh.face(fa).normal.dot(mesh.face(fb).normal);
        t.emplace_back(fa, fb, geo.volume * local(a, b) * nn);
      }
    }
  }
  return from_triplets(mesh.num_faces(), mesh.num_faces(), t);
}

VelocityBlocks assemble_viscous(const SimplicialMesh& mesh, ViscousForm form) {
  VelocityBlocks out = assemble_grad_grad(mesh);
  if (form == ViscousForm::Full) {
    out.bb = assemble_bubble_grad_grad(mesh);
  } else {
    const Eigen::VectorXd diag = assemble_bubble_diag(mesh);
    Triplets t;
    for (Index f = 0; f < mesh.num_faces(); ++f) t.emplace_back(f, f, diag[f]);
    out.bb = from_triplets(mesh.num_faces(), mesh.num_faces(), t);
  }
  return out;
}

DivergenceBlocks assemble_div(const SimplicialMesh& mesh) {
  const int d = mesh.dim();
  const Index nv = mesh.num_vertices();
  const QuadratureRule& rule = simplex_rule(d, d - 1);
  Triplets bp, lp;
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const auto& geo = mesh.geometry(c);
    const auto ids = mesh.cell(c);
    for (int i = 0; i <= d; ++i)
      for (int k = 0; k < d; ++k) lp.emplace_back(k * nv + ids[i], c, -geo.volume * geo.grad_lambda[i][k]);
    for (int fl = 0; fl <= d; ++fl) {
      const Index f = mesh.cell_face(c, fl);
      double s = 0.0;
      for (std::size_t q = 0; q < rule.size(); ++q)
        s += rule.weights[q] * bubble_gradient(d, rule.points[q], geo, fl).dot(mesh.face(f).normal);
      bp.emplace_back(f, c, -geo.volume * s);
    }
  }
  DivergenceBlocks out;
  out.bp = from_triplets(mesh.num_faces(), mesh.num_cells(), bp);
  out.lp = from_triplets(nlin(mesh), mesh.num_cells(), lp);
  return out;
}

double bernoulli(double s) {
  if (std::isnan(s)) throw std::invalid_argument("bernoulli: NaN argument");
  const double a = std::abs(s);
  if (a < 1e-4) {
    const double s2 = s * s;
    return 1.0 - 0.5 * s + s2 / 12.0 - s2 * s2 / 720.0;
  }
  if (s > 700.0) return s * std::exp(-s);  // e^s would overflow
  return s / std::expm1(s);                 // for s -> -inf this tends to -s
}

Eigen::MatrixXd eafe_local_matrix(const SimplicialMesh& mesh, Index cell, const Vec& b,
                                  double epsilon, EafeDiagonal diagonal) {
  if (!(epsilon > 0.0)) throw Error("EAFE diffusion epsilon must be positive");
  const int d = mesh.dim();
  const auto& geo = mesh.geometry(cell);
  const auto ids = mesh.cell(cell);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d + 1, d + 1);
  for (int i = 0; i <= d; ++i) {
    for (int j = 0; j <= d; ++j) {
      if (i == j) continue;
      const double aij = geo.volume * geo.grad_lambda[i].dot(geo.grad_lambda[j]);
      const Edge& e = mesh.edge(mesh.cell_edge(cell, i, j));
      const double s = b.dot(e.tangent) / epsilon;
      // tau_E points from the lower to the higher vertex id
      const bool from_i_to_j = ids[i] < ids[j];
      m(i, j) = epsilon * aij * bernoulli(from_i_to_j ? s : -s);
    }
  }
  for (int i = 0; i <= d; ++i) {
    double sum = 0.0;
    for (int j = 0; j <= d; ++j) {
      if (j == i) continue;
      sum += diagonal == EafeDiagonal::ColumnSum ? m(j, i) : m(i, j);
    }
    m(i, i) = -sum;
  }
  return m;
}

SparseMatrix assemble_eafe(const SimplicialMesh& mesh, const ConvectionField& conv,
                           EafeDiagonal diagonal) {
  if (!(conv.epsilon > 0.0)) throw Error("EAFE diffusion epsilon must be positive");
  if (static_cast<Index>(conv.b.size()) != mesh.num_cells())
    throw Error("convection field size does not match the mesh");
  const int d = mesh.dim();
  const Index nv = mesh.num_vertices();
  Triplets t;
  t.reserve(static_cast<std::size_t>(mesh.num_cells() * d * (d + 1) * (d + 1)));
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const Eigen::MatrixXd m = eafe_local_matrix(mesh, c, conv.b[c], conv.epsilon, diagonal);
    const auto ids = mesh.cell(c);
    for (int i = 0; i <= d; ++i)
      for (int j = 0; j <= d; ++j)
        for (int k = 0; k < d; ++k) t.emplace_back(k * nv + ids[i], k * nv + ids[j], m(i, j));
  }
  return from_triplets(nlin(mesh), nlin(mesh), t);
}

SparseMatrix assemble_conv_stab(const SimplicialMesh& mesh, const ConvectionField& conv) {
  const int d = mesh.dim();
  const Index nv = mesh.num_vertices();
  const double cf = bubble_flux_factor(d);
  Triplets t;
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const auto& geo = mesh.geometry(c);
    const auto ids = mesh.cell(c);
    const Vec& b = conv.b[c];
    for (int fl = 0; fl <= d; ++fl) {
      const Index f = mesh.cell_face(c, fl);
      // integral over T of Pi_h(phi_F n_F) = c |F| sign (x_c - z) / d
      const Vec rt_integral = cf * mesh.face(f).measure * mesh.face_sign(c, fl) *
                              (geo.barycenter - mesh.vertex(ids[fl])) / d;
      for (int j = 0; j <= d; ++j) {
        const double bg = b.dot(geo.grad_lambda[j]);
        for (int k = 0; k < d; ++k) t.emplace_back(f, k * nv + ids[j], bg * rt_integral[k]);
      }
    }
  }
  return from_triplets(mesh.num_faces(), nlin(mesh), t);
}

namespace {

template <class WindAt>
VelocityBlocks bdm_convection(const SimplicialMesh& mesh, int degree, WindAt wind_at) {
  const QuadratureRule& rule = simplex_rule(mesh.dim(), degree);
  Triplets bb, bl, lb, ll;
  LocalBasis basis;
  Eigen::MatrixXd local;
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    fill_indices(mesh, c, basis);
    local.setZero(basis.n, basis.n);
    const double vol = mesh.geometry(c).volume;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      eval_basis(mesh, c, rule.points[q], basis);
      const Vec w = wind_at(c, rule.points[q]);
      const double wq = rule.weights[q] * vol;
      for (int t = 0; t < basis.n; ++t) {
        const Vec conv = basis.grad[t] * w;
        for (int s = 0; s < basis.n; ++s) local(s, t) += wq * conv.dot(basis.bdm_value[s]);
      }
    }
    scatter(mesh, basis, local, bb, bl, lb, ll);
  }
  return blocks_from(mesh, bb, bl, lb, ll);
}

}  // namespace

VelocityBlocks assemble_bdm_convection(const SimplicialMesh& mesh, const std::vector<Vec>& wind) {
  return bdm_convection(mesh, mesh.dim(),
                        [&](Index c, const std::array<double, 4>&) { return wind[c]; });
}

VelocityBlocks assemble_bdm_convection(const SimplicialMesh& mesh, const FeField& wind) {
  if (wind.space != SpaceTag::BRFull && wind.space != SpaceTag::VectorP1)
    throw Error("convection wind must be a VectorP1 or BRFull field");
  return bdm_convection(mesh, 2 * mesh.dim(), [&](Index c, const std::array<double, 4>& lam) {
    return evaluate_barycentric(wind, c, lam).value;
  });
}

LoadVector assemble_load(const SimplicialMesh& mesh, const VectorFunction& f, BubbleTest test) {
  const int d = mesh.dim();
  const Index nv = mesh.num_vertices();
  const QuadratureRule& rule = simplex_rule(d, 4);
  const double cf = bubble_flux_factor(d);
  LoadVector out{Eigen::VectorXd::Zero(nlin(mesh)), Eigen::VectorXd::Zero(mesh.num_faces())};
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const auto& geo = mesh.geometry(c);
    const auto ids = mesh.cell(c);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const auto& lam = rule.points[q];
      const Vec x = barycentric_point(mesh, c, lam);
      const Vec fx = f(x);
      const double w = rule.weights[q] * geo.volume;
      for (int i = 0; i <= d; ++i)
        for (int k = 0; k < d; ++k) out.linear[k * nv + ids[i]] += w * fx[k] * lam[i];
      for (int fl = 0; fl <= d; ++fl) {
        const Index fc = mesh.cell_face(c, fl);
        const Face& face = mesh.face(fc);
        const Vec psi = test == BubbleTest::Bdm ? Vec(cf * face.measure * rt0_value(mesh, c, fl, x))
                                                : Vec(bubble_value(d, lam, fl) * face.normal);
        out.bubble[fc] += w * fx.dot(psi);
      }
    }
  }
  return out;
}

VelocityBlocks assemble_lumped_mass(const SimplicialMesh& mesh, BubbleTest test) {
  const int d = mesh.dim();
  Triplets bb, bl, lb, ll;
  LocalBasis basis;
  Eigen::MatrixXd local;
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    fill_indices(mesh, c, basis);
    local.setZero(basis.n, basis.n);
    const double w = mesh.geometry(c).volume / (d + 1);
    const int first_bubble = (d + 1) * d;
    for (int fl = 0; fl <= d; ++fl) {
      eval_basis(mesh, c, face_point(d, fl), basis);
      for (int s = 0; s < basis.n; ++s) {
        const Vec& tv = test == BubbleTest::Bdm ? basis.bdm_value[s] : basis.value[s];
        for (int t = 0; t < basis.n; ++t) {
          // Distinct bubbles meet only at points where one of them vanishes
          // (or, for the BDM test, has zero normal flux); keep the zero exact.
          if (s >= first_bubble && t >= first_bubble && s != t) continue;
          local(s, t) += w * basis.value[t].dot(tv);
        }
      }
    }
    scatter(mesh, basis, local, bb, bl, lb, ll);
  }
  return blocks_from(mesh, bb, bl, lb, ll);
}

VelocityBlocks assemble_bdm_mass(const SimplicialMesh& mesh) {
  const QuadratureRule& rule = simplex_rule(mesh.dim(), 2);
  Triplets bb, bl, lb, ll;
  LocalBasis basis;
  Eigen::MatrixXd local;
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    fill_indices(mesh, c, basis);
    local.setZero(basis.n, basis.n);
    const double vol = mesh.geometry(c).volume;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      eval_basis(mesh, c, rule.points[q], basis);
      for (int s = 0; s < basis.n; ++s)
        for (int t = 0; t < basis.n; ++t)
          local(s, t) += rule.weights[q] * vol * basis.bdm_value[t].dot(basis.bdm_value[s]);
    }
    scatter(mesh, basis, local, bb, bl, lb, ll);
  }
  return blocks_from(mesh, bb, bl, lb, ll);
}

double lumped_integral(const SimplicialMesh& mesh, const ScalarFunction& f) {
  const int d = mesh.dim();
  double s = 0.0;
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    const auto& geo = mesh.geometry(c);
    double local = 0.0;
    for (int fl = 0; fl <= d; ++fl) local += f(geo.face_barycenter[fl]);
    s += geo.volume / (d + 1) * local;
  }
  return s;
}

}  // namespace brflow
