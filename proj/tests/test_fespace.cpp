#include <doctest.h>

#include <algorithm>
#include <random>

#include "brflow/fespace.hpp"
#include "brflow/quadrature.hpp"

using namespace brflow;

namespace {

FeField random_br(const SimplicialMesh& mesh, std::mt19937& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  FeField f = FeField::zero(SpaceTag::BRFull, mesh);
  for (auto& c : f.coefficients) c = u(rng);
  return f;
}

// Cell mean of div v from the pointwise gradient, independent of the BDM code.
double mean_divergence(const FeField& v, Index cell) {
  const int d = v.mesh->dim();
  const QuadratureRule& rule = simplex_rule(d, 2);
  double s = 0.0;
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const PointValue pv = evaluate_barycentric(v, cell, rule.points[q]);
    s += rule.weights[q] * pv.gradient.trace();
  }
  return s;
}

// Barycentric coordinates (in `cell`) of a point on local face `face`.
std::array<double, 4> on_face(int dim, int face, const std::array<double, 4>& face_point) {
  std::array<double, 4> lambda{0, 0, 0, 0};
  int k = 0;
  for (int i = 0; i <= dim; ++i)
    if (i != face) lambda[i] = face_point[k++];
  return lambda;
}

}  // namespace

TEST_SUITE("fespace") {

TEST_CASE("bubble values") {
  const std::array<double, 4> mid2{0.0, 0.5, 0.5, 0.0};
  CHECK(bubble_value(2, mid2, 0) == doctest::Approx(0.25));
  const std::array<double, 4> vertex{1.0, 0.0, 0.0, 0.0};
  CHECK(bubble_value(2, vertex, 0) == 0.0);
  const std::array<double, 4> mid3{0.0, 1.0 / 3, 1.0 / 3, 1.0 / 3};
  CHECK(bubble_value(3, mid3, 0) == doctest::Approx(1.0 / 27));
}

TEST_CASE("dof layout blocks") {
  const auto m = uniform_rectangle_mesh({0, 1}, {0, 1}, 4, 4, GridPattern::RightDiagonal);
  const DofLayout l(m);
  CHECK(l.num_interior_vertices() == 9);
  CHECK(l.linear_size() == 18);
  CHECK(l.pressure_size() == 32);
  CHECK(l.bubble_size() == m.num_faces() - 16);
  CHECK(l.linear_offset() == l.bubble_size());
  CHECK(l.total_size() == l.bubble_size() + 18 + 32);
  for (Index v = 0; v < m.num_vertices(); ++v) CHECK((l.vertex_dof(v) < 0) == m.boundary_vertex(v));
}

TEST_CASE("nodal interpolation") {
  const auto m = uniform_box_mesh({0, 1}, {0, 1}, {0, 1}, 2);
  const FeField z = nodal_interpolate(m, [](const Vec&) { return Vec::Zero().eval(); });
  CHECK(z.coefficients.norm() == 0.0);
  const FeField id = nodal_interpolate(m, [](const Vec& x) { return x; });
  for (Index v = 0; v < m.num_vertices(); ++v) CHECK((id.vertex_value(v) - m.vertex(v)).norm() == 0.0);
}

TEST_CASE("split and combine are inverse") {
  std::mt19937 rng(7);
  const auto m = uniform_rectangle_mesh({0, 1}, {0, 1}, 3, 3, GridPattern::Crisscross);
  const FeField v = random_br(m, rng);
  auto [lin, bub] = split_br(v);
  CHECK(lin.space == SpaceTag::VectorP1);
  CHECK(bub.space == SpaceTag::BRBubble);
  CHECK((combine_br(lin, bub).coefficients - v.coefficients).norm() == 0.0);
}

TEST_CASE("p0 projection") {
  const auto m = uniform_rectangle_mesh({0, 1}, {0, 1}, 1, 1, GridPattern::RightDiagonal);
  const FeField c = p0_project(m, [](const Vec&) { return 3.5; });
  for (Index t = 0; t < m.num_cells(); ++t) CHECK(c.coefficients[t] == doctest::Approx(3.5));
  const FeField x = p0_project(m, [](const Vec& p) { return p.x(); });
  std::vector<double> vals(x.coefficients.data(), x.coefficients.data() + 2);
  std::sort(vals.begin(), vals.end());
  CHECK(vals[0] == doctest::Approx(1.0 / 3));
  CHECK(vals[1] == doctest::Approx(2.0 / 3));

  // P1 field: cell mean equals the barycenter value
  const auto m2 = uniform_rectangle_mesh({0, 1}, {0, 1}, 3, 2, GridPattern::Crisscross);
  const FeField lin = nodal_interpolate(m2, [](const Vec& p) { return Vec(p.x() - 2 * p.y(), 1 + p.x(), 0); });
  const auto means = p0_project(lin);
  for (Index t = 0; t < m2.num_cells(); ++t) {
    const Vec& b = m2.geometry(t).barycenter;
    CHECK(means[t].x() == doctest::Approx(b.x() - 2 * b.y()));
    CHECK(means[t].y() == doctest::Approx(1 + b.x()));
  }
}

TEST_CASE("evaluate reproduces a linear field and checks its cell") {
  const auto m = uniform_box_mesh({0, 1}, {0, 1}, {0, 1}, 1);
  const FeField f = nodal_interpolate(m, [](const Vec& x) { return Vec(x.y(), 2 * x.z(), -x.x()); });
  const PointValue pv = evaluate(f, 3, Vec(0.2, 0.3, 0.1));
  const Vec x = barycentric_point(m, 3, {0.4, 0.2, 0.3, 0.1});
  CHECK((pv.value - Vec(x.y(), 2 * x.z(), -x.x())).norm() < 1e-14);
  CHECK(pv.gradient(0, 1) == doctest::Approx(1.0));
  CHECK(pv.gradient(1, 2) == doctest::Approx(2.0));
  CHECK_THROWS(evaluate(f, m.num_cells(), Vec(0.1, 0.1, 0.1)));
}

TEST_CASE("bubble support is the two cells of its face") {
  const auto m = uniform_rectangle_mesh({0, 1}, {0, 1}, 3, 3, GridPattern::RightDiagonal);
  FeField b = FeField::zero(SpaceTag::BRFull, m);
  Index face = -1;
  for (Index f = 0; f < m.num_faces() && face < 0; ++f)
    if (!m.face(f).on_boundary()) face = f;
  b.coefficients[2 * m.num_vertices() + face] = 1.0;
  const std::array<double, 4> inner{0.2, 0.3, 0.5, 0.0};
  for (Index c = 0; c < m.num_cells(); ++c) {
    const double v = evaluate_barycentric(b, c, inner).value.norm();
    const bool adjacent = c == m.face(face).cells[0] || c == m.face(face).cells[1];
    CHECK((v > 0) == adjacent);
  }
}

TEST_CASE("RT0 face fluxes are unisolvent") {
  for (int dim : {2, 3}) {
    const auto m = dim == 2 ? uniform_rectangle_mesh({0, 1}, {0, 1}, 2, 2, GridPattern::Crisscross)
                            : uniform_box_mesh({0, 1}, {0, 1}, {0, 1}, 1);
    const QuadratureRule& frule = simplex_rule(dim - 1, 2);
    for (Index c = 0; c < m.num_cells(); ++c) {
      for (int i = 0; i <= dim; ++i) {
        for (int j = 0; j <= dim; ++j) {
          const Face& fj = m.face(m.cell_face(c, j));
          double flux = 0.0;
          for (std::size_t q = 0; q < frule.size(); ++q) {
            const Vec x = barycentric_point(m, c, on_face(dim, j, frule.points[q]));
            flux += frule.weights[q] * rt0_value(m, c, i, x).dot(fj.normal);
          }
          flux *= fj.measure;
          CHECK(flux == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12).scale(1.0));
        }
      }
    }
  }
}

TEST_CASE("BDM image of a single bubble matches its face flux") {
  for (int dim : {2, 3}) {
    const auto m = dim == 2 ? uniform_rectangle_mesh({0, 1}, {0, 1}, 2, 2, GridPattern::RightDiagonal)
                            : uniform_box_mesh({0, 1}, {0, 1}, {0, 1}, 2);
    const int nlin = dim * m.num_vertices();
    const QuadratureRule& frule = simplex_rule(dim - 1, 4);
    for (Index f = 0; f < m.num_faces(); ++f) {
      if (m.face(f).on_boundary()) continue;
      FeField v = FeField::zero(SpaceTag::BRFull, m);
      v.coefficients[nlin + f] = 1.0;
      const BdmImage img = bdm_interpolate(v);
      CHECK(img.linear.coefficients.norm() == 0.0);
      // oracle: integral of phi_F over F by face quadrature
      const Index c = m.face(f).cells[0];
      int local = 0;
      while (m.cell_face(c, local) != f) ++local;
      double integral = 0.0;
      for (std::size_t q = 0; q < frule.size(); ++q)
        integral += frule.weights[q] * bubble_value(dim, on_face(dim, local, frule.points[q]), local);
      integral *= m.face(f).measure;
      for (Index g = 0; g < m.num_faces(); ++g)
        CHECK(img.rt.coefficients[g] == doctest::Approx(g == f ? integral : 0.0).epsilon(1e-12));
      CHECK(integral / m.face(f).measure == doctest::Approx(bubble_flux_factor(dim)).epsilon(1e-12));
    }
  }
}

TEST_CASE("BDM interpolation keeps linear fields") {
  std::mt19937 rng(3);
  const auto m = uniform_rectangle_mesh({0, 1}, {0, 1}, 4, 4, GridPattern::RightDiagonal);
  FeField v = random_br(m, rng);
  v.coefficients.tail(m.num_faces()).setZero();
  const BdmImage img = bdm_interpolate(v);
  CHECK((img.linear.coefficients - v.coefficients.head(2 * m.num_vertices())).norm() == 0.0);
  CHECK(img.rt.coefficients.norm() == 0.0);
}

TEST_CASE("commuting diagram on random fields") {
  std::mt19937 rng(11);
  for (int dim : {2, 3}) {
    const auto m = dim == 2 ? uniform_rectangle_mesh({0, 1}, {0, 1}, 4, 4, GridPattern::RightDiagonal)
                            : uniform_box_mesh({0, 1}, {0, 1}, {0, 1}, 2);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      const FeField v = random_br(m, rng);
      const Eigen::VectorXd div = bdm_divergence(bdm_interpolate(v));
      for (Index c = 0; c < m.num_cells(); ++c) worst = std::max(worst, std::abs(div[c] - mean_divergence(v, c)));
    }
    CHECK(worst < 1e-11);
  }
}

TEST_CASE("flux-matching lift restores boundary fluxes") {
  const auto m = uniform_rectangle_mesh({0, 1}, {0, 1}, 3, 3, GridPattern::RightDiagonal);
  auto g = [](const Vec& x) { return Vec(std::sin(3 * x.y()), std::exp(x.x()), 0); };
  const FeField lift = dirichlet_lift(m, g, BubbleLift::FluxMatching);
  const FeField plain = dirichlet_lift(m, g, BubbleLift::None);
  CHECK(plain.bubble_part().norm() == 0.0);
  const QuadratureRule& frule = simplex_rule(1, 8);
  for (Index f = 0; f < m.num_faces(); ++f) {
    const Face& face = m.face(f);
    if (!face.on_boundary()) {
      CHECK(lift.bubble_part()[f] == 0.0);
      continue;
    }
    const Index c = face.cells[0];
    int local = 0;
    while (m.cell_face(c, local) != f) ++local;
    double exact = 0.0, discrete = 0.0;
    for (std::size_t q = 0; q < frule.size(); ++q) {
      const auto lam = on_face(2, local, frule.points[q]);
      const Vec x = barycentric_point(m, c, lam);
      exact += frule.weights[q] * g(x).dot(face.normal);
      discrete += frule.weights[q] * evaluate_barycentric(lift, c, lam).value.dot(face.normal);
    }
    CHECK(discrete == doctest::Approx(exact).epsilon(1e-7));
  }
}

}
