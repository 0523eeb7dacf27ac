#include <doctest.h>

#include <cmath>
#include <random>

#include "brflow/error.hpp"
#include "brflow/forms.hpp"
#include "brflow/quadrature.hpp"

using namespace brflow;

namespace {

SimplicialMesh reference_triangle() {
  return SimplicialMesh(2, {Vec(0, 0, 0), Vec(1, 0, 0), Vec(0, 1, 0)}, {{0, 1, 2, -1}});
}

SimplicialMesh skewed_triangle() {
  return SimplicialMesh(2, {Vec(0.1, -0.2, 0), Vec(1.3, 0.4, 0), Vec(0.2, 0.9, 0)}, {{0, 1, 2, -1}});
}

Eigen::MatrixXd dense(const SparseMatrix& a) { return Eigen::MatrixXd(a); }

// b(v, w) restricted to one cell from the edge-average definition
//   -sum_E eps a_E (mean_E e^psi)^{-1} delta_E v delta_E(e^psi w),
// with the edge mean taken by 1D Gauss-Legendre quadrature.
Eigen::MatrixXd eafe_oracle(const SimplicialMesh& m, const Vec& b, double eps) {
  const int n = m.vertices_per_cell();
  const auto cell = m.cell(0);
  const CellGeometry& g = m.geometry(0);
  std::vector<double> xq, wq;
  gauss_legendre(40, xq, wq);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);  // (test, trial)
  for (int test = 0; test < n; ++test) {
    for (int trial = 0; trial < n; ++trial) {
      double sum = 0.0;
      for (int p = 0; p < n; ++p) {
        for (int q = p + 1; q < n; ++q) {
          const Vec tau = m.vertex(cell[q]) - m.vertex(cell[p]);
          const double aE = g.volume * g.grad_lambda[p].dot(g.grad_lambda[q]);
          // psi = b.(x - x_p)/eps along the edge
          const double s = b.dot(tau) / eps;
          double mean = 0.0;
          for (std::size_t k = 0; k < xq.size(); ++k) mean += wq[k] * std::exp(s * xq[k]);
          const double dv = (trial == q) - (trial == p);
          const double dw = std::exp(s) * (test == q) - (test == p);
          sum += -eps * aE / mean * dv * dw;
        }
      }
      out(test, trial) = sum;
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("forms") {

TEST_CASE("reference stiffness") {
  const auto m = reference_triangle();
  Eigen::Matrix3d expected;
  expected << 1, -0.5, -0.5, -0.5, 0.5, 0, -0.5, 0, 0.5;
  CHECK((dense(p1_stiffness(m)) - expected).norm() < 1e-15);
}

TEST_CASE("vector stiffness replicates the scalar one") {
  const auto m = uniform_rectangle_mesh({0, 1}, {0, 1}, 3, 2, GridPattern::Crisscross);
  const Eigen::MatrixXd k = dense(p1_stiffness(m));
  const Eigen::MatrixXd ll = dense(assemble_grad_grad(m).ll);
  const int n = m.num_vertices();
  CHECK((ll.block(0, 0, n, n) - k).norm() < 1e-13);
  CHECK((ll.block(n, n, n, n) - k).norm() < 1e-13);
  CHECK(ll.block(0, n, n, n).norm() < 1e-13);
}

TEST_CASE("bubble stiffness diagonal agrees with the full bubble block") {
  const auto m = uniform_box_mesh({0, 1}, {0, 1}, {0, 1}, 1);
  const Eigen::VectorXd diag = assemble_bubble_diag(m);
  const Eigen::MatrixXd full = dense(assemble_bubble_grad_grad(m));
  CHECK((full.diagonal() - diag).norm() < 1e-13 * diag.norm());
  // the modified viscous form keeps only that diagonal
  const Eigen::MatrixXd mod = dense(assemble_viscous(m, ViscousForm::Modified).bb);
  CHECK((mod - Eigen::MatrixXd(diag.asDiagonal())).norm() < 1e-13 * diag.norm());
}

TEST_CASE("bernoulli function") {
  CHECK(bernoulli(0.0) == 1.0);
  for (double s : {1e-6, 1e-3, 1.0, 30.0, 1e3, 1e10}) {
    const double lhs = bernoulli(-s) - bernoulli(s);
    CHECK(lhs == doctest::Approx(s).epsilon(1e-10));
  }
  CHECK(bernoulli(1.0) == doctest::Approx(1.0 / (std::exp(1.0) - 1.0)).epsilon(1e-15));
  CHECK(bernoulli(-1e12) == doctest::Approx(1e12));
  CHECK(bernoulli(1e12) == 0.0);
  CHECK(std::isfinite(bernoulli(800.0)));
  CHECK_THROWS(bernoulli(std::nan("")));
}

TEST_CASE("EAFE with zero convection is eps times the stiffness") {
  const auto m = uniform_rectangle_mesh({0, 1}, {0, 1}, 3, 3, GridPattern::RightDiagonal);
  const double eps = 1e-3;
  const Eigen::MatrixXd k = dense(p1_stiffness(m));
  for (auto diag : {EafeDiagonal::ColumnSum, EafeDiagonal::RowSum}) {
    const Eigen::MatrixXd e = dense(assemble_eafe(m, ConvectionField::constant(m, Vec::Zero(), eps), diag));
    const int n = m.num_vertices();
    CHECK((e.block(0, 0, n, n) - eps * k).norm() <= 1e-12 * eps * k.norm());
  }
}

TEST_CASE("EAFE entries against the edge-average oracle") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-3, 3);
  for (const auto& m : {reference_triangle(), skewed_triangle()}) {
    for (int trial = 0; trial < 10; ++trial) {
      const Vec b(u(rng), u(rng), 0);
      const double eps = 0.2;
      const Eigen::MatrixXd oracle = eafe_oracle(m, b, eps);
      const Eigen::MatrixXd row = eafe_local_matrix(m, 0, b, eps, EafeDiagonal::RowSum);
      const Eigen::MatrixXd col = eafe_local_matrix(m, 0, b, eps, EafeDiagonal::ColumnSum);
      CHECK((row - oracle).norm() <= 1e-8 * oracle.norm());
      for (int i = 0; i < 3; ++i) {
        CHECK(std::abs(row.row(i).sum()) < 1e-13 * oracle.norm());
        CHECK(std::abs(col.col(i).sum()) < 1e-13 * oracle.norm());
        for (int j = 0; j < 3; ++j)
          if (i != j) CHECK(col(i, j) == doctest::Approx(oracle(i, j)).epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("EAFE in 3D keeps constants in the trial kernel") {
  const auto m = uniform_box_mesh({0, 1}, {0, 1}, {0, 1}, 1);
  const Eigen::MatrixXd a = eafe_local_matrix(m, 2, Vec(1, -2, 0.5), 0.1, EafeDiagonal::RowSum);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(a.row(i).sum()) < 1e-12);
  // off-diagonal entries are the stiffness entries times the Bernoulli weight
  const CellGeometry& g = m.geometry(2);
  const auto cell = m.cell(2);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      if (i == j) continue;
      const double aij = g.volume * g.grad_lambda[i].dot(g.grad_lambda[j]);
      const double s = Vec(1, -2, 0.5).dot(m.vertex(cell[j]) - m.vertex(cell[i])) / 0.1;
      CHECK(a(i, j) == doctest::Approx(0.1 * aij * bernoulli(s)).epsilon(1e-12));
    }
  CHECK_THROWS_AS(eafe_local_matrix(m, 0, Vec(1, 0, 0), 0.0), Error);
}

TEST_CASE("convection stabilization against quadrature") {
  // (b . grad lambda_j e_k, Pi_h(phi_F n_F)) = c_d |F| (b . grad lambda_j) int_T phi_F^RT . e_k
  const auto m = uniform_rectangle_mesh({0, 1}, {0, 1}, 2, 2, GridPattern::Crisscross);
  const Vec b(0.7, -1.3, 0);
  const Eigen::MatrixXd s = dense(assemble_conv_stab(m, ConvectionField::constant(m, b, 1e-10)));
  Eigen::MatrixXd oracle = Eigen::MatrixXd::Zero(s.rows(), s.cols());
  const QuadratureRule& rule = simplex_rule(2, 2);
  const int n = m.num_vertices();
  for (Index c = 0; c < m.num_cells(); ++c) {
    const CellGeometry& g = m.geometry(c);
    for (int i = 0; i < 3; ++i) {
      const Index f = m.cell_face(c, i);
      const double scale = bubble_flux_factor(2) * m.face(f).measure;
      Vec mean_rt = Vec::Zero();
      for (std::size_t q = 0; q < rule.size(); ++q)
        mean_rt += rule.weights[q] * rt0_value(m, c, i, barycentric_point(m, c, rule.points[q]));
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 2; ++k)
          oracle(f, k * n + m.cell(c)[j]) += scale * b.dot(g.grad_lambda[j]) * mean_rt[k] * g.volume;
    }
  }
  CHECK((s - oracle).norm() < 1e-12 * oracle.norm());
}

TEST_CASE("lumped quadrature order") {
  const auto m2 = uniform_rectangle_mesh({0, 1}, {0, 2}, 3, 3, GridPattern::Crisscross);
  // x^2 + 3xy - y^2 + x over [0,1]x[0,2]: 2/3 + 3 - 8/3 + 1
  const double q2 = lumped_integral(m2, [](const Vec& x) { return x.x() * x.x() + 3 * x.x() * x.y() - x.y() * x.y() + x.x(); });
  CHECK(q2 == doctest::Approx(2.0).epsilon(1e-12));
  const auto m3 = uniform_box_mesh({0, 1}, {0, 1}, {0, 1}, 2);
  const double q1 = lumped_integral(m3, [](const Vec& x) { return 1 + 2 * x.x() - x.y() + 4 * x.z(); });
  CHECK(q1 == doctest::Approx(3.5).epsilon(1e-12));
  // not exact for quadratics in 3D
  const double q3 = lumped_integral(m3, [](const Vec& x) { return x.x() * x.x(); });
  CHECK(std::abs(q3 - 1.0 / 3) > 1e-6);
}

TEST_CASE("lumped bubble mass blocks are diagonal") {
  for (int dim : {2, 3}) {
    const auto m = dim == 2 ? uniform_rectangle_mesh({0, 1}, {0, 1}, 3, 3, GridPattern::RightDiagonal)
                            : uniform_box_mesh({0, 1}, {0, 1}, {0, 1}, 2);
    for (auto test : {BubbleTest::Plain, BubbleTest::Bdm}) {
      const SparseMatrix bb = assemble_lumped_mass(m, test).bb;
      for (int k = 0; k < bb.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(bb, k); it; ++it)
          if (it.row() != it.col()) CHECK(it.value() == 0.0);
    }
  }
}

TEST_CASE("load vector of a constant force") {
  // (f, lambda_v e_k) sums to |Omega| f_k; bubble entries of the plain test are f . n_F int phi_F
  const auto m = uniform_rectangle_mesh({0, 2}, {0, 1}, 4, 2, GridPattern::RightDiagonal);
  const Vec f(1.5, -2.0, 0);
  const LoadVector l = assemble_load(m, [&](const Vec&) { return f; }, BubbleTest::Plain);
  const int n = m.num_vertices();
  CHECK(l.linear.head(n).sum() == doctest::Approx(3.0));
  CHECK(l.linear.tail(n).sum() == doctest::Approx(-4.0));
  for (Index face = 0; face < m.num_faces(); ++face) {
    const Face& F = m.face(face);
    double vol = m.geometry(F.cells[0]).volume + (F.on_boundary() ? 0.0 : m.geometry(F.cells[1]).volume);
    // int_T lambda_a lambda_b = |T| / 12 in 2D
    CHECK(l.bubble[face] == doctest::Approx(f.dot(F.normal) * vol / 12).epsilon(1e-12));
  }
}

}
