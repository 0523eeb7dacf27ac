#include <doctest.h>

#include <algorithm>
#include <set>

#include "brflow/error.hpp"
#include "brflow/mesh.hpp"

using namespace brflow;

TEST_SUITE("mesh") {

TEST_CASE("right-diagonal rectangle counts") {
  const auto m = uniform_rectangle_mesh({0, 1}, {0, 1}, 4, 3, GridPattern::RightDiagonal);
  CHECK(m.num_cells() == 24);
  CHECK(m.num_vertices() == 20);
  // Euler: V - E + T = 1 for a disk
  CHECK(m.num_vertices() - m.num_faces() + m.num_cells() == 1);
  CHECK(m.measure() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("crisscross and union-jack counts") {
  const auto cc = uniform_rectangle_mesh({-1, 1}, {0, 3}, 5, 2, GridPattern::Crisscross);
  CHECK(cc.num_cells() == 40);
  CHECK(cc.num_vertices() == 6 * 3 + 10);
  CHECK(cc.measure() == doctest::Approx(6.0));
  const auto uj = uniform_rectangle_mesh({-0.5, 0.5}, {-0.5, 0.5}, 32, 32, GridPattern::UnionJack);
  CHECK(uj.num_cells() == 2048);
  CHECK(uj.num_vertices() == 33 * 33);
  CHECK(uj.measure() == doctest::Approx(1.0));
}

TEST_CASE("union-jack diagonals alternate") {
  const auto m = uniform_rectangle_mesh({0, 2}, {0, 1}, 2, 1, GridPattern::UnionJack);
  // square 0 is split along (0,0)-(1,1), square 1 along (2,0)-(1,1)
  std::set<std::pair<int, int>> edges;
  for (Index e = 0; e < m.num_edges(); ++e) edges.insert({m.edge(e).vertices[0], m.edge(e).vertices[1]});
  CHECK(edges.count({0, 4}) == 1);
  CHECK(edges.count({2, 4}) == 1);
  CHECK(edges.count({1, 5}) == 0);
}

TEST_CASE("box mesh counts and volume") {
  const auto m = uniform_box_mesh({0, 1}, {0, 2}, {0, 1}, 2);
  CHECK(m.dim() == 3);
  CHECK(m.num_cells() == 48);
  CHECK(m.num_vertices() == 27);
  CHECK(m.measure() == doctest::Approx(2.0).epsilon(1e-14));
  // Euler: V - E + F - T = 1 for a ball
  CHECK(m.num_vertices() - m.num_edges() + m.num_faces() - m.num_cells() == 1);
  CHECK(uniform_box_mesh({0, 1}, {0, 1}, {0, 1}, 8).num_cells() == 3072);
}

TEST_CASE("quad refinement quadruples cells and keeps area") {
  const auto m = uniform_rectangle_mesh({0, 1}, {0, 1}, 8, 8, GridPattern::RightDiagonal);
  const auto r = quad_refine(m);
  CHECK(r.num_cells() == 4 * m.num_cells());
  CHECK(r.num_vertices() == 17 * 17);
  CHECK(r.measure() == doctest::Approx(1.0));
  CHECK(r.mesh_size() == doctest::Approx(m.mesh_size() / 2));
}

TEST_CASE("face normals are unit and outward for the first cell") {
  for (int dim : {2, 3}) {
    const auto m = dim == 2 ? uniform_rectangle_mesh({0, 1}, {0, 1}, 3, 3, GridPattern::Crisscross)
                            : uniform_box_mesh({0, 1}, {0, 1}, {0, 1}, 2);
    for (Index f = 0; f < m.num_faces(); ++f) {
      const Face& face = m.face(f);
      CHECK(face.normal.norm() == doctest::Approx(1.0));
      const Vec out = face.barycenter - m.geometry(face.cells[0]).barycenter;
      CHECK(out.dot(face.normal) > 0);
    }
    // a boundary face lies on the boundary of the unit square / cube
    for (Index f = 0; f < m.num_faces(); ++f) {
      if (!m.face(f).on_boundary()) continue;
      const Vec& x = m.face(f).barycenter;
      double dist = 1.0;
      for (int k = 0; k < dim; ++k) dist = std::min({dist, std::abs(x[k]), std::abs(1 - x[k])});
      CHECK(dist < 1e-14);
    }
  }
}

TEST_CASE("gradients of barycentric coordinates sum to zero") {
  const auto m = uniform_box_mesh({0, 1}, {0, 1}, {0, 1}, 1);
  for (Index c = 0; c < m.num_cells(); ++c) {
    Vec s = Vec::Zero();
    for (int i = 0; i < 4; ++i) s += m.geometry(c).grad_lambda[i];
    CHECK(s.norm() < 1e-13);
    CHECK(m.geometry(c).volume == doctest::Approx(1.0 / 6));
  }
}

TEST_CASE("degenerate cells are rejected") {
  std::vector<Vec> v = {Vec(0, 0, 0), Vec(1, 0, 0), Vec(2, 0, 0)};
  CHECK_THROWS_AS(SimplicialMesh(2, v, {{0, 1, 2, -1}}), MeshError);
  CHECK_THROWS_AS(uniform_rectangle_mesh({0, 1}, {0, 1}, 0, 2, GridPattern::RightDiagonal), MeshError);
}

}
