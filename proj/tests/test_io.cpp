#include <doctest.h>

#include <sstream>
#include <string>

#include "brflow/io.hpp"

using namespace brflow;

namespace {

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_SUITE("io") {

TEST_CASE("vtk mesh") {
  const auto m = uniform_rectangle_mesh({0, 1}, {0, 1}, 2, 1, GridPattern::RightDiagonal);
  std::ostringstream os;
  write_vtk_mesh(os, m);
  const std::string s = os.str();
  CHECK(s.rfind("# vtk DataFile Version 3.0", 0) == 0);
  CHECK(s.find("POINTS 6 double") != std::string::npos);
  CHECK(s.find("CELLS 4 16") != std::string::npos);
  CHECK(s.find("CELL_TYPES 4\n5\n5\n5\n5\n") != std::string::npos);
  CHECK(count_lines(s) == 4 + 1 + 6 + 1 + 4 + 1 + 4);
}

TEST_CASE("vtk fields") {
  const auto m = uniform_box_mesh({0, 1}, {0, 1}, {0, 1}, 1);
  const FeField u = nodal_interpolate(m, [](const Vec& x) { return Vec(x.x(), 2.0, -x.z()); });
  FeField p = FeField::zero(SpaceTag::P0Pressure, m);
  p.coefficients.setConstant(0.5);
  std::ostringstream os;
  write_vtk_fields(os, m, &u, &p);
  const std::string s = os.str();
  CHECK(s.find("CELL_TYPES 6\n10\n") != std::string::npos);
  CHECK(s.find("POINT_DATA 8\nVECTORS velocity double\n0 2 -0\n1 2 -0\n") != std::string::npos);
  CHECK(s.find("CELL_DATA 6\nSCALARS pressure double 1\nLOOKUP_TABLE default\n0.5\n") != std::string::npos);
  CHECK_THROWS(write_vtk_fields(os, m, &p, nullptr));
}

TEST_CASE("field csv") {
  const auto m = uniform_rectangle_mesh({0, 1}, {0, 1}, 1, 1, GridPattern::RightDiagonal);
  const FeField u = nodal_interpolate(m, [](const Vec& x) { return Vec(x.y(), 3 * x.x(), 0); });
  std::ostringstream os;
  write_field_csv(os, u);
  CHECK(os.str() == "vertex,x,y,u1,u2\n0,0,0,0,0\n1,1,0,0,3\n2,0,1,1,0\n3,1,1,1,3\n");
}

}
