#include "brflow/io.hpp"

#include <fstream>
#include <ostream>

#include "brflow/error.hpp"

namespace brflow {

namespace {

std::ofstream open_output(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  os.precision(12);
  return os;
}

void write_grid(std::ostream& os, const SimplicialMesh& mesh) {
  const int nv = mesh.vertices_per_cell();
  os << "# vtk DataFile Version 3.0\nbrflow\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << mesh.num_vertices() << " double\n";
  for (const Vec& x : mesh.vertices()) os << x.x() << ' ' << x.y() << ' ' << x.z() << '\n';
  os << "CELLS " << mesh.num_cells() << ' ' << mesh.num_cells() * (nv + 1) << '\n';
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    os << nv;
    for (Index v : mesh.cell(c)) os << ' ' << v;
    os << '\n';
  }
  // 5 = VTK_TRIANGLE, 10 = VTK_TETRA
  const int type = mesh.dim() == 2 ? 5 : 10;
  os << "CELL_TYPES " << mesh.num_cells() << '\n';
  for (Index c = 0; c < mesh.num_cells(); ++c) os << type << '\n';
}

void check_mesh(const FeField& field, const SimplicialMesh& mesh) {
  if (field.mesh != &mesh) throw Error("field does not live on the exported mesh");
}

}  // namespace

void write_vtk_mesh(std::ostream& os, const SimplicialMesh& mesh) { write_grid(os, mesh); }

void write_vtk_fields(std::ostream& os, const SimplicialMesh& mesh, const FeField* velocity,
                      const FeField* pressure) {
  write_grid(os, mesh);
  if (velocity) {
    check_mesh(*velocity, mesh);
    if (velocity->space != SpaceTag::VectorP1 && velocity->space != SpaceTag::BRFull)
      throw Error("velocity export needs a VectorP1 or BRFull field");
    os << "POINT_DATA " << mesh.num_vertices() << "\nVECTORS velocity double\n";
    for (Index v = 0; v < mesh.num_vertices(); ++v) {
      const Vec u = velocity->vertex_value(v);
      os << u.x() << ' ' << u.y() << ' ' << u.z() << '\n';
    }
  }
  if (pressure) {
    check_mesh(*pressure, mesh);
    if (pressure->space != SpaceTag::P0Pressure) throw Error("pressure export needs a P0 field");
    os << "CELL_DATA " << mesh.num_cells() << "\nSCALARS pressure double 1\nLOOKUP_TABLE default\n";
    for (Index c = 0; c < mesh.num_cells(); ++c) os << pressure->coefficients[c] << '\n';
  }
}

void write_field_csv(std::ostream& os, const FeField& velocity) {
  if (!velocity.mesh) throw Error("field has no mesh");
  const SimplicialMesh& mesh = *velocity.mesh;
  const int d = mesh.dim();
  os << (d == 2 ? "vertex,x,y,u1,u2\n" : "vertex,x,y,z,u1,u2,u3\n");
  for (Index v = 0; v < mesh.num_vertices(); ++v) {
    const Vec& x = mesh.vertex(v);
    const Vec u = velocity.vertex_value(v);
    os << v;
    for (int k = 0; k < d; ++k) os << ',' << x[k];
    for (int k = 0; k < d; ++k) os << ',' << u[k];
    os << '\n';
  }
}

void write_vtk_fields(const std::string& path, const SimplicialMesh& mesh, const FeField* velocity,
                      const FeField* pressure) {
  auto os = open_output(path);
  write_vtk_fields(os, mesh, velocity, pressure);
}

void write_field_csv(const std::string& path, const FeField& velocity) {
  auto os = open_output(path);
  write_field_csv(os, velocity);
}

}  // namespace brflow
