#pragma once

#include <iosfwd>
#include <string>

#include "brflow/fespace.hpp"
#include "brflow/mesh.hpp"

namespace brflow {

/// Legacy ASCII VTK unstructured grid (POINTS / CELLS / CELL_TYPES only).
void write_vtk_mesh(std::ostream& os, const SimplicialMesh& mesh);

/// Mesh plus point velocity (the linear part, as 3-vectors) and cell pressure.
/// Either field may be null.
void write_vtk_fields(std::ostream& os, const SimplicialMesh& mesh, const FeField* velocity,
                      const FeField* pressure);

/// One row per vertex: id, coordinates, velocity components of the linear part.
void write_field_csv(std::ostream& os, const FeField& velocity);

/// File variants; throw Error when the file cannot be opened.
void write_vtk_fields(const std::string& path, const SimplicialMesh& mesh, const FeField* velocity,
                      const FeField* pressure);
void write_field_csv(const std::string& path, const FeField& velocity);

}  // namespace brflow
