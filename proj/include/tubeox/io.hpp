#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "tubeox/fem.hpp"
#include "tubeox/mesh.hpp"

namespace tubeox {

/// MSH 2.2 ASCII with $PhysicalNames and a $TubeCircles section so that
/// parse_msh recovers the exact circles.
void write_msh(const Mesh& mesh, std::ostream& out, const TagDictionary& dict = TagDictionary::defaults());
void write_msh(const Mesh& mesh, const std::string& path, const TagDictionary& dict = TagDictionary::defaults());

/// Point data on the mesh vertices.
struct VtkPointData {
  std::vector<std::pair<std::string, Vector>> scalars;
  std::vector<std::pair<std::string, std::vector<Vec2>>> vectors;
};

/// Legacy ASCII VTK 3.0 UNSTRUCTURED_GRID of the straight-sided triangles.
void write_vtk(const Mesh& mesh, const VtkPointData& data, std::ostream& out, const std::string& title = "tubeox");
void write_vtk(const Mesh& mesh, const VtkPointData& data, const std::string& path,
               const std::string& title = "tubeox");

/// Shortest round-trip decimal, always with a '.' or exponent ("0.0",
/// "0.25", "1e-05").
std::string format_number(double v);

/// Header plus rows; missing cells are written empty. When `labels` is
/// non-empty it holds one text cell per row, written first.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::optional<double>>> rows;
  std::vector<std::string> labels;

  void add(std::vector<std::optional<double>> row) { rows.push_back(std::move(row)); }
  void add(std::string label, std::vector<std::optional<double>> row) {
    labels.push_back(std::move(label));
    rows.push_back(std::move(row));
  }
};

void write_csv(const CsvTable& table, std::ostream& out);
void write_csv(const CsvTable& table, const std::string& path);

/// Creates the parent directories of `path`; IoError on failure.
void ensure_parent(const std::string& path);

}  // namespace tubeox
