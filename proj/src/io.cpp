#include "tubeox/io.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "tubeox/errors.hpp"

namespace tubeox {

namespace {

std::ofstream open_out(const std::string& path) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace

void ensure_parent(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(parent, ec);
  if (ec) throw IoError(fmt::format("cannot create directory '{}': {}", parent.string(), ec.message()));
}

// ---------------------------------------------------------------- msh

void write_msh(const Mesh& mesh, std::ostream& out, const TagDictionary& dict) {
  std::set<BoundaryTag> used;
  for (const auto& e : mesh.boundary_edges) used.insert(e.tag);

  out << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n";
  out << "$PhysicalNames\n" << used.size() << "\n";
  for (const auto& t : used) out << fmt::format("1 {} \"{}\"\n", dict.physical_tag(t), t.name());
  out << "$EndPhysicalNames\n";
  out << "$Nodes\n" << mesh.vertices.size() << "\n";
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
    out << fmt::format("{} {:.17g} {:.17g} 0\n", i + 1, mesh.vertices[i].x, mesh.vertices[i].y);
  out << "$EndNodes\n";
  out << "$Elements\n" << mesh.boundary_edges.size() + mesh.triangles.size() << "\n";
  std::size_t id = 1;
  for (const auto& e : mesh.boundary_edges) {
    const int tag = dict.physical_tag(e.tag);
    out << fmt::format("{} 1 2 {} {} {} {}\n", id++, tag, tag, e.v[0] + 1, e.v[1] + 1);
  }
  for (const auto& t : mesh.triangles) out << fmt::format("{} 2 2 0 1 {} {} {}\n", id++, t[0] + 1, t[1] + 1, t[2] + 1);
  out << "$EndElements\n";
  if (!mesh.tubes.empty()) {
    out << "$TubeCircles\n" << mesh.tubes.size() << "\n";
    for (std::size_t i = 0; i < mesh.tubes.size(); ++i)
      out << fmt::format("{} {:.17g} {:.17g} {:.17g}\n", i + 1, mesh.tubes[i].center.x, mesh.tubes[i].center.y,
                         mesh.tubes[i].radius);
    out << "$EndTubeCircles\n";
  }
}

void write_msh(const Mesh& mesh, const std::string& path, const TagDictionary& dict) {
  auto out = open_out(path);
  write_msh(mesh, out, dict);
  finish(out, path);
}

// ---------------------------------------------------------------- vtk

void write_vtk(const Mesh& mesh, const VtkPointData& data, std::ostream& out, const std::string& title) {
  const std::size_t nv = mesh.vertices.size();
  out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << nv << " double\n";
  for (const Vec2& p : mesh.vertices) out << fmt::format("{:.17g} {:.17g} 0\n", p.x, p.y);
  out << "CELLS " << mesh.triangles.size() << " " << 4 * mesh.triangles.size() << "\n";
  for (const auto& t : mesh.triangles) out << fmt::format("3 {} {} {}\n", t[0], t[1], t[2]);
  out << "CELL_TYPES " << mesh.triangles.size() << "\n";
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) out << "5\n";
  if (data.scalars.empty() && data.vectors.empty()) return;
  out << "POINT_DATA " << nv << "\n";
  for (const auto& [name, v] : data.scalars) {
    if (static_cast<std::size_t>(v.size()) < nv)
      throw ConfigError(fmt::format("field '{}' has {} values for {} points", name, v.size(), nv));
    out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (std::size_t i = 0; i < nv; ++i) out << fmt::format("{:.17g}\n", v[static_cast<Eigen::Index>(i)]);
  }
  for (const auto& [name, v] : data.vectors) {
    if (v.size() < nv) throw ConfigError(fmt::format("field '{}' has {} values for {} points", name, v.size(), nv));
    out << "VECTORS " << name << " double\n";
    for (std::size_t i = 0; i < nv; ++i) out << fmt::format("{:.17g} {:.17g} 0\n", v[i].x, v[i].y);
  }
}

void write_vtk(const Mesh& mesh, const VtkPointData& data, const std::string& path, const std::string& title) {
  auto out = open_out(path);
  write_vtk(mesh, data, out, title);
  finish(out, path);
}

// ---------------------------------------------------------------- csv

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::string s = fmt::format("{}", v);
  if (s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

void write_csv(const CsvTable& table, std::ostream& out) {
  for (std::size_t i = 0; i < table.header.size(); ++i) out << (i ? "," : "") << table.header[i];
  out << "\n";
  if (!table.labels.empty() && table.labels.size() != table.rows.size())
    throw ConfigError("csv table has labels for some rows only");
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (!table.labels.empty()) out << table.labels[r] << (row.empty() ? "" : ",");
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ",";
      if (row[i]) out << format_number(*row[i]);
    }
    out << "\n";
  }
}

void write_csv(const CsvTable& table, const std::string& path) {
  auto out = open_out(path);
  write_csv(table, out);
  finish(out, path);
}

}  // namespace tubeox
