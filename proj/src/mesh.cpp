#include "tubeox/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "tubeox/errors.hpp"

namespace tubeox {

namespace {

constexpr double kOnCircleTol = 1e-10;

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

struct LineReader {
  std::istream& in;
  std::size_t line_no = 0;

  bool next(std::string& line) {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      auto first = line.find_first_not_of(" \t");
      if (first == std::string::npos) continue;
      return true;
    }
    return false;
  }

  std::string expect_line(const char* what) {
    std::string line;
    if (!next(line)) throw ParseError(line_no, fmt::format("unexpected end of file, expected {}", what));
    return line;
  }
};

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t");
  auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

long parse_count(const std::string& line, std::size_t line_no) {
  std::istringstream ss(line);
  long n = -1;
  if (!(ss >> n) || n < 0) throw ParseError(line_no, "expected a non-negative count, got '" + line + "'");
  return n;
}

TubeCircle fit_circle(const std::vector<Vec2>& pts) {
  Vec2 mean{};
  for (auto p : pts) mean = mean + p;
  mean = (1.0 / static_cast<double>(pts.size())) * mean;
  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  Eigen::Vector3d atb = Eigen::Vector3d::Zero();
  for (auto p : pts) {
    const Vec2 q = p - mean;
    Eigen::Vector3d row(q.x, q.y, 1.0);
    ata += row * row.transpose();
    atb -= row * (q.x * q.x + q.y * q.y);
  }
  Eigen::Vector3d sol = ata.colPivHouseholderQr().solve(atb);
  const Vec2 c{-0.5 * sol(0), -0.5 * sol(1)};
  const double r2 = c.x * c.x + c.y * c.y - sol(2);
  return {c + mean, std::sqrt(std::max(r2, 0.0))};
}

}  // namespace

std::string BoundaryTag::name() const {
  switch (kind) {
    case BoundaryKind::Inlet: return "inlet";
    case BoundaryKind::Outlet: return "outlet";
    case BoundaryKind::Symmetry: return "symmetry";
    case BoundaryKind::TubeWall: return fmt::format("tube_{}", tube);
  }
  return "unknown";
}

double Mesh::area(std::size_t t) const {
  const auto& tri = triangles[t];
  return 0.5 * twice_signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
}

TagDictionary TagDictionary::defaults() {
  TagDictionary d;
  d.tags = {{1, BoundaryTag::inlet()}, {2, BoundaryTag::outlet()}, {3, BoundaryTag::symmetry()}};
  return d;
}

std::optional<BoundaryTag> TagDictionary::lookup(int physical_tag) const {
  if (auto it = tags.find(physical_tag); it != tags.end()) return it->second;
  if (tube_tag_offset > 0 && physical_tag > tube_tag_offset)
    return BoundaryTag::tube_wall(physical_tag - tube_tag_offset);
  return std::nullopt;
}

int TagDictionary::physical_tag(const BoundaryTag& tag) const {
  for (const auto& [k, v] : tags)
    if (v == tag) return k;
  if (tag.is_tube_wall()) return tube_tag_offset + tag.tube;
  throw TagError("no physical tag for boundary '" + tag.name() + "'");
}

double boundary_edge_length(const Mesh& mesh, const BoundaryEdge& e) {
  const Vec2 a = mesh.vertices[e.v[0]];
  const Vec2 b = mesh.vertices[e.v[1]];
  if (e.tag.is_tube_wall() && e.tag.tube >= 1 && e.tag.tube <= mesh.tube_count()) {
    const auto& circle = mesh.tubes[e.tag.tube - 1];
    const Vec2 ra = a - circle.center;
    const Vec2 rb = b - circle.center;
    return circle.radius * std::atan2(std::abs(cross(ra, rb)), dot(ra, rb));
  }
  return distance(a, b);
}

Mesh parse_msh(std::istream& in, const TagDictionary& dict, std::vector<std::string>* warnings) {
  LineReader reader{in};
  std::string line;

  std::vector<std::pair<long, Vec2>> raw_nodes;
  std::unordered_map<long, std::size_t> node_slot;
  struct RawLine {
    std::array<long, 2> n;
    int tag;
    std::size_t line_no;
  };
  std::vector<RawLine> raw_lines;
  std::vector<std::pair<std::array<long, 3>, std::size_t>> raw_tris;
  std::map<int, TubeCircle> file_circles;
  bool saw_format = false, saw_nodes = false, saw_elements = false;

  auto warn = [&](const std::string& msg) {
    if (warnings) warnings->push_back(msg);
  };

  while (reader.next(line)) {
    const std::string header = trim(line);
    if (header.empty() || header[0] != '$')
      throw ParseError(reader.line_no, "expected a section header, got '" + header + "'");
    const std::string section = header.substr(1);
    const std::string end_marker = "$End" + section;

    if (section == "MeshFormat") {
      std::istringstream ss(reader.expect_line("format line"));
      std::string version;
      int file_type = -1;
      ss >> version >> file_type;
      if (version.rfind("2.2", 0) != 0) throw ParseError(reader.line_no, "unsupported MSH version '" + version + "'");
      if (file_type != 0) throw ParseError(reader.line_no, "binary MSH is not supported");
      saw_format = true;
    } else if (section == "Nodes") {
      const long n = parse_count(reader.expect_line("node count"), reader.line_no);
      raw_nodes.reserve(static_cast<std::size_t>(n));
      for (long i = 0; i < n; ++i) {
        std::istringstream ss(reader.expect_line("node"));
        long id;
        double x, y, z;
        if (!(ss >> id >> x >> y >> z)) throw ParseError(reader.line_no, "malformed node line");
        if (node_slot.count(id)) throw ParseError(reader.line_no, fmt::format("duplicate node id {}", id));
        node_slot[id] = raw_nodes.size();
        raw_nodes.push_back({id, {x, y}});
      }
      saw_nodes = true;
    } else if (section == "Elements") {
      const long n = parse_count(reader.expect_line("element count"), reader.line_no);
      for (long i = 0; i < n; ++i) {
        std::istringstream ss(reader.expect_line("element"));
        long id;
        int type, ntags;
        if (!(ss >> id >> type >> ntags) || ntags < 0) throw ParseError(reader.line_no, "malformed element line");
        std::vector<long> tags(static_cast<std::size_t>(ntags));
        for (auto& t : tags)
          if (!(ss >> t)) throw ParseError(reader.line_no, "malformed element tags");
        auto read_nodes = [&](auto& dst) {
          for (auto& v : dst) {
            if (!(ss >> v)) throw ParseError(reader.line_no, "missing element node");
            if (!node_slot.count(v))
              throw ParseError(reader.line_no, fmt::format("element {} references nonexistent node {}", id, v));
          }
        };
        if (type == 1) {
          std::array<long, 2> nodes{};
          read_nodes(nodes);
          if (tags.empty()) throw TagError(fmt::format("line element {} (line {}) has no physical tag", id, reader.line_no));
          raw_lines.push_back({nodes, static_cast<int>(tags[0]), reader.line_no});
        } else if (type == 2) {
          std::array<long, 3> nodes{};
          read_nodes(nodes);
          raw_tris.push_back({nodes, reader.line_no});
        } else {
          warn(fmt::format("line {}: skipping element {} of unsupported type {}", reader.line_no, id, type));
        }
      }
      saw_elements = true;
    } else if (section == "TubeCircles") {
      const long n = parse_count(reader.expect_line("circle count"), reader.line_no);
      for (long i = 0; i < n; ++i) {
        std::istringstream ss(reader.expect_line("circle"));
        int idx;
        double cx, cy, r;
        if (!(ss >> idx >> cx >> cy >> r)) throw ParseError(reader.line_no, "malformed circle line");
        file_circles[idx] = {{cx, cy}, r};
      }
    } else {
      if (section != "PhysicalNames") warn(fmt::format("line {}: skipping section {}", reader.line_no, section));
      for (;;) {
        std::string body = reader.expect_line(end_marker.c_str());
        if (trim(body) == end_marker) break;
      }
      continue;
    }
    const std::string closing = trim(reader.expect_line(end_marker.c_str()));
    if (closing != end_marker)
      throw ParseError(reader.line_no, "expected '" + end_marker + "', got '" + closing + "'");
  }

  if (!saw_format) throw ParseError(reader.line_no, "missing $MeshFormat section");
  if (!saw_nodes) throw ParseError(reader.line_no, "missing $Nodes section");
  if (!saw_elements) throw ParseError(reader.line_no, "missing $Elements section");
  if (raw_tris.empty()) throw TopologyError("mesh has no triangles");

  // Keep only vertices used by triangles, in file order.
  std::vector<int> used(raw_nodes.size(), 0);
  for (const auto& [tri, ln] : raw_tris)
    for (long id : tri) used[node_slot.at(id)] = 1;
  std::vector<int> new_index(raw_nodes.size(), -1);
  Mesh mesh;
  for (std::size_t i = 0; i < raw_nodes.size(); ++i) {
    if (!used[i]) continue;
    new_index[i] = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(raw_nodes[i].second);
  }
  auto vid = [&](long id) { return new_index[node_slot.at(id)]; };

  for (const auto& [tri, ln] : raw_tris) {
    std::array<int, 3> t{vid(tri[0]), vid(tri[1]), vid(tri[2])};
    const double a2 = twice_signed_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
    if (a2 < 0) std::swap(t[1], t[2]);
    if (a2 == 0) throw TopologyError(fmt::format("triangle on line {} has zero area", ln));
    mesh.triangles.push_back(t);
  }

  int max_tube = 0;
  for (const auto& rl : raw_lines) {
    auto tag = dict.lookup(rl.tag);
    if (!tag) throw TagError(fmt::format("unknown physical tag {} on line {}", rl.tag, rl.line_no));
    const int a = new_index[node_slot.at(rl.n[0])];
    const int b = new_index[node_slot.at(rl.n[1])];
    if (a < 0 || b < 0)
      throw TopologyError(fmt::format("boundary line on line {} uses a vertex outside the triangulation", rl.line_no));
    mesh.boundary_edges.push_back({{a, b}, *tag});
    if (tag->is_tube_wall()) max_tube = std::max(max_tube, tag->tube);
  }

  mesh.tubes.resize(static_cast<std::size_t>(max_tube));
  for (int i = 1; i <= max_tube; ++i) {
    if (auto it = file_circles.find(i); it != file_circles.end()) {
      mesh.tubes[i - 1] = it->second;
    } else if (auto jt = dict.circles.find(i); jt != dict.circles.end()) {
      mesh.tubes[i - 1] = jt->second;
    } else {
      std::vector<Vec2> pts;
      for (const auto& e : mesh.boundary_edges)
        if (e.tag == BoundaryTag::tube_wall(i))
          for (int v : e.v) pts.push_back(mesh.vertices[v]);
      if (pts.size() < 3) throw GeometryError(fmt::format("tube {} has too few wall vertices to recover its circle", i));
      mesh.tubes[i - 1] = fit_circle(pts);
    }
  }

  check_mesh(mesh);
  return mesh;
}

Mesh read_msh_file(const std::string& path, const TagDictionary& dict) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mesh file '" + path + "'");
  return parse_msh(in, dict);
}

void check_mesh(const Mesh& mesh) {
  const auto report = validate(mesh);
  if (report.ok()) return;
  std::string msg = report.failures.front();
  const bool geometric = msg.find("circle") != std::string::npos;
  if (report.failures.size() > 1) msg += fmt::format(" (and {} more)", report.failures.size() - 1);
  if (geometric) throw GeometryError(msg);
  throw TopologyError(msg);
}

ValidationReport validate(const Mesh& mesh) {
  ValidationReport rep;
  const std::size_t nv = mesh.vertices.size();
  rep.min_area = std::numeric_limits<double>::infinity();
  rep.max_area = -std::numeric_limits<double>::infinity();
  double min_angle = std::numbers::pi;

  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    bool index_ok = true;
    for (int v : tri) index_ok = index_ok && v >= 0 && static_cast<std::size_t>(v) < nv;
    if (!index_ok) {
      rep.failures.push_back(fmt::format("triangle {} has an out-of-range vertex index", t));
      rep.bad_triangles.push_back(t);
      continue;
    }
    const double a = mesh.area(t);
    rep.min_area = std::min(rep.min_area, a);
    rep.max_area = std::max(rep.max_area, a);
    if (!(a > 0)) {
      rep.failures.push_back(fmt::format("triangle {} has non-positive area {}", t, a));
      rep.bad_triangles.push_back(t);
      continue;
    }
    for (int k = 0; k < 3; ++k) {
      const Vec2 p = mesh.vertices[tri[k]];
      const Vec2 u = mesh.vertices[tri[(k + 1) % 3]] - p;
      const Vec2 w = mesh.vertices[tri[(k + 2) % 3]] - p;
      min_angle = std::min(min_angle, std::atan2(std::abs(cross(u, w)), dot(u, w)));
    }
  }
  if (mesh.triangles.empty()) {
    rep.min_area = rep.max_area = 0.0;
    rep.failures.push_back("mesh has no triangles");
  }
  rep.min_angle_deg = min_angle * 180.0 / std::numbers::pi;

  // Edge -> number of incident triangles.
  std::unordered_map<std::uint64_t, int> incidence;
  incidence.reserve(mesh.triangles.size() * 2);
  for (const auto& tri : mesh.triangles) {
    bool index_ok = true;
    for (int v : tri) index_ok = index_ok && v >= 0 && static_cast<std::size_t>(v) < nv;
    if (!index_ok) continue;
    for (int k = 0; k < 3; ++k) ++incidence[edge_key(tri[k], tri[(k + 1) % 3])];
  }
  std::unordered_map<std::uint64_t, int> tagged;
  for (std::size_t i = 0; i < mesh.boundary_edges.size(); ++i) {
    const auto& e = mesh.boundary_edges[i];
    ++rep.edges_per_tag[e.tag.name()];
    if (e.tag.is_tube_wall() && (e.tag.tube < 1 || e.tag.tube > mesh.tube_count())) {
      rep.failures.push_back(fmt::format("boundary edge {} references unknown tube {}", i, e.tag.tube));
      continue;
    }
    const auto key = edge_key(e.v[0], e.v[1]);
    if (++tagged[key] > 1) rep.failures.push_back(fmt::format("boundary edge {} is tagged more than once", i));
    auto it = incidence.find(key);
    if (it == incidence.end() || it->second != 1)
      rep.failures.push_back(fmt::format("boundary edge {} ({}, {}) does not belong to exactly one triangle", i,
                                         e.v[0], e.v[1]));
    if (e.tag.is_tube_wall()) {
      const auto& c = mesh.tubes[e.tag.tube - 1];
      for (int v : e.v) {
        const double dev = std::abs(distance(mesh.vertices[v], c.center) - c.radius);
        if (dev > kOnCircleTol)
          rep.failures.push_back(fmt::format("vertex {} of tube {} lies {:.3e} off its circle", v, e.tag.tube, dev));
      }
    }
  }
  for (const auto& [key, count] : incidence) {
    if (count > 2) rep.failures.push_back("non-manifold edge shared by more than two triangles");
    if (count == 1 && !tagged.count(key))
      rep.failures.push_back(fmt::format("boundary edge ({}, {}) has no tag", key >> 32, key & 0xffffffffu));
  }

  // Loops: every boundary vertex must have degree two.
  std::unordered_map<int, std::vector<int>> adj;
  for (const auto& e : mesh.boundary_edges) {
    adj[e.v[0]].push_back(e.v[1]);
    adj[e.v[1]].push_back(e.v[0]);
  }
  bool closed = true;
  for (const auto& [v, nb] : adj)
    if (nb.size() != 2) closed = false;
  if (!closed) rep.failures.push_back("boundary edges do not form closed loops");
  std::unordered_map<int, bool> seen;
  for (const auto& [v, nb] : adj) {
    if (seen[v]) continue;
    ++rep.boundary_loops;
    std::vector<int> stack{v};
    seen[v] = true;
    while (!stack.empty()) {
      int cur = stack.back();
      stack.pop_back();
      for (int w : adj[cur])
        if (!seen[w]) {
          seen[w] = true;
          stack.push_back(w);
        }
    }
  }
  std::sort(rep.bad_triangles.begin(), rep.bad_triangles.end());
  return rep;
}

Vec2 P2Mesh::node(std::size_t i) const {
  return i < base.vertices.size() ? base.vertices[i] : edge_nodes[i - base.vertices.size()];
}

int P2Mesh::find_edge(int a, int b) const {
  if (a > b) std::swap(a, b);
  const std::array<int, 2> key{a, b};
  auto it = std::lower_bound(edges.begin(), edges.end(), key);
  if (it == edges.end() || *it != key) return -1;
  return static_cast<int>(it - edges.begin());
}

std::array<int, 6> P2Mesh::p2_nodes(std::size_t t) const {
  const auto& tri = base.triangles[t];
  const auto& te = triangle_edges[t];
  const int nv = static_cast<int>(base.vertices.size());
  return {tri[0], tri[1], tri[2], nv + te[0], nv + te[1], nv + te[2]};
}

P2Mesh enrich_p2(Mesh mesh) {
  P2Mesh p2;
  p2.edges.reserve(mesh.triangles.size() * 2);
  for (const auto& tri : mesh.triangles)
    for (int k = 0; k < 3; ++k) {
      int a = tri[k], b = tri[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      p2.edges.push_back({a, b});
    }
  std::sort(p2.edges.begin(), p2.edges.end());
  p2.edges.erase(std::unique(p2.edges.begin(), p2.edges.end()), p2.edges.end());
  p2.base = std::move(mesh);
  const Mesh& m = p2.base;

  p2.triangle_edges.resize(m.triangles.size());
  for (std::size_t t = 0; t < m.triangles.size(); ++t)
    for (int k = 0; k < 3; ++k) p2.triangle_edges[t][k] = p2.find_edge(m.triangles[t][k], m.triangles[t][(k + 1) % 3]);

  p2.edge_boundary.assign(p2.edges.size(), -1);
  p2.edge_nodes.resize(p2.edges.size());
  for (std::size_t e = 0; e < p2.edges.size(); ++e)
    p2.edge_nodes[e] = midpoint(m.vertices[p2.edges[e][0]], m.vertices[p2.edges[e][1]]);

  for (std::size_t i = 0; i < m.boundary_edges.size(); ++i) {
    const auto& be = m.boundary_edges[i];
    const int e = p2.find_edge(be.v[0], be.v[1]);
    if (e < 0) throw TopologyError(fmt::format("boundary edge {} is not an edge of the triangulation", i));
    p2.edge_boundary[e] = static_cast<int>(i);
    if (!be.tag.is_tube_wall()) continue;
    if (be.tag.tube < 1 || be.tag.tube > m.tube_count())
      throw GeometryError(fmt::format("boundary edge {} references unknown tube {}", i, be.tag.tube));
    const auto& c = m.tubes[be.tag.tube - 1];
    for (int v : be.v) {
      if (std::abs(distance(m.vertices[v], c.center) - c.radius) > kOnCircleTol)
        throw GeometryError(fmt::format("edge {} endpoint {} is not on tube {}; cannot project", i, v, be.tag.tube));
    }
    const Vec2 mid = p2.edge_nodes[e] - c.center;
    const double len = norm(mid);
    if (len == 0) throw GeometryError(fmt::format("edge {} spans a diameter of tube {}", i, be.tag.tube));
    p2.edge_nodes[e] = c.center + (c.radius / len) * mid;
  }
  return p2;
}

double BoundaryNodes::total() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

BoundaryNodes boundary_nodes(const P2Mesh& mesh, std::span<const BoundaryTag> tags) {
  const Mesh& m = mesh.base;
  std::vector<std::size_t> selected;
  for (std::size_t i = 0; i < m.boundary_edges.size(); ++i)
    if (std::find(tags.begin(), tags.end(), m.boundary_edges[i].tag) != tags.end()) selected.push_back(i);
  if (selected.empty()) {
    std::string names;
    for (const auto& t : tags) names += (names.empty() ? "" : ",") + t.name();
    throw EmptySelectionError("no boundary edges carry tag(s) " + names);
  }

  std::unordered_map<int, std::vector<std::size_t>> incident;
  std::vector<int> order_of_appearance;
  for (std::size_t i : selected)
    for (int v : m.boundary_edges[i].v) {
      auto& list = incident[v];
      if (list.empty()) order_of_appearance.push_back(v);
      list.push_back(i);
    }

  std::unordered_map<int, double> weight;
  for (std::size_t i : selected) {
    const double len = boundary_edge_length(m, m.boundary_edges[i]);
    for (int v : m.boundary_edges[i].v) weight[v] += 0.5 * len;
  }

  BoundaryNodes out;
  std::unordered_map<std::size_t, bool> used_edge;
  std::unordered_map<int, bool> visited;
  auto walk = [&](int start) {
    int cur = start;
    visited[cur] = true;
    out.nodes.push_back(cur);
    for (;;) {
      std::size_t next_edge = SIZE_MAX;
      for (std::size_t e : incident[cur])
        if (!used_edge[e]) {
          next_edge = e;
          break;
        }
      if (next_edge == SIZE_MAX) break;
      used_edge[next_edge] = true;
      const auto& ev = m.boundary_edges[next_edge].v;
      const int nxt = ev[0] == cur ? ev[1] : ev[0];
      if (visited[nxt]) break;
      visited[nxt] = true;
      out.nodes.push_back(nxt);
      cur = nxt;
    }
  };
  // Open chains first (start at an endpoint), then closed loops.
  for (int v : order_of_appearance)
    if (!visited[v] && incident[v].size() == 1) walk(v);
  for (int v : order_of_appearance)
    if (!visited[v]) walk(v);

  out.weights.reserve(out.nodes.size());
  for (int v : out.nodes) out.weights.push_back(weight[v]);
  return out;
}

BoundaryNodes boundary_nodes(const P2Mesh& mesh, const BoundaryTag& tag) {
  return boundary_nodes(mesh, std::span<const BoundaryTag>(&tag, 1));
}

BoundaryNodes tube_wall_nodes(const P2Mesh& mesh) {
  std::vector<BoundaryTag> tags;
  for (int i = 1; i <= mesh.base.tube_count(); ++i) tags.push_back(BoundaryTag::tube_wall(i));
  return boundary_nodes(mesh, tags);
}

}  // namespace tubeox
