#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tubeox/geometry.hpp"

namespace tubeox {

enum class BoundaryKind : std::uint8_t { Inlet, Outlet, Symmetry, TubeWall };

/// Boundary label. `tube` is the 1-based tube index for TubeWall and 0 otherwise.
struct BoundaryTag {
  BoundaryKind kind = BoundaryKind::Symmetry;
  int tube = 0;

  static constexpr BoundaryTag inlet() { return {BoundaryKind::Inlet, 0}; }
  static constexpr BoundaryTag outlet() { return {BoundaryKind::Outlet, 0}; }
  static constexpr BoundaryTag symmetry() { return {BoundaryKind::Symmetry, 0}; }
  static constexpr BoundaryTag tube_wall(int i) { return {BoundaryKind::TubeWall, i}; }

  bool is_tube_wall() const { return kind == BoundaryKind::TubeWall; }
  std::string name() const;

  friend constexpr auto operator<=>(const BoundaryTag&, const BoundaryTag&) = default;
};

struct BoundaryEdge {
  std::array<int, 2> v{};
  BoundaryTag tag;
};

struct TubeCircle {
  Vec2 center;
  double radius = 0.5;
};

/// Straight-sided triangulation of the fluid region with tagged boundary.
/// `tubes[i - 1]` is the circle of TubeWall(i).
struct Mesh {
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<BoundaryEdge> boundary_edges;
  std::vector<TubeCircle> tubes;

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t triangle_count() const { return triangles.size(); }
  int tube_count() const { return static_cast<int>(tubes.size()); }
  double area(std::size_t t) const;
};

/// Maps MSH physical tags to boundary labels. Tags above `tube_tag_offset`
/// map to TubeWall(tag - offset) unless listed explicitly.
struct TagDictionary {
  std::map<int, BoundaryTag> tags;
  int tube_tag_offset = 10;
  /// Optional explicit circles keyed by 1-based tube index.
  std::map<int, TubeCircle> circles;

  static TagDictionary defaults();
  std::optional<BoundaryTag> lookup(int physical_tag) const;
  int physical_tag(const BoundaryTag& tag) const;
};

/// Reads MSH 2.2 ASCII. Tube circles come from a `$TubeCircles` section,
/// the dictionary, or a least-squares fit of the wall vertices, in that order.
Mesh parse_msh(std::istream& in, const TagDictionary& dict = TagDictionary::defaults(),
               std::vector<std::string>* warnings = nullptr);
Mesh read_msh_file(const std::string& path, const TagDictionary& dict = TagDictionary::defaults());

/// Throws TopologyError / GeometryError when a Mesh invariant is violated.
void check_mesh(const Mesh& mesh);

/// Mesh with one extra node per undirected edge. Local P2 numbering of
/// triangle (v0, v1, v2): vertices 0..2, then edges (v0,v1), (v1,v2), (v2,v0).
struct P2Mesh {
  Mesh base;
  /// Sorted vertex pairs, one per undirected edge, in ascending order.
  std::vector<std::array<int, 2>> edges;
  std::vector<Vec2> edge_nodes;
  std::vector<std::array<int, 3>> triangle_edges;
  /// Index into base.boundary_edges, or -1 for interior edges.
  std::vector<int> edge_boundary;

  std::size_t vertex_count() const { return base.vertices.size(); }
  std::size_t edge_count() const { return edges.size(); }
  std::size_t node_count() const { return base.vertices.size() + edges.size(); }
  Vec2 node(std::size_t i) const;
  /// Index of edge {a, b}, or -1.
  int find_edge(int a, int b) const;
  std::array<int, 6> p2_nodes(std::size_t t) const;
};

P2Mesh enrich_p2(Mesh mesh);

struct ValidationReport {
  double min_area = 0.0;
  double max_area = 0.0;
  double min_angle_deg = 0.0;
  int boundary_loops = 0;
  std::map<std::string, int> edges_per_tag;
  std::vector<std::size_t> bad_triangles;
  std::vector<std::string> failures;

  bool ok() const { return failures.empty(); }
};

ValidationReport validate(const Mesh& mesh);

/// P1 trace of a boundary selection: vertices ordered along each boundary
/// chain, each with a lumped length weight (half the adjacent segment
/// lengths; true arc length on tube walls).
struct BoundaryNodes {
  std::vector<int> nodes;
  std::vector<double> weights;

  double total() const;
  std::size_t size() const { return nodes.size(); }
};

BoundaryNodes boundary_nodes(const P2Mesh& mesh, const BoundaryTag& tag);
BoundaryNodes boundary_nodes(const P2Mesh& mesh, std::span<const BoundaryTag> tags);
/// All tube walls together.
BoundaryNodes tube_wall_nodes(const P2Mesh& mesh);

/// Length of boundary edge `e`; arc length for tube-wall edges.
double boundary_edge_length(const Mesh& mesh, const BoundaryEdge& e);

}  // namespace tubeox
