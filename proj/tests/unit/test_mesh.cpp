#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "fixtures.hpp"
#include "tubeox/errors.hpp"
#include "tubeox/io.hpp"
#include "tubeox/mesh.hpp"

using namespace tubeox;
using std::numbers::pi;

namespace {

Mesh parse(const std::string& text) {
  std::istringstream in(text);
  return parse_msh(in);
}

Mesh half_disk(int n) {
  Mesh m;
  m.vertices.push_back({0, 0});
  for (int k = 0; k <= n; ++k) {
    const double a = pi * k / n;
    m.vertices.push_back({0.5 * std::cos(a), 0.5 * std::sin(a)});
  }
  for (int k = 0; k < n; ++k) {
    m.triangles.push_back({0, 1 + k, 2 + k});
    m.boundary_edges.push_back({{1 + k, 2 + k}, BoundaryTag::tube_wall(1)});
  }
  m.boundary_edges.push_back({{0, 1}, BoundaryTag::symmetry()});
  m.boundary_edges.push_back({{n + 1, 0}, BoundaryTag::symmetry()});
  m.tubes.push_back({{0, 0}, 0.5});
  return m;
}

}  // namespace

TEST_CASE("parse_msh reads the two-triangle square") {
  const Mesh m = parse(fixtures::square_msh());
  CHECK(m.vertex_count() == 4);
  CHECK(m.triangle_count() == 2);
  CHECK(m.boundary_edges.size() == 4);
  CHECK(m.vertices[2] == Vec2{1, 1});
  int inlet = 0, outlet = 0, sym = 0;
  for (const auto& e : m.boundary_edges) {
    inlet += e.tag == BoundaryTag::inlet();
    outlet += e.tag == BoundaryTag::outlet();
    sym += e.tag == BoundaryTag::symmetry();
  }
  CHECK(inlet == 1);
  CHECK(outlet == 1);
  CHECK(sym == 2);
}

TEST_CASE("parse_msh reorients a clockwise triangle") {
  const Mesh m = parse(fixtures::square_msh(true));
  for (std::size_t t = 0; t < m.triangle_count(); ++t) CHECK(m.area(t) == doctest::Approx(0.5));
}

TEST_CASE("parse_msh reports the line of a line element with a missing node") {
  std::string text = fixtures::square_msh();
  const std::string bad = "2 1 2 2 2 2 3\n";
  text.replace(text.find(bad), bad.size(), "2 1 2 2 2 2 9\n");
  // Second element line of the file.
  try {
    parse(text);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 14);
  }
}

TEST_CASE("parse_msh rejects malformed headers, unknown tags and non-manifold boundaries") {
  std::string text = fixtures::square_msh();
  SUBCASE("header") {
    text.replace(text.find("$Nodes"), 6, "$Nodez");
    CHECK_THROWS_AS(parse(text), ParseError);
  }
  SUBCASE("tag") {
    text.replace(text.find("1 1 2 1 1 4 1"), 13, "1 1 2 7 7 4 1");
    CHECK_THROWS_AS(parse(text), TagError);
  }
  SUBCASE("non-manifold") {
    text.replace(text.find("$Elements\n6"), 11, "$Elements\n7");
    text.replace(text.find("$EndElements"), 12, "7 1 2 3 3 1 3\n$EndElements");
    CHECK_THROWS_AS(parse(text), TopologyError);
  }
}

TEST_CASE("write_msh then parse_msh reproduces the mesh") {
  for (const Mesh& m : {parse(fixtures::square_msh()), fixtures::jittered_rect(5, 4, 3), half_disk(12)}) {
    std::ostringstream out;
    write_msh(m, out);
    const Mesh back = parse(out.str());
    REQUIRE(back.vertex_count() == m.vertex_count());
    for (std::size_t i = 0; i < m.vertex_count(); ++i) {
      CHECK(std::abs(back.vertices[i].x - m.vertices[i].x) <= 1e-15);
      CHECK(std::abs(back.vertices[i].y - m.vertices[i].y) <= 1e-15);
    }
    CHECK(back.triangles == m.triangles);
    REQUIRE(back.boundary_edges.size() == m.boundary_edges.size());
    for (std::size_t i = 0; i < m.boundary_edges.size(); ++i) {
      CHECK(back.boundary_edges[i].v == m.boundary_edges[i].v);
      CHECK(back.boundary_edges[i].tag == m.boundary_edges[i].tag);
    }
    REQUIRE(back.tubes.size() == m.tubes.size());
    for (std::size_t i = 0; i < m.tubes.size(); ++i) CHECK(back.tubes[i].center == m.tubes[i].center);
  }
}

TEST_CASE("enrich_p2 counts nodes and places edge nodes") {
  const P2Mesh p2 = enrich_p2(parse(fixtures::square_msh()));
  CHECK(p2.edge_count() == 5);
  CHECK(p2.node_count() == 9);
  for (std::size_t e = 0; e < p2.edge_count(); ++e) {
    const Vec2 mid = midpoint(p2.base.vertices[p2.edges[e][0]], p2.base.vertices[p2.edges[e][1]]);
    CHECK(p2.edge_nodes[e] == mid);
  }
  for (std::size_t e = 1; e < p2.edge_count(); ++e) CHECK(p2.edges[e - 1] < p2.edges[e]);
}

TEST_CASE("enrich_p2 projects tube-wall edge nodes onto the arc") {
  Mesh m;
  m.vertices = {{0.5, 0}, {0, 0.5}, {0.6, 0.6}};
  m.triangles = {{0, 2, 1}};
  m.boundary_edges = {{{1, 0}, BoundaryTag::tube_wall(1)},
                      {{0, 2}, BoundaryTag::symmetry()},
                      {{2, 1}, BoundaryTag::symmetry()}};
  m.tubes = {{{0, 0}, 0.5}};
  const P2Mesh p2 = enrich_p2(m);
  const int e = p2.find_edge(0, 1);
  REQUIRE(e >= 0);
  CHECK(p2.edge_nodes[e].x == doctest::Approx(0.5 * std::cos(pi / 4)).epsilon(1e-15));
  CHECK(p2.edge_nodes[e].y == doctest::Approx(0.5 * std::sin(pi / 4)).epsilon(1e-15));

  const P2Mesh disk = enrich_p2(fixtures::disk_mesh(17));
  for (std::size_t i = 0; i < disk.edge_count(); ++i)
    if (disk.edge_boundary[i] >= 0) CHECK(std::abs(norm(disk.edge_nodes[i]) - 0.5) <= 1e-10);
}

TEST_CASE("enrich_p2 rejects a wall edge whose end is off the circle") {
  Mesh m;
  m.vertices = {{0.5, 0}, {0, 0.7}, {0.6, 0.6}};
  m.triangles = {{0, 2, 1}};
  m.boundary_edges = {{{1, 0}, BoundaryTag::tube_wall(1)},
                      {{0, 2}, BoundaryTag::symmetry()},
                      {{2, 1}, BoundaryTag::symmetry()}};
  m.tubes = {{{0, 0}, 0.5}};
  CHECK_THROWS_AS(enrich_p2(m), GeometryError);
}

TEST_CASE("validate on the square and on a degenerate triangle") {
  const auto rep = validate(parse(fixtures::square_msh()));
  CHECK(rep.ok());
  CHECK(rep.boundary_loops == 1);
  CHECK(rep.min_angle_deg == doctest::Approx(45.0));
  CHECK(rep.edges_per_tag.at("symmetry") == 2);

  Mesh m = fixtures::rect_mesh(2, 1);
  m.vertices[1] = {0.5, 0.0};
  m.vertices.push_back({0.5, 0.0});
  const int extra = static_cast<int>(m.vertices.size()) - 1;
  m.triangles.push_back({0, 1, extra});
  const auto bad = validate(m);
  CHECK_FALSE(bad.ok());
  REQUIRE_FALSE(bad.bad_triangles.empty());
  CHECK(bad.bad_triangles.back() == m.triangle_count() - 1);
}

TEST_CASE("boundary_nodes weights") {
  SUBCASE("full circle") {
    for (int n : {6, 16, 50}) {
      const P2Mesh p2 = enrich_p2(fixtures::disk_mesh(n));
      const auto bn = boundary_nodes(p2, BoundaryTag::tube_wall(1));
      CHECK(bn.size() == static_cast<std::size_t>(n));
      for (double w : bn.weights) CHECK(w == doctest::Approx(pi / n).epsilon(1e-13));
      CHECK(bn.total() == doctest::Approx(pi).epsilon(1e-13));
    }
  }
  SUBCASE("half circle") {
    const P2Mesh p2 = enrich_p2(half_disk(24));
    CHECK(boundary_nodes(p2, BoundaryTag::tube_wall(1)).total() == doctest::Approx(pi / 2).epsilon(1e-13));
    CHECK(tube_wall_nodes(p2).size() == 25);
  }
  SUBCASE("inlet trapezoid") {
    const P2Mesh p2 = enrich_p2(fixtures::rect_mesh(2, 2));
    const auto bn = boundary_nodes(p2, BoundaryTag::inlet());
    REQUIRE(bn.size() == 3);
    std::vector<std::pair<double, double>> yw;
    for (std::size_t i = 0; i < 3; ++i) yw.push_back({p2.base.vertices[bn.nodes[i]].y, bn.weights[i]});
    std::sort(yw.begin(), yw.end());
    CHECK(yw[0].second == doctest::Approx(0.25));
    CHECK(yw[1].second == doctest::Approx(0.5));
    CHECK(yw[2].second == doctest::Approx(0.25));
    // Nodes come out in chain order: the middle one is never an end.
    CHECK(p2.base.vertices[bn.nodes[1]].y == doctest::Approx(0.5));
  }
  SUBCASE("empty selection") {
    const P2Mesh p2 = enrich_p2(fixtures::rect_mesh(2, 2));
    CHECK_THROWS_AS(boundary_nodes(p2, BoundaryTag::tube_wall(1)), EmptySelectionError);
  }
}
