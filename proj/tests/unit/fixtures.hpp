#pragma once

#include <numbers>
#include <random>
#include <string>

#include "tubeox/mesh.hpp"
#include "tubeox/meshgen.hpp"

namespace fixtures {

using namespace tubeox;

/// Unit square (0,0)-(1,1) in MSH 2.2 text. Inlet x = 0, outlet x = 1,
/// symmetry top and bottom.
inline std::string square_msh(bool second_clockwise = false) {
  std::string s =
      "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n"
      "$Nodes\n4\n1 0 0 0\n2 1 0 0\n3 1 1 0\n4 0 1 0\n$EndNodes\n"
      "$Elements\n6\n"
      "1 1 2 1 1 4 1\n"
      "2 1 2 2 2 2 3\n"
      "3 1 2 3 3 1 2\n"
      "4 1 2 3 3 3 4\n"
      "5 2 2 0 1 1 2 3\n";
  s += second_clockwise ? "6 2 2 0 1 1 4 3\n" : "6 2 2 0 1 1 3 4\n";
  s += "$EndElements\n";
  return s;
}

/// Structured rectangle [0, lx] x [0, ly] with nx x ny cells split along
/// alternating diagonals. Left edge gets `left`, right edge `right`, top and
/// bottom `sides`.
inline Mesh rect_mesh(int nx, int ny, double lx = 1.0, double ly = 1.0, BoundaryTag left = BoundaryTag::inlet(),
                      BoundaryTag right = BoundaryTag::outlet(), BoundaryTag sides = BoundaryTag::symmetry()) {
  Mesh m;
  auto id = [&](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) m.vertices.push_back({lx * i / nx, ly * j / ny});
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      if ((i + j) % 2 == 0) {
        m.triangles.push_back({a, b, c});
        m.triangles.push_back({a, c, d});
      } else {
        m.triangles.push_back({a, b, d});
        m.triangles.push_back({b, c, d});
      }
    }
  for (int i = 0; i < nx; ++i) {
    m.boundary_edges.push_back({{id(i, 0), id(i + 1, 0)}, sides});
    m.boundary_edges.push_back({{id(i + 1, ny), id(i, ny)}, sides});
  }
  for (int j = 0; j < ny; ++j) {
    m.boundary_edges.push_back({{id(0, j + 1), id(0, j)}, left});
    m.boundary_edges.push_back({{id(nx, j), id(nx, j + 1)}, right});
  }
  return m;
}

/// rect_mesh with interior vertices jittered by up to `amount` of a cell.
inline Mesh jittered_rect(int nx, int ny, unsigned seed, double amount = 0.25) {
  Mesh m = rect_mesh(nx, ny);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-amount, amount);
  for (int j = 1; j < ny; ++j)
    for (int i = 1; i < nx; ++i) {
      auto& v = m.vertices[j * (nx + 1) + i];
      v.x += u(rng) / nx;
      v.y += u(rng) / ny;
    }
  return m;
}

/// Fan-triangulated disk of radius 0.5 about `c`, whole rim tagged TubeWall(1).
inline Mesh disk_mesh(int n, Vec2 c = {0, 0}) {
  Mesh m;
  m.vertices.push_back(c);
  for (int k = 0; k < n; ++k) {
    const double a = 2 * std::numbers::pi * k / n;
    m.vertices.push_back({c.x + 0.5 * std::cos(a), c.y + 0.5 * std::sin(a)});
  }
  for (int k = 0; k < n; ++k) {
    const int a = 1 + k, b = 1 + (k + 1) % n;
    m.triangles.push_back({0, a, b});
    m.boundary_edges.push_back({{a, b}, BoundaryTag::tube_wall(1)});
  }
  m.tubes.push_back({c, 0.5});
  return m;
}

/// One triangle with two inlet edges and a tube-wall arc between (1, 0) and
/// (0, 1). Every vertex is an inlet vertex, so c stays 1 and the film on the
/// wall sees a frozen unit concentration.
inline Mesh frozen_wedge() {
  Mesh m;
  m.vertices = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
  m.triangles = {{0, 1, 2}};
  m.boundary_edges = {{{0, 1}, BoundaryTag::inlet()}, {{1, 2}, BoundaryTag::tube_wall(1)}, {{2, 0}, BoundaryTag::inlet()}};
  m.tubes.push_back({{0.0, 0.0}, 1.0});
  return m;
}

/// Short bundle of two tubes with a coarse mesh (a few hundred vertices).
inline P2Mesh small_bundle(Arrangement a = Arrangement::InLine, double boundary_h = 0.1, double interior_h = 0.25) {
  BundleGeometry g;
  g.arrangement = a;
  g.n_tubes = 2;
  g.upstream_margin = 2.0;
  g.downstream_margin = 3.0;
  g.boundary_h = boundary_h;
  g.interior_h = interior_h;
  return enrich_p2(generate_mesh(g));
}

}  // namespace fixtures
