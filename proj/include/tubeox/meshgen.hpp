#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tubeox/mesh.hpp"

namespace tubeox {

enum class Arrangement { InLine, Staggered };

std::string to_string(Arrangement a);
Arrangement arrangement_from_string(const std::string& s);

/// Symmetry strip around one column of a tube bundle. Lengths are in tube
/// diameters; x1 runs from the inlet (x1 = 0) to the outlet, x2 across the
/// strip.
struct BundleGeometry {
  Arrangement arrangement = Arrangement::InLine;
  int n_tubes = 10;
  double pitch = 2.0;
  double strip_width = 1.0;
  double upstream_margin = 3.0;
  double downstream_margin = 6.0;
  double boundary_h = 0.05;
  double interior_h = 0.1;
  /// Growth rate of the target edge length with distance from the nearest tube.
  double grading = 0.25;
  std::size_t max_vertices = 2'000'000;
  /// Tie-breaking only; different seeds may give different (equally valid) meshes.
  std::uint64_t seed = 0;

  double length() const;
  /// Center of tube k (0-based, counted from the inlet).
  Vec2 tube_center(int k) const;
  /// Target edge length at x.
  double size_at(Vec2 x) const;
  /// Throws GeometryError for an invalid bundle.
  void check() const;
};

struct PslgSegment {
  std::array<int, 2> v{};
  BoundaryTag tag;
};

/// Planar straight-line graph: one closed counterclockwise boundary loop.
struct PSLG {
  std::vector<Vec2> points;
  std::vector<PslgSegment> segments;
  std::vector<TubeCircle> tubes;
};

PSLG build_geometry(const BundleGeometry& g);

/// Constrained Delaunay triangulation with Ruppert refinement until every
/// triangle has circumradius / shortest edge <= sqrt(2) and respects the
/// size field of `g`.
Mesh triangulate(const PSLG& pslg, const BundleGeometry& g);

enum class GridLevel { Coarse, Basic, Fine };

std::string to_string(GridLevel l);
GridLevel grid_level_from_string(const std::string& s);

/// Copy of `g` with the size parameters of a grid level.
BundleGeometry with_grid_level(BundleGeometry g, GridLevel level);

inline Mesh generate_mesh(const BundleGeometry& g) { return triangulate(build_geometry(g), g); }

struct GridSuite {
  Mesh coarse;
  Mesh basic;
  Mesh fine;
};

GridSuite grid_suite(const BundleGeometry& g);

}  // namespace tubeox
