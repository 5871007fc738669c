#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tubeox/fem.hpp"
#include "tubeox/flow.hpp"
#include "tubeox/oxidation.hpp"

namespace tubeox {

// ---------------------------------------------------------------- streamfunction

/// Vorticity ∂u₂/∂x₁ − ∂u₁/∂x₂ projected onto P1 in L2.
Vector vorticity(const P2Mesh& mesh, const FlowField& flow);

/// Boundary vertices in counterclockwise order starting at the vertex closest
/// to (0, 0).
std::vector<int> boundary_loop(const Mesh& mesh);

/// P1 streamfunction from −∇²ψ = ω. Boundary values integrate u·n along the
/// counterclockwise boundary loop from ψ = 0 at the (0, 0) corner, so ψ is
/// constant on walls and symmetry lines and the gauge vanishes on the
/// x₂ = 0 side.
Vector streamfunction(const P2Mesh& mesh, const FlowField& flow);

/// Interior vertices where a P1 field is strictly below (or above) all of
/// its edge neighbours.
struct InteriorExtrema {
  std::vector<int> minima;
  std::vector<int> maxima;
};
InteriorExtrema interior_extrema(const Mesh& mesh, const Vector& psi);

/// Recirculation between tubes k and k+1 (1-based k): over the vertices with
/// x₁ strictly between the two centres, the largest distance of ψ outside
/// the band [ψ(x₂ = 0 side), ψ(x₂ = W side)] spanned by the through-flow.
/// Zero when ψ stays inside the band.
double vortex_strength(const P2Mesh& mesh, const Vector& psi, int k);
/// Vertices counted by `vortex_strength` that are interior extrema of ψ.
std::vector<int> gap_extrema(const P2Mesh& mesh, const Vector& psi, int k);

// ---------------------------------------------------------------- sampling

/// Bucket grid over triangle bounding boxes.
class PointLocator {
 public:
  explicit PointLocator(const Mesh& mesh);
  struct Hit {
    std::size_t triangle;
    std::array<double, 3> bary;
  };
  std::optional<Hit> locate(Vec2 p) const;

 private:
  const Mesh* mesh_;
  Vec2 lo_, hi_;
  int nx_ = 1, ny_ = 1;
  std::vector<std::vector<std::size_t>> cells_;
};

enum class FieldSpace { P1, P2 };

/// A scalar field given by nodal values.
struct ScalarField {
  FieldSpace space = FieldSpace::P1;
  Vector values;
};

/// Component of a flow solution: "u1", "u2" (P2) or "p" (P1).
ScalarField flow_component(const P2Mesh& mesh, const FlowField& flow, const std::string& name);

double evaluate(const P2Mesh& mesh, const ScalarField& f, const PointLocator::Hit& hit);

struct MidlineProfile {
  std::string field;
  std::vector<double> x;
  /// Empty where the sample point is outside the fluid.
  std::vector<std::optional<double>> value;

  std::size_t gaps() const;
};

/// Uniform samples along x₂ = strip_width / 2 from x₁ = 0 to the outlet.
MidlineProfile midline_profile(const P2Mesh& mesh, const ScalarField& f, double strip_width, int n_samples = 600,
                               const std::string& name = "");
MidlineProfile midline_profile(const P2Mesh& mesh, const PointLocator& loc, const ScalarField& f, double strip_width,
                               int n_samples = 600, const std::string& name = "");

struct DeviationCurve {
  std::vector<double> x;
  std::vector<std::optional<double>> value;
  double max_abs = 0.0;
};

/// (other − reference) · scale per sample. Throws AlignmentError when the
/// abscissae differ.
std::vector<DeviationCurve> deviation_curves(const MidlineProfile& reference, const std::vector<MidlineProfile>& others,
                                             double scale = 100.0);

/// Trapezoidal L2 distance between two aligned profiles over the samples
/// present in both.
double profile_l2_distance(const MidlineProfile& a, const MidlineProfile& b);

// ---------------------------------------------------------------- transport observables

/// ∫_out c / |Γ_out| for a P1 concentration, edgewise Simpson.
double outlet_average(const P2Mesh& mesh, const Vector& c);

struct FilmProfile {
  int tube = 0;
  std::vector<double> theta;
  std::vector<double> d;
  double t = 0.0;
};

/// Film thickness against θ ∈ [0, π], θ = 0 facing the inlet. Throws
/// SelectionError for an unknown tube.
FilmProfile film_profile(const TransportModel& model, const OxidationState& state, int tube);

/// 2 ∫ d over the half tube, with the lumped wall weights.
double oxide_mass(const TransportModel& model, const OxidationState& state, int tube);

}  // namespace tubeox
