#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "tubeox/fem.hpp"
#include "tubeox/linsolve.hpp"

namespace tubeox {

/// Steady velocity (P2, two components stacked) and pressure (P1).
struct FlowField {
  Vector u;
  Vector p;
  double re = 0.0;

  Vector stacked() const;
  static FlowField from_stacked(const Vector& x, std::size_t velocity_dofs, double re);
};

/// Boundary data and optional extra terms. Inlet and tube walls carry
/// Dirichlet velocity, symmetry edges u·n = 0, the outlet a traction
/// (zero by default, the do-nothing condition).
struct FlowProblem {
  double re = 10.0;
  /// Velocity on Inlet edges; (1, 0) when empty.
  std::function<Vec2(Vec2)> inlet_velocity;
  /// Velocity on tube walls; zero when empty.
  std::function<Vec2(Vec2)> wall_velocity;
  std::function<Vec2(Vec2)> body_force;
  /// Traction g(x, n) on the outlet, entering as ∫ g·v.
  std::function<Vec2(Vec2, Vec2)> outlet_traction;
};

struct FlowOptions {
  double rtol = 1e-10;
  double atol = 1e-12;
  int max_iterations = 25;
};

struct NewtonReport {
  double re = 0.0;
  std::vector<double> absolute;  // entry k: residual after k iterations
  std::vector<double> relative;  // absolute / absolute[0]
  bool converged = false;

  int iterations() const { return static_cast<int>(absolute.size()) - 1; }
};

/// Discrete Taylor-Hood system on a fixed mesh: dof layout, essential
/// conditions and a cached sparsity pattern.
class FlowSystem {
 public:
  FlowSystem(const P2Mesh& mesh, FlowProblem problem);

  const P2Mesh& mesh() const { return *mesh_; }
  const FlowProblem& problem() const { return problem_; }
  std::size_t velocity_dofs() const { return 2 * mesh_->node_count(); }
  std::size_t pressure_dofs() const { return mesh_->vertex_count(); }
  std::size_t size() const { return velocity_dofs() + pressure_dofs(); }
  const Constraints& constraints() const { return constraints_; }

  /// Zero field with the essential values imposed.
  FlowField admissible_zero() const;
  /// Residual with constrained rows zeroed; optionally the Jacobian with
  /// constrained rows and columns eliminated.
  Vector residual(const FlowField& state, SparseMatrix* jacobian = nullptr, bool convection = true) const;

 private:
  const P2Mesh* mesh_;
  FlowProblem problem_;
  Constraints constraints_;
  SparseMatrix pattern_;
  std::vector<std::array<int, 15>> element_dofs_;
};

std::pair<Vector, SparseMatrix> residual_and_jacobian(const FlowSystem& system, const FlowField& state);

/// Linear Stokes problem (no convective term).
FlowField solve_stokes(const FlowSystem& system);

/// Throws NonConvergenceError carrying the residual history.
std::pair<FlowField, NewtonReport> newton_solve(const FlowSystem& system, const FlowField& initial,
                                                const FlowOptions& options = {});

/// Newton from a Stokes start over Re = 10, 50, target (stages at or above
/// the target are dropped).
FlowField continuation_solve(const P2Mesh& mesh, const FlowProblem& problem, const FlowOptions& options = {},
                             std::vector<NewtonReport>* reports = nullptr);

/// ∫ u·n over the selected boundary edges (outward normal).
double boundary_flux(const P2Mesh& mesh, const FlowField& flow, std::span<const BoundaryTag> tags);
/// |∫_in u·n + ∫_out u·n|.
double mass_imbalance(const P2Mesh& mesh, const FlowField& flow);

}  // namespace tubeox
