#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "tubeox/fem.hpp"
#include "tubeox/flow.hpp"
#include "tubeox/linsolve.hpp"

namespace tubeox {

struct KineticsParams {
  double sh1 = 0.001;
  /// 1 / Sh2; zero gives pure linear kinetics.
  double sh2_inv = 0.0;
  double pe = 10.0;

  void check() const;
};

struct RobinCoefficient {
  double value = 0.0;
  double derivative = 0.0;  // d value / d thickness
};

/// (1/sh1 + sh2_inv d)^-1 and its derivative in d.
RobinCoefficient robin_coefficient(double d, const KineticsParams& k);

/// Concentration on all vertices (P1) and film thickness on the tube-wall
/// vertices, in the order of `TransportModel::wall()`.
struct OxidationState {
  Vector c;
  Vector d;
  double t = 0.0;
};

struct StepReport {
  int step = 0;
  double tau = 0.0;
  int iterations = 0;
  std::vector<double> residuals;
  bool converged = false;
  /// Oxidant taken up by the walls during the step, ∫ α c_mid τ over Γ_s.
  double absorbed = 0.0;
};

/// Discrete transport operators on a fixed mesh and steady flow:
/// consistent P1 mass M, the transport form
///   E(c, s) = −∫ c u·∇s + (1/Pe) ∫ ∇c·∇s + ∫_out (u·n) c s,
/// and lumped tube-wall weights.
class TransportModel {
 public:
  TransportModel(const P2Mesh& mesh, const FlowField& flow, double pe);

  const P2Mesh& mesh() const { return *mesh_; }
  const SparseMatrix& mass() const { return mass_; }
  const SparseMatrix& transport() const { return transport_; }
  const BoundaryNodes& wall() const { return wall_; }
  const std::vector<int>& inlet_vertices() const { return inlet_; }
  double pe() const { return pe_; }
  std::size_t concentration_dofs() const { return mesh_->vertex_count(); }
  std::size_t film_dofs() const { return wall_.size(); }
  /// Largest |u| h Pe / 2 over the elements.
  double max_cell_peclet() const { return cell_peclet_; }

  /// c = 1 on the inlet, 0 elsewhere; d = 0.
  OxidationState initial_state() const;

 private:
  const P2Mesh* mesh_;
  double pe_;
  SparseMatrix mass_;
  SparseMatrix transport_;
  BoundaryNodes wall_;
  std::vector<int> inlet_;
  double cell_peclet_ = 0.0;
};

/// Two-level step for the stacked unknowns z = (c^{n+1}, d^{n+1}):
///   R_c = M (c⁺ − cⁿ)/τ + E c_θ + W α(d_θ) c_θ   (inlet rows: c = 1)
///   R_d = w [(d⁺ − dⁿ)/τ − α(d_θ) c_θ]
/// with x_θ = θ x⁺ + (1 − θ) xⁿ and W, w the lumped wall weights.
/// θ = 1/2 is Crank-Nicolson, θ = 1 implicit Euler.
class TransportStep {
 public:
  TransportStep(const TransportModel& model, const KineticsParams& k, double tau, double theta = 0.5);

  void set_previous(const OxidationState& prev);
  Vector residual(const Vector& z) const;
  /// Jacobian at z; reuses the internal pattern.
  const SparseMatrix& jacobian(const Vector& z);
  /// Solves J(z) δ = −r. With linear kinetics the Jacobian does not change,
  /// so its factorization is kept across steps.
  Vector newton_correction(const Vector& z, const Vector& r);
  /// When set, the wall sink in the concentration equation is dropped
  /// (walls become impermeable for c while the film still grows).
  void disable_wall_sink(bool off) { sink_off_ = off; }
  void set_linear_method(LinearMethod m) { method_ = m; }

  std::size_t size() const;
  Vector stack(const OxidationState& s) const;
  const TransportModel& model() const { return *model_; }
  const KineticsParams& kinetics() const { return k_; }
  double tau() const { return tau_; }
  double theta() const { return theta_; }

 private:
  const TransportModel* model_;
  KineticsParams k_;
  double tau_;
  double theta_;
  bool sink_off_ = false;
  LinearMethod method_ = LinearMethod::Lu;
  OxidationState prev_;
  SparseMatrix a_;     // M/τ + θE on the concentration block
  Vector rhs_prev_;    // −M cⁿ/τ + (1 − θ) E cⁿ
  SparseMatrix base_;  // a_ with inlet rows eliminated, on the full pattern
  SparseMatrix jac_;
  LuFactorization lu_;
  bool lu_fixed_ = false;
  std::vector<std::size_t> wall_diag_, cd_pos_, dc_pos_, dd_pos_;
  std::vector<char> inlet_mask_;
};

/// Film part of the residual: for each wall node
///   w [(d⁺ − dⁿ)/τ − α((d⁺ + dⁿ)/2) (c⁺ + cⁿ)/2]
/// where c values are taken at the wall vertices.
Vector film_residual(const Vector& d_prev, const Vector& d_next, const Vector& c_wall_prev,
                     const Vector& c_wall_next, const Vector& weights, double tau, const KineticsParams& k);

/// Solves one film node's CN equation for d⁺ with prescribed wall concentrations.
double film_step(double d_prev, double c_prev, double c_next, double tau, const KineticsParams& k);

struct StepOptions {
  double atol = 1e-11;
  double rtol = 1e-9;
  int max_iterations = 10;
  /// Number of initial Crank-Nicolson steps each replaced by two implicit
  /// Euler half steps. Damps the stiff modes excited by the jump between the
  /// inlet value and the initial state; 0 gives plain Crank-Nicolson.
  int implicit_startup = 4;
  /// Newton corrections by sparse LU or by GMRES preconditioned with ILU(0).
  LinearMethod linear = LinearMethod::Lu;
};

/// Monolithic Newton for one step. Throws NonConvergenceError or
/// StepRejectedError (thickness below the round-off floor -1e-8 Sh1 t).
std::pair<OxidationState, StepReport> coupled_newton_step(TransportStep& step, const OxidationState& prev,
                                                          const StepOptions& options = {});

using TransientObserver = std::function<void(const OxidationState&, const StepReport*)>;

struct TransientResult {
  std::vector<OxidationState> snapshots;
  std::vector<StepReport> steps;
  OxidationState final_state;
};

/// Steps from the initial state to t_end. The observer sees t = 0 (with a
/// null report) and every accepted step; snapshots are kept at the listed
/// times (matched to the nearest step). A startup step reports the summed
/// iterations of its two half steps.
TransientResult run_transient(const TransportModel& model, const KineticsParams& k, double tau, double t_end,
                              const std::vector<double>& snapshot_times = {}, const TransientObserver& observer = {},
                              const StepOptions& options = {});

}  // namespace tubeox
