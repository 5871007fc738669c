#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "tubeox/flow.hpp"
#include "tubeox/meshgen.hpp"
#include "tubeox/oxidation.hpp"

namespace tubeox {

struct DimensionalInputs {
  double rho = 1.0;      // fluid density
  double mu = 1.0;       // dynamic viscosity
  double l = 1.0;        // tube diameter
  double u = 1.0;        // inlet speed
  double c = 1.0;        // inlet concentration
  double D = 1.0;        // solute diffusivity
  double D0 = 1.0;       // diffusivity through the oxide
  double k = 1.0;        // oxidation rate constant
  double rho0 = 1.0;     // oxide density

  void check() const;
};

struct Dimensionless {
  double re = 0.0;
  double pe = 0.0;
  double sh1 = 0.0;
  double sh2_inv = 0.0;
  /// Film reference thickness D c / (rho0 u).
  double d_ref = 0.0;
};

/// Re = rho l u / mu, Pe = l u / D, Sh1 = k l / D, Sh2 = (l / D)(D0 / d_ref).
Dimensionless nondimensionalize(const DimensionalInputs& d);

struct SolverConfig {
  FlowOptions flow;
  StepOptions step;
};

struct ObserverConfig {
  /// Times at which concentration snapshots (VTK, midline CSV) are written.
  std::vector<double> snapshot_times;
  /// Series (c_out, oxide masses) every `series_every` steps.
  int series_every = 1;
  std::vector<int> profile_tubes{3};
  int midline_samples = 600;
};

/// Dimensionless problem definition. All physics keys are dimensionless.
struct SimConfig {
  BundleGeometry geometry;
  /// Size preset applied to `geometry`; unset means the explicit sizes.
  std::optional<GridLevel> grid = GridLevel::Basic;
  /// MSH file to read instead of generating a mesh.
  std::string mesh_path;
  double re = 50.0;
  KineticsParams kinetics;
  double tau = 0.1;
  double t_end = 50.0;
  SolverConfig solver;
  ObserverConfig observe;
  std::string output_dir = "out";

  /// Throws ConfigError naming the offending key.
  void check() const;
  BundleGeometry sized_geometry() const;
};

/// INI grammar: sections [geometry], [flow], [transport], [solver],
/// [output] and optionally [dimensional]; unknown keys are rejected. Keys
/// override the values of `base`.
SimConfig parse_config(std::istream& in, SimConfig base = {});
SimConfig load_config(const std::string& path, SimConfig base = {});
void write_config(const SimConfig& c, std::ostream& out);

/// Cache of a steady flow keyed to the mesh it was computed on.
std::string mesh_checksum(const Mesh& mesh);
void save_flow(const std::string& path, const Mesh& mesh, const FlowField& flow);
/// Throws IoError when the file is missing or was written for another mesh.
FlowField load_flow(const std::string& path, const Mesh& mesh);

}  // namespace tubeox
