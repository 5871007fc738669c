#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "tubeox/config.hpp"
#include "tubeox/io.hpp"
#include "tubeox/postproc.hpp"

namespace tubeox {

using Logger = std::function<void(std::string_view)>;

/// Named parameter sets. "<name>:staggered" selects the staggered bundle.
///   linear            Re 50, Pe 10, Sh1 0.001, linear kinetics, tau 0.1, T 50
///   parabolic-1e-5    as linear with Sh2 = 1e-5 (likewise 1e-6, 1e-7)
///   flow-re10         steady flow only (likewise re50, re150)
SimConfig preset(const std::string& name);
std::vector<std::string> preset_names();

/// Generated or read mesh with P2 nodes.
P2Mesh prepare_mesh(const SimConfig& c);

struct FlowOutcome {
  FlowField flow;
  std::vector<NewtonReport> reports;
  bool from_cache = false;
};

/// Continuation solve, or the cached field when `cache_path` holds one for
/// this mesh and Reynolds number. A fresh solve is written to the cache.
FlowOutcome steady_flow(const SimConfig& c, const P2Mesh& mesh, const std::string& cache_path = "",
                        const Logger& log = {});

CsvTable newton_table(const std::vector<NewtonReport>& reports);

/// VTK with u, p, vorticity and streamfunction, plus a midline CSV.
void write_flow_outputs(const std::string& dir, const SimConfig& c, const P2Mesh& mesh, const FlowField& flow);

struct TransientSummary {
  std::vector<double> t;
  std::vector<double> c_out;
  /// masses[i][j]: tube j + 1 at t[i] (first five tubes).
  std::vector<std::vector<double>> masses;
  std::vector<StepReport> steps;
  std::vector<OxidationState> snapshots;
  OxidationState final_state;
  double c_max = 0.0;
  double c_min = 0.0;
  double cell_peclet = 0.0;
};

/// Transient run with observers. When `dir` is non-empty, writes c_out.csv,
/// mass.csv, steps.csv, per-snapshot VTK / midline / film CSVs and state.json.
TransientSummary oxidize(const SimConfig& c, const TransportModel& model, const std::string& dir,
                         const Logger& log = {});

void save_state(const std::string& path, const Mesh& mesh, const OxidationState& s);
OxidationState load_state(const std::string& path, const Mesh& mesh);

/// Analyses from stored results in `dir` (flow.json, optionally state.json).
void postprocess(const SimConfig& c, const std::string& dir, const Logger& log = {});

/// Figure and table identifiers accepted by `reproduce`.
std::vector<std::string> reproduce_targets();
/// Runs the experiment behind a figure or table and writes its data under
/// `dir`. Flows are cached in `dir`/cache.
void reproduce(const std::string& target, const SimConfig& base, const std::string& dir, const Logger& log = {});

}  // namespace tubeox
