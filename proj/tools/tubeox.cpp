#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "tubeox/errors.hpp"
#include "tubeox/experiments.hpp"

using namespace tubeox;

namespace {

struct Options {
  std::string config;
  std::string mesh;
  std::string out;
  std::string preset;
  int threads = 1;
  std::optional<std::uint64_t> seed;
  std::string target;
};

void log_line(std::string_view msg) { std::cerr << "[tubeox] " << msg << "\n"; }

SimConfig resolve(const Options& o) {
  SimConfig c = o.preset.empty() ? SimConfig{} : preset(o.preset);
  if (!o.config.empty()) c = load_config(o.config, c);
  if (!o.mesh.empty()) c.mesh_path = o.mesh;
  if (o.seed) c.geometry.seed = *o.seed;
  if (const char* env = std::getenv("TUBEOX_OUTPUT_DIR"); env && *env) c.output_dir = env;
  if (!o.out.empty()) c.output_dir = o.out;
  c.check();
  return c;
}

std::string path_in(const SimConfig& c, const std::string& name) {
  return (std::filesystem::path(c.output_dir) / name).string();
}

void save_effective_config(const SimConfig& c) {
  const std::string path = path_in(c, "config.ini");
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  write_config(c, out);
}

void cmd_mesh(const SimConfig& c) {
  const P2Mesh mesh = prepare_mesh(c);
  const ValidationReport rep = validate(mesh.base);
  write_msh(mesh.base, path_in(c, "mesh.msh"));
  nlohmann::json j;
  j["vertices"] = mesh.vertex_count();
  j["triangles"] = mesh.base.triangle_count();
  j["p2_nodes"] = mesh.node_count();
  j["min_area"] = rep.min_area;
  j["max_area"] = rep.max_area;
  j["min_angle_deg"] = rep.min_angle_deg;
  j["boundary_loops"] = rep.boundary_loops;
  j["edges_per_tag"] = rep.edges_per_tag;
  j["failures"] = rep.failures;
  std::ofstream out(path_in(c, "mesh_quality.json"));
  if (!out) throw IoError("cannot write mesh_quality.json");
  out << j.dump(2) << "\n";
  log_line(fmt::format("mesh: {} vertices, {} triangles, min angle {:.2f} deg", mesh.vertex_count(),
                       mesh.base.triangle_count(), rep.min_angle_deg));
  if (!rep.ok()) throw TopologyError(rep.failures.front());
}

FlowOutcome flow_for(const SimConfig& c, const P2Mesh& mesh) {
  FlowOutcome f = steady_flow(c, mesh, path_in(c, "flow.json"), log_line);
  if (!f.reports.empty()) write_csv(newton_table(f.reports), path_in(c, "newton.csv"));
  return f;
}

void cmd_flow(const SimConfig& c) {
  const P2Mesh mesh = prepare_mesh(c);
  const FlowOutcome f = flow_for(c, mesh);
  write_flow_outputs(c.output_dir, c, mesh, f.flow);
  log_line(fmt::format("flow: mass imbalance {:.3e}", mass_imbalance(mesh, f.flow)));
}

void cmd_oxidize(const SimConfig& c) {
  const P2Mesh mesh = prepare_mesh(c);
  const FlowOutcome f = flow_for(c, mesh);
  const TransportModel model(mesh, f.flow, c.kinetics.pe);
  const TransientSummary s = oxidize(c, model, c.output_dir, log_line);
  log_line(fmt::format("oxidize: {} steps, c_out({}) = {:.6g}, c in [{:.3e}, {:.9f}]", s.steps.size(),
                       s.final_state.t, s.c_out.empty() ? 0.0 : s.c_out.back(), s.c_min, s.c_max));
}

int exit_code(ErrorCategory cat) {
  switch (cat) {
    case ErrorCategory::Input: return 2;
    case ErrorCategory::Solver: return 3;
    case ErrorCategory::Io: return 4;
  }
  return 3;
}

int report(const std::string& kind, const std::string& message, int code) {
  nlohmann::json j;
  j["error"] = kind;
  j["message"] = message;
  j["exit_code"] = code;
  std::cerr << j.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flow, oxidant transport and oxide growth in tube-bundle cross-flow"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "INI configuration file");
    sub->add_option("--mesh", o.mesh, "MSH 2.2 mesh to use instead of generating one");
    sub->add_option("--out", o.out, "output directory (overrides TUBEOX_OUTPUT_DIR and the config)");
    sub->add_option("--preset", o.preset, "named parameter set, e.g. linear or parabolic-1e-6:staggered");
    sub->add_option("--threads", o.threads, "worker threads (the solvers run on one)")->check(CLI::PositiveNumber);
    sub->add_option("--seed", o.seed, "mesh generator tie-breaking seed");
  };
  auto* mesh = app.add_subcommand("mesh", "generate or read a mesh and write it with a quality report");
  auto* flow = app.add_subcommand("flow", "steady flow: Newton history, VTK, midline and vortex tables");
  auto* ox = app.add_subcommand("oxidize", "transient oxidant transport and film growth");
  auto* post = app.add_subcommand("post", "recompute analyses from stored flow and state files");
  auto* rep = app.add_subcommand("reproduce", "run the experiment behind a table or figure");
  for (auto* s : {mesh, flow, ox, post, rep}) common(s);
  rep->add_option("target", o.target, "table1, fig3 ... fig26 or all")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("UsageError", e.what(), 2);
  }

  try {
    const SimConfig c = resolve(o);
    if (o.threads > 1) log_line("note: solvers are single-threaded; --threads has no effect");
    save_effective_config(c);
    if (mesh->parsed()) cmd_mesh(c);
    if (flow->parsed()) cmd_flow(c);
    if (ox->parsed()) cmd_oxidize(c);
    if (post->parsed()) postprocess(c, c.output_dir, log_line);
    if (rep->parsed()) reproduce(o.target, c, c.output_dir, log_line);
  } catch (const Error& e) {
    return report(e.kind(), e.what(), exit_code(e.category()));
  } catch (const std::bad_alloc&) {
    return report("OutOfMemory", "allocation failed", 3);
  } catch (const std::exception& e) {
    return report("InternalError", e.what(), 3);
  }
  return 0;
}
