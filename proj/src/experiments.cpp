#include "tubeox/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>

#include <fmt/format.h>
#include <json.hpp>

#include "tubeox/errors.hpp"

namespace tubeox {

namespace fs = std::filesystem;

namespace {

void say(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::string time_label(double t) { return fmt::format("t{:g}", t); }

std::vector<std::optional<double>> opt_row(std::initializer_list<double> xs) {
  return std::vector<std::optional<double>>(xs.begin(), xs.end());
}

void write_json(const std::string& path, const nlohmann::json& j) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write to '" + path + "' failed");
}

std::vector<Vec2> vertex_velocity(const P2Mesh& mesh, const FlowField& flow) {
  const auto nn = static_cast<Eigen::Index>(mesh.node_count());
  std::vector<Vec2> u(mesh.vertex_count());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    u[i] = {flow.u[k], flow.u[nn + k]};
  }
  return u;
}

}  // namespace

// ---------------------------------------------------------------- presets

std::vector<std::string> preset_names() {
  return {"linear", "parabolic-1e-5", "parabolic-1e-6", "parabolic-1e-7", "flow-re10", "flow-re50", "flow-re150"};
}

SimConfig preset(const std::string& name) {
  std::string base = name;
  Arrangement arr = Arrangement::InLine;
  if (auto pos = name.find(':'); pos != std::string::npos) {
    base = name.substr(0, pos);
    arr = arrangement_from_string(name.substr(pos + 1));
  }
  SimConfig c;
  c.geometry.arrangement = arr;
  c.grid = GridLevel::Basic;
  c.re = 50.0;
  c.kinetics = {0.001, 0.0, 10.0};
  c.tau = 0.1;
  c.t_end = 50.0;
  c.observe.snapshot_times = {5.0, 10.0, 15.0, 50.0};
  c.observe.profile_tubes = {3};
  if (base == "linear") {
  } else if (base.rfind("parabolic-", 0) == 0) {
    const std::string sh2 = base.substr(10);
    if (sh2 == "1e-5")
      c.kinetics.sh2_inv = 1e5;
    else if (sh2 == "1e-6")
      c.kinetics.sh2_inv = 1e6;
    else if (sh2 == "1e-7")
      c.kinetics.sh2_inv = 1e7;
    else
      throw ConfigError(fmt::format("unknown preset '{}'", name));
    c.observe.snapshot_times = {10.0, 20.0, 30.0, 40.0, 50.0};
    c.observe.profile_tubes = {1, 2, 3, 4, 5};
  } else if (base == "flow-re10" || base == "flow-re50" || base == "flow-re150") {
    c.re = std::stod(base.substr(7));
    c.t_end = 0.0;
    c.observe.snapshot_times.clear();
  } else {
    throw ConfigError(fmt::format("unknown preset '{}'", name));
  }
  c.check();
  return c;
}

// ---------------------------------------------------------------- mesh and flow

P2Mesh prepare_mesh(const SimConfig& c) {
  if (!c.mesh_path.empty()) return enrich_p2(read_msh_file(c.mesh_path));
  return enrich_p2(generate_mesh(c.sized_geometry()));
}

FlowOutcome steady_flow(const SimConfig& c, const P2Mesh& mesh, const std::string& cache_path, const Logger& log) {
  FlowOutcome out;
  if (!cache_path.empty() && fs::exists(cache_path)) {
    try {
      FlowField f = load_flow(cache_path, mesh.base);
      if (f.re == c.re && static_cast<std::size_t>(f.u.size()) == 2 * mesh.node_count()) {
        say(log, fmt::format("flow: reusing {}", cache_path));
        out.flow = std::move(f);
        out.from_cache = true;
        return out;
      }
      say(log, fmt::format("flow: cache {} is for Re = {}, recomputing", cache_path, f.re));
    } catch (const IoError& e) {
      say(log, fmt::format("flow: ignoring cache ({})", e.what()));
    }
  }
  FlowProblem pb;
  pb.re = c.re;
  out.flow = continuation_solve(mesh, pb, c.solver.flow, &out.reports);
  for (const auto& r : out.reports)
    say(log, fmt::format("flow: Re = {} converged in {} iterations, relative residual {:.3e}", r.re, r.iterations(),
                         r.relative.back()));
  if (!cache_path.empty()) save_flow(cache_path, mesh.base, out.flow);
  return out;
}

CsvTable newton_table(const std::vector<NewtonReport>& reports) {
  CsvTable t{{"re", "iteration", "absolute", "relative"}, {}};
  for (const auto& r : reports)
    for (std::size_t k = 0; k < r.absolute.size(); ++k)
      t.add(opt_row({r.re, static_cast<double>(k), r.absolute[k], r.relative[k]}));
  return t;
}

void write_flow_outputs(const std::string& dir, const SimConfig& c, const P2Mesh& mesh, const FlowField& flow) {
  const Vector omega = vorticity(mesh, flow);
  const Vector psi = streamfunction(mesh, flow);
  const auto nv = static_cast<Eigen::Index>(mesh.vertex_count());
  VtkPointData data;
  data.scalars = {{"p", flow.p}, {"vorticity", omega}, {"psi", psi}, {"u1", flow.u.head(nv)}};
  data.vectors = {{"u", vertex_velocity(mesh, flow)}};
  write_vtk(mesh.base, data, join(dir, "flow.vtk"), fmt::format("steady flow Re = {}", flow.re));

  const PointLocator loc(mesh.base);
  const double w = c.geometry.strip_width;
  const int n = c.observe.midline_samples;
  std::vector<MidlineProfile> prof;
  for (const char* name : {"u1", "u2", "p"})
    prof.push_back(midline_profile(mesh, loc, flow_component(mesh, flow, name), w, n, name));
  CsvTable mid{{"x", "u1", "u2", "p"}, {}};
  for (int i = 0; i < n; ++i) mid.add({prof[0].x[i], prof[0].value[i], prof[1].value[i], prof[2].value[i]});
  write_csv(mid, join(dir, "midline.csv"));

  CsvTable vort{{"gap", "strength", "closed_contours"}, {}};
  for (int k = 1; k < mesh.base.tube_count(); ++k)
    vort.add(opt_row({static_cast<double>(k), vortex_strength(mesh, psi, k),
                      static_cast<double>(gap_extrema(mesh, psi, k).size())}));
  write_csv(vort, join(dir, "vortex.csv"));
}

// ---------------------------------------------------------------- transient

void save_state(const std::string& path, const Mesh& mesh, const OxidationState& s) {
  nlohmann::json j;
  j["format"] = "tubeox-state-1";
  j["mesh_checksum"] = mesh_checksum(mesh);
  j["t"] = s.t;
  j["c"] = std::vector<double>(s.c.data(), s.c.data() + s.c.size());
  j["d"] = std::vector<double>(s.d.data(), s.d.data() + s.d.size());
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << j.dump() << "\n";
  if (!out) throw IoError("write to '" + path + "' failed");
}

OxidationState load_state(const std::string& path, const Mesh& mesh) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open state '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(fmt::format("'{}' is not a state file: {}", path, e.what()));
  }
  if (j.value("format", "") != "tubeox-state-1") throw IoError("'" + path + "' is not a state file");
  if (j.value("mesh_checksum", "") != mesh_checksum(mesh))
    throw IoError("state '" + path + "' was computed on a different mesh");
  const auto c = j.at("c").get<std::vector<double>>();
  const auto d = j.at("d").get<std::vector<double>>();
  OxidationState s;
  s.t = j.at("t").get<double>();
  s.c = Eigen::Map<const Vector>(c.data(), static_cast<Eigen::Index>(c.size()));
  s.d = Eigen::Map<const Vector>(d.data(), static_cast<Eigen::Index>(d.size()));
  return s;
}

namespace {

void write_film(const std::string& path, const FilmProfile& f) {
  CsvTable t{{"theta", "d"}, {}};
  for (std::size_t i = 0; i < f.theta.size(); ++i) t.add(opt_row({f.theta[i], f.d[i]}));
  write_csv(t, path);
}

void write_snapshot(const std::string& dir, const SimConfig& c, const TransportModel& model, const PointLocator& loc,
                    const OxidationState& s) {
  const P2Mesh& mesh = model.mesh();
  const std::string label = time_label(s.t);
  VtkPointData data;
  data.scalars = {{"c", s.c}};
  write_vtk(mesh.base, data, join(dir, fmt::format("snapshots/c_{}.vtk", label)), fmt::format("c at t = {}", s.t));
  const MidlineProfile mid =
      midline_profile(mesh, loc, {FieldSpace::P1, s.c}, c.geometry.strip_width, c.observe.midline_samples, "c");
  CsvTable t{{"x", "c"}, {}};
  for (std::size_t i = 0; i < mid.x.size(); ++i) t.add({mid.x[i], mid.value[i]});
  write_csv(t, join(dir, fmt::format("snapshots/midline_c_{}.csv", label)));
  for (int k : c.observe.profile_tubes)
    write_film(join(dir, fmt::format("snapshots/film_tube{}_{}.csv", k, label)), film_profile(model, s, k));
}

}  // namespace

TransientSummary oxidize(const SimConfig& c, const TransportModel& model, const std::string& dir, const Logger& log) {
  TransientSummary out;
  out.cell_peclet = model.max_cell_peclet();
  if (out.cell_peclet > 1.0)
    say(log, fmt::format("warning: cell Peclet number {:.3g} exceeds 1; the unstabilized Galerkin concentration may "
                         "oscillate",
                         out.cell_peclet));
  const int n_mass = std::min(5, model.mesh().base.tube_count());
  out.c_max = -std::numeric_limits<double>::infinity();
  out.c_min = std::numeric_limits<double>::infinity();
  long index = 0;
  auto observer = [&](const OxidationState& s, const StepReport*) {
    out.c_max = std::max(out.c_max, s.c.maxCoeff());
    out.c_min = std::min(out.c_min, s.c.minCoeff());
    if (index++ % c.observe.series_every != 0) return;
    out.t.push_back(s.t);
    out.c_out.push_back(outlet_average(model.mesh(), s.c));
    std::vector<double> m;
    for (int k = 1; k <= n_mass; ++k) m.push_back(oxide_mass(model, s, k));
    out.masses.push_back(std::move(m));
  };
  TransientResult r =
      run_transient(model, c.kinetics, c.tau, c.t_end, c.observe.snapshot_times, observer, c.solver.step);
  out.steps = std::move(r.steps);
  out.snapshots = std::move(r.snapshots);
  out.final_state = std::move(r.final_state);
  if (out.c_max > 1.0 + 1e-8 || out.c_min < -1e-8)
    say(log, fmt::format("warning: concentration left [0, 1]: min {:.3e}, max {:.9f}", out.c_min, out.c_max));
  if (dir.empty()) return out;

  CsvTable cout_t{{"t", "c_out"}, {}};
  for (std::size_t i = 0; i < out.t.size(); ++i) cout_t.add(opt_row({out.t[i], out.c_out[i]}));
  write_csv(cout_t, join(dir, "c_out.csv"));

  CsvTable mass{{"t"}, {}};
  for (int k = 1; k <= n_mass; ++k) mass.header.push_back(fmt::format("m{}", k));
  for (std::size_t i = 0; i < out.t.size(); ++i) {
    std::vector<std::optional<double>> row{out.t[i]};
    for (double m : out.masses[i]) row.push_back(m);
    mass.add(std::move(row));
  }
  write_csv(mass, join(dir, "mass.csv"));

  CsvTable steps{{"step", "t", "iterations", "residual"}, {}};
  for (const auto& s : out.steps)
    steps.add(opt_row({static_cast<double>(s.step), s.step * c.tau, static_cast<double>(s.iterations),
                       s.residuals.empty() ? 0.0 : s.residuals.back()}));
  write_csv(steps, join(dir, "steps.csv"));

  const PointLocator loc(model.mesh().base);
  for (const auto& s : out.snapshots) write_snapshot(dir, c, model, loc, s);
  save_state(join(dir, "state.json"), model.mesh().base, out.final_state);

  std::map<int, int> hist;
  for (const auto& s : out.steps) hist[s.iterations]++;
  nlohmann::json j;
  j["steps"] = out.steps.size();
  j["c_max"] = out.c_max;
  j["c_min"] = out.c_min;
  j["cell_peclet"] = out.cell_peclet;
  j["c_out_final"] = out.c_out.empty() ? 0.0 : out.c_out.back();
  j["d_max_final"] = out.final_state.d.size() ? out.final_state.d.maxCoeff() : 0.0;
  for (const auto& [k, n] : hist) j["newton_iterations"][std::to_string(k)] = n;
  write_json(join(dir, "summary.json"), j);
  return out;
}

// ---------------------------------------------------------------- post

void postprocess(const SimConfig& c, const std::string& dir, const Logger& log) {
  const P2Mesh mesh = prepare_mesh(c);
  const FlowField flow = load_flow(join(dir, "flow.json"), mesh.base);
  write_flow_outputs(join(dir, "post"), c, mesh, flow);
  say(log, "post: flow analyses written");
  const std::string state_path = join(dir, "state.json");
  if (!fs::exists(state_path)) return;
  const OxidationState s = load_state(state_path, mesh.base);
  const TransportModel model(mesh, flow, c.kinetics.pe);
  if (s.d.size() != static_cast<Eigen::Index>(model.film_dofs()) ||
      s.c.size() != static_cast<Eigen::Index>(model.concentration_dofs()))
    throw IoError("state '" + state_path + "' does not match the mesh");
  const PointLocator loc(mesh.base);
  write_snapshot(join(dir, "post"), c, model, loc, s);
  CsvTable t{{"tube", "mass"}, {}};
  for (int k = 1; k <= mesh.base.tube_count(); ++k) t.add(opt_row({static_cast<double>(k), oxide_mass(model, s, k)}));
  write_csv(t, join(dir, "post/mass_final.csv"));
  say(log, fmt::format("post: state at t = {} analysed, c_out = {:.6g}", s.t, outlet_average(mesh, s.c)));
}

// ---------------------------------------------------------------- reproduce

namespace {

class Reproducer {
 public:
  Reproducer(const SimConfig& base, std::string dir, Logger log) : base_(base), dir_(std::move(dir)), log_(std::move(log)) {}

  void run(const std::string& target);

 private:
  SimConfig config(Arrangement arr, GridLevel level, double re) const {
    SimConfig c = base_;
    c.mesh_path.clear();
    c.geometry.arrangement = arr;
    c.grid = level;
    c.re = re;
    return c;
  }

  const P2Mesh& mesh(Arrangement arr, GridLevel level) {
    const std::string key = to_string(arr) + "-" + to_string(level);
    auto it = meshes_.find(key);
    if (it == meshes_.end()) {
      say(log_, fmt::format("mesh: generating {} grid", key));
      it = meshes_.emplace(key, prepare_mesh(config(arr, level, 1.0))).first;
    }
    return it->second;
  }

  const FlowField& flow(Arrangement arr, GridLevel level, double re) {
    const std::string key = fmt::format("{}-{}-re{:g}", to_string(arr), to_string(level), re);
    auto it = flows_.find(key);
    if (it == flows_.end()) {
      const P2Mesh& m = mesh(arr, level);
      say(log_, fmt::format("flow: {}", key));
      FlowOutcome f = steady_flow(config(arr, level, re), m, join(dir_, "cache/flow_" + key + ".json"), log_);
      it = flows_.emplace(key, std::move(f.flow)).first;
    }
    return it->second;
  }

  TransientSummary transient(const SimConfig& c, const std::string& sub) {
    const FlowField& f = flow(c.geometry.arrangement, *c.grid, c.re);
    const TransportModel model(mesh(c.geometry.arrangement, *c.grid), f, c.kinetics.pe);
    say(log_, fmt::format("oxidize: {} (Pe = {}, Sh1 = {}, sh2_inv = {}, tau = {}, T = {})", sub, c.kinetics.pe,
                          c.kinetics.sh1, c.kinetics.sh2_inv, c.tau, c.t_end));
    return oxidize(c, model, sub.empty() ? "" : join(dir_, sub), log_);
  }

  SimConfig transport_config(Arrangement arr) const {
    SimConfig c = preset("linear");
    c.geometry = base_.geometry;
    c.geometry.arrangement = arr;
    c.solver = base_.solver;
    c.observe.midline_samples = base_.observe.midline_samples;
    return c;
  }

  void table1();
  void grids(Arrangement arr, const std::string& id);
  void fields(Arrangement arr, const std::string& id);
  void grid_deviation(Arrangement arr, const std::string& id);
  void midlines(Arrangement arr, const std::string& id);
  void streamlines(Arrangement arr, const std::string& id);
  void concentration(Arrangement arr, const std::string& id);
  void time_deviation(Arrangement arr, const std::string& id);
  void sweep(const std::string& id, const std::string& what, const std::vector<double>& values);
  void film(const std::string& id);
  void parabolic(const std::string& id, double sh2_inv);

  SimConfig base_;
  std::string dir_;
  Logger log_;
  std::map<std::string, P2Mesh> meshes_;
  std::map<std::string, FlowField> flows_;
};

constexpr Arrangement kBoth[] = {Arrangement::InLine, Arrangement::Staggered};

void Reproducer::table1() {
  CsvTable t{{"configuration", "re", "iteration", "absolute", "relative", "converged"}, {}};
  for (Arrangement arr : kBoth) {
    const P2Mesh& m = mesh(arr, GridLevel::Basic);
    for (double re : {10.0, 50.0, 150.0}) {
      FlowProblem pb;
      pb.re = re;
      const FlowSystem sys(m, pb);
      const FlowField stokes = solve_stokes(sys);
      std::vector<double> abs_res;
      bool converged = true;
      try {
        abs_res = newton_solve(sys, stokes, base_.solver.flow).second.absolute;
      } catch (const NonConvergenceError& e) {
        abs_res = e.residuals();
        converged = false;
      }
      say(log_, fmt::format("table1: {} Re = {}: {} iterations{}", to_string(arr), re, abs_res.size() - 1,
                            converged ? "" : " (not converged)"));
      for (std::size_t k = 0; k < abs_res.size(); ++k)
        t.add(to_string(arr), opt_row({re, static_cast<double>(k), abs_res[k], abs_res[k] / abs_res[0],
                                       converged ? 1.0 : 0.0}));
    }
  }
  write_csv(t, join(dir_, "table1/table1.csv"));
}

void Reproducer::grids(Arrangement arr, const std::string& id) {
  CsvTable t{{"level", "vertices", "triangles", "min_angle_deg"}, {}};
  for (GridLevel level : {GridLevel::Coarse, GridLevel::Basic, GridLevel::Fine}) {
    const P2Mesh& m = mesh(arr, level);
    const ValidationReport rep = validate(m.base);
    write_msh(m.base, join(dir_, fmt::format("{}/{}.msh", id, to_string(level))));
    t.add(to_string(level), opt_row({static_cast<double>(m.vertex_count()),
                                     static_cast<double>(m.base.triangle_count()), rep.min_angle_deg}));
  }
  write_csv(t, join(dir_, id + "/grids.csv"));
}

void Reproducer::fields(Arrangement arr, const std::string& id) {
  write_flow_outputs(join(dir_, id), config(arr, GridLevel::Basic, 10.0), mesh(arr, GridLevel::Basic),
                     flow(arr, GridLevel::Basic, 10.0));
}

void Reproducer::grid_deviation(Arrangement arr, const std::string& id) {
  const int n = base_.observe.midline_samples;
  const double w = base_.geometry.strip_width;
  CsvTable summary{{"field", "max_dev_basic", "max_dev_coarse"}, {}};
  for (const char* name : {"u1", "u2", "p"}) {
    std::map<GridLevel, MidlineProfile> prof;
    for (GridLevel level : {GridLevel::Fine, GridLevel::Basic, GridLevel::Coarse}) {
      const P2Mesh& m = mesh(arr, level);
      prof[level] = midline_profile(m, flow_component(m, flow(arr, level, 10.0), name), w, n, name);
    }
    const auto dev = deviation_curves(prof[GridLevel::Fine], {prof[GridLevel::Basic], prof[GridLevel::Coarse]});
    CsvTable t{{"x", "fine", "dev_basic", "dev_coarse"}, {}};
    for (int i = 0; i < n; ++i)
      t.add({prof[GridLevel::Fine].x[i], prof[GridLevel::Fine].value[i], dev[0].value[i], dev[1].value[i]});
    write_csv(t, join(dir_, fmt::format("{}/midline_{}.csv", id, name)));
    summary.add(name, {dev[0].max_abs, dev[1].max_abs});
    say(log_, fmt::format("{}: {} max deviation basic {:.4g}, coarse {:.4g}", id, name, dev[0].max_abs, dev[1].max_abs));
  }
  write_csv(summary, join(dir_, id + "/summary.csv"));
}

void Reproducer::midlines(Arrangement arr, const std::string& id) {
  const int n = base_.observe.midline_samples;
  const P2Mesh& m = mesh(arr, GridLevel::Basic);
  const PointLocator loc(m.base);
  CsvTable t{{"x"}, {}};
  std::vector<MidlineProfile> cols;
  for (double re : {10.0, 50.0, 150.0})
    for (const char* name : {"u1", "u2", "p"}) {
      t.header.push_back(fmt::format("{}_re{:g}", name, re));
      cols.push_back(midline_profile(m, loc, flow_component(m, flow(arr, GridLevel::Basic, re), name),
                                     base_.geometry.strip_width, n, name));
    }
  for (int i = 0; i < n; ++i) {
    std::vector<std::optional<double>> row{cols[0].x[i]};
    for (const auto& c : cols) row.push_back(c.value[i]);
    t.add(std::move(row));
  }
  write_csv(t, join(dir_, id + "/midline.csv"));
}

void Reproducer::streamlines(Arrangement arr, const std::string& id) {
  const P2Mesh& m = mesh(arr, GridLevel::Basic);
  CsvTable t{{"re", "gap", "strength", "closed_contours"}, {}};
  for (double re : {10.0, 50.0, 150.0}) {
    const FlowField& f = flow(arr, GridLevel::Basic, re);
    const Vector psi = streamfunction(m, f);
    VtkPointData data;
    data.scalars = {{"psi", psi}};
    data.vectors = {{"u", vertex_velocity(m, f)}};
    write_vtk(m.base, data, join(dir_, fmt::format("{}/psi_re{:g}.vtk", id, re)), "streamfunction");
    for (int k = 1; k < m.base.tube_count(); ++k)
      t.add(opt_row({re, static_cast<double>(k), vortex_strength(m, psi, k),
                     static_cast<double>(gap_extrema(m, psi, k).size())}));
  }
  write_csv(t, join(dir_, id + "/vortex.csv"));
}

void Reproducer::concentration(Arrangement arr, const std::string& id) {
  SimConfig c = transport_config(arr);
  c.t_end = 15.0;
  c.observe.snapshot_times = {5.0, 10.0, 15.0};
  transient(c, id);
}

void Reproducer::time_deviation(Arrangement arr, const std::string& id) {
  const std::vector<double> taus{0.05, 0.1, 0.2};
  const std::vector<double> times{5.0, 10.0, 15.0};
  std::vector<TransientSummary> runs;
  for (double tau : taus) {
    SimConfig c = transport_config(arr);
    c.tau = tau;
    c.t_end = 15.0;
    c.observe.snapshot_times = times;
    runs.push_back(transient(c, ""));
  }
  const P2Mesh& m = mesh(arr, GridLevel::Basic);
  const PointLocator loc(m.base);
  const int n = base_.observe.midline_samples;
  for (std::size_t s = 0; s < times.size(); ++s) {
    std::vector<MidlineProfile> prof;
    for (const auto& r : runs)
      prof.push_back(midline_profile(m, loc, {FieldSpace::P1, r.snapshots[s].c}, base_.geometry.strip_width, n, "c"));
    const auto dev = deviation_curves(prof[0], {prof[1], prof[2]});
    CsvTable t{{"x", "c_tau0.05", "dev_tau0.1", "dev_tau0.2"}, {}};
    for (int i = 0; i < n; ++i) t.add({prof[0].x[i], prof[0].value[i], dev[0].value[i], dev[1].value[i]});
    write_csv(t, join(dir_, fmt::format("{}/midline_c_{}.csv", id, time_label(times[s]))));
    say(log_, fmt::format("{}: t = {} max deviation tau 0.1: {:.4g}, tau 0.2: {:.4g}", id, times[s], dev[0].max_abs,
                          dev[1].max_abs));
  }
}

void Reproducer::sweep(const std::string& id, const std::string& what, const std::vector<double>& values) {
  for (Arrangement arr : kBoth) {
    CsvTable t{{"t"}, {}};
    std::vector<TransientSummary> runs;
    for (double v : values) {
      SimConfig c = transport_config(arr);
      c.observe.snapshot_times.clear();
      if (what == "pe")
        c.kinetics.pe = v;
      else
        c.kinetics.sh1 = v;
      t.header.push_back(fmt::format("c_out_{}{:g}", what, v));
      runs.push_back(transient(c, ""));
    }
    for (std::size_t i = 0; i < runs[0].t.size(); ++i) {
      std::vector<std::optional<double>> row{runs[0].t[i]};
      for (const auto& r : runs) row.push_back(r.c_out[i]);
      t.add(std::move(row));
    }
    write_csv(t, join(dir_, fmt::format("{}/c_out_{}.csv", id, to_string(arr))));
  }
}

void Reproducer::film(const std::string& id) {
  for (Arrangement arr : kBoth) transient(transport_config(arr), id + "/" + to_string(arr));
}

void Reproducer::parabolic(const std::string& id, double sh2_inv) {
  for (Arrangement arr : kBoth) {
    SimConfig c = transport_config(arr);
    c.kinetics.sh2_inv = sh2_inv;
    c.observe.snapshot_times = {10.0, 20.0, 30.0, 40.0, 50.0};
    c.observe.profile_tubes = {1, 2, 3, 4, 5};
    transient(c, id + "/" + to_string(arr));
  }
}

void Reproducer::run(const std::string& target) {
  const auto in = Arrangement::InLine;
  const auto st = Arrangement::Staggered;
  if (target == "table1") return table1();
  if (target == "fig3") return grids(in, target);
  if (target == "fig4") return grids(st, target);
  if (target == "fig5") return fields(in, target);
  if (target == "fig6") return fields(st, target);
  if (target == "fig7") return grid_deviation(in, target);
  if (target == "fig8") return grid_deviation(st, target);
  if (target == "fig9") return midlines(in, target);
  if (target == "fig10") return midlines(st, target);
  if (target == "fig11") return streamlines(in, target);
  if (target == "fig12") return streamlines(st, target);
  if (target == "fig13") return concentration(in, target);
  if (target == "fig14") return concentration(st, target);
  if (target == "fig15") return time_deviation(in, target);
  if (target == "fig16") return time_deviation(st, target);
  if (target == "fig17") return sweep(target, "pe", {1.0, 10.0, 100.0});
  if (target == "fig18") return sweep(target, "sh1", {0.001, 0.01, 0.1});
  if (target == "fig20") return film(target);
  if (target == "fig21" || target == "fig24") return parabolic(target, 1e5);
  if (target == "fig22" || target == "fig25") return parabolic(target, 1e6);
  if (target == "fig23" || target == "fig26") return parabolic(target, 1e7);
  if (target == "all") {
    for (const auto& t : reproduce_targets())
      if (t != "all") run(t);
    return;
  }
  throw ConfigError(fmt::format("unknown reproduce target '{}'", target));
}

}  // namespace

std::vector<std::string> reproduce_targets() {
  return {"table1", "fig3",  "fig4",  "fig5",  "fig6",  "fig7",  "fig8",  "fig9",  "fig10", "fig11", "fig12", "fig13",
          "fig14",  "fig15", "fig16", "fig17", "fig18", "fig20", "fig21", "fig22", "fig23", "fig24", "fig25", "fig26",
          "all"};
}

void reproduce(const std::string& target, const SimConfig& base, const std::string& dir, const Logger& log) {
  Reproducer(base, dir, log).run(target);
}

}  // namespace tubeox
