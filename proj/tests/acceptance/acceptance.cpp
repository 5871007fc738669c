// Acceptance run: one PASS/FAIL line per criterion on stdout, progress on
// stderr. Optional arguments select criteria by number.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "support/verification.hpp"
#include "tubeox/config.hpp"
#include "tubeox/errors.hpp"
#include "tubeox/experiments.hpp"
#include "tubeox/flow.hpp"
#include "tubeox/oxidation.hpp"
#include "tubeox/postproc.hpp"
#include "unit/fixtures.hpp"

using namespace tubeox;

namespace {

const auto t0 = std::chrono::steady_clock::now();

void note(const std::string& s) {
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  fmt::print(stderr, "[{:7.1f}s] {}\n", dt, s);
}

struct Result {
  bool pass = false;
  std::string detail;
};

std::string name(Arrangement a) { return to_string(a); }

// Meshes, flows and transient runs shared between criteria.
class Lab {
 public:
  const P2Mesh& mesh(Arrangement a, GridLevel l) {
    const std::string key = name(a) + "/" + to_string(l);
    auto& slot = meshes_[key];
    if (!slot) {
      SimConfig c;
      c.geometry.arrangement = a;
      c.grid = l;
      slot = std::make_unique<P2Mesh>(prepare_mesh(c));
      note(fmt::format("mesh {}: {} vertices, {} triangles", key, slot->vertex_count(), slot->base.triangle_count()));
    }
    return *slot;
  }

  // Same ladder as continuation_solve, with every rung kept.
  const FlowField& flow(Arrangement a, GridLevel l, double re) {
    const std::string key = fmt::format("{}/{}/Re{}", name(a), to_string(l), re);
    if (auto it = flows_.find(key); it != flows_.end()) return it->second;
    const P2Mesh& m = mesh(a, l);
    std::optional<double> rung;
    for (double r : {10.0, 50.0})
      if (r < re) rung = r;
    FlowProblem p;
    p.re = re;
    const FlowSystem sys(m, p);
    const FlowField start = rung ? flow(a, l, *rung) : solve_stokes(sys);
    auto [f, rep] = newton_solve(sys, start);
    note(fmt::format("flow {}: {} Newton iterations, relative residual {:.2e}", key, rep.iterations(),
                     rep.relative.back()));
    return remember(key, m, std::move(f));
  }

  const FlowField& remember(const std::string& key, const P2Mesh& m, FlowField f) {
    auto [it, fresh] = flows_.emplace(key, std::move(f));
    if (fresh) flow_mesh_[key] = &m;
    return it->second;
  }

  struct Run {
    SimConfig config;
    std::unique_ptr<TransportModel> model;
    TransientSummary summary;
  };

  // Basic-grid transient for a named preset.
  const Run& transient(const std::string& preset_name) {
    auto& slot = runs_[preset_name];
    if (!slot) {
      auto r = std::make_unique<Run>();
      r->config = preset(preset_name);
      const Arrangement a = r->config.geometry.arrangement;
      const P2Mesh& m = mesh(a, GridLevel::Basic);
      const FlowField& f = flow(a, GridLevel::Basic, r->config.re);
      r->model = std::make_unique<TransportModel>(m, f, r->config.kinetics.pe);
      const auto start = std::chrono::steady_clock::now();
      r->summary = oxidize(r->config, *r->model, "");
      note(fmt::format("transient {}: {} steps in {:.1f}s, c in [{:.3e}, {:.12f}]", preset_name,
                       r->summary.steps.size(),
                       std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(),
                       r->summary.c_min, r->summary.c_max));
      slot = std::move(r);
    }
    return *slot;
  }

  std::vector<std::pair<std::string, std::pair<const P2Mesh*, const FlowField*>>> all_flows() const {
    std::vector<std::pair<std::string, std::pair<const P2Mesh*, const FlowField*>>> out;
    for (const auto& [k, f] : flows_) out.push_back({k, {flow_mesh_.at(k), &f}});
    return out;
  }

 private:
  std::map<std::string, std::unique_ptr<P2Mesh>> meshes_;
  std::map<std::string, FlowField> flows_;
  std::map<std::string, const P2Mesh*> flow_mesh_;
  std::map<std::string, std::unique_ptr<Run>> runs_;
};

Lab lab;

// Relative residual reached by one more Newton step from a converged field.
double roundoff_floor(const FlowSystem& sys, const FlowField& converged, double r0) {
  FlowOptions o;
  o.rtol = 0;
  o.atol = 0;
  o.max_iterations = 1;
  try {
    const auto [f, rep] = newton_solve(sys, converged, o);
    return *std::min_element(rep.absolute.begin(), rep.absolute.end()) / r0;
  } catch (const NonConvergenceError& e) {
    return *std::min_element(e.residuals().begin(), e.residuals().end()) / r0;
  }
}

// Quadratic tail: over the last two Newton steps each relative residual is
// at most 10 times the square of the previous one. A step that lands within
// 10x of the round-off floor has nothing left to square.
bool quadratic_tail(const std::vector<double>& r, double floor) {
  const std::size_t n = r.size();
  if (n < 3) return false;
  for (std::size_t k = n - 2; k + 1 < n; ++k)
    if (r[k + 1] > 10 * r[k] * r[k] && r[k + 1] > 10 * floor) return false;
  return true;
}

std::string residuals(const std::vector<double>& r) {
  std::vector<std::string> s;
  for (double v : r) s.push_back(fmt::format("{:.2e}", v));
  return fmt::format("{}", fmt::join(s, " "));
}

Result newton_convergence() {
  const P2Mesh& m = lab.mesh(Arrangement::InLine, GridLevel::Basic);
  Result out{true, ""};
  for (auto [re, limit] : {std::pair{10.0, 6}, std::pair{50.0, 8}}) {
    FlowProblem p;
    p.re = re;
    const FlowSystem sys(m, p);
    auto [f, rep] = newton_solve(sys, solve_stokes(sys));
    const double floor = roundoff_floor(sys, f, rep.absolute.front());
    const bool quadratic = quadratic_tail(rep.relative, floor);
    const bool monotone = std::is_sorted(rep.relative.rbegin(), rep.relative.rend());
    const bool ok = rep.converged && rep.relative.back() <= 1e-10 && rep.iterations() <= limit && quadratic &&
                    monotone;
    note(fmt::format("criterion 1: Re = {} relative residuals {}", re, residuals(rep.relative)));
    out.pass = out.pass && ok;
    out.detail += fmt::format("{}Re={}: {} it (limit {}), residuals {}, round-off floor {:.1e}, quadratic tail {}",
                              out.detail.empty() ? "" : "; ", re, rep.iterations(), limit, residuals(rep.relative),
                              floor, quadratic ? "yes" : "no");
    // At Re = 10 this is also the first continuation rung.
    const std::string key = fmt::format("{}/basic/Re{}", name(Arrangement::InLine), re);
    lab.remember(re == 10.0 ? key : key + "/stokes-start", m, std::move(f));
  }
  return out;
}

MidlineProfile midline(Arrangement a, GridLevel l, const FlowField& f, const std::string& field) {
  const P2Mesh& m = lab.mesh(a, l);
  return midline_profile(m, flow_component(m, f, field), BundleGeometry{}.strip_width, 600, field);
}

Result grid_independence() {
  Result out{true, ""};
  for (Arrangement a : {Arrangement::InLine, Arrangement::Staggered}) {
    const FlowField& fine = lab.flow(a, GridLevel::Fine, 10.0);
    const FlowField& basic = lab.flow(a, GridLevel::Basic, 10.0);
    const FlowField& coarse = lab.flow(a, GridLevel::Coarse, 10.0);
    for (const std::string field : {"u1", "u2", "p"}) {
      const MidlineProfile ref = midline(a, GridLevel::Fine, fine, field);
      const auto dev = deviation_curves(ref, {midline(a, GridLevel::Coarse, coarse, field),
                                              midline(a, GridLevel::Basic, basic, field)});
      const bool ok = dev[1].max_abs < dev[0].max_abs;
      out.pass = out.pass && ok;
      out.detail += fmt::format("{}{} {}: coarse {:.3f} basic {:.3f}", out.detail.empty() ? "" : "; ", name(a), field,
                                dev[0].max_abs, dev[1].max_abs);
    }
  }
  return out;
}

Result stokes_consistency() {
  const P2Mesh& m = lab.mesh(Arrangement::InLine, GridLevel::Basic);
  const FlowField& newton = lab.flow(Arrangement::InLine, GridLevel::Basic, 0.1);
  FlowProblem p;
  p.re = 0.1;
  const FlowField stokes = solve_stokes(FlowSystem(m, p));
  const MidlineProfile a = midline(Arrangement::InLine, GridLevel::Basic, newton, "u1");
  const MidlineProfile b = midline(Arrangement::InLine, GridLevel::Basic, stokes, "u1");
  double diff = 0, scale = 0;
  for (std::size_t i = 0; i < a.x.size(); ++i) {
    if (!a.value[i] || !b.value[i]) continue;
    diff = std::max(diff, std::abs(*a.value[i] - *b.value[i]));
    scale = std::max(scale, std::abs(*b.value[i]));
  }
  const double rel = diff / scale;
  return {rel <= 0.02, fmt::format("midline u1 relative Linf difference {:.3e} (limit 0.02)", rel)};
}

Result mass_conservation() {
  if (lab.all_flows().empty()) lab.flow(Arrangement::InLine, GridLevel::Basic, 10.0);
  double worst = 0;
  std::string where;
  const auto flows = lab.all_flows();
  for (const auto& [key, mf] : flows) {
    const double e = mass_imbalance(*mf.first, *mf.second);
    if (e >= worst) {
      worst = e;
      where = key;
    }
  }
  return {worst <= 1e-8, fmt::format("{} flows, worst imbalance {:.2e} ({})", flows.size(), worst, where)};
}

Result recirculation() {
  const P2Mesh& m = lab.mesh(Arrangement::InLine, GridLevel::Basic);
  const Vector psi150 = streamfunction(m, lab.flow(Arrangement::InLine, GridLevel::Basic, 150.0));
  const Vector psi10 = streamfunction(m, lab.flow(Arrangement::InLine, GridLevel::Basic, 10.0));
  const int gaps = BundleGeometry{}.n_tubes - 1;
  int closed = 0, closed10 = 0;
  double s150 = 0, s10 = 0;
  for (int k = 1; k <= gaps; ++k) {
    if (!gap_extrema(m, psi150, k).empty()) ++closed;
    if (!gap_extrema(m, psi10, k).empty()) ++closed10;
    s150 = std::max(s150, vortex_strength(m, psi150, k));
    s10 = std::max(s10, vortex_strength(m, psi10, k));
  }
  const bool ok = closed == gaps && s150 >= 2 * s10 && s150 > 0;
  return {ok, fmt::format("Re=150: interior psi extremum in {}/{} gaps, vortex strength {:.3e}; Re=10: {} gaps, "
                          "strength {:.3e}",
                          closed, gaps, s150, closed10, s10)};
}

Result kinetics_oracles() {
  const P2Mesh wedge = enrich_p2(fixtures::frozen_wedge());
  FlowField rest;
  rest.u = Vector::Zero(static_cast<Eigen::Index>(2 * wedge.node_count()));
  rest.p = Vector::Zero(3);
  const TransportModel model(wedge, rest, 10.0);

  KineticsParams lin;
  lin.sh1 = 0.001;
  const auto r = run_transient(model, lin, 0.1, 50.0);
  const double err_a = (r.final_state.d.array() - 0.05).abs().maxCoeff();

  KineticsParams mixed = lin;
  mixed.sh2_inv = 1e5;
  const double t_end = 50.0;
  const double b = 1.0 / mixed.sh1;
  const double exact = 2 * t_end / (b + std::sqrt(b * b + 2 * mixed.sh2_inv * t_end));
  std::vector<double> err;
  for (double tau : {0.2, 0.1, 0.05}) {
    const auto s = run_transient(model, mixed, tau, t_end);
    err.push_back((s.final_state.d.array() - exact).abs().maxCoeff());
  }
  const bool ok = err_a <= 1e-12 && err[0] / err[1] >= 3.5 && err[1] / err[2] >= 3.5;
  return {ok, fmt::format("linear |d - 0.05| = {:.1e}; mixed d = {:.6e}, errors {:.2e} {:.2e} {:.2e}, ratios {:.2f} "
                          "{:.2f}",
                          err_a, exact, err[0], err[1], err[2], err[0] / err[1], err[1] / err[2])};
}

Result temporal_order() {
  SimConfig c = preset("linear");
  const P2Mesh& m = lab.mesh(Arrangement::InLine, GridLevel::Basic);
  const TransportModel model(m, lab.flow(Arrangement::InLine, GridLevel::Basic, c.re), c.kinetics.pe);
  auto profile = [&](double tau) {
    const auto r = run_transient(model, c.kinetics, tau, 5.0, {5.0});
    return midline_profile(m, {FieldSpace::P1, r.snapshots.at(0).c}, c.geometry.strip_width);
  };
  const MidlineProfile ref = profile(0.025);
  const double e2 = profile_l2_distance(profile(0.2), ref);
  const double e1 = profile_l2_distance(profile(0.1), ref);
  const double order = std::log2(e2 / e1);
  return {order >= 1.8 && e1 < e2,
          fmt::format("midline L2 error tau=0.2 {:.3e}, tau=0.1 {:.3e}, order {:.2f}", e2, e1, order)};
}

const std::vector<std::string> kSh2Presets = {"parabolic-1e-5", "parabolic-1e-6", "parabolic-1e-7"};

Result newton_cost() {
  Result out{true, ""};
  std::vector<std::string> names = {"linear", "linear:staggered"};
  names.insert(names.end(), kSh2Presets.begin(), kSh2Presets.end());
  for (const auto& n : names) {
    const auto& steps = lab.transient(n).summary.steps;
    const auto cheap = std::count_if(steps.begin(), steps.end(), [](const StepReport& s) { return s.iterations <= 3; });
    int worst = 0;
    for (const auto& s : steps) worst = std::max(worst, s.iterations);
    const double frac = static_cast<double>(cheap) / static_cast<double>(steps.size());
    out.pass = out.pass && frac >= 0.95;
    out.detail += fmt::format("{}{}: {:.1f}% <= 3 (max {})", out.detail.empty() ? "" : "; ", n, 100 * frac, worst);
  }
  return out;
}

Result film_shape() {
  Result out{true, ""};
  for (const std::string n : {"linear", "linear:staggered"}) {
    const auto& run = lab.transient(n);
    const FilmProfile f = film_profile(*run.model, run.summary.final_state, 3);
    const auto imax = static_cast<std::size_t>(std::max_element(f.d.begin(), f.d.end()) - f.d.begin());
    const double arg = f.theta[imax];
    bool ok = f.d.front() > f.d.back();
    if (run.config.geometry.arrangement == Arrangement::Staggered)
      ok = ok && imax == 0;
    else
      ok = ok && arg > std::numbers::pi / 4 && arg < 3 * std::numbers::pi / 4;
    out.pass = out.pass && ok;
    out.detail += fmt::format("{}{}: d(0) {:.4e} d(pi) {:.4e} argmax {:.3f} rad", out.detail.empty() ? "" : "; ", n,
                              f.d.front(), f.d.back(), arg);
  }
  return out;
}

Result sh2_monotonicity() {
  std::vector<const Lab::Run*> runs;
  for (const auto& n : kSh2Presets) runs.push_back(&lab.transient(n));
  int pointwise_bad = 0, mass_order_bad = 0, mass_drop = 0;
  double last_bad_t = -1, worst_rel = 0;
  std::set<int> bad_tubes;
  std::size_t compared = 0;
  for (std::size_t i = 0; i + 1 < runs.size(); ++i) {
    const auto& a = runs[i]->summary;
    const auto& b = runs[i + 1]->summary;
    for (std::size_t s = 0; s < a.snapshots.size(); ++s) {
      const Vector& da = a.snapshots[s].d;
      const Vector& db = b.snapshots[s].d;
      for (Eigen::Index j = 0; j < da.size(); ++j, ++compared)
        if (da[j] < db[j]) ++pointwise_bad;
    }
    for (std::size_t t = 0; t < a.masses.size(); ++t)
      for (std::size_t k = 0; k < a.masses[t].size(); ++k)
        if (a.masses[t][k] < b.masses[t][k]) {
          ++mass_order_bad;
          last_bad_t = std::max(last_bad_t, a.t[t]);
          worst_rel = std::max(worst_rel, (b.masses[t][k] - a.masses[t][k]) / b.masses[t][k]);
          bad_tubes.insert(static_cast<int>(k) + 1);
        }
  }
  for (const auto* r : runs)
    for (std::size_t t = 1; t < r->summary.masses.size(); ++t)
      for (std::size_t k = 0; k < r->summary.masses[t].size(); ++k)
        if (r->summary.masses[t][k] < r->summary.masses[t - 1][k]) ++mass_drop;
  std::vector<std::string> m5;
  for (const auto* r : runs) m5.push_back(fmt::format("{:.4e}", r->summary.masses.back().at(4)));
  return {pointwise_bad == 0 && mass_order_bad == 0 && mass_drop == 0,
          fmt::format("{} pointwise comparisons, {} out of order; mass ordering violations {} (tubes {}, last at t = {}, "
                      "largest relative {:.2e}); mass decreases {}; m5(50) = {}",
                      compared, pointwise_bad, mass_order_bad, fmt::join(bad_tubes, ","), last_bad_t, worst_rel,
                      mass_drop, fmt::join(m5, " >= "))};
}

Result fem_verification() {
  const auto s8 = verification::stokes_mms(8), s16 = verification::stokes_mms(16), s32 = verification::stokes_mms(32);
  const double u1 = verification::order(s8.u_l2, s16.u_l2), u2 = verification::order(s16.u_l2, s32.u_l2);
  const double p1 = verification::order(s8.p_l2, s16.p_l2), p2 = verification::order(s16.p_l2, s32.p_l2);
  const double c16 = verification::convdiff_robin_mms(16), c32 = verification::convdiff_robin_mms(32),
               c64 = verification::convdiff_robin_mms(64);
  const double c1 = verification::order(c16, c32), c2 = verification::order(c32, c64);
  const bool ok = std::min(u1, u2) >= 2.7 && std::min(p1, p2) >= 1.8 && std::min(c1, c2) >= 1.9;
  return {ok, fmt::format("Stokes u orders {:.3f} {:.3f}, p orders {:.3f} {:.3f}; convection-diffusion c orders "
                          "{:.3f} {:.3f}",
                          u1, u2, p1, p2, c1, c2)};
}

Result concentration_bounds() {
  const auto& s = lab.transient("linear").summary;
  return {s.c_min >= -1e-8 && s.c_max <= 1 + 1e-8,
          fmt::format("c in [{:.3e}, 1 + {:.3e}] over {} steps", s.c_min, s.c_max - 1, s.steps.size())};
}

struct Criterion {
  int id;
  const char* title;
  std::function<Result()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "Newton convergence from a Stokes start", newton_convergence},
      {2, "grid-independence ordering", grid_independence},
      {3, "Stokes consistency at Re = 0.1", stokes_consistency},
      {5, "recirculation topology", recirculation},
      {6, "kinetics oracles", kinetics_oracles},
      {7, "temporal order", temporal_order},
      {8, "per-step Newton cost", newton_cost},
      {9, "film-profile shape", film_shape},
      {10, "Sh2 monotonicity", sh2_monotonicity},
      {11, "manufactured-solution convergence", fem_verification},
      {12, "concentration bounds", concentration_bounds},
      // Last, so it sees every flow computed above.
      {4, "mass conservation", mass_conservation},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::stoi(argv[i]));

  std::map<int, std::string> lines;
  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    note(fmt::format("criterion {}: {}", c.id, c.title));
    Result r;
    try {
      r = c.run();
    } catch (const std::exception& e) {
      r = {false, fmt::format("exception: {}", e.what())};
    }
    if (!r.pass) ++failed;
    lines[c.id] = fmt::format("{} criterion {:2d} ({}): {}", r.pass ? "PASS" : "FAIL", c.id, c.title, r.detail);
    note(lines[c.id]);
  }
  for (const auto& [id, line] : lines) fmt::print("{}\n", line);
  std::fflush(stdout);
  return failed == 0 ? 0 : 1;
}
