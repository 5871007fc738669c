#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "tubeox/config.hpp"
#include "tubeox/errors.hpp"
#include "tubeox/experiments.hpp"
#include "tubeox/io.hpp"

using namespace tubeox;
namespace fs = std::filesystem;

namespace {

SimConfig parse(const std::string& text, SimConfig base = {}) {
  std::istringstream in(text);
  return parse_config(in, std::move(base));
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tubeox_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("nondimensionalize") {
  DimensionalInputs d;
  CHECK(nondimensionalize(d).re == 1.0);
  d.D = 0.1;
  CHECK(nondimensionalize(d).pe == doctest::Approx(10.0));
  d = {};
  d.k = 1e-3;
  CHECK(nondimensionalize(d).sh1 == doctest::Approx(0.001));
  d = {};
  d.rho = 2;
  d.mu = 0.5;
  d.l = 3;
  d.u = 0.25;
  d.D = 0.5;
  d.c = 4;
  d.rho0 = 8;
  d.D0 = 0.2;
  const Dimensionless g = nondimensionalize(d);
  CHECK(g.re == doctest::Approx(3.0));
  CHECK(g.pe == doctest::Approx(1.5));
  CHECK(g.d_ref == doctest::Approx(1.0));
  CHECK(g.sh2_inv == doctest::Approx(1.0 / (6.0 * 0.2)));
  d.mu = 0;
  CHECK_THROWS_AS(nondimensionalize(d), ConfigError);
}

TEST_CASE("config parsing") {
  const SimConfig c = parse(
      "[geometry]\narrangement = staggered\nn_tubes = 4\n"
      "[flow]\nre = 10\n"
      "[transport]\npe = 20\nsh1 = 0.01\nsh2_inv = 1e5\ntau = 0.05\nt_end = 2\n"
      "[solver]\nlinear = gmres\nimplicit_startup = 0\n"
      "[output]\nsnapshot_times = 1, 2\nprofile_tubes = 1, 2\n");
  CHECK(c.geometry.arrangement == Arrangement::Staggered);
  CHECK(c.geometry.n_tubes == 4);
  CHECK(c.re == 10.0);
  CHECK(c.kinetics.pe == 20.0);
  CHECK(c.kinetics.sh2_inv == 1e5);
  CHECK(c.tau == 0.05);
  CHECK(c.solver.step.linear == LinearMethod::Gmres);
  CHECK(c.solver.step.implicit_startup == 0);
  CHECK(c.observe.snapshot_times == std::vector<double>{1.0, 2.0});
  CHECK(c.observe.profile_tubes == std::vector<int>{1, 2});

  CHECK_THROWS_AS(parse("[flow]\nreynolds = 10\n"), ConfigError);
  CHECK_THROWS_AS(parse("[physics]\nre = 10\n"), ConfigError);
  CHECK_THROWS_AS(parse("[flow]\nre = ten\n"), ConfigError);
  CHECK_THROWS_AS(parse("[flow]\nre = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[transport]\ntau = 0.3\nt_end = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[transport]\nsh2_inv = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[geometry]\npitch = 0.8\nstrip_width = 0.4\n"), GeometryError);
}

TEST_CASE("dimensional section") {
  const SimConfig c = parse("[dimensional]\nD = 0.1\nk = 1e-4\n");
  CHECK(c.kinetics.pe == doctest::Approx(10.0));
  CHECK(c.kinetics.sh1 == doctest::Approx(1e-3));
  CHECK(c.re == doctest::Approx(1.0));
  CHECK_THROWS_AS(parse("[dimensional]\nD = 0.1\n[transport]\npe = 5\n"), ConfigError);
  CHECK_THROWS_AS(parse("[dimensional]\nnu = 0.1\n"), ConfigError);
}

TEST_CASE("write_config round-trips") {
  SimConfig c = preset("parabolic-1e-6:staggered");
  c.observe.snapshot_times = {5, 10, 15};
  c.solver.step.linear = LinearMethod::Gmres;
  std::ostringstream out;
  write_config(c, out);
  const SimConfig back = parse(out.str());
  std::ostringstream again;
  write_config(back, again);
  CHECK(again.str() == out.str());
  CHECK(back.geometry.arrangement == Arrangement::Staggered);
  CHECK(back.kinetics.sh2_inv == c.kinetics.sh2_inv);
  CHECK(back.grid == c.grid);
}

TEST_CASE("presets encode the reference parameters") {
  const SimConfig lin = preset("linear");
  CHECK(lin.re == 50.0);
  CHECK(lin.kinetics.pe == 10.0);
  CHECK(lin.kinetics.sh1 == 0.001);
  CHECK(lin.kinetics.sh2_inv == 0.0);
  CHECK(lin.tau == 0.1);
  CHECK(lin.t_end == 50.0);
  CHECK(lin.geometry.arrangement == Arrangement::InLine);
  CHECK(preset("linear:staggered").geometry.arrangement == Arrangement::Staggered);
  CHECK(preset("parabolic-1e-5").kinetics.sh2_inv == doctest::Approx(1e5));
  CHECK(preset("parabolic-1e-6").kinetics.sh2_inv == doctest::Approx(1e6));
  CHECK(preset("parabolic-1e-7").kinetics.sh2_inv == doctest::Approx(1e7));
  CHECK(preset("flow-re150").re == 150.0);
  for (const auto& name : preset_names()) CHECK_NOTHROW(preset(name).check());
  CHECK_THROWS_AS(preset("fig99"), ConfigError);
}

TEST_CASE("format_number") {
  CHECK(format_number(0.0) == "0.0");
  CHECK(format_number(1.0) == "1.0");
  CHECK(format_number(0.25) == "0.25");
  CHECK(format_number(1e-5) == "1e-05");
  CHECK(std::stod(format_number(0.1 + 0.2)) == 0.1 + 0.2);
}

TEST_CASE("csv output") {
  CsvTable t;
  t.header = {"t", "c_out"};
  t.add({0.0, 0.0});
  t.add({0.1, std::nullopt});
  std::ostringstream out;
  write_csv(t, out);
  CHECK(out.str() == "t,c_out\n0.0,0.0\n0.1,\n");

  CsvTable l;
  l.header = {"name", "value"};
  l.add("a", {1.5});
  std::ostringstream lo;
  write_csv(l, lo);
  CHECK(lo.str() == "name,value\na,1.5\n");
}

TEST_CASE("vtk of a constant field") {
  const Mesh m = fixtures::rect_mesh(2, 2);
  VtkPointData data;
  data.scalars.push_back({"c", Vector::Constant(9, 0.5)});
  std::ostringstream out;
  write_vtk(m, data, out);
  const std::string s = out.str();
  CHECK(s.rfind("# vtk DataFile Version 3.0\n", 0) == 0);
  CHECK(s.find("DATASET UNSTRUCTURED_GRID") != std::string::npos);
  CHECK(s.find("CELLS 8 32") != std::string::npos);
  const auto pos = s.find("POINT_DATA 9\nSCALARS c double 1\nLOOKUP_TABLE default\n");
  REQUIRE(pos != std::string::npos);
  std::istringstream rest(s.substr(s.find("default\n", pos) + 8));
  for (int i = 0; i < 9; ++i) {
    double v = 0;
    rest >> v;
    CHECK(v == 0.5);
  }
  VtkPointData bad;
  bad.scalars.push_back({"c", Vector::Zero(3)});
  CHECK_THROWS_AS(write_vtk(m, bad, out), ConfigError);
}

TEST_CASE("flow cache is tied to its mesh") {
  const fs::path dir = scratch_dir("flowcache");
  const P2Mesh mesh = enrich_p2(fixtures::rect_mesh(3, 2));
  const FlowField f = solve_stokes(FlowSystem(mesh, FlowProblem{}));
  const std::string path = (dir / "flow.json").string();
  save_flow(path, mesh.base, f);
  const FlowField back = load_flow(path, mesh.base);
  CHECK(back.u == f.u);
  CHECK(back.p == f.p);
  CHECK(back.re == f.re);
  CHECK_THROWS_AS(load_flow(path, fixtures::rect_mesh(3, 3)), IoError);
  CHECK_THROWS_AS(load_flow((dir / "missing.json").string(), mesh.base), IoError);
  CHECK(mesh_checksum(mesh.base) == mesh_checksum(fixtures::rect_mesh(3, 2)));
  fs::remove_all(dir);
}

TEST_CASE("oxidize writes the concentration series from the homogeneous start") {
  const fs::path dir = scratch_dir("oxidize");
  SimConfig c;
  c.tau = 0.1;
  c.t_end = 0.0;
  const P2Mesh mesh = fixtures::small_bundle();
  FlowField f = solve_stokes(FlowSystem(mesh, FlowProblem{}));
  const TransportModel model(mesh, f, c.kinetics.pe);
  oxidize(c, model, dir.string());
  std::ifstream in(dir / "c_out.csv");
  std::string l1, l2, l3;
  std::getline(in, l1);
  std::getline(in, l2);
  CHECK(l1 == "t,c_out");
  CHECK(l2 == "0.0,0.0");
  CHECK_FALSE(std::getline(in, l3));
  fs::remove_all(dir);
}
