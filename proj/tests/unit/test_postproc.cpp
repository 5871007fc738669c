#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "tubeox/errors.hpp"
#include "tubeox/postproc.hpp"

using namespace tubeox;

namespace {

FlowField uniform_flow(const P2Mesh& mesh) {
  const auto nn = static_cast<Eigen::Index>(mesh.node_count());
  FlowField f;
  f.u = Vector::Zero(2 * nn);
  f.u.head(nn).setOnes();
  f.p = Vector::Zero(static_cast<Eigen::Index>(mesh.vertex_count()));
  return f;
}

// L2 distance between u and (dψ/dx2, -dψ/dx1) with P1 ψ.
double curl_mismatch(const P2Mesh& mesh, const FlowField& f, const Vector& psi) {
  const auto nn = static_cast<Eigen::Index>(mesh.node_count());
  const DofMap p2 = DofMap::p2(mesh);
  const QuadratureRule& rule = triangle_rule(4);
  double err = 0;
  for (std::size_t t = 0; t < mesh.base.triangle_count(); ++t) {
    const ElementGeometry g = element_geometry(mesh.base, t);
    const auto& tri = mesh.base.triangles[t];
    const auto d = p2.element_dofs(mesh, t);
    const Vec2 x[3] = {mesh.base.vertices[tri[0]], mesh.base.vertices[tri[1]], mesh.base.vertices[tri[2]]};
    const double two_a = twice_signed_area(x[0], x[1], x[2]);
    Vec2 grad;
    for (int i = 0; i < 3; ++i) {
      const Vec2 a = x[(i + 1) % 3], b = x[(i + 2) % 3];
      grad = grad + (psi[tri[i]] / two_a) * Vec2{a.y - b.y, b.x - a.x};
    }
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const ShapeValues s = shape_eval(ElementKind::P2, rule.points[q]);
      Vec2 u;
      for (int i = 0; i < 6; ++i) u = u + s.value[i] * Vec2{f.u[d[i]], f.u[nn + d[i]]};
      const Vec2 diff = u - Vec2{grad.y, -grad.x};
      err += rule.weights[q] * g.det * dot(diff, diff);
    }
  }
  return std::sqrt(err);
}

}  // namespace

TEST_CASE("streamfunction of uniform flow is linear") {
  const P2Mesh mesh = enrich_p2(fixtures::jittered_rect(10, 5, 7));
  const Vector psi = streamfunction(mesh, uniform_flow(mesh));
  for (std::size_t v = 0; v < mesh.vertex_count(); ++v)
    CHECK(std::abs(psi[static_cast<Eigen::Index>(v)] - mesh.base.vertices[v].y) <= 1e-10);
}

TEST_CASE("streamfunction reproduces a converged flow better under refinement") {
  double prev = 0;
  for (double bh : {0.2, 0.1}) {
    const P2Mesh mesh = fixtures::small_bundle(Arrangement::Staggered, bh, 2.5 * bh);
    FlowProblem p;
    p.re = 10;
    const FlowSystem sys(mesh, p);
    const FlowField f = newton_solve(sys, solve_stokes(sys)).first;
    const Vector psi = streamfunction(mesh, f);
    const double e = curl_mismatch(mesh, f, psi);
    if (prev > 0) CHECK(e < prev);
    prev = e;
    // Tubes on the lower side carry psi = 0, the upper symmetry line the full flux.
    for (const auto& be : mesh.base.boundary_edges) {
      if (be.tag == BoundaryTag::tube_wall(1)) CHECK(std::abs(psi[be.v[0]]) <= 1e-10);
      if (be.tag == BoundaryTag::tube_wall(2)) CHECK(std::abs(psi[be.v[0]] - 1.0) <= 1e-10);
    }
  }
}

TEST_CASE("interior_extrema finds a bowl minimum") {
  const Mesh m = fixtures::rect_mesh(4, 4);
  Vector f(static_cast<Eigen::Index>(m.vertex_count()));
  for (std::size_t v = 0; v < m.vertex_count(); ++v) {
    const Vec2 x = m.vertices[v] - Vec2{0.5, 0.5};
    f[static_cast<Eigen::Index>(v)] = dot(x, x);
  }
  const InteriorExtrema e = interior_extrema(m, f);
  REQUIRE(e.minima.size() == 1);
  CHECK(m.vertices[e.minima[0]].x == doctest::Approx(0.5));
  CHECK(m.vertices[e.minima[0]].y == doctest::Approx(0.5));
  CHECK(e.maxima.empty());
  CHECK(interior_extrema(m, -f).maxima == e.minima);
}

TEST_CASE("point location") {
  const Mesh m = fixtures::jittered_rect(6, 6, 3);
  const PointLocator loc(m);
  for (Vec2 p : {Vec2{0.31, 0.77}, Vec2{0.0, 0.0}, Vec2{1.0, 0.5}, Vec2{0.999, 0.001}}) {
    const auto hit = loc.locate(p);
    REQUIRE(hit.has_value());
    const auto& tri = m.triangles[hit->triangle];
    Vec2 back;
    for (int i = 0; i < 3; ++i) {
      CHECK(hit->bary[i] >= -1e-12);
      back = back + hit->bary[i] * m.vertices[tri[i]];
    }
    CHECK(distance(back, p) <= 1e-12);
  }
  CHECK_FALSE(loc.locate({1.2, 0.5}).has_value());
  CHECK_FALSE(loc.locate({0.5, -0.01}).has_value());
}

TEST_CASE("midline profiles") {
  const P2Mesh mesh = enrich_p2(fixtures::jittered_rect(8, 4, 11));
  SUBCASE("constant field") {
    ScalarField one{FieldSpace::P2, Vector::Ones(static_cast<Eigen::Index>(mesh.node_count()))};
    const MidlineProfile prof = midline_profile(mesh, one, 1.0, 50);
    REQUIRE(prof.x.size() == 50);
    CHECK(prof.x.front() == 0.0);
    CHECK(prof.x.back() == doctest::Approx(1.0));
    for (std::size_t i = 1; i < prof.x.size(); ++i) CHECK(prof.x[i] > prof.x[i - 1]);
    CHECK(prof.gaps() == 0);
    for (const auto& v : prof.value) CHECK(*v == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("Stokes in an empty channel") {
    const FlowSystem sys(mesh, FlowProblem{});
    const FlowField f = solve_stokes(sys);
    const MidlineProfile prof = midline_profile(mesh, flow_component(mesh, f, "u1"), 1.0, 600, "u1");
    CHECK(prof.field == "u1");
    for (const auto& v : prof.value) CHECK(std::abs(*v - 1.0) <= 1e-8);
    CHECK_THROWS_AS(flow_component(mesh, f, "w"), SelectionError);
  }
  SUBCASE("deviation curves") {
    Vector lin(static_cast<Eigen::Index>(mesh.vertex_count()));
    for (std::size_t v = 0; v < mesh.vertex_count(); ++v) lin[static_cast<Eigen::Index>(v)] = mesh.base.vertices[v].x;
    const MidlineProfile a = midline_profile(mesh, {FieldSpace::P1, lin}, 1.0, 40);
    const MidlineProfile b = midline_profile(mesh, {FieldSpace::P1, 2.0 * lin}, 1.0, 40);
    for (std::size_t i = 0; i < a.x.size(); ++i) CHECK(*a.value[i] == doctest::Approx(a.x[i]).epsilon(1e-12));

    const auto same = deviation_curves(a, {a});
    CHECK(same[0].max_abs == 0.0);
    const auto ab = deviation_curves(a, {b}), ba = deviation_curves(b, {a});
    CHECK(ab[0].max_abs == doctest::Approx(100.0));
    for (std::size_t i = 0; i < a.x.size(); ++i) CHECK(*ab[0].value[i] == -*ba[0].value[i]);
    CHECK(profile_l2_distance(a, b) == doctest::Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-3));

    const MidlineProfile c = midline_profile(mesh, {FieldSpace::P1, lin}, 1.0, 41);
    CHECK_THROWS_AS(deviation_curves(a, {c}), AlignmentError);
  }
}

TEST_CASE("outlet_average") {
  const P2Mesh mesh = enrich_p2(fixtures::jittered_rect(5, 7, 1));
  const auto nv = static_cast<Eigen::Index>(mesh.vertex_count());
  Vector x2(nv), other(nv);
  for (Eigen::Index v = 0; v < nv; ++v) {
    const Vec2 p = mesh.base.vertices[static_cast<std::size_t>(v)];
    x2[v] = p.y;
    other[v] = std::sin(3 * p.y) + p.x;
  }
  CHECK(outlet_average(mesh, Vector::Ones(nv)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(outlet_average(mesh, Vector::Zero(nv)) == 0.0);
  CHECK(outlet_average(mesh, x2) == doctest::Approx(0.5).epsilon(1e-14));
  const double lhs = outlet_average(mesh, 2.5 * x2 - 0.7 * other);
  CHECK(std::abs(lhs - (2.5 * outlet_average(mesh, x2) - 0.7 * outlet_average(mesh, other))) <= 1e-13);
}

TEST_CASE("film profile and oxide mass") {
  const double bh = 0.1;
  const P2Mesh mesh = fixtures::small_bundle(Arrangement::Staggered, bh);
  FlowField f = uniform_flow(mesh);
  const TransportModel model(mesh, f, 10.0);
  OxidationState s = model.initial_state();

  for (int tube : {1, 2}) {
    s.d.setConstant(0.3);
    const FilmProfile prof = film_profile(model, s, tube);
    CHECK(prof.tube == tube);
    REQUIRE(prof.theta.size() >= 2);
    CHECK(prof.theta.front() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(prof.theta.back() == doctest::Approx(std::numbers::pi).epsilon(1e-12));
    for (std::size_t i = 1; i < prof.theta.size(); ++i) {
      CHECK(prof.theta[i] > prof.theta[i - 1]);
      CHECK(prof.theta[i] - prof.theta[i - 1] <= 2 * bh);
    }
    for (double d : prof.d) CHECK(d == 0.3);

    s.d.setOnes();
    CHECK(oxide_mass(model, s, tube) == doctest::Approx(std::numbers::pi).epsilon(5e-3));
    CHECK(oxide_mass(model, s, tube) <= std::numbers::pi);
    s.d.setZero();
    CHECK(oxide_mass(model, s, tube) == 0.0);
  }
  CHECK_THROWS_AS(film_profile(model, s, 3), SelectionError);
  CHECK_THROWS_AS(film_profile(model, s, 0), SelectionError);
}

TEST_CASE("film profile puts theta = 0 at the leading edge") {
  const P2Mesh mesh = fixtures::small_bundle(Arrangement::InLine);
  const TransportModel model(mesh, uniform_flow(mesh), 10.0);
  OxidationState s = model.initial_state();
  const Vec2 c = mesh.base.tubes[0].center;
  const auto& wall = model.wall();
  for (std::size_t j = 0; j < wall.size(); ++j) s.d[static_cast<Eigen::Index>(j)] = c.x - mesh.base.vertices[wall.nodes[j]].x;
  const FilmProfile prof = film_profile(model, s, 1);
  CHECK(prof.d.front() == doctest::Approx(0.5));
  CHECK(prof.d.back() == doctest::Approx(-0.5));
  for (std::size_t i = 0; i < prof.theta.size(); ++i) CHECK(prof.d[i] == doctest::Approx(0.5 * std::cos(prof.theta[i])));
}
