#include <doctest.h>

#include <random>

#include "fixtures.hpp"
#include "support/verification.hpp"
#include "tubeox/errors.hpp"
#include "tubeox/flow.hpp"
#include "tubeox/meshgen.hpp"

using namespace tubeox;

namespace {

FlowField uniform(const FlowSystem& sys) {
  FlowField f;
  const auto nn = static_cast<Eigen::Index>(sys.mesh().node_count());
  f.u = Vector::Zero(2 * nn);
  f.u.head(nn).setOnes();
  f.p = Vector::Zero(static_cast<Eigen::Index>(sys.pressure_dofs()));
  f.re = sys.problem().re;
  return f;
}

}  // namespace

TEST_CASE("uniform flow solves the channel problem") {
  const P2Mesh mesh = enrich_p2(fixtures::jittered_rect(8, 3, 2));
  for (double re : {1.0, 10.0, 150.0}) {
    FlowProblem p;
    p.re = re;
    const FlowSystem sys(mesh, p);
    CHECK(sys.residual(uniform(sys)).norm() <= 1e-12);
  }
}

TEST_CASE("flow Jacobian matches central differences") {
  const P2Mesh mesh = fixtures::small_bundle();
  FlowProblem p;
  p.re = 50;
  const FlowSystem sys(mesh, p);
  FlowField s = sys.admissible_zero();
  std::vector<char> fixed(sys.size(), 0);
  for (const auto& [dof, v] : sys.constraints()) fixed[dof] = 1;

  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  Vector x = s.stacked();
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (!fixed[i]) x[i] = u(rng);
  s = FlowField::from_stacked(x, sys.velocity_dofs(), p.re);
  const auto [r0, jac] = residual_and_jacobian(sys, s);
  const double h = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    Vector v = Vector::Zero(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (!fixed[i]) v[i] = u(rng);
    const Vector rp = sys.residual(FlowField::from_stacked(x + h * v, sys.velocity_dofs(), p.re));
    const Vector rm = sys.residual(FlowField::from_stacked(x - h * v, sys.velocity_dofs(), p.re));
    const Vector fd = (rp - rm) / (2 * h);
    Vector jv = jac.multiply(v);
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (fixed[i]) jv[i] = 0;
    CHECK((jv - fd).norm() / jv.norm() <= 1e-6);
  }
}

TEST_CASE("Stokes in a straight channel carries unit flux") {
  const P2Mesh mesh = enrich_p2(fixtures::jittered_rect(8, 4, 4));
  const FlowSystem sys(mesh, FlowProblem{});
  const FlowField f = solve_stokes(sys);
  const BoundaryTag out = BoundaryTag::outlet();
  CHECK(boundary_flux(mesh, f, std::span(&out, 1)) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(mass_imbalance(mesh, f) <= 1e-10);
  CHECK((f.u.head(static_cast<Eigen::Index>(mesh.node_count())).array() - 1.0).abs().maxCoeff() <= 1e-10);
}

TEST_CASE("Stokes manufactured solution converges at third order in velocity") {
  const auto e1 = verification::stokes_mms(4), e2 = verification::stokes_mms(8), e3 = verification::stokes_mms(16);
  CHECK(verification::order(e2.u_l2, e3.u_l2) >= 2.7);
  CHECK(verification::order(e2.p_l2, e3.p_l2) >= 1.8);
  CHECK(e2.u_l2 < e1.u_l2);
}

TEST_CASE("Newton on a small bundle") {
  const P2Mesh mesh = fixtures::small_bundle();
  FlowProblem p;
  p.re = 10;
  const FlowSystem sys(mesh, p);
  const FlowField stokes = solve_stokes(sys);
  CHECK(stokes.u.tail(static_cast<Eigen::Index>(mesh.node_count())).cwiseAbs().maxCoeff() > 0.0);
  const auto [f, rep] = newton_solve(sys, stokes);
  CHECK(rep.converged);
  CHECK(rep.iterations() <= 6);
  for (std::size_t k = 1; k < rep.absolute.size(); ++k) CHECK(rep.absolute[k] < rep.absolute[k - 1]);
  CHECK(rep.relative.back() <= 1e-10);
  CHECK(mass_imbalance(mesh, f) <= 1e-8);
  const Vector x = f.stacked();
  for (const auto& [dof, v] : sys.constraints()) CHECK(x[dof] == v);

  // Single-stage ladder equals a plain Newton solve from the Stokes start.
  std::vector<NewtonReport> reps;
  const FlowField c = continuation_solve(mesh, p, {}, &reps);
  CHECK(reps.size() == 1);
  CHECK((c.stacked() - x).norm() <= 1e-12 * x.norm());
}

TEST_CASE("Newton reports non-convergence with its history") {
  const P2Mesh mesh = fixtures::small_bundle(Arrangement::Staggered);
  FlowProblem p;
  p.re = 150;
  const FlowSystem sys(mesh, p);
  FlowOptions o;
  o.max_iterations = 1;
  try {
    newton_solve(sys, solve_stokes(sys), o);
    FAIL("expected NonConvergenceError");
  } catch (const NonConvergenceError& e) {
    CHECK(e.residuals().size() == 2);
  }
}

TEST_CASE("symmetry edges must be axis-aligned") {
  Mesh m = fixtures::rect_mesh(2, 2);
  m.vertices[1].y = -0.1;
  CHECK_THROWS_AS(FlowSystem(enrich_p2(m), FlowProblem{}), GeometryError);
}
