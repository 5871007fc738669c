#include "tubeox/flow.hpp"

#include <cmath>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "tubeox/errors.hpp"

namespace tubeox {

Vector FlowField::stacked() const {
  Vector x(u.size() + p.size());
  x << u, p;
  return x;
}

FlowField FlowField::from_stacked(const Vector& x, std::size_t velocity_dofs, double re) {
  const auto nu = static_cast<Eigen::Index>(velocity_dofs);
  return {x.head(nu), x.tail(x.size() - nu), re};
}

namespace {

constexpr int kQuadDegree = 5;

/// Outward unit normal of local edge k of triangle t (triangles are counterclockwise).
Vec2 outward_normal(const Mesh& m, std::size_t t, int k) {
  const auto& tri = m.triangles[t];
  const Vec2 a = m.vertices[tri[k]], b = m.vertices[tri[(k + 1) % 3]];
  const double len = distance(a, b);
  return {(b.y - a.y) / len, -(b.x - a.x) / len};
}

std::array<double, 3> edge_p2(double s) { return {(1 - s) * (1 - 2 * s), s * (2 * s - 1), 4 * s * (1 - s)}; }

}  // namespace

FlowSystem::FlowSystem(const P2Mesh& mesh, FlowProblem problem) : mesh_(&mesh), problem_(std::move(problem)) {
  const int nn = static_cast<int>(mesh.node_count());
  const int nv = static_cast<int>(mesh.vertex_count());
  const int pu = 2 * nn;

  const Mesh& m = mesh.base;
  for (const auto& be : m.boundary_edges) {
    const int e = mesh.find_edge(be.v[0], be.v[1]);
    if (e < 0) throw TopologyError("boundary edge missing from the P2 edge table");
    const int nodes[3] = {be.v[0], be.v[1], nv + e};
    const Vec2 xa = m.vertices[be.v[0]], xb = m.vertices[be.v[1]];
    switch (be.tag.kind) {
      case BoundaryKind::Inlet:
      case BoundaryKind::TubeWall: {
        const auto& fn = be.tag.kind == BoundaryKind::Inlet ? problem_.inlet_velocity : problem_.wall_velocity;
        const Vec2 fallback = be.tag.kind == BoundaryKind::Inlet ? Vec2{1.0, 0.0} : Vec2{};
        for (int n : nodes) {
          const Vec2 g = fn ? fn(mesh.node(n)) : fallback;
          add_constraint(constraints_, n, g.x);
          add_constraint(constraints_, nn + n, g.y);
        }
        break;
      }
      case BoundaryKind::Symmetry: {
        const double len = distance(xa, xb);
        int component;
        if (std::abs(xb.y - xa.y) <= 1e-12 * len) {
          component = 1;
        } else if (std::abs(xb.x - xa.x) <= 1e-12 * len) {
          component = 0;
        } else {
          throw GeometryError(fmt::format("symmetry edge ({}, {}) is not axis-aligned", be.v[0], be.v[1]));
        }
        for (int n : nodes) add_constraint(constraints_, component * nn + n, 0.0);
        break;
      }
      case BoundaryKind::Outlet:
        break;
    }
  }

  const std::size_t nt = m.triangle_count();
  element_dofs_.resize(nt);
  SparsityBuilder sb(size(), size());
  for (std::size_t t = 0; t < nt; ++t) {
    const auto n6 = mesh.p2_nodes(t);
    auto& d = element_dofs_[t];
    for (int i = 0; i < 6; ++i) {
      d[i] = n6[i];
      d[6 + i] = nn + n6[i];
    }
    for (int i = 0; i < 3; ++i) d[12 + i] = pu + m.triangles[t][i];
    sb.add_block(d, d);
  }
  pattern_ = sb.build();
}

FlowField FlowSystem::admissible_zero() const {
  Vector x = Vector::Zero(static_cast<Eigen::Index>(size()));
  for (const auto& [d, v] : constraints_) x[d] = v;
  return FlowField::from_stacked(x, velocity_dofs(), problem_.re);
}

Vector FlowSystem::residual(const FlowField& state, SparseMatrix* jacobian, bool convection) const {
  const P2Mesh& mesh = *mesh_;
  const Mesh& m = mesh.base;
  const double nu = 1.0 / problem_.re;
  const Vector x = state.stacked();
  if (static_cast<std::size_t>(x.size()) != size()) throw std::invalid_argument("flow state has the wrong size");

  Vector r = Vector::Zero(x.size());
  if (jacobian) {
    *jacobian = pattern_;
  }
  const Tabulation& tab = tabulate(kQuadDegree);
  const auto& rule = *tab.rule;
  Eigen::Matrix<double, 15, 15> k;
  Eigen::Matrix<double, 15, 1> re;

  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    const ElementGeometry g = element_geometry(m, t);
    const auto& d = element_dofs_[t];
    double ue[2][6], pe[3];
    for (int i = 0; i < 6; ++i) {
      ue[0][i] = x[d[i]];
      ue[1][i] = x[d[6 + i]];
    }
    for (int i = 0; i < 3; ++i) pe[i] = x[d[12 + i]];
    k.setZero();
    re.setZero();

    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const ShapeValues& s2 = tab.p2[q];
      const ShapeValues& s1 = tab.p1[q];
      const double w = rule.weights[q] * g.det;
      Vec2 g2[6], g1[3];
      for (int i = 0; i < 6; ++i) g2[i] = g.physical_gradient(s2.grad[i]);
      for (int i = 0; i < 3; ++i) g1[i] = g.physical_gradient(s1.grad[i]);
      double u[2] = {0, 0}, gu[2][2] = {{0, 0}, {0, 0}}, p = 0;
      for (int i = 0; i < 6; ++i)
        for (int a = 0; a < 2; ++a) {
          u[a] += ue[a][i] * s2.value[i];
          gu[a][0] += ue[a][i] * g2[i].x;
          gu[a][1] += ue[a][i] * g2[i].y;
        }
      for (int i = 0; i < 3; ++i) p += pe[i] * s1.value[i];
      Vec2 f{};
      if (problem_.body_force) f = problem_.body_force(g.map(rule.points[q]));
      const double fa[2] = {f.x, f.y};
      const double div = gu[0][0] + gu[1][1];

      for (int a = 0; a < 2; ++a) {
        const double conv = convection ? u[0] * gu[a][0] + u[1] * gu[a][1] : 0.0;
        for (int i = 0; i < 6; ++i) {
          const double dphi[2] = {g2[i].x, g2[i].y};
          re[6 * a + i] += w * (conv * s2.value[i] + nu * (gu[a][0] * g2[i].x + gu[a][1] * g2[i].y) -
                                p * dphi[a] - fa[a] * s2.value[i]);
        }
      }
      for (int i = 0; i < 3; ++i) re[12 + i] -= w * div * s1.value[i];

      if (!jacobian) continue;
      for (int i = 0; i < 6; ++i) {
        const double phi_i = s2.value[i];
        const double dphi_i[2] = {g2[i].x, g2[i].y};
        for (int j = 0; j < 6; ++j) {
          const double visc = nu * dot(g2[j], g2[i]);
          const double adv = convection ? (u[0] * g2[j].x + u[1] * g2[j].y) * phi_i : 0.0;
          for (int a = 0; a < 2; ++a) {
            k(6 * a + i, 6 * a + j) += w * (visc + adv);
            if (convection)
              for (int b = 0; b < 2; ++b) k(6 * a + i, 6 * b + j) += w * phi_i * s2.value[j] * gu[a][b];
          }
        }
        for (int j = 0; j < 3; ++j)
          for (int a = 0; a < 2; ++a) {
            k(6 * a + i, 12 + j) -= w * s1.value[j] * dphi_i[a];
            k(12 + j, 6 * a + i) -= w * dphi_i[a] * s1.value[j];
          }
      }
    }

    if (problem_.outlet_traction) {
      const LineRule& lr = line_rule(4);
      for (int e = 0; e < 3; ++e) {
        const int be = mesh.edge_boundary[mesh.triangle_edges[t][e]];
        if (be < 0 || m.boundary_edges[be].tag.kind != BoundaryKind::Outlet) continue;
        const Vec2 n = outward_normal(m, t, e);
        const Vec2 xa = g.v[e], xb = g.v[(e + 1) % 3];
        const double len = distance(xa, xb);
        const int loc[3] = {e, (e + 1) % 3, 3 + e};
        for (std::size_t q = 0; q < lr.points.size(); ++q) {
          const double sq = lr.points[q];
          const Vec2 traction = problem_.outlet_traction(xa + sq * (xb - xa), n);
          const auto phi = edge_p2(sq);
          for (int r2 = 0; r2 < 3; ++r2) {
            re[loc[r2]] -= lr.weights[q] * len * traction.x * phi[r2];
            re[6 + loc[r2]] -= lr.weights[q] * len * traction.y * phi[r2];
          }
        }
      }
    }

    for (int i = 0; i < 15; ++i) r[d[i]] += re[i];
    if (jacobian) {
      for (int i = 0; i < 15; ++i)
        for (int j = 0; j < 15; ++j)
          if (k(i, j) != 0.0) jacobian->add(d[i], d[j], k(i, j));
    }
  }

  zero_constrained(r, constraints_);
  if (jacobian) {
    std::vector<char> fixed(size(), 0);
    for (const auto& [dof, v] : constraints_) fixed[dof] = 1;
    for (std::size_t i = 0; i < jacobian->rows; ++i)
      for (std::size_t kk = jacobian->row_ptr[i]; kk < jacobian->row_ptr[i + 1]; ++kk) {
        const int j = jacobian->col[kk];
        if (fixed[i] || fixed[j]) jacobian->val[kk] = (fixed[i] && j == static_cast<int>(i)) ? 1.0 : 0.0;
      }
  }
  return r;
}

std::pair<Vector, SparseMatrix> residual_and_jacobian(const FlowSystem& system, const FlowField& state) {
  SparseMatrix j;
  Vector r = system.residual(state, &j);
  return {std::move(r), std::move(j)};
}

FlowField solve_stokes(const FlowSystem& system) {
  FlowField x0 = system.admissible_zero();
  SparseMatrix j;
  const Vector r = system.residual(x0, &j, false);
  auto [dx, rep] = lu_solve(j, -r);
  return FlowField::from_stacked(x0.stacked() + dx, system.velocity_dofs(), system.problem().re);
}

std::pair<FlowField, NewtonReport> newton_solve(const FlowSystem& system, const FlowField& initial,
                                                const FlowOptions& options) {
  Vector x = initial.stacked();
  if (static_cast<std::size_t>(x.size()) != system.size()) throw std::invalid_argument("initial state size mismatch");
  for (const auto& [d, v] : system.constraints()) x[d] = v;
  const double re = system.problem().re;
  NewtonReport rep;
  rep.re = re;

  auto state = [&] { return FlowField::from_stacked(x, system.velocity_dofs(), re); };
  Vector r = system.residual(state());
  const double r0 = r.norm();
  rep.absolute.push_back(r0);
  rep.relative.push_back(1.0);
  auto done = [&] { return rep.absolute.back() <= options.atol || rep.relative.back() <= options.rtol; };
  rep.converged = done();

  LuFactorization lu;
  SparseMatrix j;
  for (int it = 1; it <= options.max_iterations && !rep.converged; ++it) {
    system.residual(state(), &j);
    lu.factor(j);
    const auto [dx, lrep] = lu_solve(lu, j, -r);
    x += dx;
    r = system.residual(state());
    const double a = r.norm();
    if (!std::isfinite(a)) break;
    rep.absolute.push_back(a);
    rep.relative.push_back(r0 > 0 ? a / r0 : 0.0);
    rep.converged = done();
  }
  if (!rep.converged)
    throw NonConvergenceError(fmt::format("Newton did not converge at Re = {} within {} iterations (relative residual {:.3e})",
                                          re, options.max_iterations, rep.relative.back()),
                              rep.absolute);
  return {state(), rep};
}

FlowField continuation_solve(const P2Mesh& mesh, const FlowProblem& problem, const FlowOptions& options,
                             std::vector<NewtonReport>* reports) {
  if (!(problem.re > 0)) throw ConfigError("Reynolds number must be positive");
  std::vector<double> ladder;
  for (double r : {10.0, 50.0})
    if (r < problem.re) ladder.push_back(r);
  ladder.push_back(problem.re);

  std::optional<FlowField> current;
  for (double r : ladder) {
    FlowProblem stage = problem;
    stage.re = r;
    const FlowSystem system(mesh, stage);
    if (!current) current = solve_stokes(system);
    try {
      auto [field, rep] = newton_solve(system, *current, options);
      if (reports) reports->push_back(rep);
      current = std::move(field);
    } catch (const NonConvergenceError& e) {
      throw NonConvergenceError(fmt::format("continuation stage Re = {}: {}", r, e.what()), e.residuals());
    }
  }
  current->re = problem.re;
  return *current;
}

double boundary_flux(const P2Mesh& mesh, const FlowField& flow, std::span<const BoundaryTag> tags) {
  const Mesh& m = mesh.base;
  const auto nn = static_cast<Eigen::Index>(mesh.node_count());
  const int nv = static_cast<int>(mesh.vertex_count());
  const LineRule& lr = line_rule(3);
  double flux = 0.0;
  for (std::size_t t = 0; t < m.triangle_count(); ++t) {
    for (int k = 0; k < 3; ++k) {
      const int e = mesh.triangle_edges[t][k];
      const int be = mesh.edge_boundary[e];
      if (be < 0 || std::find(tags.begin(), tags.end(), m.boundary_edges[be].tag) == tags.end()) continue;
      const int a = m.triangles[t][k], b = m.triangles[t][(k + 1) % 3];
      const int nodes[3] = {a, b, nv + e};
      const Vec2 n = outward_normal(m, t, k);
      const double len = distance(m.vertices[a], m.vertices[b]);
      for (std::size_t q = 0; q < lr.points.size(); ++q) {
        const auto phi = edge_p2(lr.points[q]);
        Vec2 u;
        for (int i = 0; i < 3; ++i) {
          u.x += phi[i] * flow.u[nodes[i]];
          u.y += phi[i] * flow.u[nn + nodes[i]];
        }
        flux += lr.weights[q] * len * dot(u, n);
      }
    }
  }
  return flux;
}

double mass_imbalance(const P2Mesh& mesh, const FlowField& flow) {
  const BoundaryTag in[] = {BoundaryTag::inlet()};
  const BoundaryTag out[] = {BoundaryTag::outlet()};
  return std::abs(boundary_flux(mesh, flow, in) + boundary_flux(mesh, flow, out));
}

}  // namespace tubeox
