#include "tubeox/fem.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "tubeox/errors.hpp"

namespace tubeox {

namespace {

QuadratureRule make_rule(int degree) {
  QuadratureRule r;
  r.degree = degree;
  auto add3 = [&](double a, double b, double w) {
    r.points.push_back({a, b, b});
    r.points.push_back({b, a, b});
    r.points.push_back({b, b, a});
    for (int i = 0; i < 3; ++i) r.weights.push_back(w);
  };
  switch (degree) {
    case 1:
      r.points.push_back({1.0 / 3, 1.0 / 3, 1.0 / 3});
      r.weights.push_back(0.5);
      break;
    case 2:
      add3(2.0 / 3, 1.0 / 6, 1.0 / 6);
      break;
    case 4: {
      const double g1 = 0.44594849091596488632, w1 = 0.22338158967801146570 * 0.5;
      const double g2 = 0.091576213509770743460, w2 = 0.10995174365532186764 * 0.5;
      add3(1 - 2 * g1, g1, w1);
      add3(1 - 2 * g2, g2, w2);
      break;
    }
    case 5: {
      const double s15 = std::sqrt(15.0);
      r.points.push_back({1.0 / 3, 1.0 / 3, 1.0 / 3});
      r.weights.push_back(9.0 / 80);
      const double a1 = (6 - s15) / 21, a2 = (6 + s15) / 21;
      add3(1 - 2 * a1, a1, (155 - s15) / 2400);
      add3(1 - 2 * a2, a2, (155 + s15) / 2400);
      break;
    }
    default:
      throw std::invalid_argument("no quadrature rule of that degree");
  }
  return r;
}

LineRule make_line_rule(int n) {
  LineRule r;
  std::vector<double> x, w;
  switch (n) {
    case 1: x = {0.0}; w = {2.0}; break;
    case 2: x = {-1 / std::sqrt(3.0), 1 / std::sqrt(3.0)}; w = {1.0, 1.0}; break;
    case 3: x = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)}; w = {5.0 / 9, 8.0 / 9, 5.0 / 9}; break;
    case 4: {
      const double a = std::sqrt(3.0 / 7 - 2.0 / 7 * std::sqrt(1.2)), b = std::sqrt(3.0 / 7 + 2.0 / 7 * std::sqrt(1.2));
      const double wa = (18 + std::sqrt(30.0)) / 36, wb = (18 - std::sqrt(30.0)) / 36;
      x = {-b, -a, a, b};
      w = {wb, wa, wa, wb};
      break;
    }
    default: throw std::invalid_argument("no line rule with that many points");
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    r.points.push_back(0.5 * (x[i] + 1));
    r.weights.push_back(0.5 * w[i]);
  }
  return r;
}

int rule_degree_for(int degree) {
  if (degree <= 1) return 1;
  if (degree <= 2) return 2;
  if (degree <= 4) return 4;
  if (degree <= 5) return 5;
  throw std::invalid_argument(fmt::format("quadrature degree {} not supported", degree));
}

/// Values of the three quadratic Lagrange functions on [0, 1] at s:
/// endpoint a, endpoint b, midpoint.
std::array<double, 3> edge_p2(double s) { return {(1 - s) * (1 - 2 * s), s * (2 * s - 1), 4 * s * (1 - s)}; }

}  // namespace

const QuadratureRule& triangle_rule(int degree) {
  static const std::array<QuadratureRule, 4> rules = {make_rule(1), make_rule(2), make_rule(4), make_rule(5)};
  switch (rule_degree_for(degree)) {
    case 1: return rules[0];
    case 2: return rules[1];
    case 4: return rules[2];
    default: return rules[3];
  }
}

const LineRule& line_rule(int n) {
  static const std::array<LineRule, 4> rules = {make_line_rule(1), make_line_rule(2), make_line_rule(3),
                                                make_line_rule(4)};
  if (n < 1 || n > 4) throw std::invalid_argument("line rule needs 1..4 points");
  return rules[n - 1];
}

ShapeValues shape_eval(ElementKind kind, const std::array<double, 3>& bary) {
  const double l0 = bary[0], l1 = bary[1], l2 = bary[2];
  const Vec2 d0{-1, -1}, d1{1, 0}, d2{0, 1};
  ShapeValues s;
  if (kind == ElementKind::P1) {
    s.count = 3;
    s.value = {l0, l1, l2, 0, 0, 0};
    s.grad = {d0, d1, d2, Vec2{}, Vec2{}, Vec2{}};
    return s;
  }
  s.count = 6;
  s.value = {l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1), 4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0};
  s.grad = {(4 * l0 - 1) * d0,          (4 * l1 - 1) * d1,          (4 * l2 - 1) * d2,
            4.0 * (l0 * d1 + l1 * d0), 4.0 * (l1 * d2 + l2 * d1), 4.0 * (l2 * d0 + l0 * d2)};
  return s;
}

ElementGeometry element_geometry(const Mesh& mesh, std::size_t t) {
  ElementGeometry g;
  const auto& tri = mesh.triangles[t];
  for (int k = 0; k < 3; ++k) g.v[k] = mesh.vertices[tri[k]];
  const Vec2 e1 = g.v[1] - g.v[0], e2 = g.v[2] - g.v[0];
  g.j00 = e1.x;
  g.j01 = e2.x;
  g.j10 = e1.y;
  g.j11 = e2.y;
  g.det = cross(e1, e2);
  const double scale = dot(e1, e1) + dot(e2, e2);
  if (!(g.det > 1e-14 * scale))
    throw SingularElementError(t, fmt::format("element {} has a degenerate Jacobian (det = {})", t, g.det));
  return g;
}

const Tabulation& tabulate(int degree) {
  static const std::array<Tabulation, 4> tabs = [] {
    std::array<Tabulation, 4> out;
    const int degs[4] = {1, 2, 4, 5};
    for (int i = 0; i < 4; ++i) {
      out[i].rule = &triangle_rule(degs[i]);
      for (const auto& p : out[i].rule->points) {
        out[i].p1.push_back(shape_eval(ElementKind::P1, p));
        out[i].p2.push_back(shape_eval(ElementKind::P2, p));
      }
    }
    return out;
  }();
  switch (rule_degree_for(degree)) {
    case 1: return tabs[0];
    case 2: return tabs[1];
    case 4: return tabs[2];
    default: return tabs[3];
  }
}

// ---------------------------------------------------------------- DofMap

DofMap DofMap::p1(const P2Mesh& mesh) {
  DofMap m;
  m.kind = FieldKind::P1Scalar;
  m.nodes = m.total = mesh.vertex_count();
  return m;
}

DofMap DofMap::p2(const P2Mesh& mesh) {
  DofMap m;
  m.kind = FieldKind::P2Scalar;
  m.nodes = m.total = mesh.node_count();
  return m;
}

DofMap DofMap::p2_vector(const P2Mesh& mesh) {
  DofMap m;
  m.kind = FieldKind::P2Vector;
  m.nodes = mesh.node_count();
  m.total = 2 * m.nodes;
  return m;
}

DofMap DofMap::boundary_p1(const P2Mesh& mesh, const BoundaryNodes& nodes) {
  DofMap m;
  m.kind = FieldKind::BoundaryP1;
  m.nodes = m.total = nodes.size();
  m.vertex_of = nodes.nodes;
  m.dof_of_vertex.assign(mesh.vertex_count(), -1);
  for (std::size_t i = 0; i < nodes.size(); ++i) m.dof_of_vertex[nodes.nodes[i]] = static_cast<int>(i);
  return m;
}

int DofMap::dof(int node, int component) const {
  switch (kind) {
    case FieldKind::BoundaryP1: return dof_of_vertex.at(node);
    case FieldKind::P2Vector: return component * static_cast<int>(nodes) + node;
    default: return node;
  }
}

std::vector<int> DofMap::element_dofs(const P2Mesh& mesh, std::size_t t, int component) const {
  std::vector<int> out;
  if (kind == FieldKind::P1Scalar) {
    const auto& tri = mesh.base.triangles[t];
    out.assign(tri.begin(), tri.end());
  } else if (kind == FieldKind::BoundaryP1) {
    throw std::logic_error("boundary dof maps have no element dofs");
  } else {
    const auto n = mesh.p2_nodes(t);
    for (int v : n) out.push_back(dof(v, component));
  }
  return out;
}

// ---------------------------------------------------------------- SparseMatrix

std::ptrdiff_t SparseMatrix::find(std::size_t i, int j) const {
  const auto b = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[i]);
  const auto e = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[i + 1]);
  const auto it = std::lower_bound(b, e, j);
  if (it == e || *it != j) return -1;
  return it - col.begin();
}

double SparseMatrix::at(std::size_t i, int j) const {
  const auto k = find(i, j);
  return k < 0 ? 0.0 : val[k];
}

void SparseMatrix::add(std::size_t i, int j, double v) {
  const auto k = find(i, j);
  if (k < 0) throw std::out_of_range(fmt::format("entry ({}, {}) outside the sparsity pattern", i, j));
  val[k] += v;
}

void SparseMatrix::set_zero() { std::fill(val.begin(), val.end(), 0.0); }

Vector SparseMatrix::multiply(const Vector& x) const {
  Vector y = Vector::Zero(static_cast<Eigen::Index>(rows));
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0;
    for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += val[k] * x[col[k]];
    y[static_cast<Eigen::Index>(i)] = s;
  }
  return y;
}

SparseMatrix SparseMatrix::transpose() const {
  SparseMatrix t;
  t.rows = cols;
  t.cols = rows;
  t.row_ptr.assign(cols + 1, 0);
  for (int c : col) ++t.row_ptr[c + 1];
  for (std::size_t i = 0; i < cols; ++i) t.row_ptr[i + 1] += t.row_ptr[i];
  t.col.resize(nnz());
  t.val.resize(nnz());
  std::vector<std::size_t> next(t.row_ptr.begin(), t.row_ptr.end() - 1);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
      const std::size_t p = next[col[k]]++;
      t.col[p] = static_cast<int>(i);
      t.val[p] = val[k];
    }
  return t;
}

Eigen::MatrixXd SparseMatrix::to_dense() const {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) d(static_cast<Eigen::Index>(i), col[k]) += val[k];
  return d;
}

SparseMatrix SparseMatrix::combine(double a, const SparseMatrix& other, double b) const {
  if (rows != other.rows || cols != other.cols) throw std::invalid_argument("matrix shapes differ");
  SparseMatrix out;
  out.rows = rows;
  out.cols = cols;
  out.row_ptr.assign(1, 0);
  for (std::size_t i = 0; i < rows; ++i) {
    std::size_t p = row_ptr[i], q = other.row_ptr[i];
    const std::size_t pe = row_ptr[i + 1], qe = other.row_ptr[i + 1];
    while (p < pe || q < qe) {
      if (q >= qe || (p < pe && col[p] < other.col[q])) {
        out.col.push_back(col[p]);
        out.val.push_back(a * val[p++]);
      } else if (p >= pe || other.col[q] < col[p]) {
        out.col.push_back(other.col[q]);
        out.val.push_back(b * other.val[q++]);
      } else {
        out.col.push_back(col[p]);
        out.val.push_back(a * val[p++] + b * other.val[q++]);
      }
    }
    out.row_ptr.push_back(out.col.size());
  }
  return out;
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  SparseMatrix m;
  m.rows = m.cols = n;
  m.row_ptr.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i) m.row_ptr[i] = i;
  m.col.resize(n);
  for (std::size_t i = 0; i < n; ++i) m.col[i] = static_cast<int>(i);
  m.val.assign(n, 1.0);
  return m;
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                         const std::vector<std::tuple<int, int, double>>& entries) {
  SparsityBuilder b(rows, cols);
  for (const auto& [i, j, v] : entries) b.add(i, j);
  SparseMatrix m = b.build();
  for (const auto& [i, j, v] : entries) m.add(i, j, v);
  return m;
}

SparsityBuilder::SparsityBuilder(std::size_t rows, std::size_t cols) : cols_(cols), rows_(rows) {}

void SparsityBuilder::add_block(std::span<const int> row_dofs, std::span<const int> col_dofs) {
  for (int i : row_dofs)
    for (int j : col_dofs) rows_[i].push_back(j);
}

void SparsityBuilder::add(int i, int j) { rows_[i].push_back(j); }

SparseMatrix SparsityBuilder::build() const {
  SparseMatrix m;
  m.rows = rows_.size();
  m.cols = cols_;
  m.row_ptr.assign(1, 0);
  std::vector<int> r;
  for (const auto& row : rows_) {
    r = row;
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    m.col.insert(m.col.end(), r.begin(), r.end());
    m.row_ptr.push_back(m.col.size());
  }
  m.val.assign(m.col.size(), 0.0);
  return m;
}

void scatter(SparseMatrix& a, std::span<const int> rows, std::span<const int> cols, const Eigen::MatrixXd& local) {
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const double v = local(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      if (v != 0.0) a.add(rows[r], cols[c], v);
    }
}

// ---------------------------------------------------------------- forms

Vec2 VelocityField::at_element(std::size_t t, const ShapeValues& p2) const {
  const auto n = mesh->p2_nodes(t);
  const auto nn = static_cast<Eigen::Index>(mesh->node_count());
  Vec2 u;
  for (int k = 0; k < 6; ++k) {
    u.x += p2.value[k] * (*dofs)[n[k]];
    u.y += p2.value[k] * (*dofs)[nn + n[k]];
  }
  return u;
}

namespace {

bool tag_selected(const std::vector<BoundaryTag>& tags, const BoundaryTag& t) {
  return std::find(tags.begin(), tags.end(), t) != tags.end();
}

void check_scalar(const DofMap& map) {
  if (map.kind != FieldKind::P1Scalar && map.kind != FieldKind::P2Scalar)
    throw std::invalid_argument("scalar forms need a P1 or P2 scalar dof map");
}

}  // namespace

SparseMatrix assemble(const Form& form, const P2Mesh& mesh, const DofMap& map) {
  check_scalar(map);
  const bool p2 = map.kind == FieldKind::P2Scalar;
  const int nloc = p2 ? 6 : 3;
  const std::size_t nt = mesh.base.triangle_count();
  const bool boundary = form.kind == FormKind::BoundaryMass || form.kind == FormKind::OutflowFlux;

  SparsityBuilder sb(map.total, map.total);
  for (std::size_t t = 0; t < nt; ++t) {
    const auto d = map.element_dofs(mesh, t);
    sb.add_block(d, d);
  }
  SparseMatrix a = sb.build();
  Eigen::MatrixXd local(nloc, nloc);

  if (!boundary) {
    int degree = form.quadrature_degree;
    if (degree == 0) {
      const int pk = p2 ? 2 : 1;
      switch (form.kind) {
        case FormKind::Mass: degree = 2 * pk; break;
        case FormKind::Diffusion: degree = 2 * pk - 2; break;
        default: degree = 2 * pk - 1 + 2; break;
      }
    }
    const Tabulation& tab = tabulate(degree);
    const auto& rule = *tab.rule;
    for (std::size_t t = 0; t < nt; ++t) {
      const ElementGeometry g = element_geometry(mesh.base, t);
      local.setZero();
      for (std::size_t q = 0; q < rule.points.size(); ++q) {
        const ShapeValues& s = p2 ? tab.p2[q] : tab.p1[q];
        const double w = rule.weights[q] * g.det;
        std::array<Vec2, 6> grad;
        for (int k = 0; k < nloc; ++k) grad[k] = g.physical_gradient(s.grad[k]);
        Vec2 u;
        if (form.kind == FormKind::Convection) u = form.velocity.at_element(t, tab.p2[q]);
        for (int i = 0; i < nloc; ++i)
          for (int j = 0; j < nloc; ++j) {
            double v = 0;
            switch (form.kind) {
              case FormKind::Mass: v = form.coefficient * s.value[j] * s.value[i]; break;
              case FormKind::Diffusion: v = form.coefficient * dot(grad[j], grad[i]); break;
              case FormKind::Convection: v = form.coefficient * dot(u, grad[j]) * s.value[i]; break;
              default: break;
            }
            local(i, j) += w * v;
          }
      }
      scatter(a, map.element_dofs(mesh, t), map.element_dofs(mesh, t), local);
    }
    return a;
  }

  const LineRule& lr = line_rule(form.kind == FormKind::OutflowFlux ? 4 : 3);
  const auto nn = static_cast<Eigen::Index>(mesh.node_count());
  for (std::size_t t = 0; t < nt; ++t) {
    const auto& tri = mesh.base.triangles[t];
    for (int k = 0; k < 3; ++k) {
      const int e = mesh.triangle_edges[t][k];
      const int be = mesh.edge_boundary[e];
      if (be < 0 || !tag_selected(form.tags, mesh.base.boundary_edges[be].tag)) continue;
      const int va = tri[k], vb = tri[(k + 1) % 3];
      const Vec2 xa = mesh.base.vertices[va], xb = mesh.base.vertices[vb];
      const double len = distance(xa, xb);
      const Vec2 normal{(xb.y - xa.y) / len, -(xb.x - xa.x) / len};
      const int ln = 3 + k;  // local index of the edge node
      std::vector<int> loc = p2 ? std::vector<int>{k, (k + 1) % 3, ln} : std::vector<int>{k, (k + 1) % 3};
      const int m = static_cast<int>(loc.size());
      Eigen::MatrixXd el = Eigen::MatrixXd::Zero(m, m);
      for (std::size_t q = 0; q < lr.points.size(); ++q) {
        const double s = lr.points[q];
        const double w = lr.weights[q] * len;
        std::array<double, 3> phi{};
        if (p2) {
          phi = edge_p2(s);
        } else {
          phi = {1 - s, s, 0};
        }
        double coef = form.coefficient;
        if (form.kind == FormKind::OutflowFlux) {
          const auto ep = edge_p2(s);
          const int nodes[3] = {va, vb, static_cast<int>(mesh.vertex_count()) + e};
          Vec2 u;
          for (int r = 0; r < 3; ++r) {
            u.x += ep[r] * (*form.velocity.dofs)[nodes[r]];
            u.y += ep[r] * (*form.velocity.dofs)[nn + nodes[r]];
          }
          coef *= dot(u, normal);
        }
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < m; ++j) el(i, j) += w * coef * phi[j] * phi[i];
      }
      const auto all = map.element_dofs(mesh, t);
      std::vector<int> d;
      for (int l : loc) d.push_back(all[l]);
      scatter(a, d, d, el);
    }
  }
  return a;
}

Vector assemble_load(const P2Mesh& mesh, const DofMap& map, const std::function<double(Vec2)>& f, int degree) {
  check_scalar(map);
  const bool p2 = map.kind == FieldKind::P2Scalar;
  const Tabulation& tab = tabulate(degree);
  Vector b = Vector::Zero(static_cast<Eigen::Index>(map.total));
  for (std::size_t t = 0; t < mesh.base.triangle_count(); ++t) {
    const ElementGeometry g = element_geometry(mesh.base, t);
    const auto d = map.element_dofs(mesh, t);
    for (std::size_t q = 0; q < tab.rule->points.size(); ++q) {
      const ShapeValues& s = p2 ? tab.p2[q] : tab.p1[q];
      const double fw = f(g.map(tab.rule->points[q])) * tab.rule->weights[q] * g.det;
      for (int i = 0; i < s.count; ++i) b[d[i]] += fw * s.value[i];
    }
  }
  return b;
}

// ---------------------------------------------------------------- constraints

void add_constraint(Constraints& c, int dof, double value) {
  const auto [it, inserted] = c.emplace(dof, value);
  if (!inserted && std::abs(it->second - value) > 1e-12)
    throw ConstraintError(fmt::format("dof {} constrained to both {} and {}", dof, it->second, value));
}

void add_constraints(Constraints& c, std::span<const std::pair<int, double>> entries) {
  for (const auto& [d, v] : entries) add_constraint(c, d, v);
}

void apply_dirichlet(SparseMatrix& a, Vector& b, const Constraints& c) {
  if (c.empty()) return;
  std::vector<char> fixed(a.rows, 0);
  std::vector<double> value(a.rows, 0.0);
  for (const auto& [d, v] : c) {
    if (d < 0 || static_cast<std::size_t>(d) >= a.rows) throw ConstraintError(fmt::format("dof {} does not exist", d));
    fixed[d] = 1;
    value[d] = v;
  }
  for (std::size_t i = 0; i < a.rows; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (fixed[i]) {
      for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
        a.val[k] = a.col[k] == static_cast<int>(i) ? 1.0 : 0.0;
      b[ii] = value[i];
      continue;
    }
    for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k) {
      if (!fixed[a.col[k]]) continue;
      b[ii] -= a.val[k] * value[a.col[k]];
      a.val[k] = 0.0;
    }
  }
  for (const auto& [d, v] : c)
    if (a.find(d, d) < 0) throw ConstraintError(fmt::format("dof {} has no diagonal entry", d));
}

void zero_constrained(Vector& r, const Constraints& c) {
  for (const auto& [d, v] : c) r[d] = 0.0;
}

}  // namespace tubeox
