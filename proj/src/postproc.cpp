#include "tubeox/postproc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include <fmt/format.h>

#include "tubeox/errors.hpp"

namespace tubeox {

namespace {

std::uint64_t directed_key(int a, int b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

std::unordered_map<int, std::size_t> index_of(const std::vector<int>& nodes) {
  std::unordered_map<int, std::size_t> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) out.emplace(nodes[i], i);
  return out;
}

void check_tube(const Mesh& mesh, int tube) {
  if (tube < 1 || tube > mesh.tube_count())
    throw SelectionError(fmt::format("tube {} does not exist (mesh has {})", tube, mesh.tube_count()));
}

}  // namespace

// ---------------------------------------------------------------- streamfunction

Vector vorticity(const P2Mesh& mesh, const FlowField& flow) {
  const DofMap p1 = DofMap::p1(mesh);
  const auto nn = static_cast<Eigen::Index>(mesh.node_count());
  const Tabulation& tab = tabulate(2);
  Vector b = Vector::Zero(static_cast<Eigen::Index>(mesh.vertex_count()));
  for (std::size_t t = 0; t < mesh.base.triangle_count(); ++t) {
    const ElementGeometry g = element_geometry(mesh.base, t);
    const auto nodes = mesh.p2_nodes(t);
    const auto& tri = mesh.base.triangles[t];
    for (std::size_t q = 0; q < tab.rule->weights.size(); ++q) {
      const ShapeValues& s2 = tab.p2[q];
      const ShapeValues& s1 = tab.p1[q];
      double w = 0.0;
      for (int a = 0; a < 6; ++a) {
        const Vec2 gr = g.physical_gradient(s2.grad[a]);
        w += gr.x * flow.u[nn + nodes[a]] - gr.y * flow.u[nodes[a]];
      }
      const double jw = tab.rule->weights[q] * g.det;
      for (int i = 0; i < 3; ++i) b[tri[i]] += jw * w * s1.value[i];
    }
  }
  return lu_solve(assemble(Form{FormKind::Mass}, mesh, p1), b).first;
}

std::vector<int> boundary_loop(const Mesh& mesh) {
  std::unordered_map<std::uint64_t, char> directed;
  for (const auto& tri : mesh.triangles)
    for (int k = 0; k < 3; ++k) directed.emplace(directed_key(tri[k], tri[(k + 1) % 3]), 1);
  std::unordered_map<int, int> next;
  for (const auto& e : mesh.boundary_edges) {
    if (directed.count(directed_key(e.v[0], e.v[1])))
      next[e.v[0]] = e.v[1];
    else
      next[e.v[1]] = e.v[0];
  }
  if (next.empty()) throw TopologyError("mesh has no boundary");
  int start = next.begin()->first;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [v, w] : next) {
    const double r = norm(mesh.vertices[v]);
    if (r < best || (r == best && v < start)) {
      best = r;
      start = v;
    }
  }
  std::vector<int> loop{start};
  for (int v = next.at(start); v != start; v = next.at(v)) {
    loop.push_back(v);
    if (loop.size() > next.size()) throw TopologyError("boundary walk does not close");
  }
  if (loop.size() != next.size())
    throw TopologyError(fmt::format("boundary has several loops ({} of {} vertices on the first)", loop.size(),
                                    next.size()));
  return loop;
}

Vector streamfunction(const P2Mesh& mesh, const FlowField& flow) {
  const DofMap p1 = DofMap::p1(mesh);
  const auto nn = static_cast<Eigen::Index>(mesh.node_count());
  const auto nv = static_cast<int>(mesh.vertex_count());
  auto vel = [&](int node) { return Vec2{flow.u[node], flow.u[nn + node]}; };

  const std::vector<int> loop = boundary_loop(mesh.base);
  Constraints bc;
  double psi = 0.0;
  for (std::size_t i = 0; i < loop.size(); ++i) {
    const int a = loop[i];
    const int b = loop[(i + 1) % loop.size()];
    bc[a] = psi;
    const Vec2 d = mesh.base.vertices[b] - mesh.base.vertices[a];
    const Vec2 n{d.y, -d.x};
    const Vec2 um = vel(nv + mesh.find_edge(a, b));
    psi += (dot(vel(a), n) + 4 * dot(um, n) + dot(vel(b), n)) / 6.0;
  }

  const SparseMatrix mass = assemble(Form{FormKind::Mass}, mesh, p1);
  SparseMatrix k = assemble(Form{FormKind::Diffusion, 1.0}, mesh, p1);
  Vector rhs = mass.multiply(vorticity(mesh, flow));
  apply_dirichlet(k, rhs, bc);
  return lu_solve(k, rhs).first;
}

InteriorExtrema interior_extrema(const Mesh& mesh, const Vector& psi) {
  const std::size_t nv = mesh.vertex_count();
  std::vector<char> boundary(nv, 0);
  for (const auto& e : mesh.boundary_edges) boundary[e.v[0]] = boundary[e.v[1]] = 1;
  std::vector<char> lower(nv, 1), higher(nv, 1);
  for (const auto& tri : mesh.triangles)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        if (i == j) continue;
        const int a = tri[i], b = tri[j];
        if (!(psi[a] < psi[b])) lower[a] = 0;
        if (!(psi[a] > psi[b])) higher[a] = 0;
      }
  InteriorExtrema out;
  for (std::size_t v = 0; v < nv; ++v) {
    if (boundary[v]) continue;
    if (lower[v]) out.minima.push_back(static_cast<int>(v));
    if (higher[v]) out.maxima.push_back(static_cast<int>(v));
  }
  return out;
}

namespace {

struct Band {
  double lo, hi, x0, x1;
};

Band gap_band(const P2Mesh& mesh, const Vector& psi, int k) {
  const Mesh& m = mesh.base;
  if (k < 1 || k >= m.tube_count())
    throw SelectionError(fmt::format("no gap after tube {} (mesh has {} tubes)", k, m.tube_count()));
  const std::vector<int> loop = boundary_loop(m);
  // ψ at the start corner and at the opposite symmetry line.
  double hi = psi[loop.front()];
  double y_max = -std::numeric_limits<double>::infinity();
  for (int v : loop)
    if (m.vertices[v].y > y_max || (m.vertices[v].y == y_max && m.vertices[v].x < 0.5)) {
      y_max = m.vertices[v].y;
      hi = psi[v];
    }
  const double lo = psi[loop.front()];
  return {std::min(lo, hi), std::max(lo, hi), m.tubes[k - 1].center.x, m.tubes[k].center.x};
}

double excursion(const Band& band, double v) { return std::max({0.0, band.lo - v, v - band.hi}); }

}  // namespace

double vortex_strength(const P2Mesh& mesh, const Vector& psi, int k) {
  const Band band = gap_band(mesh, psi, k);
  double s = 0.0;
  for (std::size_t v = 0; v < mesh.vertex_count(); ++v) {
    const double x = mesh.base.vertices[v].x;
    if (x > band.x0 && x < band.x1) s = std::max(s, excursion(band, psi[static_cast<Eigen::Index>(v)]));
  }
  return s;
}

std::vector<int> gap_extrema(const P2Mesh& mesh, const Vector& psi, int k) {
  const Band band = gap_band(mesh, psi, k);
  const InteriorExtrema ex = interior_extrema(mesh.base, psi);
  std::vector<int> out;
  for (const auto* list : {&ex.minima, &ex.maxima})
    for (int v : *list) {
      const double x = mesh.base.vertices[v].x;
      if (x > band.x0 && x < band.x1 && excursion(band, psi[v]) > 0) out.push_back(v);
    }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------- sampling

PointLocator::PointLocator(const Mesh& mesh) : mesh_(&mesh) {
  if (mesh.vertices.empty()) throw GeometryError("cannot locate points in an empty mesh");
  lo_ = hi_ = mesh.vertices.front();
  for (const Vec2& p : mesh.vertices) {
    lo_ = {std::min(lo_.x, p.x), std::min(lo_.y, p.y)};
    hi_ = {std::max(hi_.x, p.x), std::max(hi_.y, p.y)};
  }
  const double lx = std::max(hi_.x - lo_.x, 1e-300), ly = std::max(hi_.y - lo_.y, 1e-300);
  const double n = std::max<double>(1.0, static_cast<double>(mesh.triangle_count()) / 2.0);
  nx_ = std::max(1, static_cast<int>(std::ceil(std::sqrt(n * lx / ly))));
  ny_ = std::max(1, static_cast<int>(std::ceil(n / nx_)));
  cells_.assign(static_cast<std::size_t>(nx_) * ny_, {});
  auto cell = [&](double v, double lo, double len, int count) {
    return std::clamp(static_cast<int>((v - lo) / len * count), 0, count - 1);
  };
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles[t];
    Vec2 a = mesh.vertices[tri[0]], b = a;
    for (int k = 1; k < 3; ++k) {
      const Vec2 p = mesh.vertices[tri[k]];
      a = {std::min(a.x, p.x), std::min(a.y, p.y)};
      b = {std::max(b.x, p.x), std::max(b.y, p.y)};
    }
    const int i0 = cell(a.x, lo_.x, lx, nx_), i1 = cell(b.x, lo_.x, lx, nx_);
    const int j0 = cell(a.y, lo_.y, ly, ny_), j1 = cell(b.y, lo_.y, ly, ny_);
    for (int j = j0; j <= j1; ++j)
      for (int i = i0; i <= i1; ++i) cells_[static_cast<std::size_t>(j) * nx_ + i].push_back(t);
  }
}

std::optional<PointLocator::Hit> PointLocator::locate(Vec2 p) const {
  const double lx = std::max(hi_.x - lo_.x, 1e-300), ly = std::max(hi_.y - lo_.y, 1e-300);
  const double tol = 1e-12 * std::max(lx, ly);
  if (p.x < lo_.x - tol || p.x > hi_.x + tol || p.y < lo_.y - tol || p.y > hi_.y + tol) return std::nullopt;
  const int i = std::clamp(static_cast<int>((p.x - lo_.x) / lx * nx_), 0, nx_ - 1);
  const int j = std::clamp(static_cast<int>((p.y - lo_.y) / ly * ny_), 0, ny_ - 1);
  std::optional<Hit> best;
  double best_min = -std::numeric_limits<double>::infinity();
  for (std::size_t t : cells_[static_cast<std::size_t>(j) * nx_ + i]) {
    const auto& tri = mesh_->triangles[t];
    const Vec2 a = mesh_->vertices[tri[0]], b = mesh_->vertices[tri[1]], c = mesh_->vertices[tri[2]];
    const double det = twice_signed_area(a, b, c);
    const double l0 = twice_signed_area(p, b, c) / det;
    const double l1 = twice_signed_area(a, p, c) / det;
    const double l2 = 1.0 - l0 - l1;
    const double lmin = std::min({l0, l1, l2});
    if (lmin >= 0.0) return Hit{t, {l0, l1, l2}};
    if (lmin > -1e-10 && lmin > best_min) {
      best_min = lmin;
      best = Hit{t, {l0, l1, l2}};
    }
  }
  return best;
}

ScalarField flow_component(const P2Mesh& mesh, const FlowField& flow, const std::string& name) {
  const auto nn = static_cast<Eigen::Index>(mesh.node_count());
  if (name == "u1") return {FieldSpace::P2, flow.u.head(nn)};
  if (name == "u2") return {FieldSpace::P2, flow.u.segment(nn, nn)};
  if (name == "p") return {FieldSpace::P1, flow.p};
  throw SelectionError(fmt::format("unknown flow component '{}'", name));
}

double evaluate(const P2Mesh& mesh, const ScalarField& f, const PointLocator::Hit& hit) {
  if (f.space == FieldSpace::P1) {
    const auto& tri = mesh.base.triangles[hit.triangle];
    return hit.bary[0] * f.values[tri[0]] + hit.bary[1] * f.values[tri[1]] + hit.bary[2] * f.values[tri[2]];
  }
  const ShapeValues s = shape_eval(ElementKind::P2, hit.bary);
  const auto nodes = mesh.p2_nodes(hit.triangle);
  double v = 0.0;
  for (int a = 0; a < 6; ++a) v += s.value[a] * f.values[nodes[a]];
  return v;
}

std::size_t MidlineProfile::gaps() const {
  return static_cast<std::size_t>(std::count_if(value.begin(), value.end(), [](const auto& v) { return !v; }));
}

MidlineProfile midline_profile(const P2Mesh& mesh, const ScalarField& f, double strip_width, int n_samples,
                               const std::string& name) {
  const PointLocator loc(mesh.base);
  return midline_profile(mesh, loc, f, strip_width, n_samples, name);
}

MidlineProfile midline_profile(const P2Mesh& mesh, const PointLocator& loc, const ScalarField& f, double strip_width,
                               int n_samples, const std::string& name) {
  if (n_samples < 2) throw ConfigError("a midline profile needs at least two samples");
  double x_max = 0.0;
  for (const Vec2& p : mesh.base.vertices) x_max = std::max(x_max, p.x);
  MidlineProfile out;
  out.field = name;
  const double y = 0.5 * strip_width;
  for (int i = 0; i < n_samples; ++i) {
    const double x = x_max * i / (n_samples - 1);
    out.x.push_back(x);
    const auto hit = loc.locate({x, y});
    out.value.push_back(hit ? std::optional<double>(evaluate(mesh, f, *hit)) : std::nullopt);
  }
  return out;
}

namespace {

void check_aligned(const MidlineProfile& a, const MidlineProfile& b) {
  if (a.x.size() != b.x.size())
    throw AlignmentError(fmt::format("profiles have {} and {} samples", a.x.size(), b.x.size()));
  for (std::size_t i = 0; i < a.x.size(); ++i)
    if (std::abs(a.x[i] - b.x[i]) > 1e-12 * std::max(1.0, std::abs(a.x[i])))
      throw AlignmentError(fmt::format("sample {} at x = {} versus {}", i, a.x[i], b.x[i]));
}

}  // namespace

std::vector<DeviationCurve> deviation_curves(const MidlineProfile& reference, const std::vector<MidlineProfile>& others,
                                             double scale) {
  std::vector<DeviationCurve> out;
  for (const auto& o : others) {
    check_aligned(reference, o);
    DeviationCurve c;
    c.x = reference.x;
    for (std::size_t i = 0; i < o.x.size(); ++i) {
      if (reference.value[i] && o.value[i]) {
        const double d = (*o.value[i] - *reference.value[i]) * scale;
        c.value.push_back(d);
        c.max_abs = std::max(c.max_abs, std::abs(d));
      } else {
        c.value.push_back(std::nullopt);
      }
    }
    out.push_back(std::move(c));
  }
  return out;
}

double profile_l2_distance(const MidlineProfile& a, const MidlineProfile& b) {
  check_aligned(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < a.x.size(); ++i) {
    if (!(a.value[i] && b.value[i] && a.value[i + 1] && b.value[i + 1])) continue;
    const double e0 = *a.value[i] - *b.value[i];
    const double e1 = *a.value[i + 1] - *b.value[i + 1];
    s += 0.5 * (e0 * e0 + e1 * e1) * (a.x[i + 1] - a.x[i]);
  }
  return std::sqrt(s);
}

// ---------------------------------------------------------------- transport observables

double outlet_average(const P2Mesh& mesh, const Vector& c) {
  double integral = 0.0, length = 0.0;
  for (const auto& e : mesh.base.boundary_edges) {
    if (e.tag != BoundaryTag::outlet()) continue;
    const double len = boundary_edge_length(mesh.base, e);
    const double c0 = c[e.v[0]], c1 = c[e.v[1]];
    integral += len * (c0 + 4 * 0.5 * (c0 + c1) + c1) / 6.0;
    length += len;
  }
  if (length == 0.0) throw EmptySelectionError("mesh has no outlet edges");
  return integral / length;
}

FilmProfile film_profile(const TransportModel& model, const OxidationState& state, int tube) {
  const P2Mesh& mesh = model.mesh();
  check_tube(mesh.base, tube);
  const Vec2 center = mesh.base.tubes[tube - 1].center;
  const auto where = index_of(model.wall().nodes);
  const BoundaryNodes bn = boundary_nodes(mesh, BoundaryTag::tube_wall(tube));
  std::vector<std::pair<double, double>> pts;
  for (int v : bn.nodes) {
    const Vec2 r = mesh.base.vertices[v] - center;
    pts.emplace_back(std::atan2(std::abs(r.y), -r.x), state.d[static_cast<Eigen::Index>(where.at(v))]);
  }
  std::sort(pts.begin(), pts.end());
  FilmProfile out;
  out.tube = tube;
  out.t = state.t;
  for (const auto& [th, d] : pts) {
    out.theta.push_back(th);
    out.d.push_back(d);
  }
  return out;
}

double oxide_mass(const TransportModel& model, const OxidationState& state, int tube) {
  const P2Mesh& mesh = model.mesh();
  check_tube(mesh.base, tube);
  const auto where = index_of(model.wall().nodes);
  const BoundaryNodes bn = boundary_nodes(mesh, BoundaryTag::tube_wall(tube));
  double m = 0.0;
  for (std::size_t i = 0; i < bn.size(); ++i)
    m += bn.weights[i] * state.d[static_cast<Eigen::Index>(where.at(bn.nodes[i]))];
  return 2.0 * m;
}

}  // namespace tubeox
