#include "tubeox/meshgen.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>
#include <queue>
#include <random>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "predicates.hpp"
#include "tubeox/errors.hpp"

namespace tubeox {

namespace {

using detail::incircle;
using detail::orient2d;

constexpr double kTubeRadius = 0.5;

double size_field(const BundleGeometry& g, const std::vector<TubeCircle>& tubes, Vec2 x) {
  if (tubes.empty()) return g.interior_h;
  double dist = std::numeric_limits<double>::infinity();
  for (const auto& c : tubes) dist = std::min(dist, distance(x, c.center) - c.radius);
  return std::min(g.interior_h, g.boundary_h + g.grading * std::max(dist, 0.0));
}

std::uint64_t key_of(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Vec2 circumcenter(Vec2 a, Vec2 b, Vec2 c) {
  const Vec2 ab = b - a, ac = c - a;
  const double d = 2.0 * cross(ab, ac);
  const double ab2 = dot(ab, ab), ac2 = dot(ac, ac);
  return {a.x + (ac.y * ab2 - ab.y * ac2) / d, a.y + (ab.x * ac2 - ac.x * ab2) / d};
}

struct Tri {
  std::array<int, 3> v{};
  // nb[i] lies across the edge opposite v[i].
  std::array<int, 3> nb{-1, -1, -1};
  bool alive = true;
  bool inside = false;
};

struct Location {
  int tri = -1;
  int edge = -1;    // edge index when the point lies on an edge
  int vertex = -1;  // existing vertex when the point coincides with one
};

class Cdt {
 public:
  Cdt(Vec2 lo, Vec2 hi, std::uint64_t seed) : rng_(seed) {
    const Vec2 c = midpoint(lo, hi);
    const double m = 50.0 * std::max({hi.x - lo.x, hi.y - lo.y, 1.0});
    pts.push_back({c.x - 2 * m, c.y - m});
    pts.push_back({c.x + 2 * m, c.y - m});
    pts.push_back({c.x, c.y + 2 * m});
    vtri.assign(3, 0);
    tris.push_back(Tri{{0, 1, 2}, {-1, -1, -1}});
  }

  static constexpr int kSuperVertices = 3;

  std::vector<Vec2> pts;
  std::vector<Tri> tris;
  std::vector<int> vtri;
  std::unordered_map<std::uint64_t, BoundaryTag> segs;

  bool is_seg(int a, int b) const { return segs.count(key_of(a, b)) != 0; }

  Location locate(Vec2 p, int start) {
    int t = (start >= 0 && start < static_cast<int>(tris.size()) && tris[start].alive) ? start : any_alive();
    for (std::size_t steps = 0; steps < 100'000'000; ++steps) {
      const Tri& tr = tris[t];
      std::array<int, 3> o{};
      for (int i = 0; i < 3; ++i) o[i] = orient2d(pts[tr.v[(i + 1) % 3]], pts[tr.v[(i + 2) % 3]], p);
      const int r = static_cast<int>(rng_() % 3);
      int next = -2;
      for (int k = 0; k < 3; ++k) {
        const int i = (r + k) % 3;
        if (o[i] < 0) {
          next = tr.nb[i];
          break;
        }
      }
      if (next == -1) return {};
      if (next >= 0) {
        t = next;
        continue;
      }
      Location loc{t, -1, -1};
      const int zeros = (o[0] == 0) + (o[1] == 0) + (o[2] == 0);
      if (zeros >= 2) {
        for (int i = 0; i < 3; ++i)
          if (o[i] != 0) loc.vertex = tr.v[i];
      } else if (zeros == 1) {
        for (int i = 0; i < 3; ++i)
          if (o[i] == 0) loc.edge = i;
      }
      return loc;
    }
    throw std::logic_error("point location did not terminate");
  }

  /// Inserts p and restores the constrained Delaunay property. Returns the new
  /// vertex index, or -1 if p coincides with an existing vertex.
  int insert(Vec2 p, int hint) {
    const Location loc = locate(p, hint);
    if (loc.tri < 0) throw std::logic_error("point outside the bounding triangle");
    if (loc.vertex >= 0) return -1;
    const int pv = static_cast<int>(pts.size());
    pts.push_back(p);
    vtri.push_back(loc.tri);

    std::vector<int> fresh;
    if (loc.edge < 0) {
      const Tri t = tris[loc.tri];
      const int a = t.v[0], b = t.v[1], c = t.v[2];
      fresh = {loc.tri, new_tri(), new_tri()};
      tris[fresh[0]].v = {pv, b, c};
      tris[fresh[1]].v = {a, pv, c};
      tris[fresh[2]].v = {a, b, pv};
      link(fresh, {t.nb[0], t.nb[1], t.nb[2]});
    } else {
      const Tri t = tris[loc.tri];
      const int i = loc.edge;
      const int a = t.v[i], b = t.v[(i + 1) % 3], c = t.v[(i + 2) % 3];
      if (segs.count(key_of(b, c))) throw std::logic_error("insertion onto a constrained edge");
      const int ui = t.nb[i];
      if (ui < 0) throw std::logic_error("insertion onto the bounding triangle");
      const Tri u = tris[ui];
      const int d = apex(u, b, c);
      std::vector<int> outer;
      for (int k = 0; k < 3; ++k) {
        if (t.nb[k] != ui) outer.push_back(t.nb[k]);
        if (u.nb[k] != loc.tri) outer.push_back(u.nb[k]);
      }
      fresh = {loc.tri, ui, new_tri(), new_tri()};
      tris[fresh[0]].v = {a, b, pv};
      tris[fresh[1]].v = {a, pv, c};
      tris[fresh[2]].v = {d, c, pv};
      tris[fresh[3]].v = {d, pv, b};
      link(fresh, outer);
    }
    legalize(pv, fresh);
    refresh_flags(pv);
    return pv;
  }

  /// Triangle on the left of the directed edge a->b, or -1.
  int left_of(int a, int b) const {
    for (int t : around(a)) {
      const Tri& tr = tris[t];
      for (int k = 0; k < 3; ++k)
        if (tr.v[k] == a && tr.v[(k + 1) % 3] == b) return t;
    }
    return -1;
  }

  bool has_edge(int a, int b) const { return left_of(a, b) >= 0 || left_of(b, a) >= 0; }

  /// Triangles incident to vertex v, in rotational order.
  std::vector<int> around(int v) const {
    std::vector<int> out;
    int start = vtri[v];
    if (start < 0 || !tris[start].alive || index_in(tris[start], v) < 0) return out;
    int t = start;
    do {
      out.push_back(t);
      const Tri& tr = tris[t];
      const int i = index_in(tr, v);
      t = tr.nb[(i + 1) % 3];  // across edge (v[i+2], v[i])
    } while (t >= 0 && t != start && out.size() < 10000);
    if (t < 0) {
      t = start;
      for (;;) {
        const Tri& tr = tris[t];
        const int i = index_in(tr, v);
        t = tr.nb[(i + 2) % 3];
        if (t < 0 || t == start) break;
        out.push_back(t);
      }
    }
    return out;
  }

  void flood_flags() {
    std::vector<char> seen(tris.size(), 0);
    std::deque<int> queue;
    for (std::size_t t = 0; t < tris.size(); ++t)
      if (tris[t].alive && (tris[t].v[0] < kSuperVertices || tris[t].v[1] < kSuperVertices ||
                            tris[t].v[2] < kSuperVertices)) {
        tris[t].inside = false;
        seen[t] = 1;
        queue.push_back(static_cast<int>(t));
      }
    while (!queue.empty()) {
      const int t = queue.front();
      queue.pop_front();
      for (int i = 0; i < 3; ++i) {
        const int n = tris[t].nb[i];
        if (n < 0 || seen[n]) continue;
        seen[n] = 1;
        tris[n].inside = tris[t].inside != is_seg(tris[t].v[(i + 1) % 3], tris[t].v[(i + 2) % 3]);
        queue.push_back(n);
      }
    }
  }

  static int index_in(const Tri& t, int v) {
    for (int k = 0; k < 3; ++k)
      if (t.v[k] == v) return k;
    return -1;
  }

  static int apex(const Tri& t, int a, int b) {
    for (int k = 0; k < 3; ++k)
      if (t.v[k] != a && t.v[k] != b) return t.v[k];
    return -1;
  }

 private:
  std::vector<int> free_;
  std::mt19937_64 rng_;

  int any_alive() const {
    for (int t = static_cast<int>(tris.size()) - 1; t >= 0; --t)
      if (tris[t].alive) return t;
    throw std::logic_error("empty triangulation");
  }

  int new_tri() {
    if (!free_.empty()) {
      const int t = free_.back();
      free_.pop_back();
      tris[t] = Tri{};
      return t;
    }
    tris.push_back(Tri{});
    return static_cast<int>(tris.size()) - 1;
  }

  void link(const std::vector<int>& fresh, const std::vector<int>& outer) {
    for (int t : fresh) {
      tris[t].alive = true;
      for (int v : tris[t].v) vtri[v] = t;
    }
    for (int t : fresh) {
      for (int i = 0; i < 3; ++i) {
        const int a = tris[t].v[(i + 1) % 3], b = tris[t].v[(i + 2) % 3];
        int found = -1;
        for (int u : fresh) {
          if (u == t) continue;
          const int j = opposite_of_edge(tris[u], b, a);
          if (j >= 0) {
            found = u;
            break;
          }
        }
        if (found < 0) {
          for (int u : outer) {
            if (u < 0) continue;
            const int j = opposite_of_edge(tris[u], b, a);
            if (j >= 0) {
              found = u;
              tris[u].nb[j] = t;
              break;
            }
          }
        }
        tris[t].nb[i] = found;
      }
    }
  }

  /// Index k such that t has directed edge (a, b) opposite v[k], or -1.
  static int opposite_of_edge(const Tri& t, int a, int b) {
    for (int k = 0; k < 3; ++k)
      if (t.v[(k + 1) % 3] == a && t.v[(k + 2) % 3] == b) return k;
    return -1;
  }

  void legalize(int pv, std::vector<int> stack) {
    while (!stack.empty()) {
      const int t = stack.back();
      stack.pop_back();
      if (!tris[t].alive) continue;
      const int i = index_in(tris[t], pv);
      if (i < 0) continue;
      const int a = tris[t].v[(i + 1) % 3], b = tris[t].v[(i + 2) % 3];
      const int u = tris[t].nb[i];
      if (u < 0 || is_seg(a, b)) continue;
      const int q = apex(tris[u], a, b);
      if (incircle(pts[pv], pts[a], pts[b], pts[q]) <= 0) continue;
      // Flip (pv, a, b) + (b, a, q) -> (pv, a, q) + (pv, q, b).
      std::vector<int> outer = {tris[t].nb[(i + 1) % 3], tris[t].nb[(i + 2) % 3]};
      for (int k = 0; k < 3; ++k)
        if (tris[u].nb[k] != t) outer.push_back(tris[u].nb[k]);
      tris[t].v = {pv, a, q};
      tris[u].v = {pv, q, b};
      link({t, u}, outer);
      stack.push_back(t);
      stack.push_back(u);
    }
  }

  void refresh_flags(int pv) {
    for (int t : around(pv)) {
      Tri& tr = tris[t];
      const int i = index_in(tr, pv);
      const int a = tr.v[(i + 1) % 3], b = tr.v[(i + 2) % 3];
      const int n = tr.nb[i];
      tr.inside = n >= 0 && (tris[n].inside != is_seg(a, b));
    }
  }
};

void append_straight(const BundleGeometry& g, const std::vector<TubeCircle>& tubes, PSLG& out, Vec2 from, Vec2 to,
                     BoundaryTag tag) {
  const double len = distance(from, to);
  std::vector<double> s{0.0};
  while (s.back() < len) s.push_back(s.back() + size_field(g, tubes, from + (s.back() / len) * (to - from)));
  const std::size_t n = s.size() - 1;
  const double scale = len / s.back();
  const int first = static_cast<int>(out.points.size()) - 1;
  for (std::size_t k = 1; k <= n; ++k) {
    const Vec2 p = k == n ? to : from + (s[k] * scale / len) * (to - from);
    out.points.push_back(p);
    out.segments.push_back({{first + static_cast<int>(k) - 1, first + static_cast<int>(k)}, tag});
  }
}

void append_arc(const BundleGeometry& g, PSLG& out, Vec2 center, double theta0, double theta1, Vec2 end,
                BoundaryTag tag) {
  const int n = std::max(2, static_cast<int>(std::ceil(kTubeRadius * std::abs(theta1 - theta0) / g.boundary_h - 1e-12)));
  const int first = static_cast<int>(out.points.size()) - 1;
  for (int k = 1; k <= n; ++k) {
    const double th = theta0 + (theta1 - theta0) * k / n;
    const Vec2 p = k == n ? end : center + Vec2{kTubeRadius * std::cos(th), kTubeRadius * std::sin(th)};
    out.points.push_back(p);
    out.segments.push_back({{first + k - 1, first + k}, tag});
  }
}

Vec2 arc_midpoint(const TubeCircle& c, Vec2 a, Vec2 b) {
  const Vec2 ra = a - c.center, rb = b - c.center;
  const double ta = std::atan2(ra.y, ra.x);
  double tb = std::atan2(rb.y, rb.x);
  while (tb - ta > std::numbers::pi) tb -= 2 * std::numbers::pi;
  while (ta - tb > std::numbers::pi) tb += 2 * std::numbers::pi;
  const double tm = 0.5 * (ta + tb);
  return c.center + Vec2{c.radius * std::cos(tm), c.radius * std::sin(tm)};
}

}  // namespace

std::string to_string(Arrangement a) { return a == Arrangement::InLine ? "inline" : "staggered"; }

Arrangement arrangement_from_string(const std::string& s) {
  if (s == "inline" || s == "in-line" || s == "in_line") return Arrangement::InLine;
  if (s == "staggered") return Arrangement::Staggered;
  throw ConfigError("unknown arrangement '" + s + "'");
}

double BundleGeometry::length() const { return upstream_margin + (n_tubes - 1) * pitch + downstream_margin; }

Vec2 BundleGeometry::tube_center(int k) const {
  const double x1 = upstream_margin + k * pitch;
  const bool top = arrangement == Arrangement::Staggered && k % 2 == 1;
  return {x1, top ? strip_width : 0.0};
}

double BundleGeometry::size_at(Vec2 x) const {
  std::vector<TubeCircle> tubes;
  for (int k = 0; k < n_tubes; ++k) tubes.push_back({tube_center(k), kTubeRadius});
  return size_field(*this, tubes, x);
}

void BundleGeometry::check() const {
  if (n_tubes < 1) throw GeometryError("at least one tube is required");
  if (!(pitch > 2 * kTubeRadius)) throw GeometryError(fmt::format("pitch {} lets tubes overlap", pitch));
  if (std::abs(strip_width - 0.5 * pitch) > 1e-12)
    throw GeometryError(fmt::format("strip width {} must equal half the transverse pitch {}", strip_width, pitch));
  if (!(upstream_margin > kTubeRadius) || !(downstream_margin > kTubeRadius))
    throw GeometryError("tubes must lie inside the domain (margins > 0.5)");
  if (!(boundary_h > 0) || !(interior_h > 0) || grading < 0) throw GeometryError("mesh sizes must be positive");
}

PSLG build_geometry(const BundleGeometry& g) {
  g.check();
  if (g.boundary_h > kTubeRadius)
    throw ResolutionError(fmt::format("boundary_h = {} under-resolves tube arcs of radius 0.5", g.boundary_h));

  PSLG out;
  for (int k = 0; k < g.n_tubes; ++k) out.tubes.push_back({g.tube_center(k), kTubeRadius});
  const double L = g.length();
  const double W = g.strip_width;
  const auto sym = BoundaryTag::symmetry();

  out.points.push_back({0.0, 0.0});
  Vec2 cursor{0.0, 0.0};
  for (int k = 0; k < g.n_tubes; ++k) {
    const Vec2 c = out.tubes[k].center;
    if (c.y != 0.0) continue;
    append_straight(g, out.tubes, out, cursor, {c.x - kTubeRadius, 0.0}, sym);
    append_arc(g, out, c, std::numbers::pi, 0.0, {c.x + kTubeRadius, 0.0}, BoundaryTag::tube_wall(k + 1));
    cursor = {c.x + kTubeRadius, 0.0};
  }
  append_straight(g, out.tubes, out, cursor, {L, 0.0}, sym);
  append_straight(g, out.tubes, out, {L, 0.0}, {L, W}, BoundaryTag::outlet());
  cursor = {L, W};
  for (int k = g.n_tubes - 1; k >= 0; --k) {
    const Vec2 c = out.tubes[k].center;
    if (c.y != W) continue;
    append_straight(g, out.tubes, out, cursor, {c.x + kTubeRadius, W}, sym);
    append_arc(g, out, c, 0.0, -std::numbers::pi, {c.x - kTubeRadius, W}, BoundaryTag::tube_wall(k + 1));
    cursor = {c.x - kTubeRadius, W};
  }
  append_straight(g, out.tubes, out, cursor, {0.0, W}, sym);
  append_straight(g, out.tubes, out, {0.0, W}, {0.0, 0.0}, BoundaryTag::inlet());
  // The loop closes on point 0.
  out.points.pop_back();
  out.segments.back().v[1] = 0;
  return out;
}

Mesh triangulate(const PSLG& pslg, const BundleGeometry& g) {
  if (pslg.points.size() < 3 || pslg.segments.size() < 3) throw GeometryError("PSLG needs at least three segments");
  Vec2 lo = pslg.points[0], hi = pslg.points[0];
  for (auto p : pslg.points) {
    lo = {std::min(lo.x, p.x), std::min(lo.y, p.y)};
    hi = {std::max(hi.x, p.x), std::max(hi.y, p.y)};
  }
  Cdt cdt(lo, hi, g.seed);
  constexpr int S = Cdt::kSuperVertices;

  std::vector<int> vid(pslg.points.size(), -1);
  int hint = 0;
  for (std::size_t i = 0; i < pslg.points.size(); ++i) {
    const int v = cdt.insert(pslg.points[i], hint);
    if (v < 0) throw GeometryError(fmt::format("duplicate PSLG point {}", i));
    vid[i] = v;
    hint = cdt.vtri[v];
  }

  auto tube_of = [&](const BoundaryTag& tag) -> const TubeCircle* {
    if (!tag.is_tube_wall() || tag.tube < 1 || tag.tube > static_cast<int>(pslg.tubes.size())) return nullptr;
    return &pslg.tubes[tag.tube - 1];
  };
  auto split_point = [&](int a, int b, const BoundaryTag& tag) {
    if (const TubeCircle* c = tube_of(tag)) return arc_midpoint(*c, cdt.pts[a], cdt.pts[b]);
    return midpoint(cdt.pts[a], cdt.pts[b]);
  };

  // Recover missing boundary segments by subdivision (conforming pass).
  std::deque<std::pair<std::array<int, 2>, BoundaryTag>> pending;
  for (const auto& s : pslg.segments) pending.push_back({{vid[s.v[0]], vid[s.v[1]]}, s.tag});
  std::vector<std::pair<std::array<int, 2>, BoundaryTag>> recovered;
  while (!pending.empty()) {
    auto [e, tag] = pending.front();
    pending.pop_front();
    if (cdt.has_edge(e[0], e[1])) {
      recovered.push_back({e, tag});
      continue;
    }
    const int m = cdt.insert(split_point(e[0], e[1], tag), cdt.vtri[e[0]]);
    if (m < 0) throw GeometryError("segment recovery produced a duplicate vertex");
    pending.push_front({{m, e[1]}, tag});
    pending.push_front({{e[0], m}, tag});
    if (cdt.pts.size() > g.max_vertices + S) throw BudgetError("vertex budget exceeded during segment recovery");
  }
  for (const auto& [e, tag] : recovered) cdt.segs[key_of(e[0], e[1])] = tag;
  cdt.flood_flags();

  // Ruppert refinement.
  const double ratio_bound = std::numbers::sqrt2;
  auto interior_apex = [&](int a, int b) -> int {
    for (int t : {cdt.left_of(a, b), cdt.left_of(b, a)})
      if (t >= 0 && cdt.tris[t].inside) return Cdt::apex(cdt.tris[t], a, b);
    return -1;
  };
  auto encroaches = [&](Vec2 p, int a, int b) { return dot(cdt.pts[a] - p, cdt.pts[b] - p) < 0.0; };
  auto seg_encroached = [&](int a, int b) {
    const int q = interior_apex(a, b);
    return q >= 0 && encroaches(cdt.pts[q], a, b);
  };

  struct SegJob {
    int a, b;
    bool force;
  };
  std::deque<SegJob> seg_jobs;
  struct BadTri {
    double priority;
    std::uint64_t tie;
    int tri;
    std::array<int, 3> v;
    bool operator<(const BadTri& o) const { return priority != o.priority ? priority < o.priority : tie < o.tie; }
  };
  std::priority_queue<BadTri> bad;

  auto tri_priority = [&](int t) -> double {
    const auto& v = cdt.tris[t].v;
    const Vec2 a = cdt.pts[v[0]], b = cdt.pts[v[1]], c = cdt.pts[v[2]];
    const double lmin = std::min({distance(a, b), distance(b, c), distance(c, a)});
    const Vec2 cc = circumcenter(a, b, c);
    const double r = distance(cc, a);
    const Vec2 centroid = (1.0 / 3.0) * (a + b + c);
    const double h = size_field(g, pslg.tubes, centroid);
    const double size_excess = r * std::sqrt(3.0) / h;
    const double shape_excess = r / (ratio_bound * lmin);
    const double worst = std::max(size_excess, shape_excess);
    return worst > 1.0 + 1e-12 ? worst : 0.0;
  };
  auto consider_tri = [&](int t) {
    if (!cdt.tris[t].alive || !cdt.tris[t].inside) return;
    const double pr = tri_priority(t);
    if (pr > 0) {
      const auto& v = cdt.tris[t].v;
      const std::uint64_t tie = mix(g.seed ^ mix(key_of(v[0], v[1]) ^ mix(static_cast<std::uint64_t>(v[2]))));
      bad.push({pr, tie, t, v});
    }
  };
  auto after_insert = [&](int pv) {
    for (int t : cdt.around(pv)) {
      consider_tri(t);
      const auto& tr = cdt.tris[t];
      const int i = Cdt::index_in(tr, pv);
      const int a = tr.v[(i + 1) % 3], b = tr.v[(i + 2) % 3];
      if (cdt.is_seg(a, b) && tr.inside && encroaches(cdt.pts[pv], a, b)) seg_jobs.push_back({a, b, false});
    }
  };
  auto split_segment = [&](int a, int b) {
    const auto it = cdt.segs.find(key_of(a, b));
    const BoundaryTag tag = it->second;
    const Vec2 p = split_point(a, b, tag);
    cdt.segs.erase(it);
    const int m = cdt.insert(p, cdt.vtri[a]);
    if (m < 0) throw GeometryError("segment split produced a duplicate vertex");
    cdt.segs[key_of(a, m)] = tag;
    cdt.segs[key_of(m, b)] = tag;
    for (const auto& [x, y] : {std::pair{a, m}, std::pair{m, b}})
      if (seg_encroached(x, y)) seg_jobs.push_back({x, y, false});
    after_insert(m);
  };

  for (const auto& [key, tag] : cdt.segs) {
    const int a = static_cast<int>(key >> 32), b = static_cast<int>(key & 0xffffffffu);
    if (seg_encroached(a, b)) seg_jobs.push_back({a, b, false});
  }
  // Deterministic job order independent of hash-map iteration.
  std::sort(seg_jobs.begin(), seg_jobs.end(),
            [](const SegJob& x, const SegJob& y) { return std::tie(x.a, x.b) < std::tie(y.a, y.b); });
  for (int t = 0; t < static_cast<int>(cdt.tris.size()); ++t) consider_tri(t);

  std::unordered_set<std::uint64_t> abandoned;
  for (;;) {
    if (cdt.pts.size() > g.max_vertices + S)
      throw BudgetError(fmt::format("mesh refinement exceeded the budget of {} vertices", g.max_vertices));
    if (!seg_jobs.empty()) {
      const SegJob job = seg_jobs.front();
      seg_jobs.pop_front();
      if (!cdt.is_seg(job.a, job.b)) continue;
      if (!job.force && !seg_encroached(job.a, job.b)) continue;
      split_segment(job.a, job.b);
      continue;
    }
    if (bad.empty()) break;
    const BadTri b = bad.top();
    bad.pop();
    const Tri& tr = cdt.tris[b.tri];
    if (!tr.alive || tr.v != b.v || !tr.inside) continue;
    const Vec2 pa = cdt.pts[b.v[0]], pb = cdt.pts[b.v[1]], pc = cdt.pts[b.v[2]];
    const Vec2 cc = circumcenter(pa, pb, pc);
    const Vec2 from = (1.0 / 3.0) * (pa + pb + pc);

    // Walk from the triangle toward its circumcenter; a segment in the way
    // is encroached and gets split instead.
    int t = b.tri;
    std::optional<std::pair<int, int>> blocked;
    for (int steps = 0; steps < 1'000'000; ++steps) {
      const Tri& cur = cdt.tris[t];
      int exit_edge = -1;
      int fallback = -1;
      for (int i = 0; i < 3; ++i) {
        const Vec2 ea = cdt.pts[cur.v[(i + 1) % 3]], eb = cdt.pts[cur.v[(i + 2) % 3]];
        if (orient2d(ea, eb, cc) >= 0) continue;
        fallback = i;
        if (orient2d(from, cc, ea) <= 0 && orient2d(from, cc, eb) >= 0) exit_edge = i;
      }
      if (fallback < 0) break;
      if (exit_edge < 0) exit_edge = fallback;
      const int ea = cur.v[(exit_edge + 1) % 3], eb = cur.v[(exit_edge + 2) % 3];
      if (cdt.is_seg(ea, eb) || cur.nb[exit_edge] < 0) {
        blocked = {ea, eb};
        break;
      }
      t = cur.nb[exit_edge];
    }
    if (blocked) {
      if (cdt.is_seg(blocked->first, blocked->second)) {
        seg_jobs.push_back({blocked->first, blocked->second, true});
        bad.push(b);
      }
      continue;
    }

    // Segments the circumcenter would encroach, found over its prospective cavity.
    std::vector<std::pair<int, int>> encroached;
    {
      std::vector<int> cavity{t};
      std::unordered_set<int> in_cavity{t};
      for (std::size_t k = 0; k < cavity.size(); ++k) {
        const Tri& ct = cdt.tris[cavity[k]];
        for (int i = 0; i < 3; ++i) {
          const int a = ct.v[(i + 1) % 3], bb = ct.v[(i + 2) % 3];
          if (cdt.is_seg(a, bb)) {
            if (encroaches(cc, a, bb)) encroached.push_back({a, bb});
            continue;
          }
          const int n = ct.nb[i];
          if (n < 0 || in_cavity.count(n)) continue;
          const Tri& nt = cdt.tris[n];
          if (incircle(cdt.pts[nt.v[0]], cdt.pts[nt.v[1]], cdt.pts[nt.v[2]], cc) > 0) {
            in_cavity.insert(n);
            cavity.push_back(n);
          }
        }
      }
    }
    if (!encroached.empty()) {
      for (const auto& [a, bb] : encroached) seg_jobs.push_back({a, bb, true});
      bad.push(b);
      continue;
    }
    const std::uint64_t sig = key_of(b.v[0], b.v[1]) ^ mix(static_cast<std::uint64_t>(b.v[2]));
    const int pv = cdt.insert(cc, t);
    if (pv < 0) {
      abandoned.insert(sig);
      continue;
    }
    after_insert(pv);
  }

  // Extract the interior triangulation.
  Mesh mesh;
  mesh.tubes = pslg.tubes;
  std::vector<int> new_id(cdt.pts.size(), -1);
  for (const auto& tr : cdt.tris) {
    if (!tr.alive || !tr.inside) continue;
    for (int v : tr.v) {
      if (v < S) throw GeometryError("interior triangle touches the bounding triangle");
      new_id[v] = 0;
    }
  }
  for (std::size_t v = S; v < cdt.pts.size(); ++v) {
    if (new_id[v] < 0) continue;
    new_id[v] = static_cast<int>(mesh.vertices.size());
    mesh.vertices.push_back(cdt.pts[v]);
  }
  for (const auto& tr : cdt.tris)
    if (tr.alive && tr.inside) mesh.triangles.push_back({new_id[tr.v[0]], new_id[tr.v[1]], new_id[tr.v[2]]});
  std::vector<std::pair<std::uint64_t, BoundaryTag>> segs(cdt.segs.begin(), cdt.segs.end());
  std::sort(segs.begin(), segs.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  for (const auto& [key, tag] : segs) {
    const int a = new_id[key >> 32], b = new_id[key & 0xffffffffu];
    if (a < 0 || b < 0) throw GeometryError("boundary segment lost during refinement");
    mesh.boundary_edges.push_back({{a, b}, tag});
  }
  check_mesh(mesh);
  return mesh;
}

std::string to_string(GridLevel l) {
  switch (l) {
    case GridLevel::Coarse: return "coarse";
    case GridLevel::Basic: return "basic";
    case GridLevel::Fine: return "fine";
  }
  return "basic";
}

GridLevel grid_level_from_string(const std::string& s) {
  if (s == "coarse") return GridLevel::Coarse;
  if (s == "basic" || s == "medium") return GridLevel::Basic;
  if (s == "fine") return GridLevel::Fine;
  throw ConfigError("unknown grid level '" + s + "'");
}

BundleGeometry with_grid_level(BundleGeometry g, GridLevel level) {
  switch (level) {
    case GridLevel::Coarse:
      g.boundary_h = 0.0383;
      g.interior_h = 0.086;
      break;
    case GridLevel::Basic:
      g.boundary_h = 0.0224;
      g.interior_h = 0.0504;
      break;
    case GridLevel::Fine:
      g.boundary_h = 0.0128;
      g.interior_h = 0.0289;
      break;
  }
  return g;
}

GridSuite grid_suite(const BundleGeometry& g) {
  return {generate_mesh(with_grid_level(g, GridLevel::Coarse)), generate_mesh(with_grid_level(g, GridLevel::Basic)),
          generate_mesh(with_grid_level(g, GridLevel::Fine))};
}

}  // namespace tubeox
