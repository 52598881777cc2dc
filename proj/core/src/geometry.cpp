#include "cpabf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include "cpabf/numfmt.hpp"

namespace cpabf {

double orient2d(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                const Eigen::Vector2d& c) {
  return (b.x() - a.x()) * (c.y() - a.y()) -
         (b.y() - a.y()) * (c.x() - a.x());
}

namespace {

// d strictly inside the circumcircle of CCW triangle (a, b, c).
// Cocircular configurations (|det| below a scale-aware cutoff) count as
// outside, so ties keep whichever diagonal was created first.
bool incircle_strict(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                     const Eigen::Vector2d& c, const Eigen::Vector2d& d) {
  const double adx = a.x() - d.x(), ady = a.y() - d.y();
  const double bdx = b.x() - d.x(), bdy = b.y() - d.y();
  const double cdx = c.x() - d.x(), cdy = c.y() - d.y();
  const double ad2 = adx * adx + ady * ady;
  const double bd2 = bdx * bdx + bdy * bdy;
  const double cd2 = cdx * cdx + cdy * cdy;
  const double det = adx * (bdy * cd2 - bd2 * cdy) -
                     ady * (bdx * cd2 - bd2 * cdx) +
                     ad2 * (bdx * cdy - bdy * cdx);
  const double mx = std::max({std::abs(adx), std::abs(bdx), std::abs(cdx)});
  const double my = std::max({std::abs(ady), std::abs(bdy), std::abs(cdy)});
  const double m2 = std::max({ad2, bd2, cd2});
  const double tol = 1e-11 * mx * my * m2;
  return det > tol;
}

struct BWTriangle {
  std::array<int, 3> v;    // CCW
  std::array<int, 3> nbr;  // across the edge opposite v[k]; -1 = none
  bool alive = true;
};

class Builder {
 public:
  explicit Builder(const std::vector<Eigen::Vector2d>& points)
      : pts_(points), n_real_(static_cast<int>(points.size())) {
    Eigen::Vector2d lo = pts_[0], hi = pts_[0];
    for (const auto& p : pts_) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const Eigen::Vector2d center = 0.5 * (lo + hi);
    double scale = std::max({(hi - lo).x(), (hi - lo).y(), 1e-12});
    // Round the span up to a power of two so grid inputs keep exact
    // binary coordinates inside the predicates.
    scale = std::exp2(std::ceil(std::log2(scale)));
    const double m = 1024.0 * scale;
    pts_.push_back(center + Eigen::Vector2d(0.0, 2.0 * m));
    pts_.push_back(center + Eigen::Vector2d(-2.0 * m, -m));
    pts_.push_back(center + Eigen::Vector2d(2.0 * m, -m));
    tris_.push_back({{n_real_, n_real_ + 1, n_real_ + 2}, {-1, -1, -1}, true});
    for (int z = 0; z < n_real_; ++z) insert(z);
  }

  // Alive triangles made of real vertices only, in canonical order.
  std::vector<Simplex> finalize() const {
    std::vector<std::array<int, 3>> out;
    for (const auto& t : tris_) {
      if (!t.alive) continue;
      if (t.v[0] >= n_real_ || t.v[1] >= n_real_ || t.v[2] >= n_real_)
        continue;
      out.push_back(t.v);
    }
    std::sort(out.begin(), out.end(),
              [](const std::array<int, 3>& a, const std::array<int, 3>& b) {
                auto sa = a, sb = b;
                std::sort(sa.begin(), sa.end());
                std::sort(sb.begin(), sb.end());
                return sa < sb;
              });
    std::vector<Simplex> res;
    res.reserve(out.size());
    for (const auto& v : out) res.push_back(Simplex{v});
    return res;
  }

 private:
  const Eigen::Vector2d& pt(int i) const {
    return pts_[static_cast<std::size_t>(i)];
  }

  double edge_tol(const Eigen::Vector2d& a, const Eigen::Vector2d& b) const {
    return 1e-12 * std::max(1.0, (a - b).squaredNorm());
  }

  // Walk to a triangle containing p (boundaries inclusive).
  int walk_locate(const Eigen::Vector2d& p) const {
    int cur = hint_;
    if (cur < 0 || cur >= static_cast<int>(tris_.size()) ||
        !tris_[static_cast<std::size_t>(cur)].alive) {
      cur = -1;
      for (int i = static_cast<int>(tris_.size()) - 1; i >= 0; --i) {
        if (tris_[static_cast<std::size_t>(i)].alive) {
          cur = i;
          break;
        }
      }
    }
    std::size_t steps = 0;
    const std::size_t max_steps = tris_.size() + 8;
    while (steps++ < max_steps) {
      const BWTriangle& t = tris_[static_cast<std::size_t>(cur)];
      int worst = -1;
      double worst_val = 0.0;
      for (int k = 0; k < 3; ++k) {
        const Eigen::Vector2d& a = pt(t.v[static_cast<std::size_t>(k)]);
        const Eigen::Vector2d& b = pt(t.v[static_cast<std::size_t>((k + 1) % 3)]);
        const double o = orient2d(a, b, p);
        const double tol = edge_tol(a, b);
        if (o < -tol && o < worst_val) {
          worst_val = o;
          worst = (k + 2) % 3;  // neighbor slot across edge (v[k], v[k+1])
        }
      }
      if (worst < 0) return cur;
      const int nb = t.nbr[static_cast<std::size_t>(worst)];
      if (nb < 0) break;
      cur = nb;
    }
    // Walking failed (should not happen inside the super-triangle): scan.
    for (std::size_t i = 0; i < tris_.size(); ++i) {
      const BWTriangle& t = tris_[i];
      if (!t.alive) continue;
      bool in = true;
      for (int k = 0; k < 3 && in; ++k) {
        const Eigen::Vector2d& a = pt(t.v[static_cast<std::size_t>(k)]);
        const Eigen::Vector2d& b = pt(t.v[static_cast<std::size_t>((k + 1) % 3)]);
        in = orient2d(a, b, p) >= -edge_tol(a, b);
      }
      if (in) return static_cast<int>(i);
    }
    throw DegenerateInput("delaunay: point outside super-triangle bounds");
  }

  void insert(int z) {
    const Eigen::Vector2d p = pt(z);
    const int t0 = walk_locate(p);

    // Seed the cavity with the containing triangle; when p sits on one of
    // its edges the across-triangle contains p too and must be split.
    std::vector<int> bad;
    std::unordered_set<int> in_bad;
    auto push_bad = [&](int ti) {
      if (in_bad.insert(ti).second) bad.push_back(ti);
    };
    push_bad(t0);
    {
      const BWTriangle& t = tris_[static_cast<std::size_t>(t0)];
      for (int k = 0; k < 3; ++k) {
        const Eigen::Vector2d& a = pt(t.v[static_cast<std::size_t>(k)]);
        const Eigen::Vector2d& b = pt(t.v[static_cast<std::size_t>((k + 1) % 3)]);
        if (std::abs(orient2d(a, b, p)) <= edge_tol(a, b)) {
          const int nb = t.nbr[static_cast<std::size_t>((k + 2) % 3)];
          if (nb >= 0) push_bad(nb);
        }
      }
    }
    for (std::size_t qi = 0; qi < bad.size(); ++qi) {
      const BWTriangle& t = tris_[static_cast<std::size_t>(bad[qi])];
      for (int k = 0; k < 3; ++k) {
        const int nb = t.nbr[static_cast<std::size_t>(k)];
        if (nb < 0 || in_bad.count(nb)) continue;
        const BWTriangle& u = tris_[static_cast<std::size_t>(nb)];
        if (incircle_strict(pt(u.v[0]), pt(u.v[1]), pt(u.v[2]), p))
          push_bad(nb);
      }
    }

    // Cavity boundary, CCW around p.
    struct BEdge {
      int a, b, outside, outside_slot;
    };
    std::vector<BEdge> boundary;
    for (int ti : bad) {
      const BWTriangle& t = tris_[static_cast<std::size_t>(ti)];
      for (int k = 0; k < 3; ++k) {
        const int nb = t.nbr[static_cast<std::size_t>(k)];
        if (nb >= 0 && in_bad.count(nb)) continue;
        const int a = t.v[static_cast<std::size_t>((k + 1) % 3)];
        const int b = t.v[static_cast<std::size_t>((k + 2) % 3)];
        int outside_slot = -1;
        if (nb >= 0) {
          const BWTriangle& u = tris_[static_cast<std::size_t>(nb)];
          for (int j = 0; j < 3; ++j) {
            if (u.nbr[static_cast<std::size_t>(j)] == ti) outside_slot = j;
          }
        }
        boundary.push_back({a, b, nb, outside_slot});
      }
    }
    if (boundary.size() < 3)
      throw DegenerateInput("delaunay: coincident input points");

    for (int ti : bad) tris_[static_cast<std::size_t>(ti)].alive = false;

    // Fan the cavity from p. New triangle for edge (a, b) is (p, a, b);
    // its slot-1 neighbor lies across (b, p), slot-2 across (p, a).
    std::unordered_map<int, int> tri_by_first;   // e.a -> new triangle id
    std::unordered_map<int, int> tri_by_second;  // e.b -> new triangle id
    std::vector<int> new_ids(boundary.size());
    for (std::size_t j = 0; j < boundary.size(); ++j) {
      const BEdge& e = boundary[j];
      if (orient2d(p, pt(e.a), pt(e.b)) <= 0.0)
        throw DegenerateInput("delaunay: degenerate cavity fan");
      const int id = static_cast<int>(tris_.size());
      tris_.push_back({{z, e.a, e.b}, {e.outside, -1, -1}, true});
      if (e.outside >= 0 && e.outside_slot >= 0)
        tris_[static_cast<std::size_t>(e.outside)]
            .nbr[static_cast<std::size_t>(e.outside_slot)] = id;
      tri_by_first[e.a] = id;
      tri_by_second[e.b] = id;
      new_ids[j] = id;
    }
    for (std::size_t j = 0; j < boundary.size(); ++j) {
      const BEdge& e = boundary[j];
      tris_[static_cast<std::size_t>(new_ids[j])].nbr[1] = tri_by_first.at(e.b);
      tris_[static_cast<std::size_t>(new_ids[j])].nbr[2] = tri_by_second.at(e.a);
    }
    hint_ = new_ids[0];
  }

  std::vector<Eigen::Vector2d> pts_;
  std::vector<BWTriangle> tris_;
  int n_real_ = 0;
  int hint_ = 0;
};

// Proper segment crossing (interiors intersect at a single point).
bool segments_cross(const Eigen::Vector2d& p, const Eigen::Vector2d& q,
                    const Eigen::Vector2d& r, const Eigen::Vector2d& s,
                    double tol) {
  const double o1 = orient2d(p, q, r);
  const double o2 = orient2d(p, q, s);
  const double o3 = orient2d(r, s, p);
  const double o4 = orient2d(r, s, q);
  return ((o1 > tol && o2 < -tol) || (o1 < -tol && o2 > tol)) &&
         ((o3 > tol && o4 < -tol) || (o3 < -tol && o4 > tol));
}

}  // namespace

Triangulation::Triangulation(const Triangulation& other)
    : vertices_(other.vertices_),
      simplices_(other.simplices_),
      neighbors_(other.neighbors_),
      inv_edge_(other.inv_edge_),
      cond_(other.cond_),
      diameter_(other.diameter_),
      hint_(0) {}

Triangulation& Triangulation::operator=(const Triangulation& other) {
  if (this == &other) return *this;
  vertices_ = other.vertices_;
  simplices_ = other.simplices_;
  neighbors_ = other.neighbors_;
  inv_edge_ = other.inv_edge_;
  cond_ = other.cond_;
  diameter_ = other.diameter_;
  hint_.store(0, std::memory_order_relaxed);
  return *this;
}

Triangulation Triangulation::delaunay(const std::vector<Point>& points) {
  if (points.empty()) throw DegenerateInput("delaunay: no input points");
  const Eigen::Index dim = points[0].size();
  if (dim != 2)
    throw UnsupportedDimension(
        "delaunay: only 2-D triangulations are supported (got n = " +
        std::to_string(dim) + ")");
  if (points.size() < 3)
    throw DegenerateInput("delaunay: need at least n + 1 = 3 points");

  std::vector<Eigen::Vector2d> pts;
  pts.reserve(points.size());
  std::map<std::pair<double, double>, int> seen;
  for (const auto& p : points) {
    if (p.size() != 2) throw DimensionMismatch("delaunay: mixed dimensions");
    if (!p.allFinite()) throw DegenerateInput("delaunay: non-finite point");
    if (!seen.emplace(std::make_pair(p.x(), p.y()),
                      static_cast<int>(pts.size()))
             .second)
      throw DegenerateInput("delaunay: duplicate input points");
    pts.emplace_back(p.x(), p.y());
  }

  // Collinearity screen.
  {
    double span = 0.0;
    for (const auto& p : pts) span = std::max(span, (p - pts[0]).norm());
    bool ok = false;
    for (std::size_t i = 1; i < pts.size() && !ok; ++i)
      for (std::size_t j = i + 1; j < pts.size() && !ok; ++j)
        ok = std::abs(orient2d(pts[0], pts[i], pts[j])) > 1e-12 * span * span;
    if (!ok) throw DegenerateInput("delaunay: all points are collinear");
  }

  Builder builder(pts);
  Triangulation tri;
  tri.vertices_ = std::move(pts);
  tri.simplices_ = builder.finalize();
  if (tri.simplices_.empty())
    throw DegenerateInput("delaunay: triangulation collapsed");
  tri.rebuild_adjacency();
  tri.rebuild_caches();

  std::vector<bool> used(tri.vertices_.size(), false);
  for (const auto& s : tri.simplices_)
    for (int k = 0; k < 3; ++k) used[static_cast<std::size_t>(s[k])] = true;
  if (!std::all_of(used.begin(), used.end(), [](bool b) { return b; }))
    throw DegenerateInput("delaunay: input point dropped from triangulation");
  return tri;
}

Triangulation Triangulation::from_data(std::vector<Eigen::Vector2d> vertices,
                                       std::vector<Simplex> simplices) {
  Triangulation tri;
  tri.vertices_ = std::move(vertices);
  tri.simplices_ = std::move(simplices);
  if (tri.simplices_.empty() || tri.vertices_.size() < 3)
    throw DegenerateInput("from_data: empty triangulation");
  for (const auto& s : tri.simplices_) {
    for (int k = 0; k < 3; ++k)
      if (s[k] < 0 || s[k] >= tri.num_vertices())
        throw DegenerateInput("from_data: vertex index out of range");
  }
  tri.rebuild_adjacency();
  tri.rebuild_caches();
  return tri;
}

void Triangulation::rebuild_adjacency() {
  neighbors_.assign(simplices_.size(), {-1, -1, -1});
  std::map<std::pair<int, int>, std::pair<int, int>> half;  // edge -> (tri, slot)
  for (std::size_t i = 0; i < simplices_.size(); ++i) {
    const auto& v = simplices_[i].v;
    for (int k = 0; k < 3; ++k) {
      const int a = v[static_cast<std::size_t>((k + 1) % 3)];
      const int b = v[static_cast<std::size_t>((k + 2) % 3)];
      const auto key = std::minmax(a, b);
      auto it = half.find(key);
      if (it == half.end()) {
        half[key] = {static_cast<int>(i), k};
      } else {
        neighbors_[i][static_cast<std::size_t>(k)] = it->second.first;
        neighbors_[static_cast<std::size_t>(it->second.first)]
                  [static_cast<std::size_t>(it->second.second)] =
                      static_cast<int>(i);
        half.erase(it);
      }
    }
  }
}

void Triangulation::rebuild_caches() {
  const std::size_t m = simplices_.size();
  inv_edge_.assign(m, Eigen::Matrix2d::Zero());
  cond_.assign(m, std::numeric_limits<double>::infinity());
  diameter_.assign(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    auto& s = simplices_[i];
    const Eigen::Vector2d& p0 = vertices_[static_cast<std::size_t>(s[0])];
    const Eigen::Vector2d& p1 = vertices_[static_cast<std::size_t>(s[1])];
    const Eigen::Vector2d& p2 = vertices_[static_cast<std::size_t>(s[2])];
    // Keep stored order CCW.
    if (orient2d(p0, p1, p2) < 0.0) std::swap(s.v[1], s.v[2]);
    const Eigen::Vector2d& q1 = vertices_[static_cast<std::size_t>(s[1])];
    const Eigen::Vector2d& q2 = vertices_[static_cast<std::size_t>(s[2])];
    Eigen::Matrix2d X;  // rows are x_{i,j} - x_{i,0}
    X.row(0) = (q1 - p0).transpose();
    X.row(1) = (q2 - p0).transpose();
    const double det = X(0, 0) * X(1, 1) - X(0, 1) * X(1, 0);
    // 2x2 singular values in closed form.
    const double e = 0.5 * (X(0, 0) + X(1, 1)), f = 0.5 * (X(0, 0) - X(1, 1));
    const double g = 0.5 * (X(1, 0) + X(0, 1)), h = 0.5 * (X(1, 0) - X(0, 1));
    const double qq = std::hypot(e, h), rr = std::hypot(f, g);
    const double smax = qq + rr, smin = std::abs(qq - rr);
    cond_[i] = (smin > 0.0) ? smax / smin
                            : std::numeric_limits<double>::infinity();
    if (det != 0.0) {
      Eigen::Matrix2d inv;
      inv << X(1, 1), -X(0, 1), -X(1, 0), X(0, 0);
      inv_edge_[i] = inv / det;
    }
    diameter_[i] = std::max({(q1 - p0).norm(), (q2 - p0).norm(),
                             (q2 - q1).norm()});
  }
}

bool Triangulation::simplex_contains(int i, const Eigen::Vector2d& x,
                                     double tol) const {
  if (cond_[static_cast<std::size_t>(i)] > 1e12) return false;
  return barycentric(i, x).inside(tol);
}

std::optional<int> Triangulation::locate(const Point& x) const {
  if (x.size() != 2)
    throw DimensionMismatch("locate: expected a 2-D point");
  return locate(Eigen::Vector2d(x.x(), x.y()));
}

std::optional<int> Triangulation::locate(const Eigen::Vector2d& x) const {
  const int m = num_simplices();
  if (m == 0) return std::nullopt;
  constexpr double kTol = 1e-9;

  int cur = hint_.load(std::memory_order_relaxed);
  if (cur < 0 || cur >= m) cur = 0;
  int found = -1;
  bool need_scan = false;
  int steps = 0;
  while (steps++ <= m) {
    const BarycentricCoords bc = barycentric(cur, x);
    int worst = 0;
    for (int k = 1; k < 3; ++k)
      if (bc.lambda[k] < bc.lambda[worst]) worst = k;
    if (bc.lambda[worst] >= -kTol) {
      found = cur;
      break;
    }
    const int nb = neighbor(cur, worst);
    if (nb < 0) {
      // Left through the hull. Trust the verdict only when the point is
      // clearly outside; marginal exits get the exhaustive treatment.
      need_scan = bc.lambda[worst] > -1e-6;
      break;
    }
    cur = nb;
  }
  if (found < 0 && (need_scan || steps > m)) {
    for (int i = 0; i < m; ++i) {
      if (simplex_contains(i, x, kTol)) {
        found = i;
        break;
      }
    }
  }
  if (found < 0) return std::nullopt;

  // Resolve shared-face hits to the lowest containing index. The set of
  // containing simplices is edge-connected, so a local flood suffices.
  int best = found;
  std::vector<int> stack{found};
  std::unordered_set<int> visited{found};
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    for (int k = 0; k < 3; ++k) {
      const int nb = neighbor(i, k);
      if (nb < 0 || visited.count(nb)) continue;
      if (!simplex_contains(nb, x, kTol)) continue;
      visited.insert(nb);
      stack.push_back(nb);
      best = std::min(best, nb);
    }
  }
  hint_.store(best, std::memory_order_relaxed);
  return best;
}

BarycentricCoords Triangulation::barycentric(int i,
                                             const Eigen::Vector2d& x) const {
  const auto& s = simplices_[static_cast<std::size_t>(i)];
  if (!(cond_[static_cast<std::size_t>(i)] <= 1e12))
    throw SingularSimplex("barycentric: simplex " + std::to_string(i) +
                          " has condition number above 1e12");
  const Eigen::Vector2d& p0 = vertices_[static_cast<std::size_t>(s[0])];
  // lambda_{1,2} = X_i^{-T} (x - x_0); lambda_0 closes the sum to 1.
  const Eigen::Vector2d t =
      inv_edge_[static_cast<std::size_t>(i)].transpose() * (x - p0);
  BarycentricCoords bc;
  bc.lambda << 1.0 - t[0] - t[1], t[0], t[1];
  return bc;
}

const Eigen::Matrix2d& Triangulation::edge_matrix_inverse(int i) const {
  if (!(cond_[static_cast<std::size_t>(i)] <= 1e12))
    throw SingularSimplex("edge_matrix_inverse: simplex " + std::to_string(i) +
                          " has condition number above 1e12");
  return inv_edge_[static_cast<std::size_t>(i)];
}

double Triangulation::simplex_diameter(
    int i, std::span<const Eigen::VectorXd> inputs) const {
  if (inputs.empty()) return diameter_[static_cast<std::size_t>(i)];
  if (inputs.size() != 3)
    throw DimensionMismatch("simplex_diameter: need one input per vertex");
  const auto& s = simplices_[static_cast<std::size_t>(i)];
  double best = 0.0;
  for (int r = 0; r < 3; ++r) {
    for (int t = r + 1; t < 3; ++t) {
      const double dx = (vertices_[static_cast<std::size_t>(s[r])] -
                         vertices_[static_cast<std::size_t>(s[t])])
                            .squaredNorm();
      const double du =
          (inputs[static_cast<std::size_t>(r)] - inputs[static_cast<std::size_t>(t)])
              .squaredNorm();
      best = std::max(best, dx + du);
    }
  }
  return std::sqrt(best);
}

double Triangulation::input_diameter(
    int i, std::span<const Eigen::VectorXd> inputs) const {
  (void)i;
  if (inputs.size() != 3)
    throw DimensionMismatch("input_diameter: need one input per vertex");
  double best = 0.0;
  for (int r = 0; r < 3; ++r)
    for (int t = r + 1; t < 3; ++t)
      best = std::max(best, (inputs[static_cast<std::size_t>(r)] -
                             inputs[static_cast<std::size_t>(t)])
                                .squaredNorm());
  return std::sqrt(best);
}

std::pair<int, int> Triangulation::longest_edge(int i) const {
  const auto& s = simplices_[static_cast<std::size_t>(i)];
  std::pair<int, int> best{-1, -1};
  double best_len = -1.0;
  for (int k = 0; k < 3; ++k) {
    const int a = s[k], b = s[(k + 1) % 3];
    const std::pair<int, int> pair{std::min(a, b), std::max(a, b)};
    const double len = (vertices_[static_cast<std::size_t>(a)] -
                        vertices_[static_cast<std::size_t>(b)])
                           .norm();
    if (len > best_len || (len == best_len && pair < best)) {
      best_len = len;
      best = pair;
    }
  }
  return best;
}

BisectionResult Triangulation::bisect_longest_edge(int i) const {
  const auto e = longest_edge(i);
  return bisect_edge(e.first, e.second);
}

BisectionResult Triangulation::bisect_edge(int a, int b) const {
  BisectionResult res;
  res.tri = *this;
  Triangulation& t = res.tri;
  const Eigen::Vector2d mid =
      0.5 * (vertices_[static_cast<std::size_t>(a)] +
             vertices_[static_cast<std::size_t>(b)]);
  const int vid = t.num_vertices();
  t.vertices_.push_back(mid);

  res.new_vertex = vid;
  res.midpoint = mid;
  res.edge = {std::min(a, b), std::max(a, b)};
  res.parent_of.resize(static_cast<std::size_t>(num_simplices()));
  for (int i = 0; i < num_simplices(); ++i)
    res.parent_of[static_cast<std::size_t>(i)] = i;

  bool split_any = false;
  const int m = num_simplices();
  for (int i = 0; i < m; ++i) {
    const auto& s = simplices_[static_cast<std::size_t>(i)];
    if (!s.contains_vertex(a) || !s.contains_vertex(b)) continue;
    split_any = true;
    Simplex child1 = s, child2 = s;
    for (int k = 0; k < 3; ++k) {
      if (child1.v[static_cast<std::size_t>(k)] == b)
        child1.v[static_cast<std::size_t>(k)] = vid;
      if (child2.v[static_cast<std::size_t>(k)] == a)
        child2.v[static_cast<std::size_t>(k)] = vid;
    }
    t.simplices_[static_cast<std::size_t>(i)] = child1;
    t.simplices_.push_back(child2);
    res.parent_of.push_back(i);
  }
  if (!split_any)
    throw DegenerateInput("bisect_edge: (" + std::to_string(a) + ", " +
                          std::to_string(b) + ") is not an edge");
  t.rebuild_adjacency();
  t.rebuild_caches();
  t.hint_.store(0, std::memory_order_relaxed);
  return res;
}

double Triangulation::signed_area(int i) const {
  const auto& s = simplices_[static_cast<std::size_t>(i)];
  return 0.5 * orient2d(vertices_[static_cast<std::size_t>(s[0])],
                        vertices_[static_cast<std::size_t>(s[1])],
                        vertices_[static_cast<std::size_t>(s[2])]);
}

double Triangulation::total_area() const {
  double a = 0.0;
  for (int i = 0; i < num_simplices(); ++i) a += signed_area(i);
  return a;
}

void Triangulation::export_csv(const std::string& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream f(fs::path(dir) / "vertices.csv");
    if (!f) throw IoError("cannot write vertices.csv in " + dir);
    f << "id,x1,x2\n";
    for (int i = 0; i < num_vertices(); ++i) {
      const auto& p = vertices_[static_cast<std::size_t>(i)];
      f << i << ',' << fmt_double(p.x()) << ',' << fmt_double(p.y()) << '\n';
    }
  }
  {
    std::ofstream f(fs::path(dir) / "simplices.csv");
    if (!f) throw IoError("cannot write simplices.csv in " + dir);
    f << "id,v0,v1,v2\n";
    for (int i = 0; i < num_simplices(); ++i) {
      const auto& s = simplices_[static_cast<std::size_t>(i)];
      f << i << ',' << s[0] << ',' << s[1] << ',' << s[2] << '\n';
    }
  }
}

bool Triangulation::conforming(double tol) const {
  const int m = num_simplices();
  double scale = 0.0;
  for (const auto& p : vertices_) scale = std::max(scale, p.cwiseAbs().maxCoeff());
  const double otol = tol * std::max(1.0, scale * scale);

  // No foreign vertex may touch a simplex (interior or edge).
  for (int i = 0; i < m; ++i) {
    const auto& s = simplices_[static_cast<std::size_t>(i)];
    for (int v = 0; v < num_vertices(); ++v) {
      if (s.contains_vertex(v)) continue;
      if (simplex_contains(i, vertices_[static_cast<std::size_t>(v)], 1e-12))
        return false;
    }
  }
  // No proper edge crossings between any two simplices.
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      const auto& si = simplices_[static_cast<std::size_t>(i)];
      const auto& sj = simplices_[static_cast<std::size_t>(j)];
      for (int ke = 0; ke < 3; ++ke) {
        for (int le = 0; le < 3; ++le) {
          const int a = si[ke], b = si[(ke + 1) % 3];
          const int c = sj[le], d = sj[(le + 1) % 3];
          if (a == c || a == d || b == c || b == d) continue;
          if (segments_cross(vertices_[static_cast<std::size_t>(a)],
                             vertices_[static_cast<std::size_t>(b)],
                             vertices_[static_cast<std::size_t>(c)],
                             vertices_[static_cast<std::size_t>(d)], otol))
            return false;
        }
      }
    }
  }
  // All simplices positively oriented.
  for (int i = 0; i < m; ++i)
    if (signed_area(i) <= 0.0) return false;
  return true;
}

}  // namespace cpabf
