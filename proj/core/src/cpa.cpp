#include "cpabf/cpa.hpp"

#include <algorithm>
#include <cmath>

namespace cpabf {

namespace {

// Zero crossing of the interpolant on edge (a, b), computed in canonical
// (lower id first) orientation so both adjacent simplices produce the
// same bits.
Eigen::Vector2d edge_crossing(const Triangulation& tri, int a, int b,
                              double wa, double wb) {
  if (a > b) {
    std::swap(a, b);
    std::swap(wa, wb);
  }
  const double t = wa / (wa - wb);
  const Eigen::Vector2d& pa = tri.vertex(a);
  const Eigen::Vector2d& pb = tri.vertex(b);
  return pa + t * (pb - pa);
}

}  // namespace

CpaFunction::CpaFunction(std::shared_ptr<const Triangulation> tri,
                         Eigen::VectorXd values, double epsilon)
    : tri_(std::move(tri)), values_(std::move(values)), epsilon_(epsilon) {
  if (!tri_) throw DimensionMismatch("CpaFunction: null triangulation");
  if (values_.size() != tri_->num_vertices())
    throw DimensionMismatch("CpaFunction: need one value per vertex");
  if (!values_.allFinite())
    throw DimensionMismatch("CpaFunction: non-finite vertex value");
  if (!(epsilon_ > 0.0))
    throw DimensionMismatch("CpaFunction: epsilon must be positive");

  const int m = tri_->num_simplices();
  grads_.resize(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const Simplex& s = tri_->simplex(i);
    Eigen::Vector2d wbar(values_[s[1]] - values_[s[0]],
                         values_[s[2]] - values_[s[0]]);
    SimplexGradient g;
    g.grad = tri_->edge_matrix_inverse(i) * wbar;
    g.norm2 = g.grad.norm();
    grads_[static_cast<std::size_t>(i)] = g;
  }
}

double CpaFunction::evaluate_in(int simplex, const BarycentricCoords& bc) const {
  const Simplex& s = tri_->simplex(simplex);
  // Snap negligible weights so vertex and edge hits reproduce stored
  // values exactly.
  Eigen::Vector3d lam = bc.lambda;
  int largest = 0;
  for (int k = 1; k < 3; ++k)
    if (lam[k] > lam[largest]) largest = k;
  for (int k = 0; k < 3; ++k)
    if (k != largest && std::abs(lam[k]) <= 1e-12) lam[k] = 0.0;
  lam[largest] = 1.0 - lam[(largest + 1) % 3] - lam[(largest + 2) % 3];
  return lam[0] * values_[s[0]] + lam[1] * values_[s[1]] +
         lam[2] * values_[s[2]];
}

double CpaFunction::evaluate(const Eigen::Vector2d& x) const {
  const auto i = tri_->locate(x);
  if (!i) throw OutsideDomain("evaluate: point outside the triangulation");
  return evaluate_in(*i, tri_->barycentric(*i, x));
}

double CpaFunction::evaluate(const Point& x) const {
  return evaluate(Eigen::Vector2d(x.x(), x.y()));
}

double CpaFunction::evaluate_extended(const Eigen::Vector2d& x) const {
  const auto i = tri_->locate(x);
  if (!i) return epsilon_;
  return evaluate_in(*i, tri_->barycentric(*i, x));
}

double CpaFunction::evaluate_extended(const Point& x) const {
  return evaluate_extended(Eigen::Vector2d(x.x(), x.y()));
}

double CpaFunction::gradient_norm_bound() const {
  double b = 0.0;
  for (const auto& g : grads_) b = std::max(b, g.norm2);
  return b;
}

std::vector<Segment> CpaFunction::zero_level_set() const {
  std::vector<Segment> out;
  for (int i = 0; i < tri_->num_simplices(); ++i) {
    const Simplex& s = tri_->simplex(i);
    const double w[3] = {values_[s[0]], values_[s[1]], values_[s[2]]};
    const bool has_pos = w[0] > 0 || w[1] > 0 || w[2] > 0;
    const bool has_neg = w[0] < 0 || w[1] < 0 || w[2] < 0;
    if (!has_pos || !has_neg) continue;

    Eigen::Vector2d pts[2];
    int npts = 0;
    for (int k = 0; k < 3 && npts < 2; ++k) {
      if (w[k] == 0.0) pts[npts++] = tri_->vertex(s[k]);
    }
    for (int k = 0; k < 3 && npts < 2; ++k) {
      const int a = s[k], b = s[(k + 1) % 3];
      const double wa = w[k], wb = w[(k + 1) % 3];
      if (wa * wb < 0.0) pts[npts++] = edge_crossing(*tri_, a, b, wa, wb);
    }
    if (npts == 2) out.push_back({pts[0], pts[1]});
  }
  return out;
}

double CpaFunction::sublevel_region_area() const {
  double total = 0.0;
  for (int i = 0; i < tri_->num_simplices(); ++i) {
    const Simplex& s = tri_->simplex(i);
    const double w[3] = {values_[s[0]], values_[s[1]], values_[s[2]]};
    const bool has_pos = w[0] > 0 || w[1] > 0 || w[2] > 0;
    if (!has_pos) {
      total += tri_->signed_area(i);
      continue;
    }
    const bool has_neg = w[0] < 0 || w[1] < 0 || w[2] < 0;
    if (!has_neg) continue;

    // Clip the (CCW) triangle against the zero line of the interpolant.
    Eigen::Vector2d poly[5];
    int n = 0;
    for (int k = 0; k < 3; ++k) {
      const int a = s[k], b = s[(k + 1) % 3];
      const double wa = w[k], wb = w[(k + 1) % 3];
      if (wa <= 0.0) poly[n++] = tri_->vertex(a);
      if (wa * wb < 0.0) poly[n++] = edge_crossing(*tri_, a, b, wa, wb);
    }
    double area = 0.0;
    for (int k = 1; k + 1 < n; ++k)
      area += 0.5 * orient2d(poly[0], poly[k], poly[k + 1]);
    total += area;
  }
  return total;
}

}  // namespace cpabf
