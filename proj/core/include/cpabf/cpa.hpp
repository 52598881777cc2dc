#pragma once

#include <memory>
#include <vector>

#include "cpabf/geometry.hpp"

namespace cpabf {

/// Affine gradient of a CPA function on one simplex.
struct SimplexGradient {
  Eigen::Vector2d grad;
  double norm2 = 0.0;
};

struct Segment {
  Eigen::Vector2d a, b;
};

/// Continuous piecewise-affine function determined by one value per
/// triangulation vertex, extended by the constant `epsilon` outside the
/// mesh. Immutable; all queries are re-entrant.
class CpaFunction {
 public:
  CpaFunction(std::shared_ptr<const Triangulation> tri, Eigen::VectorXd values,
              double epsilon);

  const Triangulation& triangulation() const { return *tri_; }
  const std::shared_ptr<const Triangulation>& triangulation_ptr() const {
    return tri_;
  }
  const Eigen::VectorXd& values() const { return values_; }
  double value_at_vertex(int vid) const { return values_[vid]; }
  double epsilon() const { return epsilon_; }

  /// Per-simplex gradient X_i^{-1} (W_{x_{i,j}} - W_{x_{i,0}})_j.
  const SimplexGradient& gradient(int i) const {
    return grads_[static_cast<std::size_t>(i)];
  }

  /// Barycentric interpolation inside the mesh; throws OutsideDomain
  /// beyond it.
  double evaluate(const Eigen::Vector2d& x) const;
  double evaluate(const Point& x) const;

  /// Interpolation inside the mesh, epsilon outside.
  double evaluate_extended(const Eigen::Vector2d& x) const;
  double evaluate_extended(const Point& x) const;

  /// Value from a known simplex and barycentric weights.
  double evaluate_in(int simplex, const BarycentricCoords& bc) const;

  /// max_i ||grad_i||_2.
  double gradient_norm_bound() const;

  /// Segments where the interpolant crosses zero. Exact-zero vertex
  /// values count as non-sign-changing; endpoints on shared edges are
  /// computed canonically so adjacent simplices agree bitwise.
  std::vector<Segment> zero_level_set() const;

  /// Area of {x in mesh : W(x) <= 0}.
  double sublevel_region_area() const;

 private:
  std::shared_ptr<const Triangulation> tri_;
  Eigen::VectorXd values_;
  double epsilon_;
  std::vector<SimplexGradient> grads_;
};

}  // namespace cpabf
