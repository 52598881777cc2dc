#pragma once

#include <Eigen/Dense>
#include <array>
#include <atomic>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cpabf/errors.hpp"

namespace cpabf {

/// A state-space point. Length equals the state dimension n.
using Point = Eigen::VectorXd;

/// Vertex-index triple of a 2-D simplex, stored counterclockwise.
struct Simplex {
  std::array<int, 3> v;

  int operator[](int j) const { return v[static_cast<std::size_t>(j)]; }
  bool contains_vertex(int vid) const {
    return v[0] == vid || v[1] == vid || v[2] == vid;
  }
};

/// Barycentric weights of a point with respect to one simplex.
struct BarycentricCoords {
  Eigen::Vector3d lambda;

  bool inside(double tol = 1e-9) const {
    return lambda.minCoeff() >= -tol;
  }
};

struct BisectionResult;

/// Conforming 2-D triangulation with simplex adjacency and cached
/// per-simplex edge-matrix factorizations. Immutable after construction;
/// bisection returns a new triangulation. Queries are safe to call
/// concurrently.
class Triangulation {
 public:
  /// Delaunay triangulation of a 2-D point set (Bowyer-Watson with a
  /// super-triangle bootstrap; insertion in input order, cocircular
  /// ties resolved toward the earlier-created diagonal).
  /// Throws DegenerateInput for duplicate/collinear inputs and
  /// UnsupportedDimension for n != 2.
  static Triangulation delaunay(const std::vector<Point>& points);

  /// Rebuilds a triangulation from explicit vertices and simplices (the
  /// on-disk representation); orientations are normalized and adjacency
  /// recomputed.
  static Triangulation from_data(std::vector<Eigen::Vector2d> vertices,
                                 std::vector<Simplex> simplices);

  Triangulation() = default;
  Triangulation(const Triangulation& other);
  Triangulation& operator=(const Triangulation& other);
  Triangulation(Triangulation&&) noexcept = default;
  Triangulation& operator=(Triangulation&&) noexcept = default;

  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_simplices() const { return static_cast<int>(simplices_.size()); }
  const Eigen::Vector2d& vertex(int vid) const {
    return vertices_[static_cast<std::size_t>(vid)];
  }
  const std::vector<Eigen::Vector2d>& vertices() const { return vertices_; }
  const Simplex& simplex(int i) const {
    return simplices_[static_cast<std::size_t>(i)];
  }
  const std::vector<Simplex>& simplices() const { return simplices_; }

  /// Neighbor across the edge opposite local vertex k, or -1 on the hull.
  int neighbor(int i, int k) const {
    return neighbors_[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
  }

  /// Index of a simplex containing x, or nullopt outside the mesh.
  /// Points on shared faces resolve to the lowest containing index.
  std::optional<int> locate(const Eigen::Vector2d& x) const;
  std::optional<int> locate(const Point& x) const;

  /// Barycentric coordinates of x in simplex i. Throws SingularSimplex
  /// when the cached edge matrix has condition number above 1e12.
  BarycentricCoords barycentric(int i, const Eigen::Vector2d& x) const;

  /// Inverse of the edge matrix X_i (rows x_{i,j} - x_{i,0}, j = 1..n).
  const Eigen::Matrix2d& edge_matrix_inverse(int i) const;

  /// Max pairwise vertex distance; when per-vertex input vectors are
  /// given, distances are taken over stacked (state, input) vectors.
  double simplex_diameter(int i,
                          std::span<const Eigen::VectorXd> inputs = {}) const;

  /// Max pairwise distance over the per-vertex input vectors alone.
  double input_diameter(int i, std::span<const Eigen::VectorXd> inputs) const;

  /// Splits every simplex sharing the longest edge of simplex i at that
  /// edge's midpoint. Conformity is preserved; untouched simplices keep
  /// their indices.
  BisectionResult bisect_longest_edge(int i) const;

  /// Same split for an explicit edge (a, b).
  BisectionResult bisect_edge(int a, int b) const;

  /// Longest edge of simplex i as a (min id, max id) vertex pair;
  /// length ties resolve to the lexicographically smallest pair.
  std::pair<int, int> longest_edge(int i) const;

  double total_area() const;
  double signed_area(int i) const;

  /// Writes vertices.csv (id, x1, x2) and simplices.csv (id, v0, v1, v2).
  void export_csv(const std::string& dir) const;

  /// Pairwise face-intersection audit (desk-scale O(m^2) check used by
  /// tests): any two simplices meet in a shared face or not at all.
  bool conforming(double tol = 1e-12) const;

 private:
  friend class DelaunayBuilder;

  void rebuild_caches();
  void rebuild_adjacency();
  bool simplex_contains(int i, const Eigen::Vector2d& x, double tol) const;

  std::vector<Eigen::Vector2d> vertices_;
  std::vector<Simplex> simplices_;
  std::vector<std::array<int, 3>> neighbors_;
  std::vector<Eigen::Matrix2d> inv_edge_;     // X_i^{-1}
  std::vector<double> cond_;                  // condition estimate of X_i
  std::vector<double> diameter_;              // state-only diameter
  mutable std::atomic<int> hint_{0};
};

/// Result of one edge bisection.
struct BisectionResult {
  Triangulation tri;
  int new_vertex = -1;
  Eigen::Vector2d midpoint = Eigen::Vector2d::Zero();
  std::pair<int, int> edge{-1, -1};
  /// parent_of[j]: index in the pre-bisection triangulation of the
  /// simplex that simplex j descends from (identity for untouched ones).
  std::vector<int> parent_of;
};

/// 2-D orientation predicate: > 0 when (a, b, c) is counterclockwise.
double orient2d(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                const Eigen::Vector2d& c);

}  // namespace cpabf
