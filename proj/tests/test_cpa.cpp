#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>

#include "cpabf/cpa.hpp"

using namespace cpabf;

namespace {

Point pt(double x, double y) {
  Point p(2);
  p << x, y;
  return p;
}

std::shared_ptr<const Triangulation> unit_simplex() {
  return std::make_shared<Triangulation>(
      Triangulation::delaunay({pt(0, 0), pt(1, 0), pt(0, 1)}));
}

std::shared_ptr<const Triangulation> random_mesh(unsigned seed, int npts) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> coord(-2.0, 2.0);
  std::vector<Point> pts;
  for (int i = 0; i < npts; ++i) pts.push_back(pt(coord(rng), coord(rng)));
  return std::make_shared<Triangulation>(Triangulation::delaunay(pts));
}

Eigen::VectorXd values_for(const Triangulation& tri, double v) {
  return Eigen::VectorXd::Constant(tri.num_vertices(), v);
}

}  // namespace

TEST_CASE("gradient of the hat function on the unit simplex") {
  auto tri = unit_simplex();
  Eigen::VectorXd w(3);
  // Assign W = x1 at the vertices: 0 at (0,0) and (0,1), 1 at (1,0).
  for (int k = 0; k < 3; ++k) w[tri->simplex(0)[k]] = tri->vertex(tri->simplex(0)[k]).x();
  CpaFunction f(tri, w, 0.1);
  CHECK(f.gradient(0).grad.x() == doctest::Approx(1.0));
  CHECK(f.gradient(0).grad.y() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(f.gradient(0).norm2 == doctest::Approx(1.0));
}

TEST_CASE("constant function has zero gradient everywhere") {
  auto tri = random_mesh(1, 50);
  CpaFunction f(tri, values_for(*tri, 3.25), 1.0);
  for (int i = 0; i < tri->num_simplices(); ++i)
    CHECK(f.gradient(i).norm2 == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(f.gradient_norm_bound() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("planted affine functions are recovered exactly") {
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  auto tri = random_mesh(2, 80);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Vector2d a(u(rng), u(rng));
    const double c = u(rng);
    Eigen::VectorXd w(tri->num_vertices());
    for (int v = 0; v < tri->num_vertices(); ++v)
      w[v] = a.dot(tri->vertex(v)) + c;
    CpaFunction f(tri, w, 1.0);
    for (int i = 0; i < tri->num_simplices(); ++i)
      CHECK((f.gradient(i).grad - a).norm() < 1e-9 * (1.0 + a.norm()));
    CHECK(f.gradient_norm_bound() ==
          doctest::Approx(a.norm()).epsilon(1e-9));
  }
}

TEST_CASE("gradient bound equals the per-simplex brute force maximum") {
  auto tri = std::make_shared<Triangulation>(
      Triangulation::delaunay({pt(0, 0), pt(1, 0), pt(0, 1), pt(1, 1)}));
  Eigen::VectorXd w(4);
  w << 0.0, 1.0, -2.0, 0.5;
  CpaFunction f(tri, w, 1.0);
  double brute = 0.0;
  for (int i = 0; i < tri->num_simplices(); ++i)
    brute = std::max(brute, f.gradient(i).norm2);
  CHECK(f.gradient_norm_bound() == doctest::Approx(brute));
  CHECK(tri->num_simplices() == 2);
  CHECK(f.gradient(0).norm2 != doctest::Approx(f.gradient(1).norm2));
}

TEST_CASE("evaluate: vertices exact, interpolation, outside behavior") {
  auto tri = random_mesh(3, 60);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd w(tri->num_vertices());
  for (int v = 0; v < tri->num_vertices(); ++v) w[v] = u(rng);
  CpaFunction f(tri, w, 0.25);

  for (int v = 0; v < tri->num_vertices(); ++v)
    CHECK(f.evaluate(tri->vertex(v)) == w[v]);  // bitwise

  CHECK(f.evaluate_extended(pt(50, 50)) == 0.25);
  CHECK_THROWS_AS(f.evaluate(pt(50, 50)), OutsideDomain);
}

TEST_CASE("edge midpoint with endpoint values (-1, 3) evaluates to 1") {
  auto tri = unit_simplex();
  Eigen::VectorXd w(3);
  const auto& s = tri->simplex(0);
  for (int k = 0; k < 3; ++k) {
    const auto& v = tri->vertex(s[k]);
    if (v.x() == 0 && v.y() == 0) w[s[k]] = -1.0;
    if (v.x() == 1) w[s[k]] = 3.0;
    if (v.y() == 1) w[s[k]] = 7.0;
  }
  CpaFunction f(tri, w, 1.0);
  CHECK(f.evaluate(pt(0.5, 0.0)) == doctest::Approx(1.0));
}

TEST_CASE("affine identity within each simplex") {
  auto tri = random_mesh(8, 70);
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(-2.0, 2.0), unit(0.0, 1.0);
  Eigen::VectorXd w(tri->num_vertices());
  for (int v = 0; v < tri->num_vertices(); ++v) w[v] = u(rng);
  CpaFunction f(tri, w, 1.0);
  const double scale = w.cwiseAbs().maxCoeff();
  for (int trial = 0; trial < 20000; ++trial) {
    const int i = static_cast<int>(rng() % tri->num_simplices());
    double l0 = unit(rng), l1 = unit(rng), l2 = unit(rng);
    const double sum = l0 + l1 + l2;
    const auto& s = tri->simplex(i);
    const Eigen::Vector2d x = (l0 * tri->vertex(s[0]) + l1 * tri->vertex(s[1]) +
                               l2 * tri->vertex(s[2])) /
                              sum;
    const Eigen::Vector2d x0 = tri->vertex(s[0]);
    const double via_grad = w[s[0]] + f.gradient(i).grad.dot(x - x0);
    REQUIRE(std::abs(f.evaluate_in(i, tri->barycentric(i, x)) - via_grad) <=
            1e-9 * (1.0 + scale));
  }
}

TEST_CASE("continuity across shared faces") {
  auto tri = random_mesh(4, 90);
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> u(-5.0, 5.0), unit(0.0, 1.0);
  Eigen::VectorXd w(tri->num_vertices());
  for (int v = 0; v < tri->num_vertices(); ++v) w[v] = u(rng);
  CpaFunction f(tri, w, 1.0);

  int tested = 0;
  while (tested < 10000) {
    const int i = static_cast<int>(rng() % tri->num_simplices());
    const int k = static_cast<int>(rng() % 3);
    const int nb = tri->neighbor(i, k);
    if (nb < 0) continue;
    const auto& s = tri->simplex(i);
    const double t = unit(rng);
    const Eigen::Vector2d x =
        t * tri->vertex(s[(k + 1) % 3]) + (1 - t) * tri->vertex(s[(k + 2) % 3]);
    const double va = f.evaluate_in(i, tri->barycentric(i, x));
    const double vb = f.evaluate_in(nb, tri->barycentric(nb, x));
    REQUIRE(std::abs(va - vb) <= 1e-8 * (1.0 + w.cwiseAbs().maxCoeff()));
    ++tested;
  }
}

TEST_CASE("zero level set cases") {
  auto tri = unit_simplex();
  const auto& s = tri->simplex(0);

  SUBCASE("one negative vertex: segment through two edge midpoints") {
    Eigen::VectorXd w(3);
    w[s[0]] = -1.0;
    w[s[1]] = 1.0;
    w[s[2]] = 1.0;
    CpaFunction f(tri, w, 1.0);
    const auto segs = f.zero_level_set();
    REQUIRE(segs.size() == 1);
    const Eigen::Vector2d m01 = 0.5 * (tri->vertex(s[0]) + tri->vertex(s[1]));
    const Eigen::Vector2d m02 = 0.5 * (tri->vertex(s[0]) + tri->vertex(s[2]));
    const double d1 = std::min((segs[0].a - m01).norm() + (segs[0].b - m02).norm(),
                               (segs[0].a - m02).norm() + (segs[0].b - m01).norm());
    CHECK(d1 < 1e-12);
  }
  SUBCASE("all negative: no segments") {
    CpaFunction f(tri, Eigen::VectorXd::Constant(3, -1.0), 1.0);
    CHECK(f.zero_level_set().empty());
  }
  SUBCASE("zero vertex: segment from edge midpoint to the vertex") {
    Eigen::VectorXd w(3);
    w[s[0]] = -1.0;
    w[s[1]] = 1.0;
    w[s[2]] = 0.0;
    CpaFunction f(tri, w, 1.0);
    const auto segs = f.zero_level_set();
    REQUIRE(segs.size() == 1);
    const Eigen::Vector2d m01 = 0.5 * (tri->vertex(s[0]) + tri->vertex(s[1]));
    const Eigen::Vector2d vz = tri->vertex(s[2]);
    const double d = std::min((segs[0].a - vz).norm() + (segs[0].b - m01).norm(),
                              (segs[0].a - m01).norm() + (segs[0].b - vz).norm());
    CHECK(d < 1e-12);
  }
}

TEST_CASE("zero level set endpoints evaluate to zero; adjacent segments touch") {
  auto tri = random_mesh(31, 100);
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd w(tri->num_vertices());
  for (int v = 0; v < tri->num_vertices(); ++v) w[v] = u(rng);
  CpaFunction f(tri, w, 1.0);
  const double scale = w.cwiseAbs().maxCoeff();
  const auto segs = f.zero_level_set();
  REQUIRE(!segs.empty());
  for (const auto& seg : segs) {
    CHECK(std::abs(f.evaluate(seg.a)) <= 1e-9 * scale);
    CHECK(std::abs(f.evaluate(seg.b)) <= 1e-9 * scale);
  }
}

TEST_CASE("sublevel areas") {
  auto tri = unit_simplex();
  const auto& s = tri->simplex(0);

  CpaFunction all_neg(tri, Eigen::VectorXd::Constant(3, -1.0), 1.0);
  CHECK(all_neg.sublevel_region_area() == doctest::Approx(0.5));

  CpaFunction all_pos(tri, Eigen::VectorXd::Constant(3, 2.0), 1.0);
  CHECK(all_pos.sublevel_region_area() == doctest::Approx(0.0));

  Eigen::VectorXd w(3);
  w[s[0]] = -1.0;
  w[s[1]] = 1.0;
  w[s[2]] = 1.0;
  CpaFunction quarter(tri, w, 1.0);
  CHECK(quarter.sublevel_region_area() == doctest::Approx(0.125));
}

TEST_CASE("sublevel and superlevel areas partition the mesh") {
  auto tri = random_mesh(6, 120);
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd w(tri->num_vertices());
    for (int v = 0; v < tri->num_vertices(); ++v) w[v] = u(rng);
    CpaFunction f(tri, w, 1.0);
    CpaFunction neg(tri, -w, 1.0);
    const double total = tri->total_area();
    CHECK(f.sublevel_region_area() + neg.sublevel_region_area() ==
          doctest::Approx(total).epsilon(1e-9));
  }
}
