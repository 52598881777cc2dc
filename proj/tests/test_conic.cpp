#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "cpabf/conic.hpp"

using namespace cpabf;

namespace {

// Independent oracle: largest eigenvalue of the 3x3 overbound matrix
// [[a, v0, v1], [v0, -2, 0], [v1, 0, -2]].
double max_eig_overbound(double a, double v0, double v1) {
  Eigen::Matrix3d M;
  M << a, v0, v1, v0, -2.0, 0.0, v1, 0.0, -2.0;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(M);
  return es.eigenvalues().maxCoeff();
}

bool cone_membership(double a, double v0, double v1, double theta) {
  const double s = theta - a;
  const double t = 2.0 + theta;
  return s >= 0.0 && t >= 0.0 && v0 * v0 + v1 * v1 <= s * t;
}

}  // namespace

TEST_CASE("lmi reduction on pinned instances") {
  // a = -1, v = 0, theta = 0: eigenvalues {-1, -2, -2}, feasible.
  CHECK(max_eig_overbound(-1, 0, 0) == doctest::Approx(-1.0));
  CHECK(cone_membership(-1, 0, 0, 0.0));

  // a = 0, v = (1, 0): smallest feasible theta is -1 + sqrt(2).
  const double theta_star = -1.0 + std::sqrt(2.0);
  CHECK(max_eig_overbound(0, 1, 0) == doctest::Approx(theta_star));
  CHECK(cone_membership(0, 1, 0, theta_star + 1e-12));
  CHECK_FALSE(cone_membership(0, 1, 0, theta_star - 1e-6));

  // a = 0, v = 0, theta = 0 is boundary feasible.
  CHECK(cone_membership(0, 0, 0, 0.0));
  CHECK(max_eig_overbound(0, 0, 0) == doctest::Approx(0.0));
}

TEST_CASE("cone membership agrees with the eigenvalue oracle on 1000 triples") {
  std::mt19937 rng(123);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::uniform_real_distribution<double> ut(0.0, 3.0);
  int agreements = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const double a = u(rng), v0 = u(rng), v1 = u(rng);
    const double theta = ut(rng);  // theta >= 0 per constraint (10f)
    const double maxeig = max_eig_overbound(a, v0, v1);
    const bool lmi_feasible = maxeig <= theta + 1e-9;
    const bool cone_feasible = cone_membership(a, v0, v1, theta + 1e-9) ||
                               cone_membership(a, v0, v1, theta);
    // Skip knife-edge cases inside the 1e-9 agreement band.
    if (std::abs(maxeig - theta) < 1e-9) {
      ++agreements;
      continue;
    }
    CHECK(lmi_feasible == cone_feasible);
    ++agreements;
  }
  CHECK(agreements == 1000);
}

TEST_CASE("lmi_to_rotated_cone emits the reduction cone") {
  ConeProgram p;
  const int theta = p.add_variable();
  lmi_to_rotated_cone(p, AffineExpr(0.0), AffineExpr(1.0), AffineExpr(0.0),
                      AffineExpr::variable(theta));
  CHECK(p.rows().empty());  // the cone itself carries both sign conditions
  CHECK(p.cones().size() == 1);
  p.add_ge(AffineExpr::variable(theta), 0.0);
  p.add_objective_term(theta, 1.0);
  const auto sol = solve(p, 1e-8, 100);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(std::abs(sol.x[theta] - (-1.0 + std::sqrt(2.0))) < 1e-6);
}

TEST_CASE("tiny linear programs") {
  SUBCASE("min x subject to x >= 3") {
    ConeProgram p;
    const int x = p.add_variable();
    p.add_objective_term(x, 1.0);
    p.add_ge(AffineExpr::variable(x), 3.0);
    const auto sol = solve(p, 1e-8, 100);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(std::abs(sol.x[x] - 3.0) < 1e-7);
    CHECK(sol.objective == doctest::Approx(3.0));
    CHECK(sol.max_violation <= 1e-7);
  }
  SUBCASE("conflicting bounds are infeasible") {
    ConeProgram p;
    const int x = p.add_variable();
    p.add_objective_term(x, 1.0);
    p.add_le(AffineExpr::variable(x), 0.0);
    p.add_ge(AffineExpr::variable(x), 1.0);
    const auto sol = solve(p, 1e-8, 100);
    CHECK(sol.status == SolveStatus::Infeasible);
  }
  SUBCASE("unbounded objective is flagged") {
    ConeProgram p;
    const int x = p.add_variable();
    p.add_objective_term(x, 1.0);
    p.add_le(AffineExpr::variable(x), 5.0);
    const auto sol = solve(p, 1e-8, 100);
    CHECK(sol.status == SolveStatus::Unbounded);
  }
  SUBCASE("equalities and inequalities together") {
    // min x + y  s.t.  x + y + z = 2, z <= 1, x >= 0, y >= 0.
    ConeProgram p;
    const int x = p.add_variable(), y = p.add_variable(),
              z = p.add_variable();
    p.add_objective_term(x, 1.0);
    p.add_objective_term(y, 1.0);
    p.add_eq(AffineExpr::variable(x) + AffineExpr::variable(y) +
                 AffineExpr::variable(z),
             2.0);
    p.add_le(AffineExpr::variable(z), 1.0);
    p.add_ge(AffineExpr::variable(x), 0.0);
    p.add_ge(AffineExpr::variable(y), 0.0);
    const auto sol = solve(p, 1e-8, 100);
    REQUIRE(sol.status == SolveStatus::Optimal);
    CHECK(std::abs(sol.objective - 1.0) < 1e-6);
    CHECK(std::abs(sol.x[z] - 1.0) < 1e-6);
  }
}

TEST_CASE("gradient-style second-order cone") {
  // min b subject to ||(3, 4)|| <= b via a rotated cone with s = t = b.
  ConeProgram p;
  const int b = p.add_variable();
  p.add_objective_term(b, 1.0);
  p.add_rotated_cone(AffineExpr::variable(b), AffineExpr::variable(b),
                     {AffineExpr(3.0), AffineExpr(4.0)});
  const auto sol = solve(p, 1e-8, 100);
  REQUIRE(sol.status == SolveStatus::Optimal);
  CHECK(std::abs(sol.x[b] - 5.0) < 1e-6);
}

TEST_CASE("solver recovers constructed optima on random LP+cone instances") {
  std::mt19937 rng(2025);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> upos(0.2, 1.5);

  int solved = 0;
  for (int inst = 0; inst < 100; ++inst) {
    const int n = 2 + static_cast<int>(rng() % 5);
    Eigen::VectorXd xstar(n);
    for (int i = 0; i < n; ++i) xstar[i] = u(rng);

    ConeProgram p(n);
    // n active rows a_i . x <= a_i . x* with positive duals fix x* as the
    // optimum of min c'x for c = -sum(lambda_i a_i).
    Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
    for (int r = 0; r < n; ++r) {
      Eigen::VectorXd a(n);
      for (int i = 0; i < n; ++i) a[i] = u(rng);
      const double lam = upos(rng);
      AffineExpr row;
      for (int i = 0; i < n; ++i) row += AffineExpr::variable(i, a[i]);
      p.add_le(row, a.dot(xstar));
      c -= lam * a;
    }
    // Inactive rows with random slack.
    for (int r = 0; r < n; ++r) {
      Eigen::VectorXd a(n);
      for (int i = 0; i < n; ++i) a[i] = u(rng);
      AffineExpr row;
      for (int i = 0; i < n; ++i) row += AffineExpr::variable(i, a[i]);
      p.add_le(row, a.dot(xstar) + upos(rng));
    }
    // A strictly feasible rotated cone at x*: ||x*_head2||^2 <= s t with
    // margin, using affine s, t anchored above the needed values.
    const double vv = xstar.head(2).squaredNorm();
    p.add_rotated_cone(AffineExpr(std::sqrt(vv) + upos(rng)),
                       AffineExpr(std::sqrt(vv) + upos(rng)),
                       {AffineExpr::variable(0), AffineExpr::variable(1)});
    for (int i = 0; i < n; ++i) p.add_objective_term(i, c[i]);

    const auto sol = solve(p, 1e-8, 200);
    REQUIRE(sol.status == SolveStatus::Optimal);
    const double expected = c.dot(xstar);
    REQUIRE(std::abs(sol.objective - expected) <=
            1e-6 * std::max(1.0, std::abs(expected)));
    REQUIRE(sol.max_violation <= 1e-6);
    ++solved;
  }
  CHECK(solved == 100);
}

TEST_CASE("program dump writes a parseable sketch") {
  ConeProgram p;
  const int x = p.add_variable();
  p.add_objective_term(x, 1.0);
  p.add_ge(AffineExpr::variable(x), 3.0);
  p.add_rotated_cone(AffineExpr::variable(x), AffineExpr(2.0),
                     {AffineExpr(1.0)});
  const std::string path = "/tmp/cpabf_dump_test.cone";
  p.dump(path);
  std::ifstream f(path);
  std::string first;
  std::getline(f, first);
  CHECK(first == "cone-program v1");
}
