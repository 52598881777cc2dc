#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "cpabf/dynamics.hpp"

using namespace cpabf;

namespace {

Point pt(double x, double y) {
  Point p(2);
  p << x, y;
  return p;
}

Eigen::VectorXd scalar_u(double v) {
  Eigen::VectorXd u(1);
  u[0] = v;
  return u;
}

// Power iteration for the spectral norm, independent of Eigen's SVD.
double spectral_norm_power_iteration(const Eigen::Matrix2d& A) {
  Eigen::Vector2d v(1.0, 1.0);
  v.normalize();
  const Eigen::Matrix2d M = A.transpose() * A;
  for (int it = 0; it < 200; ++it) v = (M * v).normalized();
  return std::sqrt(v.dot(M * v));
}

}  // namespace

TEST_CASE("linear autonomous benchmark matches the printed matrix") {
  auto sys = linear_autonomous();
  const Eigen::VectorXd none(0);
  const Point a = sys->step(pt(1, 0), none);
  CHECK(a[0] == doctest::Approx(0.22));
  CHECK(a[1] == doctest::Approx(-0.5364));
  const Point b = sys->step(pt(0, 0), none);
  CHECK(b.norm() == 0.0);

  Eigen::Matrix2d A;
  A << 0.22, 0.4013, -0.5364, 0.2109;
  const double norm = spectral_norm_power_iteration(A);
  CHECK(std::abs(norm - 0.5837) < 1e-4);
  CHECK(sys->lipschitz().joint == doctest::Approx(0.5837));
  CHECK(norm <= sys->lipschitz().joint);
}

TEST_CASE("nonlinear autonomous benchmark evaluates the printed formula") {
  auto sys = nonlinear_autonomous();
  const Eigen::VectorXd none(0);
  const Point a = sys->step(pt(1, 1), none);
  CHECK(a[0] == doctest::Approx(0.5 - 0.7));
  CHECK(a[1] == doctest::Approx(0.9 + 1.0));
  CHECK(sys->step(pt(0, 0), none).norm() == 0.0);
  const Point c = sys->step(pt(1, 0), none);
  CHECK(c[0] == doctest::Approx(0.5));
  CHECK(c[1] == doctest::Approx(0.0));
}

TEST_CASE("linear non-autonomous benchmark and input validation") {
  auto sys = linear_nonautonomous();
  const Point a = sys->step(pt(0, 0), scalar_u(1.0));
  CHECK(a[0] == doctest::Approx(0.0));
  CHECK(a[1] == doctest::Approx(1.0));
  const Point b = sys->step(pt(1, 0), scalar_u(0.0));
  CHECK(b[0] == doctest::Approx(0.22));
  CHECK(b[1] == doctest::Approx(-0.5364));
  const Point c = sys->step(pt(0, 1), scalar_u(-0.5));
  CHECK(c[0] == doctest::Approx(0.4013));
  CHECK(c[1] == doctest::Approx(0.2109 - 0.5));
  CHECK_THROWS_AS(sys->step(pt(0, 0), scalar_u(1.1)), InputOutOfRange);
  const auto li = sys->lipschitz();
  CHECK(li.mode == LipschitzInfo::Mode::Split);
  CHECK(li.state == doctest::Approx(0.5837));
  CHECK(li.input == doctest::Approx(1.0));
}

TEST_CASE("simulate: trivial horizon, contraction, zero input") {
  auto sys = linear_autonomous();
  const auto traj0 = simulate(*sys, nullptr, pt(1, 1), 0);
  REQUIRE(traj0.size() == 1);
  CHECK(traj0[0] == pt(1, 1));

  // Spectral radius sqrt(det A) < 1 implies contraction to the origin.
  Eigen::Matrix2d A;
  A << 0.22, 0.4013, -0.5364, 0.2109;
  CHECK(std::sqrt(A.determinant()) < 1.0);
  const auto traj = simulate(*sys, nullptr, pt(1, 1), 50);
  REQUIRE(traj.size() == 51);
  CHECK(traj.back().norm() < 1e-10);

  class ZeroController final : public Controller {
   public:
    Eigen::VectorXd control(const Point&) const override {
      return Eigen::VectorXd::Zero(1);
    }
  };
  auto ctrl_sys = linear_nonautonomous();
  ZeroController zero;
  const auto ctraj = simulate(*ctrl_sys, &zero, pt(0.3, -0.4), 20);
  const auto atraj = simulate(*sys, nullptr, pt(0.3, -0.4), 20);
  for (std::size_t k = 0; k < ctraj.size(); ++k)
    CHECK((ctraj[k] - atraj[k]).norm() == 0.0);

  CHECK_THROWS_AS(simulate(*ctrl_sys, nullptr, pt(0, 0), 5),
                  DimensionMismatch);
}

TEST_CASE("simulate composes") {
  auto sys = nonlinear_autonomous();
  const Point x0 = pt(0.3, -0.2);
  const auto full = simulate(*sys, nullptr, x0, 30);
  const auto first = simulate(*sys, nullptr, x0, 12);
  const auto second = simulate(*sys, nullptr, first.back(), 18);
  REQUIRE(full.size() == 31);
  for (int k = 0; k <= 18; ++k)
    CHECK((full[static_cast<std::size_t>(12 + k)] -
           second[static_cast<std::size_t>(k)])
              .norm() == 0.0);
}

TEST_CASE("finite-difference Lipschitz audit at benchmark constants") {
  std::mt19937 rng(2024);
  auto audit = [&](const DynamicsOracle& sys, const Box& X, int pairs) {
    std::uniform_real_distribution<double> ux(X.lo[0], X.hi[0]);
    std::uniform_real_distribution<double> uy(X.lo[1], X.hi[1]);
    const auto li = sys.lipschitz();
    std::uniform_real_distribution<double> uu(-1.0, 1.0);
    int violations = 0;
    for (int i = 0; i < pairs; ++i) {
      const Point p = pt(ux(rng), uy(rng));
      const Point q = pt(ux(rng), uy(rng));
      if (sys.input_dim() == 0) {
        const Eigen::VectorXd none(0);
        const double lhs = (sys.step(p, none) - sys.step(q, none)).norm();
        if (lhs > li.joint * (p - q).norm() + 1e-12) ++violations;
      } else {
        const Eigen::VectorXd u = scalar_u(uu(rng)), w = scalar_u(uu(rng));
        const double lhs = (sys.step(p, u) - sys.step(q, w)).norm();
        const double rhs =
            li.state * (p - q).norm() + li.input * (u - w).norm();
        if (lhs > rhs + 1e-12) ++violations;
      }
    }
    return violations;
  };
  auto lin = linear_autonomous();
  CHECK(audit(*lin, lin->default_state_box(), 20000) == 0);
  auto nl = nonlinear_autonomous();
  CHECK(audit(*nl, nl->default_state_box(), 20000) == 0);
  auto na = linear_nonautonomous();
  CHECK(audit(*na, na->default_state_box(), 20000) == 0);
}
