#include "cpabf/dynamics.hpp"

#include <cmath>

namespace cpabf {

namespace {

Box box2(double x1lo, double x1hi, double x2lo, double x2hi) {
  Box b;
  b.lo = Eigen::Vector2d(x1lo, x2lo);
  b.hi = Eigen::Vector2d(x1hi, x2hi);
  return b;
}

Box box_empty() {
  Box b;
  b.lo.resize(0);
  b.hi.resize(0);
  return b;
}

Box box1(double lo, double hi) {
  Box b;
  b.lo.resize(1);
  b.hi.resize(1);
  b.lo[0] = lo;
  b.hi[0] = hi;
  return b;
}

Eigen::Matrix2d benchmark_A() {
  Eigen::Matrix2d A;
  A << 0.22, 0.4013, -0.5364, 0.2109;
  return A;
}

class LinearAutonomous final : public DynamicsOracle {
 public:
  Point step(const Point& x, const Eigen::VectorXd& u) const override {
    if (x.size() != 2) throw DimensionMismatch("linear-auto: state dim != 2");
    if (u.size() != 0) throw DimensionMismatch("linear-auto: takes no input");
    return benchmark_A() * x;
  }
  int state_dim() const override { return 2; }
  int input_dim() const override { return 0; }
  LipschitzInfo lipschitz() const override {
    return LipschitzInfo::make_joint(0.5837);
  }
  std::string name() const override { return "linear-auto"; }
  Box default_state_box() const override {
    return box2(-0.25, 1.0, -1.0, 0.25);
  }
  Box default_input_box() const override { return box_empty(); }
};

class NonlinearAutonomous final : public DynamicsOracle {
 public:
  Point step(const Point& x, const Eigen::VectorXd& u) const override {
    if (x.size() != 2)
      throw DimensionMismatch("nonlinear-auto: state dim != 2");
    if (u.size() != 0)
      throw DimensionMismatch("nonlinear-auto: takes no input");
    Point out(2);
    out[0] = 0.5 * x[0] - 0.7 * x[1] * x[1];
    out[1] = 0.9 * x[1] * x[1] * x[1] + x[0] * x[1];
    return out;
  }
  int state_dim() const override { return 2; }
  int input_dim() const override { return 0; }
  LipschitzInfo lipschitz() const override {
    return LipschitzInfo::make_joint(4.05);
  }
  std::string name() const override { return "nonlinear-auto"; }
  Box default_state_box() const override { return box2(-1.0, 1.0, -1.0, 1.0); }
  Box default_input_box() const override { return box_empty(); }
};

class LinearNonAutonomous final : public DynamicsOracle {
 public:
  Point step(const Point& x, const Eigen::VectorXd& u) const override {
    if (x.size() != 2)
      throw DimensionMismatch("linear-nonauto: state dim != 2");
    if (u.size() != 1)
      throw DimensionMismatch("linear-nonauto: scalar input required");
    if (std::abs(u[0]) > 1.0 + 1e-12)
      throw InputOutOfRange("linear-nonauto: |u| exceeds 1");
    Point out = benchmark_A() * x;
    out[1] += u[0];
    return out;
  }
  int state_dim() const override { return 2; }
  int input_dim() const override { return 1; }
  LipschitzInfo lipschitz() const override {
    return LipschitzInfo::make_split(0.5837, 1.0);
  }
  std::string name() const override { return "linear-nonauto"; }
  Box default_state_box() const override {
    return box2(-0.25, 1.0, -1.0, 0.25);
  }
  Box default_input_box() const override { return box1(-1.0, 1.0); }
};

}  // namespace

std::unique_ptr<DynamicsOracle> linear_autonomous() {
  return std::make_unique<LinearAutonomous>();
}

std::unique_ptr<DynamicsOracle> nonlinear_autonomous() {
  return std::make_unique<NonlinearAutonomous>();
}

std::unique_ptr<DynamicsOracle> linear_nonautonomous() {
  return std::make_unique<LinearNonAutonomous>();
}

std::unique_ptr<DynamicsOracle> make_benchmark(const std::string& name) {
  if (name == "linear-auto") return linear_autonomous();
  if (name == "nonlinear-auto") return nonlinear_autonomous();
  if (name == "linear-nonauto") return linear_nonautonomous();
  throw OracleFailure("unknown benchmark: " + name);
}

std::vector<Point> simulate(const DynamicsOracle& oracle,
                            const Controller* controller, const Point& x0,
                            int horizon) {
  if (horizon < 0) throw DimensionMismatch("simulate: negative horizon");
  if (oracle.input_dim() > 0 && controller == nullptr)
    throw DimensionMismatch("simulate: controlled system needs a controller");
  std::vector<Point> traj;
  traj.reserve(static_cast<std::size_t>(horizon) + 1);
  traj.push_back(x0);
  Eigen::VectorXd u(0);
  for (int k = 0; k < horizon; ++k) {
    if (oracle.input_dim() > 0) u = controller->control(traj.back());
    Point next = oracle.step(traj.back(), u);
    if (!next.allFinite())
      throw OracleFailure("simulate: non-finite state at step " +
                          std::to_string(k + 1));
    traj.push_back(std::move(next));
  }
  return traj;
}

}  // namespace cpabf
