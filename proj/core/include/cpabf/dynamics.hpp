#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cpabf/geometry.hpp"

namespace cpabf {

/// Axis-aligned box.
struct Box {
  Eigen::VectorXd lo, hi;

  int dim() const { return static_cast<int>(lo.size()); }
  bool contains(const Eigen::VectorXd& v, double tol = 1e-12) const {
    for (int d = 0; d < dim(); ++d)
      if (v[d] < lo[d] - tol || v[d] > hi[d] + tol) return false;
    return true;
  }
};

/// Lipschitz constants of the sampled map, either for the stacked (x, u)
/// argument or split per block (||A|| ||x-y|| + ||B|| ||u-w|| style bound).
struct LipschitzInfo {
  enum class Mode { Joint, Split };
  Mode mode = Mode::Joint;
  double joint = 0.0;
  double state = 0.0;
  double input = 0.0;

  static LipschitzInfo make_joint(double l) { return {Mode::Joint, l, l, 0.0}; }
  static LipschitzInfo make_split(double lx, double lu) {
    return {Mode::Split, 0.0, lx, lu};
  }
};

/// One-step dynamics x+ = g(x, u). Implementations must be deterministic
/// and re-entrant.
class DynamicsOracle {
 public:
  virtual ~DynamicsOracle() = default;
  virtual Point step(const Point& x, const Eigen::VectorXd& u) const = 0;
  virtual int state_dim() const = 0;
  virtual int input_dim() const = 0;
  virtual LipschitzInfo lipschitz() const = 0;
  virtual std::string name() const = 0;
  /// Constraint boxes the benchmark was studied on.
  virtual Box default_state_box() const = 0;
  virtual Box default_input_box() const = 0;
};

/// State feedback with values in the input constraint set.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual Eigen::VectorXd control(const Point& x) const = 0;
};

/// x+ = [0.22 0.4013; -0.5364 0.2109] x on [-0.25,1] x [-1,0.25], L = 0.5837.
std::unique_ptr<DynamicsOracle> linear_autonomous();

/// x+ = [0.5 x1 - 0.7 x2^2; 0.9 x2^3 + x1 x2] on [-1,1]^2, L = 4.05.
std::unique_ptr<DynamicsOracle> nonlinear_autonomous();

/// The linear benchmark driven by a scalar input through [0; 1],
/// u in [-1, 1], split constants {0.5837, 1}.
std::unique_ptr<DynamicsOracle> linear_nonautonomous();

/// Lookup by CLI name: linear-auto | nonlinear-auto | linear-nonauto.
std::unique_ptr<DynamicsOracle> make_benchmark(const std::string& name);

/// Rolls the oracle forward `horizon` steps; the controller is consulted
/// at every step and is required exactly when input_dim > 0.
std::vector<Point> simulate(const DynamicsOracle& oracle,
                            const Controller* controller, const Point& x0,
                            int horizon);

}  // namespace cpabf
