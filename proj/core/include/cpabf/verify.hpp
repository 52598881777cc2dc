#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <vector>

#include "cpabf/cpa.hpp"
#include "cpabf/dataset.hpp"
#include "cpabf/dynamics.hpp"

namespace cpabf {

/// Outcome of one certificate condition. The margin is a signed
/// violation: values at or below the checker tolerance pass.
struct ConditionResult {
  bool pass = true;
  double worst_margin = -std::numeric_limits<double>::infinity();
  int worst_simplex = -1;
  int worst_vertex = -1;
};

/// Exact re-check of the barrier certificate, condition by condition:
/// exit labeling, value floor, gradient bound, strict decrease with the
/// Lipschitz error term, classifier sign.
struct CertificateReport {
  ConditionResult exit_labeling;
  ConditionResult value_floor;
  ConditionResult gradient_bound;
  ConditionResult decrease;
  ConditionResult classifier_sign;
  bool overall = false;

  static constexpr const char* kConditionNames[5] = {
      "exit_labeling", "value_floor", "gradient_bound", "decrease",
      "classifier_sign"};
};

/// Evaluates every certificate condition directly (no solver involved).
/// The decrease condition takes the min over all recorded transitions of
/// each vertex, which is at least as strict as any synthesized input
/// selection. `rho` is the floor, `eta` the strict-decrease margin.
CertificateReport check_certificate(const CpaFunction& W,
                                    const Eigen::VectorXd& gamma, double b,
                                    const Dataset& dataset,
                                    const LipschitzInfo& lipschitz, double rho,
                                    double eta, double tol = 1e-9);

/// Controller assembled from sampled inputs: at x in simplex i with
/// barycentric weights lambda, u = sum_j lambda_j u_{i,j,xi_i}. Convexity
/// of the input set keeps the blend admissible. Throws OutsideDomain
/// beyond the mesh.
std::unique_ptr<Controller> extract_controller(
    std::shared_ptr<const Triangulation> tri, const Dataset& dataset,
    const std::vector<int>& xi);

struct InvarianceAudit {
  int samples = 0;
  int horizon = 0;
  std::uint64_t seed = 0;
  struct Violation {
    Point initial_state;
    int first_exit_step = 0;
  };
  std::vector<Violation> violations;

  double violation_rate() const {
    return samples == 0 ? 0.0
                        : static_cast<double>(violations.size()) / samples;
  }
};

/// Draws seeded initial states with W <= 0 and rolls the oracle forward,
/// recording any step where the extended barrier goes positive. The
/// controller is consulted when the oracle takes inputs.
InvarianceAudit empirical_invariance(const DynamicsOracle& oracle,
                                     const CpaFunction& W,
                                     const Controller* controller, int samples,
                                     int horizon, std::uint64_t seed);

/// Brute-force stand-in for the maximal control-invariant set of an
/// autonomous system: a cell is safe when the trajectory from its center
/// stays inside the box for the whole horizon.
struct SafeGrid {
  Box box;
  double spacing = 0.0;
  int nx = 0, ny = 0;
  std::vector<std::uint8_t> safe;

  bool at(int i, int j) const {
    return safe[static_cast<std::size_t>(j) * nx + i] != 0;
  }
  Eigen::Vector2d center(int i, int j) const {
    return {box.lo[0] + (i + 0.5) * spacing, box.lo[1] + (j + 0.5) * spacing};
  }
  int count_safe() const;
};

SafeGrid maximal_set_oracle(const DynamicsOracle& oracle, const Box& box,
                            double spacing, int horizon);

}  // namespace cpabf
