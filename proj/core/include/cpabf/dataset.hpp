#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cpabf/dynamics.hpp"
#include "cpabf/geometry.hpp"

namespace cpabf {

struct Transition {
  Eigen::VectorXd input;  // empty for autonomous data
  Point successor;
};

/// One sampled state together with its recorded one-step transitions.
struct OneStepSample {
  Point state;
  std::vector<Transition> transitions;
};

/// One-step trajectory data; the only system information synthesis sees.
/// Every sample carries the same number of transitions M.
struct Dataset {
  std::vector<OneStepSample> samples;
  int state_dim = 0;
  int input_dim = 0;
  Box state_box;
  Box input_box;
  std::optional<LipschitzInfo> lipschitz;

  int num_samples() const { return static_cast<int>(samples.size()); }
  int transitions_per_sample() const {
    return samples.empty() ? 0
                           : static_cast<int>(samples[0].transitions.size());
  }

  /// Checks the structural invariants (uniform M, dimensions, box
  /// membership); throws SchemaError on violation.
  void validate() const;

  bool operator==(const Dataset& other) const;
};

/// Samples a regular grid over X (and U, when the oracle is controlled):
/// round(width/spacing) + 1 points per axis, corners included, one
/// transition per input-grid point.
Dataset grid_sample(const DynamicsOracle& oracle, const Box& state_box,
                    double state_spacing, const Box& input_box,
                    double input_spacing);
Dataset grid_sample(const DynamicsOracle& oracle, const Box& state_box,
                    double state_spacing);

/// CSV with header `state_id,x1..xn,u1..um,xp1..xpn` plus a JSON sidecar
/// (same path, .json extension) recording dimensions, boxes and Lipschitz
/// constants. Numeric fields round-trip bit-exactly.
void save_dataset(const Dataset& dataset, const std::string& csv_path);
Dataset load_dataset(const std::string& csv_path);

/// successor_in_T flag per (sample, transition).
std::vector<std::vector<bool>> annotate_containment(const Dataset& dataset,
                                                    const Triangulation& tri);

/// max over data pairs of ||xp_a - xp_b|| / ||(x_a,u_a) - (x_b,u_b)||;
/// a lower bound on any valid Lipschitz constant of the sampled map.
double estimate_lipschitz_lower_bound(const Dataset& dataset);

}  // namespace cpabf
