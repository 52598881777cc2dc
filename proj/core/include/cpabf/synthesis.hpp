#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cpabf/conic.hpp"
#include "cpabf/cpa.hpp"
#include "cpabf/dataset.hpp"
#include "cpabf/verify.hpp"

namespace cpabf {

struct SynthesisConfig {
  double epsilon = 0.1;  // value of the extension outside the mesh
  double rho = 1.0;      // lower floor on vertex values
  double chi = 1e-6;     // stop when the per-phase cost decrease drops below
  double gamma_cap = 1e3;
  double w_cap = 0.0;  // 0 picks 10 * max(rho, epsilon)
  double strict_margin = 1e-8;  // eta, makes the decrease strict
  int max_iter_phase1 = 200;
  int max_iter_phase2 = 200;

  enum class BMode { DecisionVariable, Frozen };
  BMode b_mode = BMode::DecisionVariable;

  std::optional<LipschitzInfo> lipschitz;  // overrides the dataset's

  double solver_tol = 1e-8;
  int solver_max_iter = 100;

  bool refine_feasibility_enabled = false;
  bool refine_boundary_enabled = false;
  int max_feasibility_refinements = 25;
  int max_boundary_rounds = 2;

  std::string dump_dir;  // when set, dumps subproblem_<iter>.cone files
  bool verbose = false;

  double effective_w_cap() const {
    return w_cap > 0.0 ? w_cap : 10.0 * std::max(rho, epsilon);
  }
  double slack_tol() const { return 10.0 * solver_tol; }
  void validate() const;
};

enum class Phase { Feasibility, Expansion };

/// Mutable state of the iterative convex overbounding loop: the current
/// certificate candidate (W, Gamma, Xi, b), slacks and bookkeeping.
struct IcoState {
  std::shared_ptr<const Triangulation> tri;
  Dataset dataset;
  SynthesisConfig config;
  LipschitzInfo lipschitz;

  Eigen::VectorXd W;       // per vertex
  Eigen::VectorXd gamma;   // per simplex
  std::vector<int> xi;     // per simplex, 1-based index into transitions
  double b = 0.0;
  Eigen::VectorXd theta;   // per vertex, slacks of the last solve
  Phase phase = Phase::Feasibility;
  int iteration = 0;
  int epoch = 0;  // bumps on refinement; cost monotonicity is per epoch
  std::vector<double> cost_history;

  // Successor caches on the current triangulation.
  struct SuccessorLocation {
    int simplex = -1;
    BarycentricCoords bc;
  };
  std::vector<std::vector<bool>> succ_in_T;
  std::vector<std::vector<std::optional<SuccessorLocation>>> succ_loc;
  std::vector<bool> exit_labeled;  // all sampled successors leave the mesh

  int num_vertices() const { return tri->num_vertices(); }
  int num_simplices() const { return tri->num_simplices(); }
  double max_slack() const {
    return theta.size() ? theta.maxCoeff()
                        : std::numeric_limits<double>::infinity();
  }

  /// Extended value of the current W at successor (z, k).
  double successor_value(int z, int k) const;

  /// Coefficient multiplying b in the error term for simplex i when every
  /// vertex uses its transition `xi1based`; Lg * c_i for a joint constant,
  /// Lx * c_i^x + Lu * c_i^u split.
  double error_coefficient(int i, int xi1based) const;

  /// Remark-2 selection criterion for simplex i and candidate input.
  double selection_criterion(int i, int xi1based) const;

  /// Re-locates every successor against the current triangulation.
  void rebuild_containment();
};

/// New-vertex data request issued by a refinement step.
struct SampleRequest {
  int vertex_id = -1;
  Point state;
};

struct IterationRecord {
  int iter = 0;
  Phase phase = Phase::Feasibility;
  int epoch = 0;
  double cost = 0.0;
  double max_slack = 0.0;
  double b = 0.0;
  int solver_iters = 0;
  double wall_ms = 0.0;
};

struct SynthesisResult {
  std::shared_ptr<const Triangulation> tri;
  Dataset dataset;  // final data, including refinement-inserted samples
  Eigen::VectorXd W;
  Eigen::VectorXd gamma;
  std::vector<int> xi;
  double b = 0.0;
  double epsilon = 0.1;
  bool feasible = false;
  std::vector<Segment> boundary;
  double safe_set_area = 0.0;
  CertificateReport certificate;
  std::vector<IterationRecord> log;
  std::vector<SampleRequest> inserted_points;
  std::vector<int> worst_slack_simplices;  // populated when phase 1 stalls
  int phase1_iterations = 0;
  int phase2_iterations = 0;

  CpaFunction barrier() const { return CpaFunction(tri, W, epsilon); }
};

/// Labels vertices from successor containment, applies the initialization
/// rules (-rho / epsilon values, 0.1 / 1 classifier) and selects inputs.
IcoState initialize(const Dataset& dataset,
                    std::shared_ptr<const Triangulation> tri,
                    const SynthesisConfig& config);

/// Per-simplex argmin of the selection criterion, ties to the smallest
/// index; all ones for single-transition data.
std::vector<int> select_inputs(const IcoState& state);

/// One convex subproblem: variables dW, dgamma, b, per-vertex slacks
/// (phase 1) or hinge variables (phase 2).
ConeProgram assemble_subproblem(const IcoState& state);

struct StepOutcome {
  ConeSolution solution;
  double cost = 0.0;
};

/// Solves the subproblem and commits the deltas; reselects inputs.
StepOutcome ico_step(IcoState& state);

/// Supplies the one-step data for a vertex created by refinement.
void complete_sample(IcoState& state, int vertex_id,
                     std::vector<Transition> transitions);

/// Bisects the simplex with the largest summed slack; values and
/// classifier are inherited so the current candidate survives the split.
SampleRequest refine_feasibility(IcoState& state);

/// Bisects every simplex whose vertex values change sign, one midpoint
/// per distinct edge.
std::vector<SampleRequest> refine_boundary(IcoState& state);

/// Full two-phase loop with optional refinement (requires an oracle to
/// answer sample requests).
SynthesisResult run(const Dataset& dataset, const SynthesisConfig& config,
                    const DynamicsOracle* oracle = nullptr);

/// Same loop starting from an existing state (e.g. a reloaded bundle).
SynthesisResult run_from(IcoState state, const DynamicsOracle* oracle = nullptr);

}  // namespace cpabf
