#include "cpabf/synthesis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

namespace cpabf {

void SynthesisConfig::validate() const {
  if (!(epsilon > 0.0)) throw AssemblyError("config: epsilon must be > 0");
  if (!(rho > 0.0)) throw AssemblyError("config: rho must be > 0");
  if (!(chi > 0.0)) throw AssemblyError("config: chi must be > 0");
  if (!(gamma_cap >= 1.0)) throw AssemblyError("config: gamma_cap must be >= 1");
  if (!(strict_margin >= 0.0))
    throw AssemblyError("config: strict_margin must be >= 0");
  if (!(effective_w_cap() >= rho) || !(effective_w_cap() >= epsilon))
    throw AssemblyError("config: w_cap must dominate rho and epsilon");
  if (!(solver_tol > 0.0)) throw AssemblyError("config: solver_tol must be > 0");
}

double IcoState::successor_value(int z, int k) const {
  const auto& loc = succ_loc[static_cast<std::size_t>(z)][static_cast<std::size_t>(k)];
  if (!loc) return config.epsilon;
  const Simplex& s = tri->simplex(loc->simplex);
  return loc->bc.lambda[0] * W[s[0]] + loc->bc.lambda[1] * W[s[1]] +
         loc->bc.lambda[2] * W[s[2]];
}

double IcoState::error_coefficient(int i, int xi1based) const {
  std::vector<Eigen::VectorXd> inputs;
  if (dataset.input_dim > 0) {
    const Simplex& s = tri->simplex(i);
    inputs.reserve(3);
    for (int j = 0; j < 3; ++j)
      inputs.push_back(dataset.samples[static_cast<std::size_t>(s[j])]
                           .transitions[static_cast<std::size_t>(xi1based - 1)]
                           .input);
  }
  if (lipschitz.mode == LipschitzInfo::Mode::Joint)
    return lipschitz.joint * tri->simplex_diameter(i, inputs);
  double coeff = lipschitz.state * tri->simplex_diameter(i);
  if (dataset.input_dim > 0)
    coeff += lipschitz.input * tri->input_diameter(i, inputs);
  return coeff;
}

double IcoState::selection_criterion(int i, int xi1based) const {
  const Simplex& s = tri->simplex(i);
  double worst = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < 3; ++j) {
    const int v = s[j];
    const double val =
        successor_value(v, xi1based - 1) - gamma[i] * W[v];
    worst = std::max(worst, val);
  }
  return worst + b * error_coefficient(i, xi1based);
}

void IcoState::rebuild_containment() {
  const int N = dataset.num_samples();
  succ_in_T.assign(static_cast<std::size_t>(N), {});
  succ_loc.assign(static_cast<std::size_t>(N), {});
  exit_labeled.assign(static_cast<std::size_t>(N), false);
  for (int z = 0; z < N; ++z) {
    const auto& sample = dataset.samples[static_cast<std::size_t>(z)];
    const std::size_t M = sample.transitions.size();
    succ_in_T[static_cast<std::size_t>(z)].resize(M);
    succ_loc[static_cast<std::size_t>(z)].resize(M);
    bool all_exit = true;
    for (std::size_t k = 0; k < M; ++k) {
      const auto loc = tri->locate(sample.transitions[k].successor);
      succ_in_T[static_cast<std::size_t>(z)][k] = loc.has_value();
      if (loc) {
        const auto& suc = sample.transitions[k].successor;
        SuccessorLocation sl;
        sl.simplex = *loc;
        sl.bc = tri->barycentric(*loc, Eigen::Vector2d(suc.x(), suc.y()));
        succ_loc[static_cast<std::size_t>(z)][k] = sl;
        all_exit = false;
      }
    }
    exit_labeled[static_cast<std::size_t>(z)] = all_exit;
  }
}

IcoState initialize(const Dataset& dataset,
                    std::shared_ptr<const Triangulation> tri,
                    const SynthesisConfig& config) {
  config.validate();
  if (dataset.num_samples() == 0) throw EmptyDataset("initialize: no samples");
  dataset.validate();
  if (!tri) throw AssemblyError("initialize: null triangulation");
  if (tri->num_vertices() != dataset.num_samples())
    throw AssemblyError("initialize: triangulation must have one vertex per sample");
  for (int v = 0; v < tri->num_vertices(); ++v) {
    const auto& st = dataset.samples[static_cast<std::size_t>(v)].state;
    if (tri->vertex(v).x() != st.x() || tri->vertex(v).y() != st.y())
      throw AssemblyError("initialize: vertex/sample order mismatch");
  }

  IcoState state;
  state.tri = std::move(tri);
  state.dataset = dataset;
  state.config = config;
  if (config.lipschitz)
    state.lipschitz = *config.lipschitz;
  else if (dataset.lipschitz)
    state.lipschitz = *dataset.lipschitz;
  else
    throw AssemblyError(
        "initialize: no Lipschitz constant in the config or dataset");
  {
    const auto& li = state.lipschitz;
    const bool ok = li.mode == LipschitzInfo::Mode::Joint
                        ? li.joint > 0.0
                        : (li.state > 0.0 && li.input >= 0.0);
    if (!ok) throw AssemblyError("initialize: Lipschitz constants must be > 0");
  }

  state.rebuild_containment();

  const int V = state.num_vertices();
  const int S = state.num_simplices();
  state.W.resize(V);
  for (int v = 0; v < V; ++v)
    state.W[v] = state.exit_labeled[static_cast<std::size_t>(v)]
                     ? config.epsilon
                     : -config.rho;
  state.gamma.resize(S);
  for (int i = 0; i < S; ++i) {
    const Simplex& s = state.tri->simplex(i);
    const bool all_low = state.W[s[0]] == -config.rho &&
                         state.W[s[1]] == -config.rho &&
                         state.W[s[2]] == -config.rho;
    state.gamma[i] = all_low ? 0.1 : 1.0;
  }
  state.b = CpaFunction(state.tri, state.W, config.epsilon).gradient_norm_bound();
  state.xi = select_inputs(state);
  state.theta =
      Eigen::VectorXd::Constant(V, std::numeric_limits<double>::infinity());
  return state;
}

std::vector<int> select_inputs(const IcoState& state) {
  const int S = state.num_simplices();
  const int M = state.dataset.transitions_per_sample();
  std::vector<int> xi(static_cast<std::size_t>(S), 1);
  if (M == 1) return xi;
  for (int i = 0; i < S; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_k = 1;
    for (int k = 1; k <= M; ++k) {
      const double val = state.selection_criterion(i, k);
      if (val < best) {
        best = val;
        best_k = k;
      }
    }
    xi[static_cast<std::size_t>(i)] = best_k;
  }
  return xi;
}

ConeProgram assemble_subproblem(const IcoState& state) {
  const SynthesisConfig& cfg = state.config;
  const int V = state.num_vertices();
  const int S = state.num_simplices();
  const bool phase1 = state.phase == Phase::Feasibility;
  if (static_cast<int>(state.exit_labeled.size()) != V)
    throw AssemblyError("assemble: missing containment annotation");

  // Variable layout: dW per vertex, dgamma per simplex, b, then slacks
  // (phase 1) or hinge variables (phase 2), one per vertex.
  ConeProgram p(V + S + 1 + V);
  const auto dW = [&](int v) { return v; };
  const auto dG = [&](int i) { return V + i; };
  const int bvar = V + S;
  const auto aux = [&](int v) { return V + S + 1 + v; };

  for (int v = 0; v < V; ++v) {
    if (state.exit_labeled[static_cast<std::size_t>(v)])
      p.add_ge(AffineExpr::variable(dW(v)), cfg.epsilon - state.W[v]);
    p.add_ge(AffineExpr::variable(dW(v)), -cfg.rho - state.W[v]);
    p.add_le(AffineExpr::variable(dW(v)), cfg.effective_w_cap() - state.W[v]);
    p.add_ge(AffineExpr::variable(dW(v)), -cfg.effective_w_cap() - state.W[v]);
    if (phase1) {
      p.add_ge(AffineExpr::variable(aux(v)), 0.0);
      p.add_objective_term(aux(v), 1.0);
    } else {
      // Hinge h_v >= max(0, W_v + dW_v).
      p.add_ge(AffineExpr::variable(aux(v)), 0.0);
      p.add_ge(AffineExpr::variable(aux(v)) - AffineExpr::variable(dW(v)),
               state.W[v]);
      p.add_objective_term(aux(v), 1.0);
    }
  }

  for (int i = 0; i < S; ++i) {
    p.add_ge(AffineExpr::variable(dG(i)), -state.gamma[i]);
    p.add_le(AffineExpr::variable(dG(i)), cfg.gamma_cap - state.gamma[i]);

    // Gradient cone ||grad(W + dW)_i|| <= b.
    const Simplex& s = state.tri->simplex(i);
    const Eigen::Matrix2d& inv = state.tri->edge_matrix_inverse(i);
    std::vector<AffineExpr> grad(2);
    for (int c = 0; c < 2; ++c) {
      AffineExpr g;
      for (int j = 1; j < 3; ++j) {
        const double coef = inv(c, j - 1);
        g.constant += coef * (state.W[s[j]] - state.W[s[0]]);
        g += AffineExpr::variable(dW(s[j]), coef);
        g += AffineExpr::variable(dW(s[0]), -coef);
      }
      g.compress();
      grad[static_cast<std::size_t>(c)] = std::move(g);
    }
    p.add_rotated_cone(AffineExpr::variable(bvar), AffineExpr::variable(bvar),
                       std::move(grad));

    // Decrease condition, one overbound cone per simplex vertex.
    const int k = state.xi[static_cast<std::size_t>(i)];
    const double errc = state.error_coefficient(i, k);
    for (int j = 0; j < 3; ++j) {
      const int v = s[j];
      AffineExpr a;
      const auto& loc =
          state.succ_loc[static_cast<std::size_t>(v)][static_cast<std::size_t>(k - 1)];
      if (loc) {
        const Simplex& t = state.tri->simplex(loc->simplex);
        for (int r = 0; r < 3; ++r) {
          const double lam = loc->bc.lambda[r];
          a.constant += lam * state.W[t[r]];
          a += AffineExpr::variable(dW(t[r]), lam);
        }
      } else {
        a.constant += cfg.epsilon;
      }
      a.constant += -state.gamma[i] * state.W[v] + cfg.strict_margin;
      a += AffineExpr::variable(dG(i), -state.W[v]);
      a += AffineExpr::variable(dW(v), -state.gamma[i]);
      if (cfg.b_mode == SynthesisConfig::BMode::DecisionVariable)
        a += AffineExpr::variable(bvar, errc);
      else
        a.constant += state.b * errc;
      a.compress();

      const AffineExpr theta_expr =
          phase1 ? AffineExpr::variable(aux(v)) : AffineExpr(0.0);
      lmi_to_rotated_cone(p, a, AffineExpr::variable(dG(i)),
                          AffineExpr::variable(dW(v)), theta_expr);
    }
  }
  return p;
}

StepOutcome ico_step(IcoState& state) {
  ConeProgram p = assemble_subproblem(state);
  if (!state.config.dump_dir.empty()) {
    std::filesystem::create_directories(state.config.dump_dir);
    p.dump(state.config.dump_dir + "/subproblem_" +
           std::to_string(state.iteration) + ".cone");
  }
  SolverOptions opts;
  opts.tol = state.config.solver_tol;
  opts.max_iter = state.config.solver_max_iter;
  StepOutcome out;
  out.solution = solve(p, opts);

  if (out.solution.status == SolveStatus::Unbounded)
    throw NumericalBreakdown("ico_step: subproblem unbounded despite caps");
  if (out.solution.status == SolveStatus::Infeasible &&
      state.phase == Phase::Feasibility)
    throw NumericalBreakdown(
        "ico_step: slack-relaxed subproblem reported infeasible "
        "(assembly defect)");
  if (out.solution.status != SolveStatus::Optimal) return out;

  const int V = state.num_vertices();
  const int S = state.num_simplices();
  const auto& x = out.solution.x;
  state.W += x.head(V);
  state.gamma += x.segment(V, S);
  // Snap solver roundoff back into the classifier's range.
  for (int i = 0; i < S; ++i)
    state.gamma[i] =
        std::clamp(state.gamma[i], 0.0, state.config.gamma_cap);
  if (state.config.b_mode == SynthesisConfig::BMode::DecisionVariable)
    state.b = x[V + S];
  else
    state.b = CpaFunction(state.tri, state.W, state.config.epsilon)
                  .gradient_norm_bound();
  if (state.phase == Phase::Feasibility)
    state.theta = x.tail(V).cwiseMax(0.0);
  else
    state.theta = Eigen::VectorXd::Zero(V);

  state.xi = select_inputs(state);
  out.cost = out.solution.objective;
  state.cost_history.push_back(out.cost);
  state.iteration += 1;
  return out;
}

void complete_sample(IcoState& state, int vertex_id,
                     std::vector<Transition> transitions) {
  if (vertex_id != state.dataset.num_samples())
    throw AssemblyError("complete_sample: requests must be answered in order");
  if (static_cast<int>(transitions.size()) !=
      state.dataset.transitions_per_sample())
    throw AssemblyError("complete_sample: transition count mismatch");
  OneStepSample s;
  Point st(2);
  st << state.tri->vertex(vertex_id).x(), state.tri->vertex(vertex_id).y();
  s.state = std::move(st);
  s.transitions = std::move(transitions);
  state.dataset.samples.push_back(std::move(s));
  state.rebuild_containment();
}

namespace {

// Applies one bisection to the state: inherited vertex value, classifier
// and input selection; slacks get a fresh entry.
SampleRequest apply_bisection(IcoState& state, const BisectionResult& res) {
  const double wa = state.W[res.edge.first];
  const double wb = state.W[res.edge.second];

  Eigen::VectorXd W2(state.W.size() + 1);
  W2.head(state.W.size()) = state.W;
  W2[state.W.size()] = 0.5 * (wa + wb);

  const int S2 = res.tri.num_simplices();
  Eigen::VectorXd gamma2(S2);
  std::vector<int> xi2(static_cast<std::size_t>(S2));
  for (int i = 0; i < S2; ++i) {
    const int parent = res.parent_of[static_cast<std::size_t>(i)];
    gamma2[i] = state.gamma[parent];
    xi2[static_cast<std::size_t>(i)] = state.xi[static_cast<std::size_t>(parent)];
  }
  Eigen::VectorXd theta2(state.theta.size() + 1);
  theta2.head(state.theta.size()) = state.theta;
  theta2[state.theta.size()] = std::max(
      state.theta[res.edge.first], state.theta[res.edge.second]);

  state.tri = std::make_shared<Triangulation>(res.tri);
  state.W = std::move(W2);
  state.gamma = std::move(gamma2);
  state.xi = std::move(xi2);
  state.theta = std::move(theta2);
  state.epoch += 1;

  SampleRequest req;
  req.vertex_id = res.new_vertex;
  Point p(2);
  p << res.midpoint.x(), res.midpoint.y();
  req.state = std::move(p);
  return req;
}

}  // namespace

SampleRequest refine_feasibility(IcoState& state) {
  if (!state.theta.allFinite())
    throw AssemblyError("refine_feasibility: no slack values yet");
  const int S = state.num_simplices();
  int worst = 0;
  double worst_sum = -1.0;
  for (int i = 0; i < S; ++i) {
    const Simplex& s = state.tri->simplex(i);
    const double sum =
        state.theta[s[0]] + state.theta[s[1]] + state.theta[s[2]];
    if (sum > worst_sum) {
      worst_sum = sum;
      worst = i;
    }
  }
  const auto res = state.tri->bisect_longest_edge(worst);
  auto req = apply_bisection(state, res);
  return req;
}

std::vector<SampleRequest> refine_boundary(IcoState& state) {
  std::vector<SampleRequest> requests;
  // Distinct longest edges of the currently sign-changing simplices.
  std::set<std::pair<int, int>> edges;
  for (int i = 0; i < state.num_simplices(); ++i) {
    const Simplex& s = state.tri->simplex(i);
    const double w0 = state.W[s[0]], w1 = state.W[s[1]], w2 = state.W[s[2]];
    const bool has_pos = w0 > 0 || w1 > 0 || w2 > 0;
    const bool has_neg = w0 < 0 || w1 < 0 || w2 < 0;
    if (has_pos && has_neg) edges.insert(state.tri->longest_edge(i));
  }
  for (const auto& e : edges) {
    const auto res = state.tri->bisect_edge(e.first, e.second);
    requests.push_back(apply_bisection(state, res));
  }
  return requests;
}

namespace {

std::vector<Transition> sample_from_oracle(const IcoState& state,
                                           const DynamicsOracle& oracle,
                                           const Point& x) {
  std::vector<Transition> transitions;
  const int M = state.dataset.transitions_per_sample();
  for (int k = 0; k < M; ++k) {
    // Grid-sampled data shares one input list across samples; reuse the
    // first sample's inputs for the new state.
    Eigen::VectorXd u = state.dataset.samples[0]
                            .transitions[static_cast<std::size_t>(k)]
                            .input;
    Point suc = oracle.step(x, u);
    if (!suc.allFinite())
      throw OracleFailure("refinement: oracle produced non-finite state");
    transitions.push_back({std::move(u), std::move(suc)});
  }
  return transitions;
}

void log_iteration(SynthesisResult& result, const IcoState& state,
                   const StepOutcome& out, double wall_ms) {
  IterationRecord rec;
  rec.iter = state.iteration;
  rec.phase = state.phase;
  rec.epoch = state.epoch;
  rec.cost = out.cost;
  rec.max_slack = state.phase == Phase::Feasibility ? state.max_slack() : 0.0;
  rec.b = state.b;
  rec.solver_iters = out.solution.iterations;
  rec.wall_ms = wall_ms;
  result.log.push_back(rec);
}

std::vector<int> worst_slack_ranking(const IcoState& state) {
  std::vector<std::pair<double, int>> sums;
  for (int i = 0; i < state.num_simplices(); ++i) {
    const Simplex& s = state.tri->simplex(i);
    sums.push_back({state.theta[s[0]] + state.theta[s[1]] + state.theta[s[2]], i});
  }
  std::sort(sums.begin(), sums.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<int> ids;
  for (std::size_t k = 0; k < std::min<std::size_t>(10, sums.size()); ++k)
    if (sums[k].first > state.config.slack_tol()) ids.push_back(sums[k].second);
  return ids;
}

}  // namespace

SynthesisResult run(const Dataset& dataset, const SynthesisConfig& config,
                    const DynamicsOracle* oracle) {
  config.validate();
  if (dataset.num_samples() == 0) throw EmptyDataset("run: no samples");

  std::vector<Point> states;
  states.reserve(static_cast<std::size_t>(dataset.num_samples()));
  for (const auto& s : dataset.samples) states.push_back(s.state);
  auto tri = std::make_shared<Triangulation>(Triangulation::delaunay(states));
  return run_from(initialize(dataset, tri, config), oracle);
}

SynthesisResult run_from(IcoState state, const DynamicsOracle* oracle) {
  using Clock = std::chrono::steady_clock;
  const SynthesisConfig config = state.config;
  config.validate();
  SynthesisResult result;

  auto step_logged = [&](void) -> StepOutcome {
    const auto t0 = Clock::now();
    StepOutcome out = ico_step(state);
    const double ms =
        std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    if (out.solution.status == SolveStatus::Optimal)
      log_iteration(result, state, out, ms);
    return out;
  };

  // Feasibility phase: drive the slack sum to zero.
  state.phase = Phase::Feasibility;
  bool slack_free = state.max_slack() <= config.slack_tol();
  int refinements = 0;
  if (!slack_free) {
    double prev_cost = std::numeric_limits<double>::infinity();
    int iters = 0;
    while (iters < config.max_iter_phase1) {
      const StepOutcome out = step_logged();
      if (out.solution.status != SolveStatus::Optimal) break;
      ++iters;
      if (state.max_slack() <= config.slack_tol()) {
        slack_free = true;
        break;
      }
      const double dc = prev_cost - out.cost;
      prev_cost = out.cost;
      if (dc < config.chi) {
        if (config.refine_feasibility_enabled && oracle != nullptr &&
            refinements < config.max_feasibility_refinements) {
          SampleRequest req = refine_feasibility(state);
          complete_sample(state, req.vertex_id,
                          sample_from_oracle(state, *oracle, req.state));
          result.inserted_points.push_back(req);
          ++refinements;
          prev_cost = std::numeric_limits<double>::infinity();
          continue;
        }
        break;
      }
    }
    result.phase1_iterations = iters;
  }

  // Expansion phase: shrink the positive part of W.
  if (slack_free) {
    state.phase = Phase::Expansion;
    state.theta = Eigen::VectorXd::Zero(state.num_vertices());
    state.epoch += 1;
    int boundary_rounds = 0;
    double prev_cost = std::numeric_limits<double>::infinity();
    int iters = 0;
    while (iters < config.max_iter_phase2) {
      const StepOutcome out = step_logged();
      if (out.solution.status != SolveStatus::Optimal) break;
      ++iters;
      const double dc = prev_cost - out.cost;
      prev_cost = out.cost;
      if (dc < config.chi) {
        if (config.refine_boundary_enabled && oracle != nullptr &&
            boundary_rounds < config.max_boundary_rounds) {
          auto reqs = refine_boundary(state);
          for (auto& req : reqs) {
            complete_sample(state, req.vertex_id,
                            sample_from_oracle(state, *oracle, req.state));
            result.inserted_points.push_back(req);
          }
          ++boundary_rounds;
          prev_cost = std::numeric_limits<double>::infinity();
          continue;
        }
        break;
      }
    }
    result.phase2_iterations = iters;
  }

  result.tri = state.tri;
  result.dataset = state.dataset;
  result.W = state.W;
  result.gamma = state.gamma;
  result.xi = state.xi;
  result.epsilon = config.epsilon;
  // Report the exact gradient bound; the solved b matches it to solver
  // accuracy in decision-variable mode.
  result.b = std::max(
      state.b,
      CpaFunction(state.tri, state.W, config.epsilon).gradient_norm_bound());

  const CpaFunction barrier(state.tri, state.W, config.epsilon);
  result.boundary = barrier.zero_level_set();
  result.safe_set_area = barrier.sublevel_region_area();
  result.certificate =
      check_certificate(barrier, state.gamma, result.b, state.dataset,
                        state.lipschitz, config.rho, config.strict_margin);
  result.feasible = slack_free && result.phase2_iterations > 0 &&
                    result.certificate.overall;
  if (!slack_free) result.worst_slack_simplices = worst_slack_ranking(state);
  return result;
}

}  // namespace cpabf
