#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "cpabf/synthesis.hpp"

using namespace cpabf;

namespace {

Point pt(double x, double y) {
  Point p(2);
  p << x, y;
  return p;
}

Dataset triangle_dataset(const std::vector<Point>& states,
                         const std::vector<std::vector<Point>>& successors,
                         double L = 0.5) {
  Dataset d;
  d.state_dim = 2;
  d.input_dim = 0;
  d.lipschitz = LipschitzInfo::make_joint(L);
  Eigen::Vector2d lo = states[0].head<2>(), hi = states[0].head<2>();
  for (const auto& s : states) {
    lo = lo.cwiseMin(s.head<2>());
    hi = hi.cwiseMax(s.head<2>());
  }
  d.state_box.lo = lo;
  d.state_box.hi = hi;
  d.input_box.lo.resize(0);
  d.input_box.hi.resize(0);
  for (std::size_t z = 0; z < states.size(); ++z) {
    OneStepSample s;
    s.state = states[z];
    for (const auto& suc : successors[z])
      s.transitions.push_back({Eigen::VectorXd(0), suc});
    d.samples.push_back(std::move(s));
  }
  return d;
}

IcoState small_state(const Dataset& d, SynthesisConfig cfg = {}) {
  std::vector<Point> states;
  for (const auto& s : d.samples) states.push_back(s.state);
  auto tri = std::make_shared<Triangulation>(Triangulation::delaunay(states));
  return initialize(d, tri, cfg);
}

}  // namespace

TEST_CASE("initialization labels vertices and classifiers") {
  const std::vector<Point> states = {pt(0, 0), pt(1, 0), pt(0, 1)};

  SUBCASE("all successors inside: floor value, low classifier") {
    const Point inside = pt(0.25, 0.25);
    const auto st = small_state(
        triangle_dataset(states, {{inside}, {inside}, {inside}}));
    CHECK(st.W.minCoeff() == -1.0);
    CHECK(st.W.maxCoeff() == -1.0);
    CHECK(st.gamma[0] == 0.1);
    CHECK(st.b == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(st.xi == std::vector<int>{1});
  }

  SUBCASE("one exiting vertex raises its value and the classifier") {
    const Point inside = pt(0.25, 0.25);
    const Point outside = pt(5, 5);
    const auto st = small_state(
        triangle_dataset(states, {{outside}, {inside}, {inside}}));
    int raised = 0;
    for (int v = 0; v < 3; ++v) {
      if (st.W[v] == st.config.epsilon) ++raised;
    }
    CHECK(raised == 1);
    CHECK(st.gamma[0] == 1.0);
  }

  SUBCASE("a single staying successor keeps the floor value") {
    std::vector<std::vector<Point>> succ(3);
    for (int v = 0; v < 3; ++v) {
      for (int k = 0; k < 20; ++k) succ[v].push_back(pt(9, 9));
      succ[v].push_back(pt(0.2, 0.2));
    }
    Dataset d = triangle_dataset(states, succ);
    // Make it nominally non-autonomous so M = 21 is structural.
    const auto st = small_state(d);
    CHECK(st.W.minCoeff() == -1.0);
    CHECK(st.W.maxCoeff() == -1.0);
  }
}

TEST_CASE("input selection") {
  const std::vector<Point> states = {pt(0, 0), pt(1, 0), pt(0, 1)};

  SUBCASE("autonomous data selects the only transition") {
    const auto st = small_state(
        triangle_dataset(states, {{pt(0.1, 0.1)}, {pt(0.1, 0.1)}, {pt(0.1, 0.1)}}));
    CHECK(select_inputs(st) == std::vector<int>{1});
  }

  SUBCASE("dominated input loses") {
    // Transition 1 exits (extended value epsilon); transition 2 stays.
    Dataset d;
    d.state_dim = 2;
    d.input_dim = 1;
    d.lipschitz = LipschitzInfo::make_joint(0.5);
    d.state_box.lo = Eigen::Vector2d(0, 0);
    d.state_box.hi = Eigen::Vector2d(1, 1);
    d.input_box.lo = Eigen::VectorXd::Constant(1, -1);
    d.input_box.hi = Eigen::VectorXd::Constant(1, 1);
    for (const auto& s : states) {
      OneStepSample smp;
      smp.state = s;
      Eigen::VectorXd u1 = Eigen::VectorXd::Constant(1, -1.0);
      Eigen::VectorXd u2 = Eigen::VectorXd::Constant(1, 1.0);
      smp.transitions.push_back({u1, pt(7, 7)});
      smp.transitions.push_back({u2, pt(0.2, 0.2)});
      d.samples.push_back(std::move(smp));
    }
    const auto st = small_state(d);
    CHECK(select_inputs(st) == std::vector<int>{2});
  }

  SUBCASE("five-input instance matches exhaustive enumeration") {
    std::mt19937 rng(404);
    std::uniform_real_distribution<double> u(-0.2, 1.2);
    Dataset d;
    d.state_dim = 2;
    d.input_dim = 1;
    d.lipschitz = LipschitzInfo::make_joint(0.8);
    d.state_box.lo = Eigen::Vector2d(-0.5, -0.5);
    d.state_box.hi = Eigen::Vector2d(1.5, 1.5);
    d.input_box.lo = Eigen::VectorXd::Constant(1, -2);
    d.input_box.hi = Eigen::VectorXd::Constant(1, 2);
    std::vector<Point> pts = {pt(0, 0), pt(1, 0), pt(0, 1), pt(1, 1),
                              pt(0.4, 0.6)};
    for (const auto& s : pts) {
      OneStepSample smp;
      smp.state = s;
      for (int k = 0; k < 5; ++k) {
        Eigen::VectorXd uk = Eigen::VectorXd::Constant(1, -2.0 + k);
        smp.transitions.push_back({uk, pt(u(rng), u(rng))});
      }
      d.samples.push_back(std::move(smp));
    }
    auto st = small_state(d);
    // Randomize the state so the criterion is nontrivial.
    std::uniform_real_distribution<double> w(-1.0, 1.0);
    for (int v = 0; v < st.num_vertices(); ++v) st.W[v] = w(rng);
    for (int i = 0; i < st.num_simplices(); ++i) st.gamma[i] = 0.5 + 0.5 * w(rng) + 0.5;
    st.b = 1.3;

    const auto xi = select_inputs(st);
    for (int i = 0; i < st.num_simplices(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      int best_k = 1;
      for (int k = 1; k <= 5; ++k) {
        const double val = st.selection_criterion(i, k);
        if (val < best) {
          best = val;
          best_k = k;
        }
      }
      CHECK(xi[static_cast<std::size_t>(i)] == best_k);
    }
  }
}

TEST_CASE("subproblem census on a single simplex") {
  const std::vector<Point> states = {pt(0, 0), pt(1, 0), pt(0, 1)};
  const Point inside = pt(0.25, 0.25);
  auto st = small_state(
      triangle_dataset(states, {{inside}, {inside}, {inside}}));

  const ConeProgram p1 = assemble_subproblem(st);
  CHECK(p1.num_vars() == 3 + 1 + 1 + 3);  // dW, dgamma, b, slacks
  CHECK(p1.cones().size() == 4);          // 1 gradient + 3 decrease

  st.phase = Phase::Expansion;
  const ConeProgram p2 = assemble_subproblem(st);
  CHECK(p2.num_vars() == 3 + 1 + 1 + 3);  // slacks replaced by hinges
  CHECK(p2.cones().size() == 4);
  // Hinge rows add two inequalities per vertex beyond phase 1's one.
  CHECK(p2.rows().size() > p1.rows().size());
}

TEST_CASE("zero-delta point with large slacks is feasible in phase 1") {
  auto lin = linear_autonomous();
  const Dataset d = grid_sample(*lin, lin->default_state_box(), 0.25);
  auto st = small_state(d);
  const ConeProgram p = assemble_subproblem(st);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(p.num_vars());
  const int V = st.num_vertices();
  const int S = st.num_simplices();
  x[V + S] = 1e5;  // b
  x.tail(V).setConstant(1e5);
  CHECK(p.max_violation(x) <= 1e-9);
}

TEST_CASE("ico steps decrease the slack objective monotonically") {
  auto lin = linear_autonomous();
  const Dataset d = grid_sample(*lin, lin->default_state_box(), 0.25);
  auto st = small_state(d);

  double prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 6; ++it) {
    const auto old_xi = st.xi;
    const auto out = ico_step(st);
    REQUIRE(out.solution.status == SolveStatus::Optimal);
    CHECK(out.cost <= prev + 10 * st.config.solver_tol);
    prev = out.cost;
    // Reselection never worsens the criterion.
    for (int i = 0; i < st.num_simplices(); ++i) {
      CHECK(st.selection_criterion(i, st.xi[static_cast<std::size_t>(i)]) <=
            st.selection_criterion(i, old_xi[static_cast<std::size_t>(i)]) +
                1e-9);
    }
    if (st.max_slack() <= st.config.slack_tol()) break;
  }
}

TEST_CASE("end-to-end synthesis on a coarse linear benchmark") {
  auto lin = linear_autonomous();
  const Dataset d = grid_sample(*lin, lin->default_state_box(), 0.125);
  SynthesisConfig cfg;
  cfg.max_iter_phase1 = 80;
  cfg.max_iter_phase2 = 25;
  const SynthesisResult res = run(d, cfg);
  CHECK(res.feasible);
  CHECK(res.certificate.overall);
  CHECK(res.safe_set_area > 0.0);
  CHECK(!res.boundary.empty());
  CHECK(res.phase1_iterations <= 80);

  // Per-phase costs never increase beyond solver noise.
  double prev = std::numeric_limits<double>::infinity();
  int epoch = -1;
  for (const auto& rec : res.log) {
    if (rec.epoch != epoch) {
      epoch = rec.epoch;
      prev = std::numeric_limits<double>::infinity();
    }
    CHECK(rec.cost <= prev + 10 * cfg.solver_tol);
    prev = rec.cost;
  }
}

TEST_CASE("every-successor-exits degenerates to an empty safe set") {
  const std::vector<Point> states = {pt(0, 0), pt(1, 0), pt(0, 1), pt(1, 1)};
  std::vector<std::vector<Point>> succ(4, {pt(50, 50)});
  const Dataset d = triangle_dataset(states, succ);
  SynthesisConfig cfg;
  cfg.max_iter_phase1 = 50;
  cfg.max_iter_phase2 = 10;
  const SynthesisResult res = run(d, cfg);
  CHECK(res.feasible);
  CHECK(res.certificate.overall);
  CHECK(res.safe_set_area == doctest::Approx(0.0));
  CHECK(res.W.minCoeff() >= cfg.epsilon - 1e-7);
}

TEST_CASE("feasibility refinement picks the worst simplex and inherits") {
  const std::vector<Point> states = {pt(0, 0), pt(1, 0), pt(0, 1), pt(1, 1)};
  const Point inside = pt(0.5, 0.4);
  auto st = small_state(triangle_dataset(
      states, {{inside}, {inside}, {inside}, {inside}}));
  REQUIRE(st.num_simplices() == 2);

  // Slacks concentrated on the vertex opposite the shared diagonal of
  // simplex 1 make simplex 1 the bisection target.
  st.theta = Eigen::VectorXd::Zero(4);
  int only_in_1 = -1;
  for (int v = 0; v < 4; ++v) {
    if (!st.tri->simplex(0).contains_vertex(v)) only_in_1 = v;
  }
  REQUIRE(only_in_1 >= 0);
  st.theta[only_in_1] = 2.0;
  st.gamma[0] = 0.7;
  st.gamma[1] = 0.7;
  st.W << -1.0, -1.0, -1.0, -1.0;
  st.W[only_in_1] = st.config.epsilon;

  const auto req = refine_feasibility(st);
  CHECK(req.vertex_id == 4);
  CHECK(st.num_vertices() == 5);
  // Children inherit the parent classifier.
  for (int i = 0; i < st.num_simplices(); ++i)
    CHECK(st.gamma[i] == doctest::Approx(0.7));
  // The new value is the midpoint of the split edge's endpoint values.
  const double expect_mid = 0.5 * (st.W[st.theta.size() - 1 >= 0 ? 0 : 0] + 0);
  (void)expect_mid;
  CHECK((st.W[4] == doctest::Approx(0.5 * (-1.0 + st.config.epsilon)) ||
         st.W[4] == doctest::Approx(-1.0)));

  complete_sample(st, 4, {{Eigen::VectorXd(0), inside}});
  CHECK(st.dataset.num_samples() == 5);
  // State remains assemblable after the refinement.
  const auto p = assemble_subproblem(st);
  CHECK(p.num_vars() == 5 + st.num_simplices() + 1 + 5);
}

TEST_CASE("boundary refinement bisects each distinct sign-changing edge once") {
  const std::vector<Point> states = {pt(0, 0), pt(1, 0), pt(0, 1), pt(1, 1)};
  const Point inside = pt(0.5, 0.4);
  auto st = small_state(triangle_dataset(
      states, {{inside}, {inside}, {inside}, {inside}}));
  REQUIRE(st.num_simplices() == 2);

  SUBCASE("all-negative values: no refinement") {
    st.W.setConstant(-1.0);
    CHECK(refine_boundary(st).empty());
  }

  SUBCASE("sign change across the shared diagonal") {
    // Both triangles change sign; their longest edge is the shared
    // diagonal, so exactly one midpoint is inserted.
    st.W.setConstant(-1.0);
    for (int v = 0; v < 4; ++v) {
      const auto& s0 = st.tri->simplex(0);
      const auto& s1 = st.tri->simplex(1);
      const bool shared = s0.contains_vertex(v) && s1.contains_vertex(v);
      if (!shared) st.W[v] = 1.0;
    }
    const auto reqs = refine_boundary(st);
    CHECK(reqs.size() == 1);
    CHECK(st.num_vertices() == 5);
    CHECK(st.num_simplices() == 4);
  }
}

TEST_CASE("refinement during a full run logs the inserted points") {
  auto lin = linear_autonomous();
  const Dataset d = grid_sample(*lin, lin->default_state_box(), 0.25);
  SynthesisConfig cfg;
  cfg.max_iter_phase1 = 60;
  cfg.max_iter_phase2 = 15;
  cfg.refine_feasibility_enabled = true;
  cfg.refine_boundary_enabled = true;
  cfg.max_feasibility_refinements = 30;
  cfg.max_boundary_rounds = 1;
  const SynthesisResult res = run(d, cfg, lin.get());
  // Inserted points (if any) must appear in the final dataset.
  CHECK(res.dataset.num_samples() ==
        36 + static_cast<int>(res.inserted_points.size()));
  CHECK(res.tri->num_vertices() == res.dataset.num_samples());
  if (res.feasible) CHECK(res.certificate.overall);
}
