#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "cpabf/dataset.hpp"

using namespace cpabf;

namespace {

Point pt(double x, double y) {
  Point p(2);
  p << x, y;
  return p;
}

std::string temp_csv(const std::string& stem) {
  return (std::filesystem::temp_directory_path() / (stem + ".csv")).string();
}

// Contraction map x+ = 0.5 x, exact Lipschitz constant 0.5.
class Halving final : public DynamicsOracle {
 public:
  Point step(const Point& x, const Eigen::VectorXd&) const override {
    return 0.5 * x;
  }
  int state_dim() const override { return 2; }
  int input_dim() const override { return 0; }
  LipschitzInfo lipschitz() const override {
    return LipschitzInfo::make_joint(0.5);
  }
  std::string name() const override { return "halving"; }
  Box default_state_box() const override {
    Box b;
    b.lo = Eigen::Vector2d(-1, -1);
    b.hi = Eigen::Vector2d(1, 1);
    return b;
  }
  Box default_input_box() const override {
    Box b;
    b.lo.resize(0);
    b.hi.resize(0);
    return b;
  }
};

}  // namespace

TEST_CASE("grid sampling reproduces the paper's dataset sizes") {
  auto lin = linear_autonomous();
  const Dataset d = grid_sample(*lin, lin->default_state_box(), 0.0625);
  CHECK(d.num_samples() == 441);
  CHECK(d.transitions_per_sample() == 1);
  CHECK(d.state_dim == 2);
  CHECK(d.input_dim == 0);

  auto na = linear_nonautonomous();
  const Dataset dna = grid_sample(*na, na->default_state_box(), 0.0625,
                                  na->default_input_box(), 0.1);
  CHECK(dna.num_samples() == 441);
  CHECK(dna.transitions_per_sample() == 21);

  // Spacing equal to the box width: corners only.
  const Dataset corners = grid_sample(*lin, lin->default_state_box(), 1.25);
  CHECK(corners.num_samples() == 4);
}

TEST_CASE("grid sampling is deterministic") {
  auto lin = linear_autonomous();
  const Dataset a = grid_sample(*lin, lin->default_state_box(), 0.125);
  const Dataset b = grid_sample(*lin, lin->default_state_box(), 0.125);
  CHECK(a == b);
}

TEST_CASE("save/load round trip is bit exact") {
  auto na = linear_nonautonomous();
  Box small = na->default_state_box();
  const Dataset d =
      grid_sample(*na, small, 0.25, na->default_input_box(), 0.5);
  const std::string path = temp_csv("cpabf_roundtrip");
  save_dataset(d, path);
  const Dataset back = load_dataset(path);
  CHECK(back == d);
  CHECK(back.lipschitz.has_value());
  CHECK(back.lipschitz->mode == LipschitzInfo::Mode::Split);

  auto lin = linear_autonomous();
  const Dataset da = grid_sample(*lin, lin->default_state_box(), 0.25);
  const std::string patha = temp_csv("cpabf_roundtrip_auto");
  save_dataset(da, patha);
  CHECK(load_dataset(patha) == da);
}

TEST_CASE("schema errors carry the offending location") {
  const std::string path = temp_csv("cpabf_schema");
  {
    std::ofstream f(path);
    f << "state_id,x1,x2,xp1,xp2\n";
    f << "0,0.0,0.0,0.1,0.1\n";
    f << "1,1.0,1.0\n";  // short row
  }
  std::remove((path.substr(0, path.size() - 4) + ".json").c_str());
  try {
    load_dataset(path);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }

  {
    std::ofstream f(path);
    f << "";
  }
  CHECK_THROWS_AS(load_dataset(path), SchemaError);

  {
    std::ofstream f(path);
    f << "state_id,x1,x2,xp1,xp2\n";
    f << "0,0.0,abc,0.1,0.1\n";
  }
  CHECK_THROWS_AS(load_dataset(path), SchemaError);

  // Ragged transition counts are rejected.
  {
    std::ofstream f(path);
    f << "state_id,x1,x2,u1,xp1,xp2\n";
    f << "0,0.0,0.0,-1,0.1,0.1\n";
    f << "0,0.0,0.0,1,0.1,0.1\n";
    f << "1,0.5,0.5,-1,0.2,0.2\n";
  }
  CHECK_THROWS_AS(load_dataset(path), SchemaError);
}

TEST_CASE("containment annotation matches brute-force hull membership") {
  auto lin = linear_autonomous();
  const Dataset d = grid_sample(*lin, lin->default_state_box(), 0.125);
  std::vector<Point> states;
  for (const auto& s : d.samples) states.push_back(s.state);
  const auto tri = Triangulation::delaunay(states);
  const auto flags = annotate_containment(d, tri);

  // Independent oracle: for a rectangle-gridded mesh the hull is the box.
  const Box& X = d.state_box;
  int inside = 0;
  for (int z = 0; z < d.num_samples(); ++z) {
    const auto& suc = d.samples[static_cast<std::size_t>(z)].transitions[0].successor;
    const bool brute = X.contains(suc, 1e-12);
    CHECK(flags[static_cast<std::size_t>(z)][0] == brute);
    inside += brute ? 1 : 0;
  }
  CHECK(inside > 0);
  CHECK(inside < d.num_samples());

  // A successor equal to a vertex is contained.
  Dataset d2 = d;
  d2.samples[0].transitions[0].successor = d.samples[5].state;
  const auto flags2 = annotate_containment(d2, tri);
  CHECK(flags2[0][0]);
}

TEST_CASE("lipschitz lower bound estimator") {
  Halving oracle;
  const Dataset d = grid_sample(oracle, oracle.default_state_box(), 0.25);
  const double est = estimate_lipschitz_lower_bound(d);
  CHECK(est <= 0.5 + 1e-12);
  CHECK(est > 0.49);

  auto lin = linear_autonomous();
  const Dataset dl = grid_sample(*lin, lin->default_state_box(), 0.0625);
  const double estl = estimate_lipschitz_lower_bound(dl);
  CHECK(estl <= 0.5837);

  // Duplicate states with identical successors only add zero-denominator
  // pairs, which are skipped.
  Dataset dup = d;
  dup.samples.push_back(dup.samples[0]);
  CHECK(estimate_lipschitz_lower_bound(dup) == doctest::Approx(est));
}
