#include "cpabf/verify.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace cpabf {

namespace {

void worse(ConditionResult& r, double margin, int simplex, int vertex) {
  if (margin > r.worst_margin) {
    r.worst_margin = margin;
    r.worst_simplex = simplex;
    r.worst_vertex = vertex;
  }
}

void finalize(ConditionResult& r, double tol) { r.pass = r.worst_margin <= tol; }

}  // namespace

CertificateReport check_certificate(const CpaFunction& W,
                                    const Eigen::VectorXd& gamma, double b,
                                    const Dataset& dataset,
                                    const LipschitzInfo& lipschitz, double rho,
                                    double eta, double tol) {
  const Triangulation& tri = W.triangulation();
  const int V = tri.num_vertices();
  const int S = tri.num_simplices();
  if (dataset.num_samples() != V)
    throw DimensionMismatch(
        "check_certificate: one sample per vertex required");
  if (gamma.size() != S)
    throw DimensionMismatch("check_certificate: one gamma per simplex");

  CertificateReport rep;

  // Exit labeling: vertices whose sampled successors all leave the mesh
  // must sit at or above the outside value.
  for (int v = 0; v < V; ++v) {
    const auto& s = dataset.samples[static_cast<std::size_t>(v)];
    bool all_exit = true;
    for (const auto& t : s.transitions)
      all_exit = all_exit && !tri.locate(t.successor).has_value();
    if (all_exit)
      worse(rep.exit_labeling, W.epsilon() - W.value_at_vertex(v), -1, v);
  }

  // Floor on every vertex value.
  for (int v = 0; v < V; ++v)
    worse(rep.value_floor, -rho - W.value_at_vertex(v), -1, v);

  // Gradient bound per simplex.
  for (int i = 0; i < S; ++i)
    worse(rep.gradient_bound, W.gradient(i).norm2 - b, i, -1);

  // Strict decrease at every simplex vertex with the Lipschitz error
  // term; min over all recorded transitions of the vertex.
  for (int i = 0; i < S; ++i) {
    const Simplex& sx = tri.simplex(i);
    for (int j = 0; j < 3; ++j) {
      const int v = sx[j];
      const auto& sample = dataset.samples[static_cast<std::size_t>(v)];
      const int M = static_cast<int>(sample.transitions.size());
      double best = std::numeric_limits<double>::infinity();
      for (int k = 0; k < M; ++k) {
        std::vector<Eigen::VectorXd> inputs;
        if (dataset.input_dim > 0) {
          inputs.reserve(3);
          for (int r = 0; r < 3; ++r)
            inputs.push_back(dataset.samples[static_cast<std::size_t>(sx[r])]
                                 .transitions[static_cast<std::size_t>(k)]
                                 .input);
        }
        double err = 0.0;
        if (lipschitz.mode == LipschitzInfo::Mode::Joint) {
          err = lipschitz.joint * tri.simplex_diameter(i, inputs);
        } else {
          err = lipschitz.state * tri.simplex_diameter(i);
          if (dataset.input_dim > 0)
            err += lipschitz.input * tri.input_diameter(i, inputs);
        }
        const double val =
            W.evaluate_extended(
                sample.transitions[static_cast<std::size_t>(k)].successor) -
            gamma[i] * W.value_at_vertex(v) + b * err;
        best = std::min(best, val);
      }
      worse(rep.decrease, best + eta, i, v);
    }
  }

  // Classifier sign.
  for (int i = 0; i < S; ++i) worse(rep.classifier_sign, -gamma[i], i, -1);

  finalize(rep.exit_labeling, tol);
  finalize(rep.value_floor, tol);
  finalize(rep.gradient_bound, tol);
  finalize(rep.decrease, tol);
  finalize(rep.classifier_sign, tol);
  rep.overall = rep.exit_labeling.pass && rep.value_floor.pass &&
                rep.gradient_bound.pass && rep.decrease.pass &&
                rep.classifier_sign.pass;
  return rep;
}

namespace {

class SampledVertexController final : public Controller {
 public:
  SampledVertexController(std::shared_ptr<const Triangulation> tri,
                          std::vector<std::array<Eigen::VectorXd, 3>> inputs)
      : tri_(std::move(tri)), inputs_(std::move(inputs)) {}

  Eigen::VectorXd control(const Point& x) const override {
    const auto loc = tri_->locate(x);
    if (!loc)
      throw OutsideDomain("controller: state left the certified mesh");
    auto bc = tri_->barycentric(*loc, Eigen::Vector2d(x.x(), x.y()));
    // Clamp roundoff so the blend stays a convex combination.
    Eigen::Vector3d lam = bc.lambda.cwiseMax(0.0);
    lam /= lam.sum();
    const auto& u = inputs_[static_cast<std::size_t>(*loc)];
    return lam[0] * u[0] + lam[1] * u[1] + lam[2] * u[2];
  }

 private:
  std::shared_ptr<const Triangulation> tri_;
  std::vector<std::array<Eigen::VectorXd, 3>> inputs_;
};

}  // namespace

std::unique_ptr<Controller> extract_controller(
    std::shared_ptr<const Triangulation> tri, const Dataset& dataset,
    const std::vector<int>& xi) {
  if (dataset.input_dim < 1)
    throw DimensionMismatch("extract_controller: autonomous dataset");
  if (static_cast<int>(xi.size()) != tri->num_simplices())
    throw DimensionMismatch("extract_controller: one xi per simplex");
  std::vector<std::array<Eigen::VectorXd, 3>> inputs(
      static_cast<std::size_t>(tri->num_simplices()));
  for (int i = 0; i < tri->num_simplices(); ++i) {
    const Simplex& s = tri->simplex(i);
    const int k = xi[static_cast<std::size_t>(i)] - 1;
    if (k < 0 || k >= dataset.transitions_per_sample())
      throw DimensionMismatch("extract_controller: xi out of range");
    for (int j = 0; j < 3; ++j)
      inputs[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          dataset.samples[static_cast<std::size_t>(s[j])]
              .transitions[static_cast<std::size_t>(k)]
              .input;
  }
  return std::make_unique<SampledVertexController>(std::move(tri),
                                                   std::move(inputs));
}

InvarianceAudit empirical_invariance(const DynamicsOracle& oracle,
                                     const CpaFunction& W,
                                     const Controller* controller, int samples,
                                     int horizon, std::uint64_t seed) {
  InvarianceAudit audit;
  audit.horizon = horizon;
  audit.seed = seed;

  const Triangulation& tri = W.triangulation();
  Eigen::Vector2d lo = tri.vertex(0), hi = tri.vertex(0);
  for (const auto& p : tri.vertices()) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(lo.x(), hi.x());
  std::uniform_real_distribution<double> uy(lo.y(), hi.y());

  std::vector<Point> starts;
  const long attempts_cap = std::max(100000L, 1000L * samples);
  for (long attempt = 0;
       attempt < attempts_cap && static_cast<int>(starts.size()) < samples;
       ++attempt) {
    Point x(2);
    x << ux(rng), uy(rng);
    if (W.evaluate_extended(x) <= 0.0) starts.push_back(std::move(x));
  }
  audit.samples = static_cast<int>(starts.size());

  for (const auto& x0 : starts) {
    Point x = x0;
    for (int k = 1; k <= horizon; ++k) {
      Eigen::VectorXd u(0);
      if (oracle.input_dim() > 0) {
        if (controller == nullptr)
          throw DimensionMismatch(
              "empirical_invariance: controlled system needs a controller");
        try {
          u = controller->control(x);
        } catch (const OutsideDomain&) {
          audit.violations.push_back({x0, k});
          break;
        }
      }
      x = oracle.step(x, u);
      if (W.evaluate_extended(x) > 0.0) {
        audit.violations.push_back({x0, k});
        break;
      }
    }
  }
  return audit;
}

int SafeGrid::count_safe() const {
  int n = 0;
  for (auto v : safe) n += v ? 1 : 0;
  return n;
}

SafeGrid maximal_set_oracle(const DynamicsOracle& oracle, const Box& box,
                            double spacing, int horizon) {
  if (oracle.input_dim() != 0)
    throw DimensionMismatch("maximal_set_oracle: autonomous systems only");
  if (box.dim() != 2)
    throw DimensionMismatch("maximal_set_oracle: 2-D boxes only");
  SafeGrid grid;
  grid.box = box;
  grid.spacing = spacing;
  grid.nx = static_cast<int>(std::floor((box.hi[0] - box.lo[0]) / spacing));
  grid.ny = static_cast<int>(std::floor((box.hi[1] - box.lo[1]) / spacing));
  grid.safe.assign(static_cast<std::size_t>(grid.nx) * grid.ny, 0);

  const Eigen::VectorXd none(0);
  for (int j = 0; j < grid.ny; ++j) {
    for (int i = 0; i < grid.nx; ++i) {
      Point x(2);
      x << grid.center(i, j)[0], grid.center(i, j)[1];
      bool ok = box.contains(x);
      for (int k = 0; k < horizon && ok; ++k) {
        x = oracle.step(x, none);
        ok = box.contains(x);
      }
      grid.safe[static_cast<std::size_t>(j) * grid.nx + i] = ok ? 1 : 0;
    }
  }
  return grid;
}

}  // namespace cpabf
