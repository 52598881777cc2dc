#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cpabf/bundle.hpp"
#include "cpabf/numfmt.hpp"
#include "cpabf/svg.hpp"
#include "cpabf/synthesis.hpp"

namespace {

using namespace cpabf;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitNumerics = 4;
constexpr int kExitVerification = 5;

struct CommonArgs {
  std::string out = "out";
  std::uint64_t seed = 0;
  double tol = 1e-8;
  std::string config_path;
};

SynthesisConfig base_config(const CommonArgs& common) {
  SynthesisConfig cfg;
  if (!common.config_path.empty()) {
    std::ifstream f(common.config_path);
    if (!f) throw IoError("cannot read config " + common.config_path);
    json j;
    f >> j;
    cfg = config_from_json(j.contains("config") ? j.at("config") : j);
  }
  cfg.solver_tol = common.tol;
  return cfg;
}

Point parse_point(const std::string& text) {
  Point p(2);
  std::stringstream ss(text);
  std::string cell;
  int k = 0;
  while (std::getline(ss, cell, ',') && k < 2) p[k++] = std::stod(cell);
  if (k != 2) throw SchemaError("expected a 2-D point like '0.1,-0.2'");
  return p;
}

int run_synth(const CommonArgs& common, SynthesisConfig cfg,
              const std::string& dataset_path, const std::string& benchmark,
              double spacing, double u_spacing, const std::string& refine_mode,
              const std::string& oracle_name, bool dump) {
  std::unique_ptr<DynamicsOracle> oracle;
  Dataset dataset;
  if (!benchmark.empty()) {
    oracle = make_benchmark(benchmark);
    if (oracle->input_dim() > 0)
      dataset = grid_sample(*oracle, oracle->default_state_box(), spacing,
                            oracle->default_input_box(), u_spacing);
    else
      dataset = grid_sample(*oracle, oracle->default_state_box(), spacing);
  } else {
    dataset = load_dataset(dataset_path);
    if (!oracle_name.empty()) oracle = make_benchmark(oracle_name);
  }

  if (refine_mode == "feasibility" || refine_mode == "both")
    cfg.refine_feasibility_enabled = true;
  if (refine_mode == "boundary" || refine_mode == "both")
    cfg.refine_boundary_enabled = true;
  if ((cfg.refine_feasibility_enabled || cfg.refine_boundary_enabled) &&
      oracle == nullptr)
    throw SchemaError("refinement needs --benchmark or --oracle");
  if (dump) cfg.dump_dir = common.out + "/subproblems";

  const SynthesisResult result = cpabf::run(dataset, cfg, oracle.get());

  json prov;
  prov["command"] = "synth";
  prov["seed"] = common.seed;
  if (!benchmark.empty()) {
    prov["benchmark"] = benchmark;
    prov["spacing"] = spacing;
    if (oracle && oracle->input_dim() > 0) prov["u_spacing"] = u_spacing;
  } else {
    prov["dataset"] = dataset_path;
    if (!oracle_name.empty()) prov["oracle"] = oracle_name;
  }
  prov["config"] = config_to_json(cfg);
  write_bundle(common.out, result, prov);

  std::printf("phase 1: %d iterations, phase 2: %d iterations\n",
              result.phase1_iterations, result.phase2_iterations);
  std::printf("feasible: %s  certificate: %s  safe-set area: %s\n",
              result.feasible ? "yes" : "no",
              result.certificate.overall ? "pass" : "fail",
              fmt_double(result.safe_set_area).c_str());
  std::printf("bundle written to %s\n", common.out.c_str());
  if (!result.feasible) {
    if (!result.worst_slack_simplices.empty()) {
      std::printf("worst-slack simplices:");
      for (int i : result.worst_slack_simplices) std::printf(" %d", i);
      std::printf("\n");
    }
    return kExitInfeasible;
  }
  return kExitOk;
}

int run_verify(const CommonArgs& common, const std::string& bundle_dir,
               const std::string& dataset_path, bool audit,
               const std::string& benchmark, int samples, int horizon) {
  Bundle bundle = load_bundle(bundle_dir);
  Dataset dataset =
      dataset_path.empty() ? bundle.dataset : load_dataset(dataset_path);

  LipschitzInfo li;
  if (bundle.config.lipschitz)
    li = *bundle.config.lipschitz;
  else if (dataset.lipschitz)
    li = *dataset.lipschitz;
  else
    throw SchemaError("verify: no Lipschitz constants available");

  const CpaFunction barrier = bundle.barrier();
  const CertificateReport rep =
      check_certificate(barrier, bundle.gamma, bundle.b, dataset, li,
                        bundle.config.rho, bundle.config.strict_margin);
  const ConditionResult* conds[5] = {&rep.exit_labeling, &rep.value_floor,
                                     &rep.gradient_bound, &rep.decrease,
                                     &rep.classifier_sign};
  for (int k = 0; k < 5; ++k) {
    std::printf("%-16s %s  worst margin %s", CertificateReport::kConditionNames[k],
                conds[k]->pass ? "PASS" : "FAIL",
                fmt_double(conds[k]->worst_margin).c_str());
    if (conds[k]->worst_simplex >= 0)
      std::printf("  simplex %d", conds[k]->worst_simplex);
    if (conds[k]->worst_vertex >= 0)
      std::printf("  vertex %d", conds[k]->worst_vertex);
    std::printf("\n");
  }
  std::printf("overall: %s\n", rep.overall ? "PASS" : "FAIL");

  bool audit_ok = true;
  if (audit) {
    if (benchmark.empty())
      throw SchemaError("--audit needs --benchmark to provide the dynamics");
    auto oracle = make_benchmark(benchmark);
    std::unique_ptr<Controller> controller;
    if (oracle->input_dim() > 0)
      controller = extract_controller(bundle.tri, dataset, bundle.xi);
    const InvarianceAudit ia = empirical_invariance(
        *oracle, barrier, controller.get(), samples, horizon, common.seed);
    std::filesystem::create_directories(common.out);
    write_audit_json(common.out + "/audit.json", ia);
    std::printf("audit: %d samples, horizon %d, %zu violations\n", ia.samples,
                ia.horizon, ia.violations.size());
    audit_ok = ia.violations.empty();
  }
  return rep.overall && audit_ok ? kExitOk : kExitVerification;
}

int run_simulate(const CommonArgs& common, const std::string& benchmark,
                 const std::string& x0_text, int horizon,
                 const std::string& bundle_dir) {
  auto oracle = make_benchmark(benchmark);
  std::unique_ptr<Controller> controller;
  Bundle bundle;
  if (oracle->input_dim() > 0) {
    if (bundle_dir.empty())
      throw SchemaError("simulate: controlled benchmark needs --bundle");
    bundle = load_bundle(bundle_dir);
    controller = extract_controller(bundle.tri, bundle.dataset, bundle.xi);
  }
  const Point x0 = parse_point(x0_text);
  const auto traj = simulate(*oracle, controller.get(), x0, horizon);

  std::filesystem::create_directories(common.out);
  const std::string path = common.out + "/trajectory.csv";
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << "step,x1,x2";
  for (int k = 1; k <= oracle->input_dim(); ++k) f << ",u" << k;
  f << '\n';
  for (std::size_t k = 0; k < traj.size(); ++k) {
    f << k << ',' << fmt_double(traj[k].x()) << ',' << fmt_double(traj[k].y());
    if (oracle->input_dim() > 0) {
      Eigen::VectorXd u = Eigen::VectorXd::Zero(oracle->input_dim());
      if (k + 1 < traj.size()) u = controller->control(traj[k]);
      for (int c = 0; c < u.size(); ++c) f << ',' << fmt_double(u[c]);
    }
    f << '\n';
  }
  std::printf("trajectory of %zu states written to %s\n", traj.size(),
              path.c_str());
  return kExitOk;
}

int run_refine(const CommonArgs& common, const std::string& bundle_dir,
               const std::string& oracle_name, const std::string& mode,
               int rounds) {
  Bundle bundle = load_bundle(bundle_dir);
  auto oracle = make_benchmark(oracle_name);

  SynthesisConfig cfg = bundle.config;
  cfg.solver_tol = common.tol;
  cfg.refine_feasibility_enabled = mode == "feasibility" || mode == "both";
  cfg.refine_boundary_enabled = mode == "boundary" || mode == "both";
  cfg.max_boundary_rounds = rounds;
  cfg.max_feasibility_refinements = std::max(rounds, 25);
  if (!cfg.lipschitz && bundle.dataset.lipschitz)
    cfg.lipschitz = bundle.dataset.lipschitz;

  IcoState state = initialize(bundle.dataset, bundle.tri, cfg);
  state.W = bundle.W;
  state.gamma = bundle.gamma;
  state.xi = bundle.xi;
  state.b = bundle.b;
  if (bundle.feasible) state.theta = Eigen::VectorXd::Zero(state.num_vertices());

  const SynthesisResult result = run_from(std::move(state), oracle.get());

  json prov = bundle.config_json;
  prov["command"] = "refine";
  prov["seed"] = common.seed;
  prov["parent_bundle"] = bundle_dir;
  prov["refine_mode"] = mode;
  prov["config"] = config_to_json(cfg);
  write_bundle(common.out, result, prov);
  std::printf("refined bundle written to %s (%zu inserted points)\n",
              common.out.c_str(), result.inserted_points.size());
  return result.feasible ? kExitOk : kExitInfeasible;
}

int run_export(const CommonArgs& common, const std::string& bundle_dir,
               const std::string& format) {
  Bundle bundle = load_bundle(bundle_dir);
  std::filesystem::create_directories(common.out);

  // Draw exactly the segments recorded in the bundle.
  std::vector<Segment> boundary;
  {
    std::ifstream f(std::filesystem::path(bundle_dir) / "boundary.csv");
    if (!f) throw SchemaError("bundle: missing boundary.csv");
    std::string line;
    std::getline(f, line);
    while (std::getline(f, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string cell;
      double v[4];
      for (int k = 0; k < 4; ++k) {
        if (!std::getline(ss, cell, ','))
          throw SchemaError("bundle: malformed boundary.csv");
        v[k] = std::stod(cell);
      }
      boundary.push_back({{v[0], v[1]}, {v[2], v[3]}});
    }
  }

  if (format == "svg") {
    write_safe_set_svg(common.out + "/safe_set.svg", *bundle.tri, boundary);
    write_gamma_heatmap_svg(common.out + "/gamma_heatmap.svg", *bundle.tri,
                            bundle.gamma);
    std::printf("wrote %s/safe_set.svg and %s/gamma_heatmap.svg\n",
                common.out.c_str(), common.out.c_str());
  }
  // CSV artifacts are regenerated alongside either format.
  {
    std::ofstream f(common.out + "/boundary.csv");
    f << "a_x1,a_x2,b_x1,b_x2\n";
    for (const auto& seg : boundary)
      f << fmt_double(seg.a.x()) << ',' << fmt_double(seg.a.y()) << ','
        << fmt_double(seg.b.x()) << ',' << fmt_double(seg.b.y()) << '\n';
    std::ofstream g(common.out + "/gamma.csv");
    g << "simplex_id,gamma\n";
    for (int i = 0; i < bundle.tri->num_simplices(); ++i)
      g << i << ',' << fmt_double(bundle.gamma[i]) << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CPA barrier-function synthesis from one-step data"};
  app.require_subcommand(1);
  app.fallthrough();

  CommonArgs common;
  app.add_option("--out", common.out, "output directory");
  app.add_option("--seed", common.seed, "seed for randomized audits");
  app.add_option("--tol", common.tol, "conic solver tolerance");
  app.add_option("--config", common.config_path, "JSON config file");

  // sample
  auto* sample = app.add_subcommand("sample", "grid-sample a benchmark");
  std::string benchmark;
  double spacing = 0.0625, u_spacing = 0.1;
  std::string sample_out;
  sample->add_option("benchmark", benchmark,
                     "linear-auto | nonlinear-auto | linear-nonauto")
      ->required();
  sample->add_option("--spacing", spacing, "state grid spacing");
  sample->add_option("--u-spacing", u_spacing, "input grid spacing");
  sample->add_option("--file", sample_out, "dataset file (default <out>/dataset.csv)");

  // synth
  auto* synth = app.add_subcommand("synth", "synthesize a barrier certificate");
  std::string dataset_path, refine_mode = "none", oracle_name;
  bool dump = false;
  double epsilon = -1, rho = -1, chi = -1, eta = -1, gamma_cap = -1, w_cap = -1;
  int p1 = -1, p2 = -1;
  std::string b_mode;
  synth->add_option("--dataset", dataset_path, "dataset CSV path");
  synth->add_option("--benchmark", benchmark, "sample this benchmark instead");
  synth->add_option("--spacing", spacing, "state grid spacing (benchmark mode)");
  synth->add_option("--u-spacing", u_spacing, "input grid spacing");
  synth->add_option("--epsilon", epsilon, "outside value");
  synth->add_option("--rho", rho, "vertex value floor");
  synth->add_option("--chi", chi, "cost-decrease stop threshold");
  synth->add_option("--eta", eta, "strict decrease margin");
  synth->add_option("--gamma-cap", gamma_cap, "classifier upper bound");
  synth->add_option("--w-cap", w_cap, "vertex value box");
  synth->add_option("--max-iter-phase1", p1, "feasibility iteration cap");
  synth->add_option("--max-iter-phase2", p2, "expansion iteration cap");
  synth->add_option("--b-mode", b_mode, "decision-variable | frozen");
  synth->add_option("--refine", refine_mode, "none | feasibility | boundary | both");
  synth->add_option("--oracle", oracle_name, "benchmark answering refinement requests");
  synth->add_flag("--dump-subproblems", dump, "dump each conic subproblem");

  // verify
  auto* verify = app.add_subcommand("verify", "re-check a bundle's certificate");
  std::string bundle_dir, verify_dataset;
  bool audit = false;
  int audit_samples = 1000, audit_horizon = 100;
  verify->add_option("--bundle", bundle_dir, "bundle directory")->required();
  verify->add_option("--dataset", verify_dataset, "override the bundle dataset");
  verify->add_flag("--audit", audit, "run a seeded invariance audit");
  verify->add_option("--benchmark", benchmark, "dynamics for the audit");
  verify->add_option("--samples", audit_samples, "audit sample count");
  verify->add_option("--horizon", audit_horizon, "audit horizon");

  // simulate
  auto* sim = app.add_subcommand("simulate", "roll a benchmark forward");
  std::string x0_text = "0,0";
  int horizon = 100;
  sim->add_option("benchmark", benchmark, "benchmark name")->required();
  sim->add_option("--x0", x0_text, "initial state 'a,b'")->required();
  sim->add_option("--horizon", horizon, "number of steps");
  sim->add_option("--bundle", bundle_dir, "bundle providing the controller");

  // refine
  auto* refine = app.add_subcommand("refine", "refine an existing bundle");
  std::string refine_mode2 = "boundary";
  int rounds = 1;
  refine->add_option("--bundle", bundle_dir, "bundle directory")->required();
  refine->add_option("--oracle", oracle_name, "benchmark answering requests")
      ->required();
  refine->add_option("--mode", refine_mode2, "feasibility | boundary | both");
  refine->add_option("--rounds", rounds, "boundary refinement rounds");

  // export
  auto* exp = app.add_subcommand("export", "render a bundle");
  std::string format = "svg";
  exp->add_option("--bundle", bundle_dir, "bundle directory")->required();
  exp->add_option("--format", format, "svg | csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_name() == "CallForHelp" ? kExitOk : kExitUsage;
  }

  try {
    if (*sample) {
      auto oracle = make_benchmark(benchmark);
      Dataset d;
      if (oracle->input_dim() > 0)
        d = grid_sample(*oracle, oracle->default_state_box(), spacing,
                        oracle->default_input_box(), u_spacing);
      else
        d = grid_sample(*oracle, oracle->default_state_box(), spacing);
      std::string path = sample_out;
      if (path.empty()) {
        std::filesystem::create_directories(common.out);
        path = common.out + "/dataset.csv";
      }
      save_dataset(d, path);
      std::printf("%d samples x %d transitions written to %s\n",
                  d.num_samples(), d.transitions_per_sample(), path.c_str());
      return kExitOk;
    }
    if (*synth) {
      if (dataset_path.empty() == benchmark.empty())
        throw SchemaError("synth: give exactly one of --dataset / --benchmark");
      SynthesisConfig cfg = base_config(common);
      if (epsilon > 0) cfg.epsilon = epsilon;
      if (rho > 0) cfg.rho = rho;
      if (chi > 0) cfg.chi = chi;
      if (eta >= 0) cfg.strict_margin = eta;
      if (gamma_cap > 0) cfg.gamma_cap = gamma_cap;
      if (w_cap > 0) cfg.w_cap = w_cap;
      if (p1 > 0) cfg.max_iter_phase1 = p1;
      if (p2 >= 0) cfg.max_iter_phase2 = p2;
      if (!b_mode.empty())
        cfg.b_mode = b_mode == "frozen" ? SynthesisConfig::BMode::Frozen
                                        : SynthesisConfig::BMode::DecisionVariable;
      return run_synth(common, cfg, dataset_path, benchmark, spacing,
                       u_spacing, refine_mode, oracle_name, dump);
    }
    if (*verify)
      return run_verify(common, bundle_dir, verify_dataset, audit, benchmark,
                        audit_samples, audit_horizon);
    if (*sim) return run_simulate(common, benchmark, x0_text, horizon, bundle_dir);
    if (*refine)
      return run_refine(common, bundle_dir, oracle_name, refine_mode2, rounds);
    if (*exp) return run_export(common, bundle_dir, format);
  } catch (const NumericalBreakdown& e) {
    std::fprintf(stderr, "numerical breakdown: %s\n", e.what());
    return kExitNumerics;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
