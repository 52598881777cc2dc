#include "cpabf/bundle.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cpabf/numfmt.hpp"

namespace cpabf {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw IoError("cannot write " + p.string());
  return f;
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream f(p);
  if (!f) throw SchemaError("bundle: missing " + p.string());
  return f;
}

// Minimal strict CSV reader: fixed column count, numeric cells.
std::vector<std::vector<double>> read_csv(const fs::path& p,
                                          const std::string& header) {
  auto f = open_in(p);
  std::string line;
  if (!std::getline(f, line))
    throw SchemaError(p.string() + ": missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != header)
    throw SchemaError(p.string() + ": expected header '" + header + "'");
  const std::size_t cols =
      1 + static_cast<std::size_t>(std::count(header.begin(), header.end(), ','));
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
      if (!cell.empty() && cell.back() == '\r') cell.pop_back();
      double v = 0.0;
      auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
        throw SchemaError(p.string() + " row " + std::to_string(lineno) +
                          ": bad cell '" + cell + "'");
      row.push_back(v);
    }
    if (row.size() != cols)
      throw SchemaError(p.string() + " row " + std::to_string(lineno) +
                        ": expected " + std::to_string(cols) + " columns");
    rows.push_back(std::move(row));
  }
  return rows;
}

json condition_to_json(const ConditionResult& c) {
  json j;
  j["pass"] = c.pass;
  j["worst_margin"] = c.worst_margin;
  j["worst_simplex"] = c.worst_simplex;
  j["worst_vertex"] = c.worst_vertex;
  return j;
}

}  // namespace

json config_to_json(const SynthesisConfig& c) {
  json j;
  j["epsilon"] = c.epsilon;
  j["rho"] = c.rho;
  j["chi"] = c.chi;
  j["gamma_cap"] = c.gamma_cap;
  j["w_cap"] = c.effective_w_cap();
  j["strict_margin"] = c.strict_margin;
  j["max_iter_phase1"] = c.max_iter_phase1;
  j["max_iter_phase2"] = c.max_iter_phase2;
  j["b_mode"] = c.b_mode == SynthesisConfig::BMode::DecisionVariable
                    ? "decision-variable"
                    : "frozen";
  j["solver_tol"] = c.solver_tol;
  j["solver_max_iter"] = c.solver_max_iter;
  j["refine_feasibility"] = c.refine_feasibility_enabled;
  j["refine_boundary"] = c.refine_boundary_enabled;
  j["max_feasibility_refinements"] = c.max_feasibility_refinements;
  j["max_boundary_rounds"] = c.max_boundary_rounds;
  if (c.lipschitz) {
    if (c.lipschitz->mode == LipschitzInfo::Mode::Joint) {
      j["lipschitz"] = {{"mode", "joint"}, {"L", c.lipschitz->joint}};
    } else {
      j["lipschitz"] = {{"mode", "split"},
                        {"L_x", c.lipschitz->state},
                        {"L_u", c.lipschitz->input}};
    }
  }
  return j;
}

SynthesisConfig config_from_json(const json& j) {
  SynthesisConfig c;
  c.epsilon = j.value("epsilon", c.epsilon);
  c.rho = j.value("rho", c.rho);
  c.chi = j.value("chi", c.chi);
  c.gamma_cap = j.value("gamma_cap", c.gamma_cap);
  c.w_cap = j.value("w_cap", c.w_cap);
  c.strict_margin = j.value("strict_margin", c.strict_margin);
  c.max_iter_phase1 = j.value("max_iter_phase1", c.max_iter_phase1);
  c.max_iter_phase2 = j.value("max_iter_phase2", c.max_iter_phase2);
  if (j.value("b_mode", "decision-variable") == std::string("frozen"))
    c.b_mode = SynthesisConfig::BMode::Frozen;
  c.solver_tol = j.value("solver_tol", c.solver_tol);
  c.solver_max_iter = j.value("solver_max_iter", c.solver_max_iter);
  c.refine_feasibility_enabled =
      j.value("refine_feasibility", c.refine_feasibility_enabled);
  c.refine_boundary_enabled =
      j.value("refine_boundary", c.refine_boundary_enabled);
  c.max_feasibility_refinements =
      j.value("max_feasibility_refinements", c.max_feasibility_refinements);
  c.max_boundary_rounds = j.value("max_boundary_rounds", c.max_boundary_rounds);
  if (j.contains("lipschitz")) {
    const auto& l = j.at("lipschitz");
    if (l.at("mode") == "joint")
      c.lipschitz = LipschitzInfo::make_joint(l.at("L").get<double>());
    else
      c.lipschitz = LipschitzInfo::make_split(l.at("L_x").get<double>(),
                                              l.at("L_u").get<double>());
  }
  return c;
}

json certificate_to_json(const CertificateReport& r) {
  json j;
  j["overall_pass"] = r.overall;
  j["conditions"] = {{"exit_labeling", condition_to_json(r.exit_labeling)},
                     {"value_floor", condition_to_json(r.value_floor)},
                     {"gradient_bound", condition_to_json(r.gradient_bound)},
                     {"decrease", condition_to_json(r.decrease)},
                     {"classifier_sign", condition_to_json(r.classifier_sign)}};
  return j;
}

void write_bundle(const std::string& dir, const SynthesisResult& result,
                  const json& provenance) {
  fs::create_directories(dir);
  const fs::path base(dir);

  result.tri->export_csv(dir);

  {
    auto f = open_out(base / "w_values.csv");
    f << "vertex_id,w\n";
    for (int v = 0; v < result.tri->num_vertices(); ++v)
      f << v << ',' << fmt_double(result.W[v]) << '\n';
  }
  {
    auto f = open_out(base / "gamma.csv");
    f << "simplex_id,gamma\n";
    for (int i = 0; i < result.tri->num_simplices(); ++i)
      f << i << ',' << fmt_double(result.gamma[i]) << '\n';
  }
  {
    auto f = open_out(base / "xi.csv");
    f << "simplex_id,xi\n";
    for (int i = 0; i < result.tri->num_simplices(); ++i)
      f << i << ',' << result.xi[static_cast<std::size_t>(i)] << '\n';
  }
  {
    auto f = open_out(base / "boundary.csv");
    f << "a_x1,a_x2,b_x1,b_x2\n";
    for (const auto& seg : result.boundary)
      f << fmt_double(seg.a.x()) << ',' << fmt_double(seg.a.y()) << ','
        << fmt_double(seg.b.x()) << ',' << fmt_double(seg.b.y()) << '\n';
  }
  {
    const CpaFunction barrier = result.barrier();
    auto f = open_out(base / "gradients.csv");
    f << "simplex_id,g_x1,g_x2,norm\n";
    for (int i = 0; i < result.tri->num_simplices(); ++i) {
      const auto& g = barrier.gradient(i);
      f << i << ',' << fmt_double(g.grad.x()) << ',' << fmt_double(g.grad.y())
        << ',' << fmt_double(g.norm2) << '\n';
    }
  }
  {
    auto f = open_out(base / "inserted_points.csv");
    f << "vertex_id,x1,x2\n";
    for (const auto& req : result.inserted_points)
      f << req.vertex_id << ',' << fmt_double(req.state.x()) << ','
        << fmt_double(req.state.y()) << '\n';
  }
  save_dataset(result.dataset, (base / "dataset.csv").string());

  {
    json cert = certificate_to_json(result.certificate);
    cert["feasible"] = result.feasible;
    cert["b"] = result.b;
    cert["epsilon"] = result.epsilon;
    cert["safe_set_area"] = result.safe_set_area;
    cert["phase1_iterations"] = result.phase1_iterations;
    cert["phase2_iterations"] = result.phase2_iterations;
    if (!result.worst_slack_simplices.empty())
      cert["worst_slack_simplices"] = result.worst_slack_simplices;
    auto f = open_out(base / "certificate.json");
    f << cert.dump(2) << '\n';
  }
  {
    json j = provenance;
    auto f = open_out(base / "config.json");
    f << j.dump(2) << '\n';
  }
  {
    auto f = open_out(base / "run_log.jsonl");
    for (const auto& rec : result.log) {
      json j;
      j["iter"] = rec.iter;
      j["phase"] =
          rec.phase == Phase::Feasibility ? "feasibility" : "expansion";
      j["epoch"] = rec.epoch;
      j["cost"] = rec.cost;
      j["max_slack"] = rec.max_slack;
      j["b"] = rec.b;
      j["solver_iters"] = rec.solver_iters;
      j["wall_ms"] = rec.wall_ms;
      f << j.dump() << '\n';
    }
  }
}

Bundle load_bundle(const std::string& dir) {
  const fs::path base(dir);
  Bundle b;

  const auto verts = read_csv(base / "vertices.csv", "id,x1,x2");
  const auto simps = read_csv(base / "simplices.csv", "id,v0,v1,v2");
  std::vector<Eigen::Vector2d> vertices;
  vertices.reserve(verts.size());
  for (const auto& row : verts) vertices.emplace_back(row[1], row[2]);
  std::vector<Simplex> simplices;
  simplices.reserve(simps.size());
  for (const auto& row : simps)
    simplices.push_back(Simplex{{static_cast<int>(row[1]),
                                 static_cast<int>(row[2]),
                                 static_cast<int>(row[3])}});
  b.tri = std::make_shared<Triangulation>(
      Triangulation::from_data(std::move(vertices), std::move(simplices)));

  const auto wrows = read_csv(base / "w_values.csv", "vertex_id,w");
  if (static_cast<int>(wrows.size()) != b.tri->num_vertices())
    throw SchemaError("bundle: w_values.csv row count mismatch");
  b.W.resize(b.tri->num_vertices());
  for (const auto& row : wrows) b.W[static_cast<int>(row[0])] = row[1];

  const auto grows = read_csv(base / "gamma.csv", "simplex_id,gamma");
  if (static_cast<int>(grows.size()) != b.tri->num_simplices())
    throw SchemaError("bundle: gamma.csv row count mismatch");
  b.gamma.resize(b.tri->num_simplices());
  for (const auto& row : grows) b.gamma[static_cast<int>(row[0])] = row[1];

  const auto xrows = read_csv(base / "xi.csv", "simplex_id,xi");
  if (static_cast<int>(xrows.size()) != b.tri->num_simplices())
    throw SchemaError("bundle: xi.csv row count mismatch");
  b.xi.assign(static_cast<std::size_t>(b.tri->num_simplices()), 1);
  for (const auto& row : xrows)
    b.xi[static_cast<std::size_t>(static_cast<int>(row[0]))] =
        static_cast<int>(row[1]);

  b.dataset = load_dataset((base / "dataset.csv").string());
  if (b.dataset.num_samples() != b.tri->num_vertices())
    throw SchemaError("bundle: dataset and mesh disagree on vertex count");

  {
    auto f = open_in(base / "certificate.json");
    json cert;
    try {
      f >> cert;
    } catch (const json::exception& e) {
      throw SchemaError("bundle certificate.json: " + std::string(e.what()));
    }
    b.b = cert.at("b").get<double>();
    b.epsilon = cert.at("epsilon").get<double>();
    b.feasible = cert.at("feasible").get<bool>();
  }
  {
    auto f = open_in(base / "config.json");
    try {
      f >> b.config_json;
    } catch (const json::exception& e) {
      throw SchemaError("bundle config.json: " + std::string(e.what()));
    }
    b.config = config_from_json(b.config_json.contains("config")
                                    ? b.config_json.at("config")
                                    : b.config_json);
  }
  return b;
}

void write_audit_json(const std::string& path, const InvarianceAudit& audit) {
  json j;
  j["seed"] = audit.seed;
  j["samples"] = audit.samples;
  j["horizon"] = audit.horizon;
  j["violation_count"] = audit.violations.size();
  j["violation_rate"] = audit.violation_rate();
  json viols = json::array();
  for (const auto& v : audit.violations) {
    viols.push_back({{"x1", v.initial_state.x()},
                     {"x2", v.initial_state.y()},
                     {"first_exit_step", v.first_exit_step}});
  }
  j["violations"] = viols;
  auto f = std::ofstream(path);
  if (!f) throw IoError("cannot write " + path);
  f << j.dump(2) << '\n';
}

}  // namespace cpabf
