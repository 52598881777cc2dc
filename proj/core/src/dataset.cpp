#include "cpabf/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "cpabf/numfmt.hpp"

namespace cpabf {

namespace {

using nlohmann::json;

std::vector<double> grid_axis(double lo, double hi, double spacing) {
  const double width = hi - lo;
  if (width < 0.0) throw SchemaError("grid_sample: box with hi < lo");
  if (!(spacing > 0.0)) throw SchemaError("grid_sample: spacing must be > 0");
  if (width == 0.0) return {lo};
  const int count =
      std::max(2, static_cast<int>(std::lround(width / spacing)) + 1);
  std::vector<double> coords(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    if (k == 0)
      coords[static_cast<std::size_t>(k)] = lo;
    else if (k == count - 1)
      coords[static_cast<std::size_t>(k)] = hi;
    else
      coords[static_cast<std::size_t>(k)] =
          lo + (static_cast<double>(k) * width) / (count - 1);
  }
  return coords;
}

// All grid points of a box, axis 0 outermost.
std::vector<Eigen::VectorXd> grid_points(const Box& box, double spacing) {
  const int d = box.dim();
  if (d == 0) return {Eigen::VectorXd(0)};
  std::vector<std::vector<double>> axes;
  axes.reserve(static_cast<std::size_t>(d));
  std::size_t total = 1;
  for (int k = 0; k < d; ++k) {
    axes.push_back(grid_axis(box.lo[k], box.hi[k], spacing));
    total *= axes.back().size();
  }
  std::vector<Eigen::VectorXd> out;
  out.reserve(total);
  std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
  for (std::size_t count = 0; count < total; ++count) {
    Eigen::VectorXd p(d);
    for (int k = 0; k < d; ++k)
      p[k] = axes[static_cast<std::size_t>(k)][idx[static_cast<std::size_t>(k)]];
    out.push_back(std::move(p));
    for (int k = d - 1; k >= 0; --k) {
      auto& i = idx[static_cast<std::size_t>(k)];
      if (++i < axes[static_cast<std::size_t>(k)].size()) break;
      i = 0;
    }
  }
  return out;
}

double parse_double(const std::string& cell, std::size_t line) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last)
    throw SchemaError("row " + std::to_string(line) + ": non-numeric cell '" +
                      cell + "'");
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

json box_to_json(const Box& b) {
  json j;
  j["lo"] = std::vector<double>(b.lo.data(), b.lo.data() + b.lo.size());
  j["hi"] = std::vector<double>(b.hi.data(), b.hi.data() + b.hi.size());
  return j;
}

Box box_from_json(const json& j) {
  Box b;
  const auto lo = j.at("lo").get<std::vector<double>>();
  const auto hi = j.at("hi").get<std::vector<double>>();
  b.lo = Eigen::Map<const Eigen::VectorXd>(lo.data(),
                                           static_cast<Eigen::Index>(lo.size()));
  b.hi = Eigen::Map<const Eigen::VectorXd>(hi.data(),
                                           static_cast<Eigen::Index>(hi.size()));
  return b;
}

std::filesystem::path sidecar_path(const std::string& csv_path) {
  std::filesystem::path p(csv_path);
  p.replace_extension(".json");
  return p;
}

}  // namespace

void Dataset::validate() const {
  const int M = transitions_per_sample();
  for (std::size_t z = 0; z < samples.size(); ++z) {
    const auto& s = samples[z];
    if (s.state.size() != state_dim)
      throw SchemaError("sample " + std::to_string(z) + ": bad state dim");
    if (!s.state.allFinite())
      throw SchemaError("sample " + std::to_string(z) + ": non-finite state");
    if (static_cast<int>(s.transitions.size()) != M || M < 1)
      throw SchemaError("sample " + std::to_string(z) +
                        ": ragged transition count");
    if (!state_box.contains(s.state, 1e-9))
      throw SchemaError("sample " + std::to_string(z) +
                        ": state outside the state box");
    for (const auto& t : s.transitions) {
      if (t.input.size() != input_dim || t.successor.size() != state_dim)
        throw SchemaError("sample " + std::to_string(z) +
                          ": bad transition dims");
      if (!t.successor.allFinite() || !t.input.allFinite())
        throw SchemaError("sample " + std::to_string(z) +
                          ": non-finite transition");
      if (input_dim > 0 && !input_box.contains(t.input, 1e-9))
        throw SchemaError("sample " + std::to_string(z) +
                          ": input outside the input box");
    }
  }
}

bool Dataset::operator==(const Dataset& other) const {
  auto veq = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return a.size() == b.size() && a == b;
  };
  if (state_dim != other.state_dim || input_dim != other.input_dim)
    return false;
  if (!veq(state_box.lo, other.state_box.lo) ||
      !veq(state_box.hi, other.state_box.hi) ||
      !veq(input_box.lo, other.input_box.lo) ||
      !veq(input_box.hi, other.input_box.hi))
    return false;
  if (samples.size() != other.samples.size()) return false;
  for (std::size_t z = 0; z < samples.size(); ++z) {
    if (!veq(samples[z].state, other.samples[z].state)) return false;
    if (samples[z].transitions.size() != other.samples[z].transitions.size())
      return false;
    for (std::size_t k = 0; k < samples[z].transitions.size(); ++k) {
      if (!veq(samples[z].transitions[k].input,
               other.samples[z].transitions[k].input))
        return false;
      if (!veq(samples[z].transitions[k].successor,
               other.samples[z].transitions[k].successor))
        return false;
    }
  }
  return true;
}

Dataset grid_sample(const DynamicsOracle& oracle, const Box& state_box,
                    double state_spacing, const Box& input_box,
                    double input_spacing) {
  if (state_box.dim() != oracle.state_dim())
    throw DimensionMismatch("grid_sample: state box dim mismatch");
  if (input_box.dim() != oracle.input_dim())
    throw DimensionMismatch("grid_sample: input box dim mismatch");

  Dataset d;
  d.state_dim = oracle.state_dim();
  d.input_dim = oracle.input_dim();
  d.state_box = state_box;
  d.input_box = input_box;
  d.lipschitz = oracle.lipschitz();

  const auto states = grid_points(state_box, state_spacing);
  const auto inputs = oracle.input_dim() > 0 ? grid_points(input_box, input_spacing)
                                             : std::vector<Eigen::VectorXd>{
                                                   Eigen::VectorXd(0)};
  d.samples.reserve(states.size());
  for (const auto& x : states) {
    OneStepSample s;
    s.state = x;
    s.transitions.reserve(inputs.size());
    for (const auto& u : inputs) {
      Point next = oracle.step(x, u);
      if (!next.allFinite())
        throw OracleFailure("grid_sample: oracle produced non-finite state");
      s.transitions.push_back({u, std::move(next)});
    }
    d.samples.push_back(std::move(s));
  }
  return d;
}

Dataset grid_sample(const DynamicsOracle& oracle, const Box& state_box,
                    double state_spacing) {
  if (oracle.input_dim() != 0)
    throw DimensionMismatch(
        "grid_sample: controlled oracle needs an input box");
  Box empty;
  empty.lo.resize(0);
  empty.hi.resize(0);
  return grid_sample(oracle, state_box, state_spacing, empty, 1.0);
}

void save_dataset(const Dataset& dataset, const std::string& csv_path) {
  dataset.validate();
  const int n = dataset.state_dim, m = dataset.input_dim;
  std::ofstream f(csv_path);
  if (!f) throw IoError("cannot write " + csv_path);
  f << "state_id";
  for (int k = 1; k <= n; ++k) f << ",x" << k;
  for (int k = 1; k <= m; ++k) f << ",u" << k;
  for (int k = 1; k <= n; ++k) f << ",xp" << k;
  f << '\n';
  for (int z = 0; z < dataset.num_samples(); ++z) {
    const auto& s = dataset.samples[static_cast<std::size_t>(z)];
    for (const auto& t : s.transitions) {
      f << z;
      for (int k = 0; k < n; ++k) f << ',' << fmt_double(s.state[k]);
      for (int k = 0; k < m; ++k) f << ',' << fmt_double(t.input[k]);
      for (int k = 0; k < n; ++k) f << ',' << fmt_double(t.successor[k]);
      f << '\n';
    }
  }
  f.close();

  json j;
  j["n"] = n;
  j["m"] = m;
  j["state_box"] = box_to_json(dataset.state_box);
  j["input_box"] = box_to_json(dataset.input_box);
  if (dataset.lipschitz) {
    if (dataset.lipschitz->mode == LipschitzInfo::Mode::Joint) {
      j["L_mode"] = "joint";
      j["L_joint"] = dataset.lipschitz->joint;
    } else {
      j["L_mode"] = "split";
      j["L_x"] = dataset.lipschitz->state;
      j["L_u"] = dataset.lipschitz->input;
    }
  } else {
    j["L_mode"] = "none";
  }
  std::ofstream jf(sidecar_path(csv_path));
  if (!jf) throw IoError("cannot write sidecar for " + csv_path);
  jf << j.dump(2) << '\n';
}

Dataset load_dataset(const std::string& csv_path) {
  std::ifstream f(csv_path);
  if (!f) throw IoError("cannot read " + csv_path);

  std::string line;
  if (!std::getline(f, line) || line.empty())
    throw SchemaError(csv_path + ": missing header");
  const auto header = split_csv(line);
  if (header.empty() || header[0] != "state_id")
    throw SchemaError(csv_path + ": header must start with state_id");
  int n = 0, m = 0, np = 0;
  std::size_t k = 1;
  while (k < header.size() && header[k] == "x" + std::to_string(n + 1)) {
    ++n;
    ++k;
  }
  while (k < header.size() && header[k] == "u" + std::to_string(m + 1)) {
    ++m;
    ++k;
  }
  while (k < header.size() && header[k] == "xp" + std::to_string(np + 1)) {
    ++np;
    ++k;
  }
  if (n == 0 || np != n || k != header.size())
    throw SchemaError(csv_path + ": malformed header");
  const std::size_t ncols = 1 + static_cast<std::size_t>(2 * n + m);

  Dataset d;
  d.state_dim = n;
  d.input_dim = m;

  std::map<long, std::size_t> index_of;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != ncols)
      throw SchemaError("row " + std::to_string(lineno) + ": expected " +
                        std::to_string(ncols) + " columns, got " +
                        std::to_string(cells.size()));
    long id = 0;
    {
      const auto& cell = cells[0];
      auto res = std::from_chars(cell.data(), cell.data() + cell.size(), id);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size())
        throw SchemaError("row " + std::to_string(lineno) +
                          ": bad state_id '" + cell + "'");
    }
    Point x(n);
    for (int c = 0; c < n; ++c)
      x[c] = parse_double(cells[static_cast<std::size_t>(1 + c)], lineno);
    Transition t;
    t.input.resize(m);
    for (int c = 0; c < m; ++c)
      t.input[c] = parse_double(cells[static_cast<std::size_t>(1 + n + c)], lineno);
    t.successor.resize(n);
    for (int c = 0; c < n; ++c)
      t.successor[c] =
          parse_double(cells[static_cast<std::size_t>(1 + n + m + c)], lineno);

    auto it = index_of.find(id);
    if (it == index_of.end()) {
      index_of[id] = d.samples.size();
      OneStepSample s;
      s.state = std::move(x);
      s.transitions.push_back(std::move(t));
      d.samples.push_back(std::move(s));
    } else {
      OneStepSample& s = d.samples[it->second];
      if (s.state != x)
        throw SchemaError("row " + std::to_string(lineno) +
                          ": state_id reused with different coordinates");
      s.transitions.push_back(std::move(t));
    }
  }
  if (d.samples.empty()) throw SchemaError(csv_path + ": no data rows");
  const std::size_t M = d.samples[0].transitions.size();
  for (std::size_t z = 0; z < d.samples.size(); ++z) {
    if (d.samples[z].transitions.size() != M)
      throw SchemaError("sample " + std::to_string(z) +
                        ": inconsistent transition count (" +
                        std::to_string(d.samples[z].transitions.size()) +
                        " vs " + std::to_string(M) + ")");
  }

  const auto sp = sidecar_path(csv_path);
  if (std::filesystem::exists(sp)) {
    std::ifstream jf(sp);
    json j;
    try {
      jf >> j;
    } catch (const json::exception& e) {
      throw SchemaError(sp.string() + ": " + e.what());
    }
    if (j.at("n").get<int>() != n || j.at("m").get<int>() != m)
      throw SchemaError(sp.string() + ": dimensions disagree with the CSV");
    d.state_box = box_from_json(j.at("state_box"));
    d.input_box = box_from_json(j.at("input_box"));
    const std::string mode = j.value("L_mode", "none");
    if (mode == "joint")
      d.lipschitz = LipschitzInfo::make_joint(j.at("L_joint").get<double>());
    else if (mode == "split")
      d.lipschitz = LipschitzInfo::make_split(j.at("L_x").get<double>(),
                                              j.at("L_u").get<double>());
  } else {
    // No sidecar: fall back to the tight bounding boxes of the data.
    d.state_box.lo = d.samples[0].state;
    d.state_box.hi = d.samples[0].state;
    d.input_box.lo = Eigen::VectorXd::Constant(m, 1e300);
    d.input_box.hi = Eigen::VectorXd::Constant(m, -1e300);
    for (const auto& s : d.samples) {
      d.state_box.lo = d.state_box.lo.cwiseMin(s.state);
      d.state_box.hi = d.state_box.hi.cwiseMax(s.state);
      for (const auto& t : s.transitions) {
        if (m > 0) {
          d.input_box.lo = d.input_box.lo.cwiseMin(t.input);
          d.input_box.hi = d.input_box.hi.cwiseMax(t.input);
        }
      }
    }
  }
  d.validate();
  return d;
}

std::vector<std::vector<bool>> annotate_containment(const Dataset& dataset,
                                                    const Triangulation& tri) {
  std::vector<std::vector<bool>> flags(
      static_cast<std::size_t>(dataset.num_samples()));
  for (std::size_t z = 0; z < flags.size(); ++z) {
    const auto& s = dataset.samples[z];
    flags[z].resize(s.transitions.size());
    for (std::size_t k = 0; k < s.transitions.size(); ++k)
      flags[z][k] = tri.locate(s.transitions[k].successor).has_value();
  }
  return flags;
}

double estimate_lipschitz_lower_bound(const Dataset& dataset) {
  if (dataset.num_samples() < 2)
    throw EmptyDataset("estimate_lipschitz_lower_bound: need >= 2 samples");
  struct Row {
    Eigen::VectorXd arg;  // stacked (x, u)
    Eigen::VectorXd suc;
  };
  std::vector<Row> rows;
  for (const auto& s : dataset.samples) {
    for (const auto& t : s.transitions) {
      Row r;
      r.arg.resize(dataset.state_dim + dataset.input_dim);
      r.arg.head(dataset.state_dim) = s.state;
      if (dataset.input_dim > 0) r.arg.tail(dataset.input_dim) = t.input;
      r.suc = t.successor;
      rows.push_back(std::move(r));
    }
  }
  double best = 0.0;
  for (std::size_t a = 0; a < rows.size(); ++a) {
    for (std::size_t b = a + 1; b < rows.size(); ++b) {
      const double den = (rows[a].arg - rows[b].arg).norm();
      if (den <= 1e-15) continue;
      best = std::max(best, (rows[a].suc - rows[b].suc).norm() / den);
    }
  }
  return best;
}

}  // namespace cpabf
