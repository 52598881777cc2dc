#include "cpabf/conic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "cpabf/numfmt.hpp"

namespace cpabf {

void AffineExpr::compress() {
  std::sort(terms.begin(), terms.end());
  std::size_t out = 0;
  for (std::size_t i = 0; i < terms.size();) {
    int var = terms[i].first;
    double sum = 0.0;
    while (i < terms.size() && terms[i].first == var) sum += terms[i++].second;
    if (sum != 0.0) terms[out++] = {var, sum};
  }
  terms.resize(out);
}

double AffineExpr::evaluate(const Eigen::VectorXd& x) const {
  double v = constant;
  for (const auto& [var, c] : terms) v += c * x[var];
  return v;
}

void ConeProgram::check_expr(const AffineExpr& e) const {
  for (const auto& [var, c] : e.terms) {
    check_var(var);
    if (!std::isfinite(c))
      throw AssemblyError("cone program: non-finite coefficient");
  }
  if (!std::isfinite(e.constant))
    throw AssemblyError("cone program: non-finite constant");
}

void ConeProgram::add_row(AffineExpr expr, Sense sense, double rhs) {
  check_expr(expr);
  if (!std::isfinite(rhs))
    throw AssemblyError("cone program: non-finite right-hand side");
  expr.compress();
  LinearRow row;
  row.coeffs = std::move(expr.terms);
  row.sense = sense;
  row.rhs = rhs - expr.constant;
  rows_.push_back(std::move(row));
}

void ConeProgram::add_rotated_cone(AffineExpr s, AffineExpr t,
                                   std::vector<AffineExpr> v) {
  check_expr(s);
  check_expr(t);
  for (auto& e : v) {
    check_expr(e);
    e.compress();
  }
  s.compress();
  t.compress();
  cones_.push_back({std::move(s), std::move(t), std::move(v)});
}

double ConeProgram::max_violation(const Eigen::VectorXd& x) const {
  double worst = 0.0;
  for (const auto& row : rows_) {
    double lhs = 0.0;
    for (const auto& [var, c] : row.coeffs) lhs += c * x[var];
    const double gap = lhs - row.rhs;
    worst = std::max(worst, row.sense == Sense::Eq ? std::abs(gap) : gap);
  }
  for (const auto& cone : cones_) {
    const double s = cone.s.evaluate(x);
    const double t = cone.t.evaluate(x);
    double vsq = 0.0;
    for (const auto& e : cone.v) {
      const double val = e.evaluate(x);
      vsq += val * val;
    }
    worst = std::max({worst, -s, -t, vsq - s * t});
  }
  return worst;
}

void lmi_to_rotated_cone(ConeProgram& p, const AffineExpr& a,
                         const AffineExpr& v0, const AffineExpr& v1,
                         const AffineExpr& theta) {
  // Membership in the rotated cone already forces theta - a >= 0 and
  // 2 + theta >= 0; restating them as rows would split the dual mass and
  // degrade the interior-point tail.
  AffineExpr s = theta - a;
  AffineExpr t = theta + 2.0;
  p.add_rotated_cone(std::move(s), std::move(t), {v0, v1});
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal:
      return "optimal";
    case SolveStatus::Infeasible:
      return "infeasible";
    case SolveStatus::Unbounded:
      return "unbounded";
    case SolveStatus::MaxIter:
      return "max_iter";
  }
  return "unknown";
}

namespace {

void dump_expr(std::ofstream& f, const AffineExpr& e) {
  f << "expr " << fmt_double(e.constant) << ' ' << e.terms.size();
  for (const auto& [var, c] : e.terms) f << ' ' << var << ' ' << fmt_double(c);
  f << '\n';
}

}  // namespace

void ConeProgram::dump(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << "cone-program v1\n";
  f << "vars " << num_vars_ << '\n';
  for (int i = 0; i < num_vars_; ++i) {
    const double c = objective_[static_cast<std::size_t>(i)];
    if (c != 0.0) f << "obj " << i << ' ' << fmt_double(c) << '\n';
  }
  for (const auto& row : rows_) {
    f << (row.sense == Sense::Eq ? "eq " : "le ") << fmt_double(row.rhs) << ' '
      << row.coeffs.size();
    for (const auto& [var, c] : row.coeffs)
      f << ' ' << var << ' ' << fmt_double(c);
    f << '\n';
  }
  for (const auto& cone : cones_) {
    f << "rcone " << cone.v.size() << '\n';
    dump_expr(f, cone.s);
    dump_expr(f, cone.t);
    for (const auto& e : cone.v) dump_expr(f, e);
  }
}

}  // namespace cpabf
