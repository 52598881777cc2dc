#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "cpabf/errors.hpp"

namespace cpabf {

/// Sparse affine expression constant + sum coeff_j x_j.
struct AffineExpr {
  std::vector<std::pair<int, double>> terms;
  double constant = 0.0;

  AffineExpr() = default;
  AffineExpr(double c) : constant(c) {}  // NOLINT: implicit by design

  static AffineExpr variable(int index, double coeff = 1.0) {
    AffineExpr e;
    e.terms.emplace_back(index, coeff);
    return e;
  }

  AffineExpr& operator+=(const AffineExpr& o) {
    constant += o.constant;
    terms.insert(terms.end(), o.terms.begin(), o.terms.end());
    return *this;
  }
  AffineExpr& operator-=(const AffineExpr& o) {
    constant -= o.constant;
    for (const auto& [v, c] : o.terms) terms.emplace_back(v, -c);
    return *this;
  }
  AffineExpr& operator*=(double a) {
    constant *= a;
    for (auto& [v, c] : terms) c *= a;
    return *this;
  }

  /// Merges duplicate variables and drops exact-zero coefficients.
  void compress();

  double evaluate(const Eigen::VectorXd& x) const;
};

inline AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a += b; }
inline AffineExpr operator-(AffineExpr a, const AffineExpr& b) { return a -= b; }
inline AffineExpr operator*(double a, AffineExpr e) { return e *= a; }
inline AffineExpr operator*(AffineExpr e, double a) { return e *= a; }
inline AffineExpr operator-(AffineExpr e) { return e *= -1.0; }

enum class Sense { Eq, Le };

/// One affine row: coeffs . x (= | <=) rhs.
struct LinearRow {
  std::vector<std::pair<int, double>> coeffs;
  Sense sense = Sense::Le;
  double rhs = 0.0;
};

/// ||v(x)||^2 <= s(x) t(x) with s(x) >= 0, t(x) >= 0.
struct RotatedCone {
  AffineExpr s, t;
  std::vector<AffineExpr> v;
};

/// Linear objective over affine rows and rotated second-order cones.
class ConeProgram {
 public:
  explicit ConeProgram(int num_vars = 0) : num_vars_(num_vars) {
    objective_.assign(static_cast<std::size_t>(num_vars), 0.0);
  }

  int add_variable() {
    objective_.push_back(0.0);
    return num_vars_++;
  }
  int num_vars() const { return num_vars_; }

  void add_objective_term(int var, double coeff) {
    check_var(var);
    objective_[static_cast<std::size_t>(var)] += coeff;
  }

  /// expr (= | <=) rhs; the expression's constant is folded into rhs.
  void add_row(AffineExpr expr, Sense sense, double rhs);
  void add_eq(const AffineExpr& expr, double rhs = 0.0) {
    add_row(expr, Sense::Eq, rhs);
  }
  void add_le(const AffineExpr& expr, double rhs = 0.0) {
    add_row(expr, Sense::Le, rhs);
  }
  void add_ge(AffineExpr expr, double rhs = 0.0) {
    add_row(-std::move(expr), Sense::Le, -rhs);
  }

  void add_rotated_cone(AffineExpr s, AffineExpr t, std::vector<AffineExpr> v);

  const std::vector<double>& objective() const { return objective_; }
  const std::vector<LinearRow>& rows() const { return rows_; }
  const std::vector<RotatedCone>& cones() const { return cones_; }

  /// Largest violation of rows and cones at x (0 when feasible).
  double max_violation(const Eigen::VectorXd& x) const;

  /// Plain-text dump (see README) for external cross-solving.
  void dump(const std::string& path) const;

 private:
  void check_var(int v) const {
    if (v < 0 || v >= num_vars_)
      throw AssemblyError("cone program: variable index out of range");
  }
  void check_expr(const AffineExpr& e) const;

  int num_vars_ = 0;
  std::vector<double> objective_;
  std::vector<LinearRow> rows_;
  std::vector<RotatedCone> cones_;
};

/// Schur reduction of the overbound matrix inequality
///   [[a, v0, v1], [v0, -2, 0], [v1, 0, -2]] <= theta I
/// for theta >= 0: emits the rotated cone
///   ||(v0, v1)||^2 <= (2 + theta)(theta - a)
/// together with the rows theta - a >= 0 and 2 + theta >= 0.
void lmi_to_rotated_cone(ConeProgram& p, const AffineExpr& a,
                         const AffineExpr& v0, const AffineExpr& v1,
                         const AffineExpr& theta);

enum class SolveStatus { Optimal, Infeasible, Unbounded, MaxIter };

std::string to_string(SolveStatus s);

struct ConeSolution {
  SolveStatus status = SolveStatus::MaxIter;
  Eigen::VectorXd x;
  double objective = 0.0;
  double max_violation = 0.0;
  int iterations = 0;
};

struct SolverOptions {
  double tol = 1e-8;
  int max_iter = 100;
  double static_reg = 1e-9;
  bool equilibrate = true;
  bool verbose = false;
};

/// Homogeneous self-dual primal-dual interior-point solve (Nesterov-Todd
/// scaling, Mehrotra predictor-corrector, sparse LDLT with static
/// regularization). Throws NumericalBreakdown when the KKT factorization
/// fails after regularization retries.
ConeSolution solve(const ConeProgram& p, const SolverOptions& opts);
ConeSolution solve(const ConeProgram& p, double tol = 1e-8,
                   int max_iter = 100);

}  // namespace cpabf
