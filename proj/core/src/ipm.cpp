#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <vector>

#include "cpabf/conic.hpp"

namespace cpabf {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;
using Eigen::VectorXd;

// Standard conic form
//   min c'x  s.t.  Ax = b,  Gx + s = h,  s in K,
// K = R+^{n_lp} x SOC(d_1) x ... x SOC(d_k).
struct StandardForm {
  int n = 0;
  std::vector<Triplet> a_entries, g_entries;
  VectorXd b, h, c;
  int n_lp = 0;
  std::vector<int> soc_dims;
  int m_total = 0;
  int p = 0;
};

StandardForm to_standard_form(const ConeProgram& prog) {
  StandardForm sf;
  sf.n = prog.num_vars();
  sf.c = Eigen::Map<const VectorXd>(prog.objective().data(),
                                    static_cast<Eigen::Index>(
                                        prog.objective().size()));
  int p = 0, m_lp = 0;
  for (const auto& row : prog.rows())
    (row.sense == Sense::Eq ? p : m_lp)++;
  int m_total = m_lp;
  for (const auto& cone : prog.cones())
    m_total += 2 + static_cast<int>(cone.v.size());
  if (m_total == 0)
    throw AssemblyError("solve: program has no inequality rows or cones");

  sf.p = p;
  sf.n_lp = m_lp;
  sf.m_total = m_total;
  sf.b.resize(p);
  sf.h.resize(m_total);

  int ei = 0, gi = 0;
  for (const auto& row : prog.rows()) {
    if (row.sense == Sense::Eq) {
      for (const auto& [var, cf] : row.coeffs)
        sf.a_entries.emplace_back(ei, var, cf);
      sf.b[ei++] = row.rhs;
    } else {
      for (const auto& [var, cf] : row.coeffs)
        sf.g_entries.emplace_back(gi, var, cf);
      sf.h[gi++] = row.rhs;
    }
  }
  // Rotated cone (s, t, v): member of SOC(2 + |v|) via
  //   u = ((s + t)/2, (s - t)/2, v).
  auto emit = [&](const AffineExpr& e) {
    for (const auto& [var, cf] : e.terms)
      sf.g_entries.emplace_back(gi, var, -cf);
    sf.h[gi++] = e.constant;
  };
  for (const auto& cone : prog.cones()) {
    sf.soc_dims.push_back(2 + static_cast<int>(cone.v.size()));
    AffineExpr u0 = 0.5 * (cone.s + cone.t);
    AffineExpr u1 = 0.5 * (cone.s - cone.t);
    u0.compress();
    u1.compress();
    emit(u0);
    emit(u1);
    for (const auto& e : cone.v) emit(e);
  }
  return sf;
}

// Ruiz equilibration of the stacked [A; G] system. Rows of one SOC block
// share a single factor so the cone geometry is preserved.
struct Equilibration {
  VectorXd d_col, e_a, e_g;
};

Equilibration equilibrate(StandardForm& sf, int iters) {
  Equilibration eq;
  eq.d_col = VectorXd::Ones(sf.n);
  eq.e_a = VectorXd::Ones(sf.p);
  eq.e_g = VectorXd::Ones(sf.m_total);

  for (int it = 0; it < iters; ++it) {
    VectorXd row_a = VectorXd::Zero(sf.p);
    VectorXd row_g = VectorXd::Zero(sf.m_total);
    VectorXd col = VectorXd::Zero(sf.n);
    for (const auto& t : sf.a_entries) {
      const double v =
          std::abs(t.value() * eq.e_a[t.row()] * eq.d_col[t.col()]);
      row_a[t.row()] = std::max(row_a[t.row()], v);
      col[t.col()] = std::max(col[t.col()], v);
    }
    for (const auto& t : sf.g_entries) {
      const double v =
          std::abs(t.value() * eq.e_g[t.row()] * eq.d_col[t.col()]);
      row_g[t.row()] = std::max(row_g[t.row()], v);
      col[t.col()] = std::max(col[t.col()], v);
    }
    // Unify SOC block rows.
    int off = sf.n_lp;
    for (int d : sf.soc_dims) {
      const double blk = row_g.segment(off, d).maxCoeff();
      row_g.segment(off, d).setConstant(blk);
      off += d;
    }
    auto update = [](VectorXd& scale, const VectorXd& norms) {
      for (Eigen::Index i = 0; i < scale.size(); ++i)
        if (norms[i] > 0.0) scale[i] /= std::sqrt(norms[i]);
    };
    update(eq.e_a, row_a);
    update(eq.e_g, row_g);
    update(eq.d_col, col);
  }

  for (auto& t : sf.a_entries)
    t = Triplet(t.row(), t.col(),
                t.value() * eq.e_a[t.row()] * eq.d_col[t.col()]);
  for (auto& t : sf.g_entries)
    t = Triplet(t.row(), t.col(),
                t.value() * eq.e_g[t.row()] * eq.d_col[t.col()]);
  sf.b = sf.b.cwiseProduct(eq.e_a);
  sf.h = sf.h.cwiseProduct(eq.e_g);
  sf.c = sf.c.cwiseProduct(eq.d_col);
  return eq;
}

struct SocScaling {
  double eta2 = 1.0;  // W^2 = eta2 (2 wbar wbar' - J)
  VectorXd wbar;
};

class Ipm {
 public:
  Ipm(const StandardForm& sf, const SolverOptions& opts)
      : sf_(sf), opts_(opts) {
    n_ = sf.n;
    p_ = sf.p;
    m_ = sf.m_total;
    nu_ = sf.n_lp + static_cast<int>(sf.soc_dims.size());

    A_.resize(p_, n_);
    A_.setFromTriplets(sf.a_entries.begin(), sf.a_entries.end());
    G_.resize(m_, n_);
    G_.setFromTriplets(sf.g_entries.begin(), sf.g_entries.end());
    At_ = A_.transpose();
    Gt_ = G_.transpose();

    lp_w2_ = VectorXd::Ones(sf.n_lp);
    socs_.resize(sf.soc_dims.size());
    for (std::size_t k = 0; k < socs_.size(); ++k) {
      socs_[k].wbar = VectorXd::Zero(sf.soc_dims[k]);
      socs_[k].wbar[0] = 1.0;
      socs_[k].eta2 = 1.0;
    }
    lambda_.resize(m_);
    build_kkt();
  }

  // Runs the homogeneous self-dual loop. Returns the final status and
  // fills x (already unscaled by tau), iterations and residuals.
  struct Result {
    SolveStatus status = SolveStatus::MaxIter;
    VectorXd x, y, z, s;
    int iterations = 0;
  };

  Result run() {
    Result res;
    reset_scalings_identity();
    update_kkt_values();
    factorize();

    // Primal init: argmin ||Gx - h|| s.t. Ax = b, then push -z into K.
    VectorXd rhs = VectorXd::Zero(kdim_);
    rhs.segment(n_, p_) = sf_.b;
    rhs.segment(n_ + p_, m_) = sf_.h;
    VectorXd dx(n_), dy(p_), dz(m_);
    solve_kkt(rhs, dx, dy, dz);
    x_ = dx;
    s_ = bring_to_cone(-dz);
    // Dual init: min-norm z with A'y + G'z + c = 0, pushed into K.
    rhs.setZero();
    rhs.head(n_) = -sf_.c;
    solve_kkt(rhs, dx, dy, dz);
    y_ = dy;
    z_ = bring_to_cone(dz);
    tau_ = 1.0;
    kap_ = 1.0;

    rhs1_ = VectorXd::Zero(kdim_);
    rhs1_.head(n_) = -sf_.c;
    rhs1_.segment(n_, p_) = sf_.b;
    rhs1_.segment(n_ + p_, m_) = sf_.h;

    const double resx0 = std::max(1.0, sf_.c.norm());
    const double resy0 = std::max(1.0, sf_.b.norm());
    const double resz0 = std::max(1.0, sf_.h.norm());

    double pres_prev = std::numeric_limits<double>::max();
    Best best;

    for (int iter = 0;; ++iter) {
      res.iterations = iter;
      // Residuals of the homogeneous embedding.
      VectorXd rx = -(At_ * y_) - Gt_ * z_;
      const double hresx = rx.norm();
      rx -= tau_ * sf_.c;
      VectorXd ry = A_ * x_;
      const double hresy = ry.norm();
      ry -= tau_ * sf_.b;
      VectorXd rz = s_ + G_ * x_;
      const double hresz = rz.norm();
      rz -= tau_ * sf_.h;
      const double cx = sf_.c.dot(x_);
      const double by = p_ > 0 ? sf_.b.dot(y_) : 0.0;
      const double hz = sf_.h.dot(z_);
      const double rt = kap_ + cx + by + hz;

      const double nx = x_.norm(), ny = y_.norm(), nz = z_.norm(),
                   ns = s_.norm();
      const double gap = s_.dot(z_);
      mu_ = (gap + kap_ * tau_) / (nu_ + 1);
      const double pcost = cx / tau_;
      const double dcost = -(by + hz) / tau_;
      double relgap = std::numeric_limits<double>::infinity();
      if (pcost < 0.0)
        relgap = gap / (-pcost);
      else if (dcost > 0.0)
        relgap = gap / dcost;
      const double pres =
          std::max(p_ > 0 ? ry.norm() / std::max(resy0 + nx, 1.0) : 0.0,
                   rz.norm() / std::max(resz0 + nx + ns, 1.0)) /
          tau_;
      const double dres = rx.norm() / std::max(resx0 + ny + nz, 1.0) / tau_;
      double pinfres = std::numeric_limits<double>::infinity();
      if ((hz + by) / std::max(ny + nz, 1.0) < -opts_.tol)
        pinfres = hresx / std::max(ny + nz, 1.0);
      double dinfres = std::numeric_limits<double>::infinity();
      if (cx / std::max(nx, 1.0) < -opts_.tol)
        dinfres = std::max(hresy / std::max(nx, 1.0),
                           hresz / std::max(nx + ns, 1.0));

      if (opts_.verbose) {
        std::printf(
            "%3d  pcost %+10.3e dcost %+10.3e gap %8.1e pres %8.1e dres "
            "%8.1e k/t %8.1e mu %8.1e st %6.4f/%6.4f sg %6.4f\n",
            iter, pcost, dcost, gap, pres, dres, kap_ / tau_, mu_,
            last_step_aff_, last_step_, last_sigma_);
      }

      const Metrics met{pres, dres, gap, relgap, pinfres, dinfres,
                        pcost,  dcost, cx,  by,     hz};

      // Numerical safeguard: restore the best iterate when the step was
      // destructive, then settle for reduced accuracy if available.
      if (iter > 0 &&
          (gap < 0.0 || pres > 500.0 * std::max(pres_prev, opts_.tol))) {
        res.status = settle(best);
        break;
      }
      pres_prev = pres;

      const SolveStatus full = classify(met, false);
      if (full != SolveStatus::MaxIter) {
        res.status = full;
        break;
      }
      if (iter >= opts_.max_iter) {
        res.status = classify(met, true);
        break;
      }
      if (!std::isfinite(pcost)) {
        res.status = settle(best);
        break;
      }

      if (iter == 0 || better(met, best.met)) save(best, met);

      if (!compute_scalings()) {
        res.status = settle(best);
        break;
      }
      update_kkt_values();
      factorize();

      VectorXd x1(n_), y1(p_), z1(m_);
      solve_kkt(rhs1_, x1, y1, z1);
      const double dtau_denom =
          kap_ / tau_ - sf_.c.dot(x1) - (p_ > 0 ? sf_.b.dot(y1) : 0.0) -
          sf_.h.dot(z1);
      if (!std::isfinite(dtau_denom) || dtau_denom == 0.0) {
        res.status = settle(best);
        break;
      }

      // Affine (predictor) direction.
      VectorXd rhs2 = VectorXd::Zero(kdim_);
      rhs2.head(n_) = rx;
      rhs2.segment(n_, p_) = -ry;
      rhs2.segment(n_ + p_, m_) = s_ - rz;
      VectorXd x2(n_), y2(p_), z2(m_);
      solve_kkt(rhs2, x2, y2, z2);
      const double dtauaff = (rt - kap_ + sf_.c.dot(x2) +
                              (p_ > 0 ? sf_.b.dot(y2) : 0.0) + sf_.h.dot(z2)) /
                             dtau_denom;
      VectorXd dzaff = z2 + dtauaff * z1;
      VectorXd W_dzaff = apply_W(dzaff);
      VectorXd dsaff_by_W = -W_dzaff - lambda_;
      const double dkapaff = -kap_ - kap_ / tau_ * dtauaff;
      const double step_aff =
          line_search(dsaff_by_W, W_dzaff, dtauaff, dkapaff);

      const double sigma =
          std::clamp(std::pow(1.0 - step_aff, 3), 1e-4, 0.9999);
      last_step_aff_ = step_aff;
      last_sigma_ = sigma;

      // Combined (corrector) direction. When the second-order term
      // strangles the step near a degenerate face, retry without it.
      VectorXd lam_div, W_dz, ds_by_W;
      double dtau = 0.0, dkap = 0.0, step = 0.0;
      for (int use_corrector = 1; use_corrector >= 0; --use_corrector) {
        VectorXd dcomb = cone_product(lambda_, lambda_);
        if (use_corrector) dcomb += cone_product(dsaff_by_W, W_dzaff);
        add_cone_identity(dcomb, -sigma * mu_);
        lam_div = cone_division(lambda_, dcomb);
        VectorXd W_lam_div = apply_W(lam_div);
        rhs2.head(n_) = (1.0 - sigma) * rx;
        rhs2.segment(n_, p_) = -(1.0 - sigma) * ry;
        rhs2.segment(n_ + p_, m_) = -(1.0 - sigma) * rz + W_lam_div;
        solve_kkt(rhs2, x2, y2, z2);

        const double bkap = kap_ * tau_ - sigma * mu_ +
                            (use_corrector ? dkapaff * dtauaff : 0.0);
        dtau = ((1.0 - sigma) * rt - bkap / tau_ + sf_.c.dot(x2) +
                (p_ > 0 ? sf_.b.dot(y2) : 0.0) + sf_.h.dot(z2)) /
               dtau_denom;
        x2 += dtau * x1;
        if (p_ > 0) y2 += dtau * y1;
        z2 += dtau * z1;
        W_dz = apply_W(z2);
        ds_by_W = -(lam_div + W_dz);
        dkap = -(bkap + kap_ * dtau) / tau_;

        step = 0.99 * line_search(ds_by_W, W_dz, dtau, dkap);
        step = std::min(step, 1.0);
        if (step >= 0.05 || step >= 0.2 * step_aff) break;
      }
      last_step_ = step;
      VectorXd ds = apply_W(ds_by_W);

      x_ += step * x2;
      if (p_ > 0) y_ += step * y2;
      z_ += step * z2;
      s_ += step * ds;
      kap_ += step * dkap;
      tau_ += step * dtau;

      // Two consecutive vanishing steps mean no further progress.
      if (step < 1e-7) {
        if (++stalled_ >= 2) {
          res.status = settle(best);
          break;
        }
      } else {
        stalled_ = 0;
      }
    }

    res.x = x_ / tau_;
    res.y = y_ / tau_;
    res.z = z_ / tau_;
    res.s = s_ / tau_;
    return res;
  }

 private:
  struct Metrics {
    double pres = 0, dres = 0, gap = 0, relgap = 0, pinfres = 0, dinfres = 0;
    double pcost = 0, dcost = 0, cx = 0, by = 0, hz = 0;
  };
  struct Best {
    VectorXd x, y, z, s;
    double tau = 1.0, kap = 1.0;
    Metrics met;
    bool valid = false;
  };

  // Fall back to the best saved iterate and grade it at reduced accuracy.
  SolveStatus settle(const Best& best) {
    if (!best.valid) return SolveStatus::MaxIter;
    restore(best);
    return classify(best.met, true);
  }

  SolveStatus classify(const Metrics& m, bool reduced) const {
    const double feastol = reduced ? std::max(1e-4, opts_.tol) : opts_.tol;
    const double abstol = reduced ? std::max(5e-5, opts_.tol) : opts_.tol;
    const double reltol = reduced ? std::max(5e-5, opts_.tol) : opts_.tol;
    if ((-m.cx > 0.0 || -m.by - m.hz >= -abstol) && m.pres < feastol &&
        m.dres < feastol && (m.gap < abstol || m.relgap < reltol))
      return SolveStatus::Optimal;
    if (m.dinfres < feastol && tau_ < kap_) return SolveStatus::Unbounded;
    if (m.pinfres < feastol && tau_ < kap_) return SolveStatus::Infeasible;
    if (tau_ < feastol && kap_ < feastol && m.pinfres < feastol)
      return SolveStatus::Infeasible;
    return SolveStatus::MaxIter;
  }

  static bool better(const Metrics& a, const Metrics& b) {
    return a.pres + a.dres + std::min(a.relgap, 1.0) <
           b.pres + b.dres + std::min(b.relgap, 1.0);
  }
  void save(Best& best, const Metrics& met) {
    best.x = x_;
    best.y = y_;
    best.z = z_;
    best.s = s_;
    best.tau = tau_;
    best.kap = kap_;
    best.met = met;
    best.valid = true;
  }
  void restore(const Best& best) {
    if (!best.valid) return;
    x_ = best.x;
    y_ = best.y;
    z_ = best.z;
    s_ = best.s;
    tau_ = best.tau;
    kap_ = best.kap;
  }

  void build_kkt() {
    kdim_ = n_ + p_ + m_;
    reg_ = opts_.static_reg;
    std::vector<Triplet> trip;
    trip.reserve(sf_.a_entries.size() + sf_.g_entries.size() + kdim_ + 64);
    for (int i = 0; i < n_; ++i) trip.emplace_back(i, i, reg_);
    for (const auto& t : sf_.a_entries)
      trip.emplace_back(n_ + t.row(), t.col(), t.value());
    for (int i = 0; i < p_; ++i)
      trip.emplace_back(n_ + i, n_ + i, -reg_);
    for (const auto& t : sf_.g_entries)
      trip.emplace_back(n_ + p_ + t.row(), t.col(), t.value());
    // Scaling block placeholders (values refreshed every iteration; the
    // tiny magnitude keeps the entries structurally present).
    for (int i = 0; i < sf_.n_lp; ++i) {
      const int r = n_ + p_ + i;
      trip.emplace_back(r, r, -1.0 - reg_);
    }
    int off = sf_.n_lp;
    for (int d : sf_.soc_dims) {
      for (int i = 0; i < d; ++i)
        for (int j = 0; j <= i; ++j)
          trip.emplace_back(n_ + p_ + off + i, n_ + p_ + off + j,
                            i == j ? -1.0 - reg_ : 1e-300);
      off += d;
    }
    K_.resize(kdim_, kdim_);
    K_.setFromTriplets(trip.begin(), trip.end());
    K_.makeCompressed();
    ldlt_.analyzePattern(K_);
  }

  void reset_scalings_identity() {
    lp_w2_.setOnes();
    for (auto& sc : socs_) {
      sc.eta2 = 1.0;
      sc.wbar.setZero();
      sc.wbar[0] = 1.0;
    }
    lambda_.setZero();
  }

  void update_kkt_values() {
    const double reg = reg_;
    const int base = n_ + p_;
    for (int i = 0; i < sf_.n_lp; ++i)
      K_.coeffRef(base + i, base + i) = -lp_w2_[i] - reg;
    int off = sf_.n_lp;
    for (std::size_t k = 0; k < socs_.size(); ++k) {
      const int d = sf_.soc_dims[k];
      const auto& sc = socs_[k];
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j <= i; ++j) {
          double w2 = 2.0 * sc.wbar[i] * sc.wbar[j];
          if (i == j) w2 -= (i == 0) ? 1.0 : -1.0;
          K_.coeffRef(base + off + i, base + off + j) =
              -sc.eta2 * w2 - (i == j ? reg : 0.0);
        }
      }
      off += d;
    }
  }

  void factorize() {
    for (int attempt = 0; attempt < 4; ++attempt) {
      ldlt_.factorize(K_);
      if (ldlt_.info() == Eigen::Success) return;
      // Escalate the regularization and rebuild all reg-bearing entries.
      reg_ *= 100.0;
      for (int i = 0; i < n_; ++i) K_.coeffRef(i, i) = reg_;
      for (int i = 0; i < p_; ++i) K_.coeffRef(n_ + i, n_ + i) = -reg_;
      update_kkt_values();
    }
    throw NumericalBreakdown(
        "conic solve: KKT factorization failed after regularization "
        "retries");
  }

  // Solve K [dx; dy; dz] = rhs with iterative refinement against the
  // unregularized KKT operator.
  void solve_kkt(const VectorXd& rhs, VectorXd& dx, VectorXd& dy,
                 VectorXd& dz) {
    VectorXd sol = ldlt_.solve(rhs);
    const double thresh = 1e-12 * (1.0 + rhs.lpNorm<Eigen::Infinity>());
    double prev_err = std::numeric_limits<double>::max();
    for (int it = 0; it < 4; ++it) {
      dx = sol.head(n_);
      dy = sol.segment(n_, p_);
      dz = sol.tail(m_);
      VectorXd ex = rhs.head(n_) - Gt_ * dz;
      if (p_ > 0) ex -= At_ * dy;
      VectorXd ey(p_);
      if (p_ > 0) ey = rhs.segment(n_, p_) - A_ * dx;
      VectorXd ez = rhs.tail(m_) - G_ * dx + apply_W2(dz);
      double err = std::max(ex.lpNorm<Eigen::Infinity>(),
                            ez.lpNorm<Eigen::Infinity>());
      if (p_ > 0) err = std::max(err, ey.lpNorm<Eigen::Infinity>());
      if (err <= thresh || err >= prev_err) break;
      prev_err = err;
      VectorXd corr(kdim_);
      corr << ex, ey, ez;
      sol += ldlt_.solve(corr);
    }
    dx = sol.head(n_);
    dy = sol.segment(n_, p_);
    dz = sol.tail(m_);
  }

  VectorXd bring_to_cone(const VectorXd& r) const {
    double alpha = -1.0;
    for (int i = 0; i < sf_.n_lp; ++i) alpha = std::max(alpha, -r[i]);
    int off = sf_.n_lp;
    for (int d : sf_.soc_dims) {
      alpha = std::max(alpha, r.segment(off + 1, d - 1).norm() - r[off]);
      off += d;
    }
    VectorXd s = r;
    if (alpha >= 0.0) {
      const double shift = 1.0 + alpha;
      for (int i = 0; i < sf_.n_lp; ++i) s[i] += shift;
      off = sf_.n_lp;
      for (int d : sf_.soc_dims) {
        s[off] += shift;
        off += d;
      }
    }
    return s;
  }

  // Nesterov-Todd scalings from the current (s, z); fails when either
  // iterate left the cone interior.
  bool compute_scalings() {
    for (int i = 0; i < sf_.n_lp; ++i) {
      if (s_[i] <= 0.0 || z_[i] <= 0.0) return false;
      lp_w2_[i] = s_[i] / z_[i];
      lambda_[i] = std::sqrt(s_[i] * z_[i]);
    }
    int off = sf_.n_lp;
    for (std::size_t k = 0; k < socs_.size(); ++k) {
      const int d = sf_.soc_dims[k];
      const auto sb = s_.segment(off, d);
      const auto zb = z_.segment(off, d);
      const double sres = sb[0] * sb[0] - sb.tail(d - 1).squaredNorm();
      const double zres = zb[0] * zb[0] - zb.tail(d - 1).squaredNorm();
      if (sres <= 0.0 || zres <= 0.0) return false;
      const double snorm = std::sqrt(sres), znorm = std::sqrt(zres);
      VectorXd sbar = sb / snorm, zbar = zb / znorm;
      const double gamma = std::sqrt(0.5 * (1.0 + sbar.dot(zbar)));
      auto& sc = socs_[k];
      sc.eta2 = snorm / znorm;
      sc.wbar.resize(d);
      sc.wbar[0] = (0.5 / gamma) * (sbar[0] + zbar[0]);
      sc.wbar.tail(d - 1) =
          (0.5 / gamma) * (sbar.tail(d - 1) - zbar.tail(d - 1));
      // lambda = W z
      const double eta = std::sqrt(sc.eta2);
      const double zeta = sc.wbar.tail(d - 1).dot(zb.tail(d - 1));
      lambda_[off] = eta * (sc.wbar[0] * zb[0] + zeta);
      lambda_.segment(off + 1, d - 1) =
          eta * (zb.tail(d - 1) +
                 (zb[0] + zeta / (1.0 + sc.wbar[0])) * sc.wbar.tail(d - 1));
      off += d;
    }
    return true;
  }

  VectorXd apply_W(const VectorXd& u) const {
    VectorXd out(m_);
    for (int i = 0; i < sf_.n_lp; ++i) out[i] = std::sqrt(lp_w2_[i]) * u[i];
    int off = sf_.n_lp;
    for (std::size_t k = 0; k < socs_.size(); ++k) {
      const int d = sf_.soc_dims[k];
      const auto& sc = socs_[k];
      const double eta = std::sqrt(sc.eta2);
      const auto ub = u.segment(off, d);
      const double zeta = sc.wbar.tail(d - 1).dot(ub.tail(d - 1));
      out[off] = eta * (sc.wbar[0] * ub[0] + zeta);
      out.segment(off + 1, d - 1) =
          eta * (ub.tail(d - 1) +
                 (ub[0] + zeta / (1.0 + sc.wbar[0])) * sc.wbar.tail(d - 1));
      off += d;
    }
    return out;
  }

  VectorXd apply_W2(const VectorXd& u) const {
    VectorXd out(m_);
    for (int i = 0; i < sf_.n_lp; ++i) out[i] = lp_w2_[i] * u[i];
    int off = sf_.n_lp;
    for (std::size_t k = 0; k < socs_.size(); ++k) {
      const int d = sf_.soc_dims[k];
      const auto& sc = socs_[k];
      const auto ub = u.segment(off, d);
      const double wu = sc.wbar.dot(ub);
      // W^2 u = eta2 (2 wbar (wbar'u) - J u)
      out[off] = sc.eta2 * (2.0 * sc.wbar[0] * wu - ub[0]);
      out.segment(off + 1, d - 1) =
          sc.eta2 *
          (2.0 * wu * sc.wbar.tail(d - 1) + ub.tail(d - 1));
      off += d;
    }
    return out;
  }

  VectorXd cone_product(const VectorXd& u, const VectorXd& v) const {
    VectorXd out(m_);
    for (int i = 0; i < sf_.n_lp; ++i) out[i] = u[i] * v[i];
    int off = sf_.n_lp;
    for (int d : sf_.soc_dims) {
      out[off] = u.segment(off, d).dot(v.segment(off, d));
      out.segment(off + 1, d - 1) = u[off] * v.segment(off + 1, d - 1) +
                                    v[off] * u.segment(off + 1, d - 1);
      off += d;
    }
    return out;
  }

  VectorXd cone_division(const VectorXd& u, const VectorXd& w) const {
    VectorXd out(m_);
    for (int i = 0; i < sf_.n_lp; ++i) out[i] = w[i] / u[i];
    int off = sf_.n_lp;
    for (int d : sf_.soc_dims) {
      const double u0 = u[off], w0 = w[off];
      const auto u1 = u.segment(off + 1, d - 1);
      const auto w1 = w.segment(off + 1, d - 1);
      const double rho = u0 * u0 - u1.squaredNorm();
      const double zeta = u1.dot(w1);
      out[off] = (u0 * w0 - zeta) / rho;
      out.segment(off + 1, d - 1) =
          ((zeta / u0 - w0) / rho) * u1 + w1 / u0;
      off += d;
    }
    return out;
  }

  void add_cone_identity(VectorXd& u, double scale) const {
    for (int i = 0; i < sf_.n_lp; ++i) u[i] += scale;
    int off = sf_.n_lp;
    for (int d : sf_.soc_dims) {
      u[off] += scale;
      off += d;
    }
  }

  // Largest step with lambda + alpha d staying in the cone, for both
  // scaled directions, plus positivity of tau and kappa.
  double line_search(const VectorXd& ds, const VectorXd& dz, double dtau,
                     double dkap) const {
    double alpha = 10.0;
    for (int i = 0; i < sf_.n_lp; ++i) {
      if (ds[i] < 0.0) alpha = std::min(alpha, -lambda_[i] / ds[i]);
      if (dz[i] < 0.0) alpha = std::min(alpha, -lambda_[i] / dz[i]);
    }
    if (dtau < 0.0) alpha = std::min(alpha, -tau_ / dtau);
    if (dkap < 0.0) alpha = std::min(alpha, -kap_ / dkap);

    int off = sf_.n_lp;
    for (int d : sf_.soc_dims) {
      const auto lb = lambda_.segment(off, d);
      const double lres = lb[0] * lb[0] - lb.tail(d - 1).squaredNorm();
      if (lres > 0.0) {
        const double lnorm = std::sqrt(lres);
        const VectorXd lbar = lb / lnorm;
        auto bound = [&](const VectorXd& dir) {
          const auto db = dir.segment(off, d);
          const double ldot = lbar[0] * db[0] - lbar.tail(d - 1).dot(db.tail(d - 1));
          const double f = (ldot + db[0]) / (lbar[0] + 1.0);
          const double rho0 = ldot / lnorm;
          const VectorXd rho1 =
              (db.tail(d - 1) - f * lbar.tail(d - 1)) / lnorm;
          return rho1.norm() - rho0;
        };
        const double bmax = std::max({0.0, bound(ds), bound(dz)});
        if (bmax > 0.0) alpha = std::min(alpha, 1.0 / bmax);
      }
      off += d;
    }
    return std::clamp(alpha, 1e-8, 1.0);
  }

  const StandardForm& sf_;
  const SolverOptions& opts_;
  int n_ = 0, p_ = 0, m_ = 0, nu_ = 0, kdim_ = 0;
  SpMat A_, G_, At_, Gt_, K_;
  Eigen::SimplicialLDLT<SpMat> ldlt_;
  VectorXd lp_w2_, lambda_;
  std::vector<SocScaling> socs_;
  VectorXd x_, y_, z_, s_, rhs1_;
  double tau_ = 1.0, kap_ = 1.0, mu_ = 0.0;
  double reg_ = 1e-9;
  int stalled_ = 0;
  double last_step_aff_ = 0.0, last_step_ = 0.0, last_sigma_ = 0.0;
};

}  // namespace

ConeSolution solve(const ConeProgram& prog, const SolverOptions& opts) {
  StandardForm sf = to_standard_form(prog);
  Equilibration eq;
  if (opts.equilibrate) {
    eq = equilibrate(sf, 3);
  } else {
    eq.d_col = VectorXd::Ones(sf.n);
    eq.e_a = VectorXd::Ones(sf.p);
    eq.e_g = VectorXd::Ones(sf.m_total);
  }

  Ipm ipm(sf, opts);
  Ipm::Result r = ipm.run();

  ConeSolution sol;
  sol.status = r.status;
  sol.iterations = r.iterations;
  sol.x = r.x.cwiseProduct(eq.d_col);
  if (r.status == SolveStatus::Optimal) {
    double obj = 0.0;
    for (int i = 0; i < prog.num_vars(); ++i)
      obj += prog.objective()[static_cast<std::size_t>(i)] * sol.x[i];
    sol.objective = obj;
    sol.max_violation = prog.max_violation(sol.x);
  } else {
    sol.objective = std::numeric_limits<double>::quiet_NaN();
    sol.max_violation = std::numeric_limits<double>::infinity();
  }
  return sol;
}

ConeSolution solve(const ConeProgram& p, double tol, int max_iter) {
  SolverOptions opts;
  opts.tol = tol;
  opts.max_iter = max_iter;
  return solve(p, opts);
}

}  // namespace cpabf
