#pragma once

// Primal-dual interior-point method (Mehrotra predictor-corrector) for the separable
// convex QPs of qp/problem.hpp. Linear systems are the regularized quasi-definite
// augmented KKT systems, factorized by sparse LDLᵀ with iterative refinement.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/SparseCholesky>

#include "ppaval/qp/kkt.hpp"
#include "ppaval/qp/problem.hpp"
#include "ppaval/qp/solution.hpp"

namespace ppaval::qp {

namespace detail {

// min ½vᵀdiag(h)v + cᵀv  s.t.  E v = f,  lo <= v <= hi,
// obtained by giving every inequality row a slack column and turning fixed columns
// into equality rows.
struct StandardForm {
  int n_orig = 0;
  int n = 0;  // columns
  int m = 0;  // equality rows
  SparseMatrix E;
  Vector f, c, h, lo, hi;
  std::vector<int> row_eq;      // original row -> row of E (-1 if vacuous)
  std::vector<int> row_slack;   // original row -> slack column (-1 if equality)
  std::vector<int> fixed_row;   // original column -> row of E pinning it (-1 if not fixed)
};

inline StandardForm to_standard_form(const QpProblem& p) {
  StandardForm sf;
  sf.n_orig = p.n_vars();
  const int m0 = p.n_rows();
  std::vector<Triplet> trip;
  std::vector<double> f, lo, hi;
  for (int j = 0; j < sf.n_orig; ++j) {
    const bool fixed = p.var_lower[j] == p.var_upper[j];
    lo.push_back(fixed ? -kInf : p.var_lower[j]);
    hi.push_back(fixed ? kInf : p.var_upper[j]);
  }
  int n = sf.n_orig;
  sf.row_eq.assign(static_cast<std::size_t>(m0), -1);
  sf.row_slack.assign(static_cast<std::size_t>(m0), -1);
  int m = 0;
  for (int i = 0; i < m0; ++i) {
    const double l = p.row_lower[i], u = p.row_upper[i];
    if (!std::isfinite(l) && !std::isfinite(u)) continue;
    sf.row_eq[static_cast<std::size_t>(i)] = m;
    if (l == u) {
      f.push_back(l);
    } else {
      sf.row_slack[static_cast<std::size_t>(i)] = n;
      trip.emplace_back(m, n, -1.0);
      lo.push_back(l);
      hi.push_back(u);
      f.push_back(0.0);
      ++n;
    }
    ++m;
  }
  // original matrix entries, remapped to E rows
  for (int k = 0; k < p.A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(p.A, k); it; ++it) {
      const int r = sf.row_eq[static_cast<std::size_t>(it.row())];
      if (r >= 0 && it.value() != 0.0) trip.emplace_back(r, static_cast<int>(it.col()), it.value());
    }
  sf.fixed_row.assign(static_cast<std::size_t>(sf.n_orig), -1);
  for (int j = 0; j < sf.n_orig; ++j) {
    if (p.var_lower[j] != p.var_upper[j]) continue;
    sf.fixed_row[static_cast<std::size_t>(j)] = m;
    trip.emplace_back(m, j, 1.0);
    f.push_back(p.var_lower[j]);
    ++m;
  }
  sf.n = n;
  sf.m = m;
  sf.E.resize(m, n);
  sf.E.setFromTriplets(trip.begin(), trip.end());
  sf.E.makeCompressed();
  sf.f = Eigen::Map<Vector>(f.data(), m);
  sf.lo = Eigen::Map<Vector>(lo.data(), n);
  sf.hi = Eigen::Map<Vector>(hi.data(), n);
  sf.c = Vector::Zero(n);
  sf.h = Vector::Zero(n);
  sf.c.head(sf.n_orig) = p.linear;
  sf.h.head(sf.n_orig) = 2.0 * p.quadratic;
  return sf;
}

// Ruiz equilibration of [H Eᵀ; E 0] plus a scalar cost scaling.
struct Scaling {
  Vector col;  // v = col .* v_scaled
  Vector row;  // scaled rows = row .* E rows
  double cost = 1.0;
};

inline Scaling equilibrate(StandardForm& sf, int passes = 15) {
  Scaling s;
  s.col = Vector::Ones(sf.n);
  s.row = Vector::Ones(sf.m);
  for (int pass = 0; pass < passes; ++pass) {
    Vector cn = sf.h.cwiseAbs();
    Vector rn = Vector::Zero(sf.m);
    for (int k = 0; k < sf.E.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(sf.E, k); it; ++it) {
        const double a = std::abs(it.value());
        cn[k] = std::max(cn[k], a);
        rn[it.row()] = std::max(rn[it.row()], a);
      }
    Vector dc(sf.n), dr(sf.m);
    for (int j = 0; j < sf.n; ++j) dc[j] = cn[j] > 0 ? 1.0 / std::sqrt(cn[j]) : 1.0;
    for (int i = 0; i < sf.m; ++i) dr[i] = rn[i] > 0 ? 1.0 / std::sqrt(rn[i]) : 1.0;
    dc = dc.cwiseMax(1e-4).cwiseMin(1e4);
    dr = dr.cwiseMax(1e-4).cwiseMin(1e4);
    for (int k = 0; k < sf.E.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(sf.E, k); it; ++it) it.valueRef() *= dr[it.row()] * dc[k];
    sf.h = sf.h.cwiseProduct(dc).cwiseProduct(dc);
    sf.c = sf.c.cwiseProduct(dc);
    sf.f = sf.f.cwiseProduct(dr);
    s.col = s.col.cwiseProduct(dc);
    s.row = s.row.cwiseProduct(dr);
  }
  for (int j = 0; j < sf.n; ++j) {
    if (std::isfinite(sf.lo[j])) sf.lo[j] /= s.col[j];
    if (std::isfinite(sf.hi[j])) sf.hi[j] /= s.col[j];
  }
  const double cmax = std::max(sf.c.size() ? sf.c.cwiseAbs().maxCoeff() : 0.0,
                               sf.h.size() ? sf.h.cwiseAbs().maxCoeff() : 0.0);
  s.cost = cmax > 0 ? 1.0 / std::clamp(cmax, 1e-4, 1e4) : 1.0;
  sf.c *= s.cost;
  sf.h *= s.cost;
  return s;
}

// Regularized quasi-definite KKT matrix  [D+rho  Eᵀ; E  -delta]  with fixed pattern.
class KktSystem {
 public:
  KktSystem(const SparseMatrix& E, double rho, double delta)
      : E_(E), n_(static_cast<int>(E.cols())), m_(static_cast<int>(E.rows())), rho_(rho), delta_(delta) {
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(E.nonZeros() + n_ + m_));
    for (int j = 0; j < n_; ++j) trip.emplace_back(j, j, 1.0);
    for (int k = 0; k < E.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(E, k); it; ++it)
        trip.emplace_back(n_ + static_cast<int>(it.row()), k, it.value());
    for (int i = 0; i < m_; ++i) trip.emplace_back(n_ + i, n_ + i, -delta_);
    K_.resize(n_ + m_, n_ + m_);
    K_.setFromTriplets(trip.begin(), trip.end());
    K_.makeCompressed();
    ldlt_.analyzePattern(K_);
  }

  // A zero pivot from cancellation is retried with stronger regularization; the
  // refinement in solve() still targets the unregularized system.
  bool factorize(const Vector& diag) {
    diag_ = diag;
    const int* outer = K_.outerIndexPtr();
    double* values = K_.valuePtr();
    for (double boost : {1.0, 1e2, 1e4, 1e6}) {
      for (int j = 0; j < n_; ++j) values[outer[j]] = diag[j] + boost * rho_;
      for (int i = 0; i < m_; ++i) values[outer[n_ + i]] = -boost * delta_;
      ldlt_.factorize(K_);
      if (ldlt_.info() == Eigen::Success) {
        boost_ = boost;
        return true;
      }
    }
    return false;
  }

  // Solves the unregularized system with refinement against it. With a proximal centre
  // (v0, y0) the regularization pulls components in the null space towards it instead
  // of towards zero, which matters when the system is singular.
  void solve(const Vector& rhs_v, const Vector& rhs_y, Vector& dv, Vector& dy,
             const Vector* v0 = nullptr, const Vector* y0 = nullptr) const {
    Vector rhs(n_ + m_);
    rhs << rhs_v, rhs_y;
    Vector shifted = rhs;
    if (v0) shifted.head(n_) += boost_ * rho_ * *v0;
    if (y0) shifted.tail(m_) -= boost_ * delta_ * *y0;
    Vector sol = ldlt_.solve(shifted);
    const double scale = std::max(1.0, rhs.cwiseAbs().maxCoeff());
    for (int k = 0; k < 6; ++k) {
      Vector res = rhs - apply(sol);
      if (res.cwiseAbs().maxCoeff() <= 1e-14 * scale) break;
      sol += ldlt_.solve(res);
    }
    dv = sol.head(n_);
    dy = sol.tail(m_);
  }

 private:
  Vector apply(const Vector& sol) const {
    Vector out(n_ + m_);
    out.head(n_) = diag_.cwiseProduct(sol.head(n_)) + E_.transpose() * sol.tail(m_);
    out.tail(m_) = E_ * sol.head(n_);
    return out;
  }

  const SparseMatrix& E_;
  int n_, m_;
  double rho_, delta_;
  double boost_ = 1.0;
  SparseMatrix K_;
  Vector diag_;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
};

struct IpmResult {
  bool converged = false;
  bool hit_iteration_limit = false;
  int iterations = 0;
  Vector v, y, zl, zu;  // unscaled
};

inline constexpr double kCentrality = 1e-3;
inline constexpr double kConservativeSigma = 0.1;

/// Mehrotra predictor-corrector. The conservative variant drops the second-order
/// correction, centers harder and backtracks to a wide neighborhood; it is slower but
/// does not cycle, and serves as a fallback when the default run stalls.
inline IpmResult run_ipm(StandardForm sf, const SolverSettings& settings, bool conservative = false) {
  const Scaling sc = equilibrate(sf);
  const int n = sf.n, m = sf.m;

  std::vector<int> lower_idx, upper_idx;
  for (int j = 0; j < n; ++j) {
    if (std::isfinite(sf.lo[j])) lower_idx.push_back(j);
    if (std::isfinite(sf.hi[j])) upper_idx.push_back(j);
  }
  const auto nl = static_cast<int>(lower_idx.size());
  const auto nu = static_cast<int>(upper_idx.size());
  const int n_comp = nl + nu;

  Vector v(n), y = Vector::Zero(m), zl = Vector::Ones(nl), zu = Vector::Ones(nu);
  for (int j = 0; j < n; ++j) {
    const double lo = sf.lo[j], hi = sf.hi[j];
    if (std::isfinite(lo) && std::isfinite(hi)) {
      const double kappa = std::min(1.0, 0.5 * (hi - lo));
      v[j] = std::clamp(0.0, lo + kappa, hi - kappa);
    } else if (std::isfinite(lo)) {
      v[j] = std::max(0.0, lo + 1.0);
    } else if (std::isfinite(hi)) {
      v[j] = std::min(0.0, hi - 1.0);
    } else {
      v[j] = 0.0;
    }
  }

  KktSystem kkt(sf.E, 1e-9, 1e-9);

  auto slack_lower = [&](const Vector& x) {
    Vector s(nl);
    for (int k = 0; k < nl; ++k) s[k] = x[lower_idx[k]] - sf.lo[lower_idx[k]];
    return s;
  };
  auto slack_upper = [&](const Vector& x) {
    Vector s(nu);
    for (int k = 0; k < nu; ++k) s[k] = sf.hi[upper_idx[k]] - x[upper_idx[k]];
    return s;
  };
  auto max_step = [](const Vector& val, const Vector& dir) {
    double a = 1.0;
    for (Eigen::Index k = 0; k < val.size(); ++k)
      if (dir[k] < 0) a = std::min(a, -val[k] / dir[k]);
    return a;
  };

  const Vector inv_row = sc.row.cwiseInverse();
  const Vector inv_col_cost = (sc.col * sc.cost).cwiseInverse();
  const double f_norm = sf.f.size() ? sf.f.cwiseProduct(inv_row).cwiseAbs().maxCoeff() : 0.0;
  const double c_norm = sf.c.size() ? sf.c.cwiseProduct(inv_col_cost).cwiseAbs().maxCoeff() : 0.0;

  IpmResult out;
  int stalls = 0;
  for (int it = 0; it <= settings.max_iterations; ++it) {
    out.iterations = it;
    const Vector sl = slack_lower(v), su = slack_upper(v);
    Vector zfull = Vector::Zero(n);
    for (int k = 0; k < nl; ++k) zfull[lower_idx[k]] -= zl[k];
    for (int k = 0; k < nu; ++k) zfull[upper_idx[k]] += zu[k];
    const Vector hv = sf.h.cwiseProduct(v);
    const Vector ety = sf.E.transpose() * y;
    const Vector ev = sf.E * v;
    const Vector rd = hv + sf.c + ety + zfull;
    const Vector rp = ev - sf.f;

    // convergence in original units
    const double rp_inf = rp.size() ? rp.cwiseProduct(inv_row).cwiseAbs().maxCoeff() : 0.0;
    const double rd_inf = rd.size() ? rd.cwiseProduct(inv_col_cost).cwiseAbs().maxCoeff() : 0.0;
    double comp_inf = 0.0;
    for (int k = 0; k < nl; ++k) comp_inf = std::max(comp_inf, sl[k] * zl[k]);
    for (int k = 0; k < nu; ++k) comp_inf = std::max(comp_inf, su[k] * zu[k]);
    comp_inf /= sc.cost;
    const double ev_norm = ev.size() ? ev.cwiseProduct(inv_row).cwiseAbs().maxCoeff() : 0.0;
    const double hv_norm = hv.size() ? hv.cwiseProduct(inv_col_cost).cwiseAbs().maxCoeff() : 0.0;
    const double ety_norm = ety.size() ? ety.cwiseProduct(inv_col_cost).cwiseAbs().maxCoeff() : 0.0;
    const double tol_p = settings.abs_tol + settings.rel_tol * std::max(ev_norm, f_norm);
    const double tol_d = settings.abs_tol + settings.rel_tol * std::max({hv_norm, c_norm, ety_norm});
    if (rp_inf <= tol_p && rd_inf <= tol_d && comp_inf <= settings.abs_tol) {
      out.converged = true;
      break;
    }
    if (it == settings.max_iterations) {
      out.hit_iteration_limit = true;
      break;
    }
    if ((v.size() && v.cwiseAbs().maxCoeff() > 1e13) || (y.size() && y.cwiseAbs().maxCoeff() > 1e13)) break;

    const double mu = n_comp > 0 ? (sl.dot(zl) + su.dot(zu)) / n_comp : 0.0;
    Vector diag = sf.h;
    for (int k = 0; k < nl; ++k) diag[lower_idx[k]] += zl[k] / sl[k];
    for (int k = 0; k < nu; ++k) diag[upper_idx[k]] += zu[k] / su[k];
    if (!kkt.factorize(diag)) break;

    auto direction = [&](const Vector& tau_l, const Vector& tau_u, Vector& dv, Vector& dy,
                         Vector& dzl, Vector& dzu) {
      Vector rhs_v = -rd;
      for (int k = 0; k < nl; ++k) rhs_v[lower_idx[k]] += tau_l[k] / sl[k];
      for (int k = 0; k < nu; ++k) rhs_v[upper_idx[k]] -= tau_u[k] / su[k];
      kkt.solve(rhs_v, -rp, dv, dy);
      dzl.resize(nl);
      dzu.resize(nu);
      for (int k = 0; k < nl; ++k) dzl[k] = (tau_l[k] - zl[k] * dv[lower_idx[k]]) / sl[k];
      for (int k = 0; k < nu; ++k) dzu[k] = (tau_u[k] + zu[k] * dv[upper_idx[k]]) / su[k];
    };
    auto step_length = [&](const Vector& dv, const Vector& dzl, const Vector& dzu) {
      Vector dsl(nl), dsu(nu);
      for (int k = 0; k < nl; ++k) dsl[k] = dv[lower_idx[k]];
      for (int k = 0; k < nu; ++k) dsu[k] = -dv[upper_idx[k]];
      return std::min({max_step(sl, dsl), max_step(su, dsu), max_step(zl, dzl), max_step(zu, dzu)});
    };

    // predictor
    Vector dv, dy, dzl, dzu;
    direction(-sl.cwiseProduct(zl), -su.cwiseProduct(zu), dv, dy, dzl, dzu);
    double sigma = 0.0;
    Vector tau_l = -sl.cwiseProduct(zl), tau_u = -su.cwiseProduct(zu);
    if (n_comp > 0) {
      const double a_aff = step_length(dv, dzl, dzu);
      double mu_aff = 0.0;
      for (int k = 0; k < nl; ++k) mu_aff += (sl[k] + a_aff * dv[lower_idx[k]]) * (zl[k] + a_aff * dzl[k]);
      for (int k = 0; k < nu; ++k) mu_aff += (su[k] - a_aff * dv[upper_idx[k]]) * (zu[k] + a_aff * dzu[k]);
      mu_aff /= n_comp;
      sigma = mu > 0 ? std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3) : 0.0;
      if (conservative) {
        sigma = std::max(sigma, kConservativeSigma);
        for (int k = 0; k < nl; ++k) tau_l[k] += sigma * mu;
        for (int k = 0; k < nu; ++k) tau_u[k] += sigma * mu;
      } else {
        // corrector with second-order term
        for (int k = 0; k < nl; ++k) tau_l[k] += sigma * mu - dv[lower_idx[k]] * dzl[k];
        for (int k = 0; k < nu; ++k) tau_u[k] += sigma * mu + dv[upper_idx[k]] * dzu[k];
      }
      direction(tau_l, tau_u, dv, dy, dzl, dzu);
    }
    // near the boundary the scaled system can overflow; keep the last finite iterate
    if (!dv.allFinite() || !dy.allFinite() || !dzl.allFinite() || !dzu.allFinite()) break;
    const double a_max = step_length(dv, dzl, dzu);
    double alpha = std::min(1.0, 0.995 * a_max);
    // conservative mode keeps every pair within a wide neighborhood of the central path
    if (conservative) {
      for (int k = 0; k < 40; ++k) {
        double gap = 0.0, smallest = kInf;
        for (int i = 0; i < nl; ++i) {
          const double pr = (sl[i] + alpha * dv[lower_idx[i]]) * (zl[i] + alpha * dzl[i]);
          gap += pr;
          smallest = std::min(smallest, pr);
        }
        for (int i = 0; i < nu; ++i) {
          const double pr = (su[i] - alpha * dv[upper_idx[i]]) * (zu[i] + alpha * dzu[i]);
          gap += pr;
          smallest = std::min(smallest, pr);
        }
        if (smallest >= kCentrality * gap / n_comp) break;
        alpha *= 0.5;
      }
    }
    v += alpha * dv;
    y += alpha * dy;
    zl += alpha * dzl;
    zu += alpha * dzu;
    // keep iterates strictly interior
    for (int k = 0; k < nl; ++k) {
      const int j = lower_idx[k];
      if (v[j] - sf.lo[j] <= 0) v[j] = sf.lo[j] + 1e-300;
      zl[k] = std::max(zl[k], 1e-300);
    }
    for (int k = 0; k < nu; ++k) {
      const int j = upper_idx[k];
      if (sf.hi[j] - v[j] <= 0) v[j] = sf.hi[j] - 1e-300;
      zu[k] = std::max(zu[k], 1e-300);
    }
    stalls = alpha < 1e-10 ? stalls + 1 : 0;
    if (stalls >= 5) break;
  }

  out.v = v.cwiseProduct(sc.col);
  out.y = y.cwiseProduct(sc.row) / sc.cost;
  out.zl = Vector::Zero(n);
  out.zu = Vector::Zero(n);
  for (int k = 0; k < nl; ++k) out.zl[lower_idx[k]] = zl[k] / (sc.col[lower_idx[k]] * sc.cost);
  for (int k = 0; k < nu; ++k) out.zu[upper_idx[k]] = zu[k] / (sc.col[upper_idx[k]] * sc.cost);
  return out;
}

inline QpSolution assemble(const QpProblem& p, const StandardForm& sf, const IpmResult& r) {
  const int n = p.n_vars(), m = p.n_rows();
  QpSolution s;
  s.primal = r.v.head(n);
  s.dual_general = Vector::Zero(m);
  s.dual_bounds_lower = r.zl.head(n);
  s.dual_bounds_upper = r.zu.head(n);
  for (int i = 0; i < m; ++i) {
    const int e = sf.row_eq[static_cast<std::size_t>(i)];
    if (e >= 0) s.dual_general[i] = r.y[e];
  }
  for (int j = 0; j < n; ++j) {
    const int e = sf.fixed_row[static_cast<std::size_t>(j)];
    if (e < 0) continue;
    s.primal[j] = p.var_lower[j];
    s.dual_bounds_upper[j] = std::max(r.y[e], 0.0);
    s.dual_bounds_lower[j] = std::max(-r.y[e], 0.0);
  }
  s.iterations = r.iterations;
  s.objective_value = p.objective(s.primal);
  s.kkt_residuals = kkt_residuals(p, s);
  return s;
}

// Minimum total violation  sum(e+ + e-)  of  l <= A x + e+ - e- <= u  over the bounds.
inline double phase_one_violation(const QpProblem& p, const SolverSettings& settings) {
  const int n = p.n_vars(), m = p.n_rows();
  QpBuilder b;
  for (int j = 0; j < n; ++j) b.add_var(p.var_lower[j], p.var_upper[j]);
  std::vector<std::vector<std::pair<int, double>>> rows(static_cast<std::size_t>(m));
  for (int k = 0; k < p.A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(p.A, k); it; ++it)
      rows[static_cast<std::size_t>(it.row())].emplace_back(k, it.value());
  for (int i = 0; i < m; ++i) {
    auto entries = rows[static_cast<std::size_t>(i)];
    entries.emplace_back(b.add_var(0.0, kInf, 1.0), 1.0);
    entries.emplace_back(b.add_var(0.0, kInf, 1.0), -1.0);
    b.add_row(entries, p.row_lower[i], p.row_upper[i]);
  }
  const QpProblem aux = b.build();
  const IpmResult r = run_ipm(to_standard_form(aux), settings);
  if (!r.converged) return std::numeric_limits<double>::quiet_NaN();
  return aux.objective(r.v.head(aux.n_vars()));
}

inline double worst_residual(const KktReport& r) {
  return std::max({r.stationarity, r.primal, r.complementarity, r.dual_feasibility});
}

// Guesses the active set from an approximate primal-dual pair, solves the resulting
// equality-constrained KKT system and keeps the result if its KKT residuals are smaller.
inline void polish(const QpProblem& p, QpSolution& s) {
  const int n = p.n_vars(), m = p.n_rows();
  const Vector& x = s.primal;
  enum State { Free, AtLower, AtUpper, Fixed };
  std::vector<State> state(static_cast<std::size_t>(n), Free);
  std::vector<int> free_pos(static_cast<std::size_t>(n), -1);
  Vector bound_value = Vector::Zero(n);
  int n_free = 0;
  for (int j = 0; j < n; ++j) {
    const double lo = p.var_lower[j], hi = p.var_upper[j];
    State& st = state[static_cast<std::size_t>(j)];
    if (lo == hi) st = Fixed;
    else if (std::isfinite(lo) && s.dual_bounds_lower[j] > x[j] - lo) st = AtLower;
    else if (std::isfinite(hi) && s.dual_bounds_upper[j] > hi - x[j]) st = AtUpper;
    if (st == Free) free_pos[static_cast<std::size_t>(j)] = n_free++;
    else bound_value[j] = st == AtUpper ? hi : lo;
  }
  const Vector ax = p.A * x;
  std::vector<int> row_pos(static_cast<std::size_t>(m), -1);
  std::vector<double> target;
  for (int i = 0; i < m; ++i) {
    const double lo = p.row_lower[i], hi = p.row_upper[i], y = s.dual_general[i];
    double t = kInf;
    if (lo == hi) t = lo;
    else if (std::isfinite(hi) && y > 0 && y > hi - ax[i]) t = hi;
    else if (std::isfinite(lo) && y < 0 && -y > ax[i] - lo) t = lo;
    if (!std::isfinite(t)) continue;
    row_pos[static_cast<std::size_t>(i)] = static_cast<int>(target.size());
    target.push_back(t);
  }
  const int n_rows = static_cast<int>(target.size());
  if (n_free + n_rows == 0) return;

  std::vector<Triplet> trip;
  Vector rhs_y = Eigen::Map<const Vector>(target.data(), n_rows);
  for (int k = 0; k < p.A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(p.A, k); it; ++it) {
      const int r = row_pos[static_cast<std::size_t>(it.row())];
      if (r < 0) continue;
      const int f = free_pos[static_cast<std::size_t>(k)];
      if (f >= 0) trip.emplace_back(r, f, it.value());
      else rhs_y[r] -= it.value() * bound_value[k];
    }
  SparseMatrix E(n_rows, n_free);
  E.setFromTriplets(trip.begin(), trip.end());
  E.makeCompressed();
  Vector diag(n_free), rhs_v(n_free);
  for (int j = 0; j < n; ++j) {
    const int f = free_pos[static_cast<std::size_t>(j)];
    if (f < 0) continue;
    diag[f] = 2.0 * p.quadratic[j];
    rhs_v[f] = -p.linear[j];
  }
  Vector x0(n_free), y0(n_rows);
  for (int j = 0; j < n; ++j)
    if (free_pos[static_cast<std::size_t>(j)] >= 0) x0[free_pos[static_cast<std::size_t>(j)]] = x[j];
  for (int i = 0; i < m; ++i)
    if (row_pos[static_cast<std::size_t>(i)] >= 0) y0[row_pos[static_cast<std::size_t>(i)]] = s.dual_general[i];
  KktSystem kkt(E, 1e-8, 1e-8);
  if (!kkt.factorize(diag)) return;
  Vector dx, dy;
  kkt.solve(rhs_v, rhs_y, dx, dy, &x0, &y0);
  if (!dx.allFinite() || !dy.allFinite()) return;

  QpSolution cand = s;
  for (int j = 0; j < n; ++j) {
    const int f = free_pos[static_cast<std::size_t>(j)];
    cand.primal[j] = f >= 0 ? dx[f] : bound_value[j];
  }
  for (int i = 0; i < m; ++i) {
    const int r = row_pos[static_cast<std::size_t>(i)];
    cand.dual_general[i] = r >= 0 ? dy[r] : 0.0;
  }
  const Vector grad = p.linear + 2.0 * p.quadratic.cwiseProduct(cand.primal) + p.A.transpose() * cand.dual_general;
  for (int j = 0; j < n; ++j) {
    double zl = 0.0, zu = 0.0;
    switch (state[static_cast<std::size_t>(j)]) {
      case Free: break;
      case AtLower: zl = grad[j]; break;
      case AtUpper: zu = -grad[j]; break;
      case Fixed: zl = std::max(grad[j], 0.0); zu = std::max(-grad[j], 0.0); break;
    }
    cand.dual_bounds_lower[j] = zl;
    cand.dual_bounds_upper[j] = zu;
  }
  if (worst_residual(check_kkt(p, cand, 0.0)) < worst_residual(check_kkt(p, s, 0.0))) {
    cand.objective_value = p.objective(cand.primal);
    cand.kkt_residuals = kkt_residuals(p, cand);
    s = std::move(cand);
  }
}

// Most negative linear cost along a normalized recession direction d of the feasible set
// with diag(quadratic) d = 0; negative iff a feasible problem is unbounded.
inline double recession_descent(const QpProblem& p, const SolverSettings& settings) {
  const int n = p.n_vars();
  QpBuilder b;
  for (int j = 0; j < n; ++j) {
    const bool lo = std::isfinite(p.var_lower[j]), hi = std::isfinite(p.var_upper[j]);
    if (p.quadratic[j] > 0.0 || (lo && hi)) b.add_var(0.0, 0.0, p.linear[j]);
    else b.add_var(lo ? 0.0 : -1.0, hi ? 0.0 : 1.0, p.linear[j]);
  }
  std::vector<std::vector<std::pair<int, double>>> rows(static_cast<std::size_t>(p.n_rows()));
  for (int k = 0; k < p.A.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(p.A, k); it; ++it)
      rows[static_cast<std::size_t>(it.row())].emplace_back(k, it.value());
  for (int i = 0; i < p.n_rows(); ++i) {
    const bool lo = std::isfinite(p.row_lower[i]), hi = std::isfinite(p.row_upper[i]);
    if (!lo && !hi) continue;
    b.add_row(rows[static_cast<std::size_t>(i)], lo ? 0.0 : -kInf, hi ? 0.0 : kInf);
  }
  const QpProblem aux = b.build();
  const IpmResult r = run_ipm(to_standard_form(aux), settings);
  if (!r.converged) return 0.0;
  return aux.objective(r.v.head(aux.n_vars()));
}

}  // namespace detail

/// Solves a separable convex QP. Infeasible/unbounded problems are reported via status.
inline QpSolution solve_qp(const QpProblem& problem, const SolverSettings& settings = {}) {
  problem.validate();
  settings.validate();
  const detail::StandardForm sf = detail::to_standard_form(problem);
  detail::IpmResult r = detail::run_ipm(sf, settings);
  if (!r.converged) {
    detail::IpmResult retry = detail::run_ipm(sf, settings, true);
    if (retry.converged) r = std::move(retry);
  }
  QpSolution s = detail::assemble(problem, sf, r);
  detail::polish(problem, s);
  // a stalled run can still end next to the optimum, which the polish then recovers
  if (r.converged ||
      (!r.hit_iteration_limit && detail::worst_residual(check_kkt(problem, s, 0.0)) <= settings.abs_tol)) {
    s.status = QpStatus::Optimal;
    return s;
  }
  SolverSettings aux_settings = settings;
  aux_settings.max_iterations = std::max(settings.max_iterations, 200);
  const double violation = detail::phase_one_violation(problem, aux_settings);
  if (std::isnan(violation)) {
    s.status = QpStatus::IterLimit;
    return s;
  }
  double scale = 1.0;
  for (const Vector* bounds : {&problem.row_lower, &problem.row_upper})
    for (double b : *bounds)
      if (std::isfinite(b)) scale = std::max(scale, std::abs(b));
  if (violation > 1e-6 * scale) s.status = QpStatus::Infeasible;
  else if (detail::recession_descent(problem, aux_settings) < -1e-9) s.status = QpStatus::Unbounded;
  else s.status = QpStatus::IterLimit;
  return s;
}

}  // namespace ppaval::qp
