#pragma once

#include <algorithm>
#include <cmath>

#include "ppaval/qp/problem.hpp"
#include "ppaval/qp/solution.hpp"

namespace ppaval::qp {

/**
 * Multipliers in the convention where every inequality is written as g(x) >= 0 and
 * enters the Lagrangian as  + multiplier * g(x)  with multiplier <= 0
 * (e.g. capacity x <= X becomes  + alpha_upper (X - x),  alpha_upper <= 0).
 *
 * Internally duals of "<=" constraints are >= 0 for  L = f + y (g(x) - b);
 * converting is a sign flip for every family, including equality rows
 * (an equality dual y becomes the shadow price -y).
 */
struct NonPositiveDuals {
  Vector general;       ///< one per row: -dual_general
  Vector bounds_lower;  ///< -dual_bounds_lower  (<= 0)
  Vector bounds_upper;  ///< -dual_bounds_upper  (<= 0)
};

inline double to_nonpositive_convention(double internal_dual) { return -internal_dual; }

inline NonPositiveDuals to_nonpositive_convention(const QpSolution& s) {
  return {-s.dual_general, -s.dual_bounds_lower, -s.dual_bounds_upper};
}

struct KktReport {
  double stationarity = kInf;
  double primal = kInf;
  double complementarity = kInf;
  double dual_feasibility = kInf;
  double tolerance = 0.0;

  [[nodiscard]] bool stationarity_ok() const { return stationarity <= tolerance; }
  [[nodiscard]] bool primal_ok() const { return primal <= tolerance; }
  [[nodiscard]] bool complementarity_ok() const { return complementarity <= tolerance; }
  [[nodiscard]] bool dual_feasibility_ok() const { return dual_feasibility <= tolerance; }
  [[nodiscard]] bool passed() const {
    return stationarity_ok() && primal_ok() && complementarity_ok() && dual_feasibility_ok();
  }
};

/// Residuals of the KKT system at (primal, duals); throws on dimension mismatch.
inline KktReport check_kkt(const QpProblem& p, const QpSolution& s, double tol) {
  const int n = p.n_vars();
  const int m = p.n_rows();
  require(s.primal.size() == n && s.dual_bounds_lower.size() == n &&
              s.dual_bounds_upper.size() == n,
          "check_kkt: primal/bound-dual dimension mismatch");
  require(s.dual_general.size() == m, "check_kkt: row-dual dimension mismatch");

  const Vector& x = s.primal;
  const Vector& y = s.dual_general;
  const Vector& zl = s.dual_bounds_lower;
  const Vector& zu = s.dual_bounds_upper;

  KktReport r;
  r.tolerance = tol;

  Vector grad = p.linear + 2.0 * p.quadratic.cwiseProduct(x) + p.A.transpose() * y - zl + zu;
  r.stationarity = grad.size() > 0 ? grad.cwiseAbs().maxCoeff() : 0.0;

  const Vector ax = p.A * x;
  double primal = 0.0, comp = 0.0, dual = 0.0;
  for (int j = 0; j < n; ++j) {
    const double lo = p.var_lower[j], hi = p.var_upper[j];
    primal = std::max({primal, lo - x[j], x[j] - hi});
    dual = std::max({dual, -zl[j], -zu[j]});
    if (std::isfinite(lo)) comp = std::max(comp, std::abs(zl[j] * (x[j] - lo)));
    else dual = std::max(dual, std::abs(zl[j]));
    if (std::isfinite(hi)) comp = std::max(comp, std::abs(zu[j] * (hi - x[j])));
    else dual = std::max(dual, std::abs(zu[j]));
  }
  for (int i = 0; i < m; ++i) {
    const double lo = p.row_lower[i], hi = p.row_upper[i];
    primal = std::max({primal, lo - ax[i], ax[i] - hi});
    const double up = std::max(y[i], 0.0), down = std::max(-y[i], 0.0);
    if (std::isfinite(hi)) comp = std::max(comp, std::abs(up * (hi - ax[i])));
    else dual = std::max(dual, up);
    if (std::isfinite(lo)) comp = std::max(comp, std::abs(down * (ax[i] - lo)));
    else dual = std::max(dual, down);
  }
  r.primal = primal;
  r.complementarity = comp;
  r.dual_feasibility = dual;
  return r;
}

inline KktResiduals kkt_residuals(const QpProblem& p, const QpSolution& s) {
  const KktReport r = check_kkt(p, s, 0.0);
  return {r.stationarity, r.primal, std::max(r.complementarity, r.dual_feasibility)};
}

}  // namespace ppaval::qp
