#pragma once

// Exhaustive active-set oracle for tiny QPs. The equalities plus every combination of
// at most n inequality sides (each variable or row either free, at its lower side or at
// its upper side) define an equality-constrained QP; a candidate whose primal is feasible and
// whose multipliers carry the right signs is a KKT point and hence globally optimal.
// Exponential in n + m; meant for tests only.

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "ppaval/qp/kkt.hpp"
#include "ppaval/qp/problem.hpp"
#include "ppaval/qp/solution.hpp"

namespace ppaval::qp {

namespace detail {

enum class Side { Free, Lower, Upper, Fixed };

struct BruteForceState {
  const QpProblem& p;
  Matrix dense_a;
  std::vector<Side> var_side, row_side;
  bool found_feasible = false;
  bool found_kkt = false;
  QpSolution best;
  double feas_tol = 1e-9;
};

inline void evaluate_active_set(BruteForceState& st) {
  const QpProblem& p = st.p;
  const int n = p.n_vars(), m = p.n_rows();
  struct Active { bool is_row; int index; Side side; double value; };
  std::vector<Active> active;
  for (int j = 0; j < n; ++j) {
    const Side s = st.var_side[static_cast<std::size_t>(j)];
    if (s == Side::Free) continue;
    active.push_back({false, j, s, s == Side::Upper ? p.var_upper[j] : p.var_lower[j]});
  }
  for (int i = 0; i < m; ++i) {
    const Side s = st.row_side[static_cast<std::size_t>(i)];
    if (s == Side::Free) continue;
    active.push_back({true, i, s, s == Side::Upper ? p.row_upper[i] : p.row_lower[i]});
  }
  const int k = static_cast<int>(active.size());
  Matrix kkt = Matrix::Zero(n + k, n + k);
  Vector rhs(n + k);
  kkt.topLeftCorner(n, n) = (2.0 * p.quadratic).asDiagonal();
  rhs.head(n) = -p.linear;
  for (int r = 0; r < k; ++r) {
    const Active& a = active[static_cast<std::size_t>(r)];
    if (a.is_row) {
      kkt.block(n + r, 0, 1, n) = st.dense_a.row(a.index);
      kkt.block(0, n + r, n, 1) = st.dense_a.row(a.index).transpose();
    } else {
      kkt(n + r, a.index) = 1.0;
      kkt(a.index, n + r) = 1.0;
    }
    rhs[n + r] = a.value;
  }
  Eigen::FullPivLU<Matrix> lu(kkt);
  lu.setThreshold(1e-11);
  Vector sol;
  if (lu.isInvertible()) {
    sol = lu.solve(rhs);
  } else {
    // dependent but consistent active constraints still define a unique x when the
    // reduced Hessian is nonsingular; the minimum-norm multipliers are one valid choice
    const Eigen::CompleteOrthogonalDecomposition<Matrix> cod(kkt);
    sol = cod.solve(rhs);
    if ((kkt * sol - rhs).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, rhs.cwiseAbs().maxCoeff())) return;
    // reject non-unique primal: x must not move along the null space
    const Matrix null_basis = lu.kernel();
    if (null_basis.topRows(n).cwiseAbs().maxCoeff() > 1e-9) return;
  }
  const Vector x = sol.head(n);

  // primal feasibility
  const Vector ax = st.dense_a * x;
  for (int j = 0; j < n; ++j) {
    const double tol = st.feas_tol * std::max(1.0, std::abs(x[j]));
    if (x[j] < p.var_lower[j] - tol || x[j] > p.var_upper[j] + tol) return;
  }
  for (int i = 0; i < m; ++i) {
    const double tol = st.feas_tol * std::max(1.0, std::abs(ax[i]));
    if (ax[i] < p.row_lower[i] - tol || ax[i] > p.row_upper[i] + tol) return;
  }

  QpSolution cand;
  cand.primal = x;
  cand.dual_general = Vector::Zero(m);
  cand.dual_bounds_lower = Vector::Zero(n);
  cand.dual_bounds_upper = Vector::Zero(n);
  bool dual_ok = true;
  const double dual_tol = 1e-9 * std::max(1.0, sol.tail(k).size() ? sol.tail(k).cwiseAbs().maxCoeff() : 0.0);
  for (int r = 0; r < k; ++r) {
    const Active& a = active[static_cast<std::size_t>(r)];
    const double lam = sol[n + r];
    if (a.side == Side::Lower && lam > dual_tol) dual_ok = false;
    if (a.side == Side::Upper && lam < -dual_tol) dual_ok = false;
    if (a.is_row) {
      cand.dual_general[a.index] = lam;
    } else if (a.side == Side::Lower) {
      cand.dual_bounds_lower[a.index] = -lam;
    } else if (a.side == Side::Upper) {
      cand.dual_bounds_upper[a.index] = lam;
    } else {
      cand.dual_bounds_upper[a.index] = std::max(lam, 0.0);
      cand.dual_bounds_lower[a.index] = std::max(-lam, 0.0);
    }
  }
  cand.objective_value = p.objective(x);
  if (dual_ok) {
    if (!st.found_kkt || cand.objective_value < st.best.objective_value) {
      st.best = cand;
      st.found_kkt = true;
    }
  }
  st.found_feasible = true;
}

inline void enumerate_sides(BruteForceState& st, int item, int active_count) {
  const QpProblem& p = st.p;
  const int n = p.n_vars(), m = p.n_rows();
  if (item == n + m) {
    evaluate_active_set(st);
    return;
  }
  const bool is_row = item >= n;
  const int idx = is_row ? item - n : item;
  auto& sides = is_row ? st.row_side : st.var_side;
  const double lo = is_row ? p.row_lower[idx] : p.var_lower[idx];
  const double hi = is_row ? p.row_upper[idx] : p.var_upper[idx];
  if (lo == hi) {  // always active, not counted
    sides[static_cast<std::size_t>(idx)] = Side::Fixed;
    enumerate_sides(st, item + 1, active_count);
    return;
  }
  sides[static_cast<std::size_t>(idx)] = Side::Free;
  enumerate_sides(st, item + 1, active_count);
  if (active_count >= n) return;
  if (std::isfinite(lo)) {
    sides[static_cast<std::size_t>(idx)] = Side::Lower;
    enumerate_sides(st, item + 1, active_count + 1);
  }
  if (std::isfinite(hi)) {
    sides[static_cast<std::size_t>(idx)] = Side::Upper;
    enumerate_sides(st, item + 1, active_count + 1);
  }
  sides[static_cast<std::size_t>(idx)] = Side::Free;
}

}  // namespace detail

/// Globally optimal solution with exact duals by active-set enumeration (n + m <= 20).
inline QpSolution brute_force_qp(const QpProblem& problem) {
  problem.validate();
  const int n = problem.n_vars(), m = problem.n_rows();
  require(n + m <= 20, "brute_force_qp: instance too large (n_vars + rows must be <= 20)");
  detail::BruteForceState st{problem, Matrix(problem.A), {}, {}};
  st.var_side.assign(static_cast<std::size_t>(n), detail::Side::Free);
  st.row_side.assign(static_cast<std::size_t>(m), detail::Side::Free);
  // equalities are always active; dependent ones must not use up the n optional slots
  detail::enumerate_sides(st, 0, 0);

  QpSolution out;
  if (st.found_kkt) {
    out = st.best;
    out.status = QpStatus::Optimal;
    out.kkt_residuals = kkt_residuals(problem, out);
  } else {
    out.status = st.found_feasible ? QpStatus::Unbounded : QpStatus::Infeasible;
    out.primal = Vector::Zero(n);
    out.dual_general = Vector::Zero(m);
    out.dual_bounds_lower = Vector::Zero(n);
    out.dual_bounds_upper = Vector::Zero(n);
  }
  return out;
}

}  // namespace ppaval::qp
