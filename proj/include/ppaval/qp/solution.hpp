#pragma once

#include <string_view>

#include "ppaval/common.hpp"

namespace ppaval::qp {

enum class QpStatus { Optimal, Infeasible, Unbounded, IterLimit };

inline std::string_view to_string(QpStatus s) {
  switch (s) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::Infeasible: return "infeasible";
    case QpStatus::Unbounded: return "unbounded";
    case QpStatus::IterLimit: return "iteration_limit";
  }
  return "unknown";
}

struct KktResiduals {
  double stationarity_inf_norm = kInf;
  double primal_inf_norm = kInf;
  double complementarity_inf_norm = kInf;
};

/**
 * Primal-dual solution.
 *
 * Sign convention: the Lagrangian is
 *   L = f(x) + dual_generalᵀ (A x) - dual_bounds_lowerᵀ (x - l) + dual_bounds_upperᵀ (x - u)
 * so stationarity reads  grad f + Aᵀ y - z_lower + z_upper = 0  with z_lower, z_upper >= 0.
 * A row dual is positive when the row's upper side binds and negative when its lower
 * side binds; for equalities it is free. The shadow price of raising a row's right-hand
 * side is therefore -dual_general. See kkt.hpp for conversion to the "all multipliers
 * non-positive" convention.
 */
struct QpSolution {
  QpStatus status = QpStatus::IterLimit;
  Vector primal;
  Vector dual_general;
  Vector dual_bounds_lower;
  Vector dual_bounds_upper;
  double objective_value = 0.0;
  KktResiduals kkt_residuals;
  int iterations = 0;
};

struct SolverSettings {
  double abs_tol = 1e-8;
  double rel_tol = 1e-9;
  int max_iterations = 200;
  /// Slack threshold under which a constraint counts as binding (active-set detection).
  double binding_tol = 1e-6;

  void validate() const {
    require(abs_tol > 0.0 && rel_tol > 0.0 && binding_tol > 0.0,
            "SolverSettings: tolerances must be positive");
    require(max_iterations > 0, "SolverSettings: max_iterations must be positive");
  }
};

}  // namespace ppaval::qp
