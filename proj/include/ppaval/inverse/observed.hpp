#pragma once

// Observed dispatch, complementary-slackness sets and limits inferred from history.

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "ppaval/market/dispatch.hpp"

namespace ppaval::inverse {

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

struct ObservedDispatch {
  Matrix x;        ///< I x T output
  Matrix r_plus;   ///< I x T, minimal split of x_t - x_{t-1}
  Matrix r_minus;
  Vector s;        ///< T storage level
  Vector y_plus;   ///< T charging
  Vector y_minus;  ///< T discharging
  std::optional<Vector> price;
  std::optional<Vector> initial_output;  ///< x_{i,0}; without it the first ramp is zero

  [[nodiscard]] int n_tech() const { return static_cast<int>(x.rows()); }
  [[nodiscard]] int n_periods() const { return static_cast<int>(x.cols()); }

  /// Derives the ramps from successive differences; empty storage vectors mean no storage.
  static ObservedDispatch from_output(Matrix x, Vector s = {}, Vector y_plus = {}, Vector y_minus = {},
                                      std::optional<Vector> price = std::nullopt,
                                      std::optional<Vector> initial_output = std::nullopt) {
    ObservedDispatch o;
    const auto I = x.rows(), T = x.cols();
    o.x = std::move(x);
    o.s = s.size() ? std::move(s) : Vector::Zero(T);
    o.y_plus = y_plus.size() ? std::move(y_plus) : Vector::Zero(T);
    o.y_minus = y_minus.size() ? std::move(y_minus) : Vector::Zero(T);
    o.price = std::move(price);
    o.initial_output = std::move(initial_output);
    if (o.initial_output) require(o.initial_output->size() == I, "ObservedDispatch: initial_output size");
    o.r_plus = Matrix::Zero(I, T);
    o.r_minus = Matrix::Zero(I, T);
    for (Eigen::Index i = 0; i < I; ++i)
      for (Eigen::Index t = 0; t < T; ++t) {
        double prev = o.x(i, t);
        if (t > 0) prev = o.x(i, t - 1);
        else if (o.initial_output) prev = (*o.initial_output)[i];
        const double step = o.x(i, t) - prev;
        o.r_plus(i, t) = std::max(step, 0.0);
        o.r_minus(i, t) = std::max(-step, 0.0);
      }
    o.validate();
    return o;
  }

  static ObservedDispatch from_dispatch(const market::DispatchSolution& d, bool with_price) {
    std::optional<Vector> price;
    if (with_price) price = d.price;
    return from_output(d.x, d.s, d.y_plus, d.y_minus, price);
  }

  void validate() const {
    const auto I = x.rows(), T = x.cols();
    require(r_plus.rows() == I && r_plus.cols() == T && r_minus.rows() == I && r_minus.cols() == T,
            "ObservedDispatch: ramp dimensions");
    require(s.size() == T && y_plus.size() == T && y_minus.size() == T, "ObservedDispatch: storage dimensions");
    if (price) require(price->size() == T, "ObservedDispatch: price length");
    auto finite = [](const auto& m) { return m.allFinite(); };
    if (!finite(x) || !finite(s) || !finite(y_plus) || !finite(y_minus) || (price && !finite(*price)))
      throw DataError("ObservedDispatch: non-finite observation");
  }
};

/// True entries mark indices where the primal constraint is slack, so its dual is zero.
struct ActiveSets {
  Mask alpha_upper, alpha_lower;  ///< I x T
  Mask delta_upper, delta_lower;
  Mask theta_upper, theta_lower;
  Mask beta_upper, beta_lower;    ///< 1 x T
  Mask gamma_plus_upper, gamma_plus_lower;
  Mask gamma_minus_upper, gamma_minus_lower;
  std::vector<std::string> violations;  ///< observations outside their bounds by more than the tolerance

  [[nodiscard]] std::vector<const Mask*> all() const {
    return {&alpha_upper, &alpha_lower, &delta_upper, &delta_lower, &theta_upper, &theta_lower,
            &beta_upper, &beta_lower, &gamma_plus_upper, &gamma_plus_lower, &gamma_minus_upper, &gamma_minus_lower};
  }

  [[nodiscard]] long slack_count() const {
    long n = 0;
    for (const Mask* m : all()) n += m->count();
    return n;
  }
};

namespace detail {

inline std::string describe(const char* what, long i, long t, double value, double lo, double hi) {
  char buf[160];
  if (i >= 0)
    std::snprintf(buf, sizeof buf, "%s[%ld,%ld] = %.9g outside [%.9g, %.9g]", what, i, t, value, lo, hi);
  else
    std::snprintf(buf, sizeof buf, "%s[%ld] = %.9g outside [%.9g, %.9g]", what, t, value, lo, hi);
  return buf;
}

/// Sets the two slack flags of value in [lo, hi] and records violations beyond tol.
inline void classify(double value, double lo, double hi, double tol, bool& upper_slack, bool& lower_slack,
                     std::vector<std::string>& violations, const char* what, long i, long t) {
  if (value > hi + tol || value < lo - tol) violations.push_back(describe(what, i, t, value, lo, hi));
  upper_slack = hi - value > tol;
  lower_slack = value - lo > tol;
}

}  // namespace detail

/**
 * A constraint counts as binding when its slack is at most binding_tol. Observations
 * beyond a bound are treated as binding there and listed in `violations`.
 */
inline ActiveSets detect_active_sets(const ObservedDispatch& obs, const market::MarketScenario& sc,
                                     double binding_tol) {
  require(binding_tol >= 0.0, "detect_active_sets: binding_tol must be >= 0");
  obs.validate();
  const int I = obs.n_tech(), T = obs.n_periods();
  require(sc.n_tech() == I && sc.n_periods() == T, "detect_active_sets: scenario dimensions differ");
  ActiveSets a;
  for (Mask* m : {&a.alpha_upper, &a.alpha_lower, &a.delta_upper, &a.delta_lower, &a.theta_upper, &a.theta_lower})
    m->resize(I, T);
  for (Mask* m : {&a.beta_upper, &a.beta_lower, &a.gamma_plus_upper, &a.gamma_plus_lower, &a.gamma_minus_upper,
                  &a.gamma_minus_lower})
    m->resize(1, T);
  for (int i = 0; i < I; ++i)
    for (int t = 0; t < T; ++t) {
      detail::classify(obs.x(i, t), 0.0, sc.capacity(i, t), binding_tol, a.alpha_upper(i, t), a.alpha_lower(i, t),
                       a.violations, "x", i, t);
      detail::classify(obs.r_plus(i, t), 0.0, sc.ramp_up(i, t), binding_tol, a.delta_upper(i, t),
                       a.delta_lower(i, t), a.violations, "r_plus", i, t);
      detail::classify(obs.r_minus(i, t), 0.0, sc.ramp_down(i, t), binding_tol, a.theta_upper(i, t),
                       a.theta_lower(i, t), a.violations, "r_minus", i, t);
    }
  for (int t = 0; t < T; ++t) {
    detail::classify(obs.s[t], 0.0, sc.storage_energy_cap[t], binding_tol, a.beta_upper(0, t), a.beta_lower(0, t),
                     a.violations, "s", -1, t);
    detail::classify(obs.y_plus[t], 0.0, sc.storage_charge_cap[t], binding_tol, a.gamma_plus_upper(0, t),
                     a.gamma_plus_lower(0, t), a.violations, "y_plus", -1, t);
    detail::classify(obs.y_minus[t], 0.0, sc.storage_discharge_cap[t], binding_tol, a.gamma_minus_upper(0, t),
                     a.gamma_minus_lower(0, t), a.violations, "y_minus", -1, t);
  }
  return a;
}

/// Copy of the observations clipped into the scenario bounds.
inline ObservedDispatch clip_to_bounds(const ObservedDispatch& obs, const market::MarketScenario& sc) {
  ObservedDispatch o = obs;
  o.x = o.x.cwiseMax(0.0).cwiseMin(sc.capacity);
  o.r_plus = o.r_plus.cwiseMax(0.0).cwiseMin(sc.ramp_up);
  o.r_minus = o.r_minus.cwiseMax(0.0).cwiseMin(sc.ramp_down);
  o.s = o.s.cwiseMax(0.0).cwiseMin(sc.storage_energy_cap);
  o.y_plus = o.y_plus.cwiseMax(0.0).cwiseMin(sc.storage_charge_cap);
  o.y_minus = o.y_minus.cwiseMax(0.0).cwiseMin(sc.storage_discharge_cap);
  return o;
}

struct RampLimits {
  Vector up;    ///< per technology
  Vector down;
};

/// Largest observed ramp up and down between successive periods, per technology.
inline RampLimits infer_ramp_limits(const Matrix& x) {
  require(x.cols() >= 2, "infer_ramp_limits: need at least two periods");
  RampLimits r{Vector::Zero(x.rows()), Vector::Zero(x.rows())};
  for (Eigen::Index t = 1; t < x.cols(); ++t) {
    const Vector step = x.col(t) - x.col(t - 1);
    r.up = r.up.cwiseMax(step);
    r.down = r.down.cwiseMax(-step);
  }
  return r;
}

struct StoragePower {
  double charge = 0.0;     ///< max y_plus
  double discharge = 0.0;  ///< max y_minus
};

inline StoragePower infer_storage_power(const Vector& y_plus, const Vector& y_minus) {
  require(y_plus.size() > 0 && y_minus.size() > 0, "infer_storage_power: empty series");
  return {y_plus.maxCoeff(), y_minus.maxCoeff()};
}

}  // namespace ppaval::inverse
