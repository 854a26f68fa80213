#pragma once

// Forward dispatch problem: minimize production and ramping cost subject to capacity,
// demand balance, storage and ramping constraints. Prices are the demand-row duals.

#include <algorithm>
#include <future>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "ppaval/market/scenario.hpp"
#include "ppaval/qp.hpp"

namespace ppaval::market {

enum class Role { X, S, YPlus, YMinus, RPlus, RMinus, Curtail };

/// Column and row layout of the forward QP.
class ForwardIndex {
 public:
  struct Key {
    Role role;
    int tech;    ///< -1 for per-period roles
    int period;
    bool operator==(const Key&) const = default;
  };

  ForwardIndex(int n_tech, int n_periods, bool curtailment)
      : I_(n_tech), T_(n_periods), curtailment_(curtailment) {}

  [[nodiscard]] int n_tech() const { return I_; }
  [[nodiscard]] int n_periods() const { return T_; }
  [[nodiscard]] bool has_curtailment() const { return curtailment_; }
  [[nodiscard]] int n_columns() const { return 3 * I_ * T_ + (curtailment_ ? 4 : 3) * T_; }
  [[nodiscard]] int n_rows() const { return 2 * T_ + I_ * T_; }

  [[nodiscard]] int column(Role role, int i, int t) const {
    const int IT = I_ * T_;
    switch (role) {
      case Role::X: return i * T_ + t;
      case Role::S: return IT + t;
      case Role::YPlus: return IT + T_ + t;
      case Role::YMinus: return IT + 2 * T_ + t;
      case Role::RPlus: return IT + 3 * T_ + i * T_ + t;
      case Role::RMinus: return 2 * IT + 3 * T_ + i * T_ + t;
      case Role::Curtail:
        require(curtailment_, "ForwardIndex: no curtailment columns");
        return 3 * IT + 3 * T_ + t;
    }
    throw std::logic_error("ForwardIndex: unknown role");
  }

  [[nodiscard]] Key key(int col) const {
    require(col >= 0 && col < n_columns(), "ForwardIndex: column out of range");
    const int IT = I_ * T_;
    if (col < IT) return {Role::X, col / T_, col % T_};
    col -= IT;
    if (col < 3 * T_) {
      const Role roles[] = {Role::S, Role::YPlus, Role::YMinus};
      return {roles[col / T_], -1, col % T_};
    }
    col -= 3 * T_;
    if (col < IT) return {Role::RPlus, col / T_, col % T_};
    col -= IT;
    if (col < IT) return {Role::RMinus, col / T_, col % T_};
    return {Role::Curtail, -1, col - IT};
  }

  [[nodiscard]] int demand_row(int t) const { return t; }
  [[nodiscard]] int storage_row(int t) const { return T_ + t; }
  [[nodiscard]] int ramp_row(int i, int t) const { return 2 * T_ + i * T_ + t; }

 private:
  int I_, T_;
  bool curtailment_;
};

enum class NegativeDemandPolicy {
  Clamp,       ///< replace negative residual demand by 0 (with a warning)
  Curtailment  ///< add a zero-cost curtailment column to every demand row
};

struct ForwardOptions {
  NegativeDemandPolicy negative_demand = NegativeDemandPolicy::Clamp;
};

struct ForwardQp {
  qp::QpProblem problem;
  ForwardIndex index{0, 0, false};
  Vector demand;  ///< right-hand side actually used
};

/// Builds the QP; the objective is sum c1 x + c2 x^2 + k r_plus.
inline ForwardQp build_forward_qp(const MarketScenario& sc, const CostCurves& costs,
                                  const ForwardOptions& options = {}) {
  sc.validate();
  const int I = sc.n_tech(), T = sc.n_periods();
  costs.validate(I, T);
  const bool curtail = options.negative_demand == NegativeDemandPolicy::Curtailment;

  ForwardQp out;
  out.index = ForwardIndex(I, T, curtail);
  out.demand = sc.demand;
  if (!curtail) {
    int clamped = 0;
    for (int t = 0; t < T; ++t)
      if (out.demand[t] < 0.0) {
        out.demand[t] = 0.0;
        ++clamped;
      }
    if (clamped > 0)
      log::warn("negative residual demand clamped to 0 in " + std::to_string(clamped) + " period(s)");
  }
  const ForwardIndex& ix = out.index;

  qp::QpBuilder b;
  for (int i = 0; i < I; ++i)
    for (int t = 0; t < T; ++t) b.add_var(0.0, sc.capacity(i, t), costs.c1(i, t), costs.c2(i, t));
  for (int t = 0; t < T; ++t) b.add_var(0.0, sc.storage_energy_cap[t]);
  for (int t = 0; t < T; ++t) b.add_var(0.0, sc.storage_charge_cap[t]);
  for (int t = 0; t < T; ++t) b.add_var(0.0, sc.storage_discharge_cap[t]);
  // Unlimited ramps still get a finite box that no minimal split reaches; otherwise a
  // zero ramp cost leaves r_plus = r_minus free to grow and the barrier path diverges.
  auto ramp_box = [&](int i, int t) {
    double prev = t > 0 ? sc.capacity(i, t - 1) : (sc.initial_output ? std::abs((*sc.initial_output)[i]) : 0.0);
    return 2.0 * std::max(sc.capacity(i, t), prev) + 1.0;
  };
  for (int i = 0; i < I; ++i)
    for (int t = 0; t < T; ++t) b.add_var(0.0, std::min(sc.ramp_up(i, t), ramp_box(i, t)), costs.k(i, t));
  for (int i = 0; i < I; ++i)
    for (int t = 0; t < T; ++t) b.add_var(0.0, std::min(sc.ramp_down(i, t), ramp_box(i, t)));
  if (curtail)
    for (int t = 0; t < T; ++t) b.add_var(0.0, kInf);

  const double eta = sc.storage_efficiency;
  for (int t = 0; t < T; ++t) {
    std::vector<std::pair<int, double>> e;
    for (int i = 0; i < I; ++i) e.emplace_back(ix.column(Role::X, i, t), 1.0);
    e.emplace_back(ix.column(Role::YMinus, -1, t), 1.0);
    e.emplace_back(ix.column(Role::YPlus, -1, t), -1.0);
    if (curtail) e.emplace_back(ix.column(Role::Curtail, -1, t), -1.0);
    b.add_equality(e, out.demand[t]);
  }
  for (int t = 0; t < T; ++t) {
    std::vector<std::pair<int, double>> e{{ix.column(Role::S, -1, t), 1.0},
                                          {ix.column(Role::YPlus, -1, t), -eta},
                                          {ix.column(Role::YMinus, -1, t), 1.0 / eta}};
    if (t > 0) e.emplace_back(ix.column(Role::S, -1, t - 1), -1.0);
    b.add_equality(e, t == 0 ? sc.initial_storage : 0.0);
  }
  for (int i = 0; i < I; ++i)
    for (int t = 0; t < T; ++t) {
      std::vector<std::pair<int, double>> e{{ix.column(Role::RPlus, i, t), -1.0},
                                            {ix.column(Role::RMinus, i, t), 1.0}};
      double rhs = 0.0;
      if (t > 0) {
        e.emplace_back(ix.column(Role::X, i, t), 1.0);
        e.emplace_back(ix.column(Role::X, i, t - 1), -1.0);
      } else if (sc.initial_output) {
        e.emplace_back(ix.column(Role::X, i, t), 1.0);
        rhs = (*sc.initial_output)[i];
      }
      b.add_equality(e, rhs);
    }
  out.problem = b.build();
  return out;
}

/// Primal dispatch with every multiplier of the forward problem.
///
/// Multipliers follow the non-positive convention of the inverse problem: the price is
/// the shadow price of demand, storage_dual and ramp_dual are the balance-row
/// multipliers, and every bound multiplier (alpha, beta, gamma, delta, theta) is <= 0.
struct DispatchSolution {
  qp::QpStatus status = qp::QpStatus::IterLimit;
  Matrix x, r_plus, r_minus;
  Vector s, y_plus, y_minus, curtailment;
  Vector demand;  ///< demand served (after clamping)
  Vector price;
  Vector storage_dual;
  Matrix ramp_dual;
  Matrix alpha_upper, alpha_lower, delta_upper, delta_lower, theta_upper, theta_lower;
  Vector beta_upper, beta_lower, gamma_plus_upper, gamma_plus_lower, gamma_minus_upper, gamma_minus_lower;
  double objective = 0.0;
  qp::KktResiduals kkt_residuals;
  int iterations = 0;

  [[nodiscard]] int n_tech() const { return static_cast<int>(x.rows()); }
  [[nodiscard]] int n_periods() const { return static_cast<int>(price.size()); }

  void allocate(int I, int T) {
    for (Matrix* m : {&x, &r_plus, &r_minus, &ramp_dual, &alpha_upper, &alpha_lower, &delta_upper,
                      &delta_lower, &theta_upper, &theta_lower})
      m->setZero(I, T);
    for (Vector* v : {&s, &y_plus, &y_minus, &curtailment, &demand, &price, &storage_dual, &beta_upper,
                      &beta_lower, &gamma_plus_upper, &gamma_plus_lower, &gamma_minus_upper,
                      &gamma_minus_lower})
      v->setZero(T);
  }

  /// Copies a window solution into periods [offset, offset + w.T).
  void place(const DispatchSolution& w, int offset) {
    const int T = w.n_periods();
    Matrix* dst_m[] = {&x, &r_plus, &r_minus, &ramp_dual, &alpha_upper, &alpha_lower, &delta_upper,
                       &delta_lower, &theta_upper, &theta_lower};
    const Matrix* src_m[] = {&w.x, &w.r_plus, &w.r_minus, &w.ramp_dual, &w.alpha_upper, &w.alpha_lower,
                             &w.delta_upper, &w.delta_lower, &w.theta_upper, &w.theta_lower};
    for (std::size_t k = 0; k < std::size(dst_m); ++k) dst_m[k]->middleCols(offset, T) = *src_m[k];
    Vector* dst_v[] = {&s, &y_plus, &y_minus, &curtailment, &demand, &price, &storage_dual, &beta_upper,
                       &beta_lower, &gamma_plus_upper, &gamma_plus_lower, &gamma_minus_upper,
                       &gamma_minus_lower};
    const Vector* src_v[] = {&w.s, &w.y_plus, &w.y_minus, &w.curtailment, &w.demand, &w.price,
                             &w.storage_dual, &w.beta_upper, &w.beta_lower, &w.gamma_plus_upper,
                             &w.gamma_plus_lower, &w.gamma_minus_upper, &w.gamma_minus_lower};
    for (std::size_t k = 0; k < std::size(dst_v); ++k) dst_v[k]->segment(offset, T) = *src_v[k];
  }
};

/// Maps a QP solution of build_forward_qp back to dispatch quantities.
inline DispatchSolution extract_dispatch(const ForwardQp& fq, const qp::QpSolution& sol) {
  const ForwardIndex& ix = fq.index;
  const int I = ix.n_tech(), T = ix.n_periods();
  DispatchSolution d;
  d.allocate(I, T);
  d.status = sol.status;
  d.demand = fq.demand;
  const Vector& v = sol.primal;
  const Vector& zl = sol.dual_bounds_lower;
  const Vector& zu = sol.dual_bounds_upper;
  for (int i = 0; i < I; ++i)
    for (int t = 0; t < T; ++t) {
      const int cx = ix.column(Role::X, i, t), cp = ix.column(Role::RPlus, i, t),
                cm = ix.column(Role::RMinus, i, t);
      d.x(i, t) = v[cx];
      d.r_plus(i, t) = v[cp];
      d.r_minus(i, t) = v[cm];
      d.alpha_upper(i, t) = -zu[cx];
      d.alpha_lower(i, t) = -zl[cx];
      d.delta_upper(i, t) = -zu[cp];
      d.delta_lower(i, t) = -zl[cp];
      d.theta_upper(i, t) = -zu[cm];
      d.theta_lower(i, t) = -zl[cm];
      // the ramp row is written as x_t - x_{t-1} - r+ + r- = 0 while the multiplier
      // mu multiplies r+ - r- - x_t + x_{t-1}
      d.ramp_dual(i, t) = -sol.dual_general[ix.ramp_row(i, t)];
    }
  for (int t = 0; t < T; ++t) {
    const int cs = ix.column(Role::S, -1, t), cyp = ix.column(Role::YPlus, -1, t),
              cym = ix.column(Role::YMinus, -1, t);
    d.s[t] = v[cs];
    d.y_plus[t] = v[cyp];
    d.y_minus[t] = v[cym];
    if (ix.has_curtailment()) d.curtailment[t] = v[ix.column(Role::Curtail, -1, t)];
    d.beta_upper[t] = -zu[cs];
    d.beta_lower[t] = -zl[cs];
    d.gamma_plus_upper[t] = -zu[cyp];
    d.gamma_plus_lower[t] = -zl[cyp];
    d.gamma_minus_upper[t] = -zu[cym];
    d.gamma_minus_lower[t] = -zl[cym];
    d.price[t] = -sol.dual_general[ix.demand_row(t)];
    // storage row s_t - s_{t-1} - eta y+ + y-/eta = 0 matches the multiplier's sign
    d.storage_dual[t] = sol.dual_general[ix.storage_row(t)];
  }
  d.objective = sol.objective_value;
  d.kkt_residuals = sol.kkt_residuals;
  d.iterations = sol.iterations;
  return d;
}

/// Largest supply the system can deliver in period t, ignoring storage energy and ramps.
inline double max_supply(const MarketScenario& sc, int t) {
  return sc.capacity.col(t).sum() + sc.storage_discharge_cap[t];
}

struct SupplyGap {
  int period = 0;
  double demand = 0.0;
  double max_supply = 0.0;
};

/// The dispatch problem has no feasible solution.
class InfeasibleDispatch : public SolverError {
 public:
  InfeasibleDispatch(const std::string& what, std::vector<SupplyGap> gaps, int window = -1)
      : SolverError(what), gaps_(std::move(gaps)), window_(window) {}
  [[nodiscard]] const std::vector<SupplyGap>& gaps() const { return gaps_; }
  [[nodiscard]] int window() const { return window_; }

 private:
  std::vector<SupplyGap> gaps_;
  int window_;
};

namespace detail {

inline std::vector<SupplyGap> supply_gaps(const MarketScenario& sc, const Vector& demand, int offset = 0) {
  std::vector<SupplyGap> gaps;
  for (int t = 0; t < sc.n_periods(); ++t) {
    const double cap = max_supply(sc, t);
    if (demand[t] > cap) gaps.push_back({t + offset, demand[t], cap});
  }
  return gaps;
}

inline std::string describe_gaps(const std::vector<SupplyGap>& gaps) {
  if (gaps.empty()) return "no period exceeds installed capacity; ramp or storage energy limits bind";
  std::string msg = std::to_string(gaps.size()) + " period(s) short of supply, first at t=" +
                    std::to_string(gaps.front().period);
  char buf[96];
  std::snprintf(buf, sizeof buf, " (demand %.6g > max supply %.6g)", gaps.front().demand,
                gaps.front().max_supply);
  return msg + buf;
}

}  // namespace detail

/// Solves the forward problem; throws InfeasibleDispatch or SolverError when no optimum is found.
inline DispatchSolution solve_dispatch(const MarketScenario& sc, const CostCurves& costs,
                                       const qp::SolverSettings& settings = {},
                                       const ForwardOptions& options = {}) {
  const ForwardQp fq = build_forward_qp(sc, costs, options);
  const qp::QpSolution sol = qp::solve_qp(fq.problem, settings);
  switch (sol.status) {
    case qp::QpStatus::Optimal:
      return extract_dispatch(fq, sol);
    case qp::QpStatus::Infeasible: {
      auto gaps = detail::supply_gaps(sc, fq.demand);
      throw InfeasibleDispatch("dispatch infeasible: " + detail::describe_gaps(gaps), std::move(gaps));
    }
    default:
      throw SolverError("dispatch solve ended with status " + std::string(qp::to_string(sol.status)));
  }
}

/**
 * Static merit-order price: the cost of the cheapest technology at which cumulative
 * capacity (sorted by cost, ties kept in input order) covers demand.
 */
inline double merit_order_price(const Vector& c1, const Vector& caps, double demand) {
  require(c1.size() == caps.size() && c1.size() > 0, "merit_order_price: size mismatch");
  require((caps.array() >= 0.0).all(), "merit_order_price: negative capacity");
  if (demand > caps.sum())
    throw DataError("merit_order_price: demand exceeds total capacity");
  std::vector<int> order(static_cast<std::size_t>(c1.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return c1[a] < c1[b]; });
  double cumulative = 0.0;
  for (int i : order) {
    cumulative += caps[i];
    if (cumulative >= demand) return c1[i];
  }
  return c1[order.back()];
}

/**
 * Solves consecutive windows of window_hours periods (the last may be shorter).
 * With carryover the terminal storage level and last output of each window seed the
 * next one; without it every window starts from the scenario's initial state and the
 * windows are solved concurrently.
 */
inline DispatchSolution rolling_horizon_dispatch(const MarketScenario& sc, const CostCurves& costs,
                                                 const qp::SolverSettings& settings, int window_hours,
                                                 bool carryover, const ForwardOptions& options = {}) {
  sc.validate();
  costs.validate(sc.n_tech(), sc.n_periods());
  require(window_hours >= 24, "rolling_horizon_dispatch: window_hours must be >= 24");
  const int T = sc.n_periods();
  const int n_windows = (T + window_hours - 1) / window_hours;

  auto solve_window = [&](int w, const MarketScenario& win) {
    const int begin = w * window_hours;
    try {
      return solve_dispatch(win, costs.slice(begin, win.n_periods()), settings, options);
    } catch (const InfeasibleDispatch& e) {
      std::vector<SupplyGap> gaps = e.gaps();
      for (auto& g : gaps) g.period += begin;
      throw InfeasibleDispatch("window " + std::to_string(w) + ": " + e.what(), std::move(gaps), w);
    } catch (const SolverError& e) {
      throw SolverError("window " + std::to_string(w) + ": " + e.what());
    }
  };
  auto window_scenario = [&](int w) {
    const int begin = w * window_hours;
    return sc.slice(begin, std::min(window_hours, T - begin));
  };

  DispatchSolution out;
  out.allocate(sc.n_tech(), T);
  out.status = qp::QpStatus::Optimal;
  out.kkt_residuals = {0.0, 0.0, 0.0};
  auto accumulate = [&](const DispatchSolution& d, int w) {
    out.place(d, w * window_hours);
    out.objective += d.objective;
    out.iterations += d.iterations;
    out.kkt_residuals.stationarity_inf_norm =
        std::max(out.kkt_residuals.stationarity_inf_norm, d.kkt_residuals.stationarity_inf_norm);
    out.kkt_residuals.primal_inf_norm = std::max(out.kkt_residuals.primal_inf_norm, d.kkt_residuals.primal_inf_norm);
    out.kkt_residuals.complementarity_inf_norm =
        std::max(out.kkt_residuals.complementarity_inf_norm, d.kkt_residuals.complementarity_inf_norm);
  };

  if (carryover) {
    MarketScenario win = window_scenario(0);
    for (int w = 0; w < n_windows; ++w) {
      if (w > 0) {
        const DispatchSolution& prev_state = out;
        const int last = w * window_hours - 1;
        win = window_scenario(w);
        win.initial_storage = std::clamp(prev_state.s[last], 0.0, win.storage_energy_cap[0]);
        win.initial_output = Vector(prev_state.x.col(last));
      }
      accumulate(solve_window(w, win), w);
    }
    return out;
  }

  const unsigned workers = std::max(1u, std::min(std::thread::hardware_concurrency(),
                                                 static_cast<unsigned>(n_windows)));
  for (int first = 0; first < n_windows; first += static_cast<int>(workers)) {
    std::vector<std::future<DispatchSolution>> jobs;
    const int last = std::min(n_windows, first + static_cast<int>(workers));
    for (int w = first; w < last; ++w)
      jobs.push_back(std::async(workers > 1 ? std::launch::async : std::launch::deferred,
                                [&, w] { return solve_window(w, window_scenario(w)); }));
    for (int w = first; w < last; ++w) accumulate(jobs[static_cast<std::size_t>(w - first)].get(), w);
  }
  return out;
}

}  // namespace ppaval::market
