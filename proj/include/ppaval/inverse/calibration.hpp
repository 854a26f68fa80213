#pragma once

// Inverse dispatch problem: find cost coefficients c1, c2, k and dual multipliers that
// make the observed dispatch satisfy the forward model's stationarity conditions, while
// the costs follow feature regressions c = <Z, b> + eps. The objective is
//
//   sum_{i,t} w_t (eps1^2 + eps2^2 + eps3^2) + sum_{i,j} lambda_ij ||b_ij||_1
//
// Duals whose primal constraint is slack at the observation are fixed to zero and left
// out of the QP. Bound multipliers are non-positive.

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ppaval/features/scaling.hpp"
#include "ppaval/inverse/observed.hpp"
#include "ppaval/qp/ipm.hpp"
#include "ppaval/qp/kkt.hpp"
#include "ppaval/series.hpp"

namespace ppaval::inverse {

/// Regressors for one cost group of one technology. A column named "intercept" is not penalized.
struct FeatureBlock {
  Matrix Z;  ///< T x n
  std::vector<std::string> names;

  [[nodiscard]] int n() const { return static_cast<int>(Z.cols()); }
  [[nodiscard]] std::string schema_hash() const {
    std::string text;
    for (const auto& s : names) text += s + "\n";
    return features::fnv1a_hex(text);
  }
  [[nodiscard]] bool penalized(int j) const { return names[static_cast<std::size_t>(j)] != "intercept"; }

  static FeatureBlock intercept(int T) { return {Matrix::Ones(T, 1), {"intercept"}}; }

  /// Columns by name: "intercept", a frame series, or a product "a*b" of two series.
  static FeatureBlock from_frame(const HourlyFrame& frame, const std::vector<std::string>& names) {
    FeatureBlock fb{Matrix(frame.size(), static_cast<Eigen::Index>(names.size())), names};
    for (std::size_t j = 0; j < names.size(); ++j) {
      const auto& n = names[j];
      const auto col = static_cast<Eigen::Index>(j);
      const auto star = n.find('*');
      if (n == "intercept") fb.Z.col(col).setOnes();
      else if (star != std::string::npos)
        fb.Z.col(col) = frame.at(n.substr(0, star)).cwiseProduct(frame.at(n.substr(star + 1)));
      else fb.Z.col(col) = frame.at(n);
    }
    return fb;
  }

  void validate(int T, const std::string& what) const {
    if (Z.rows() != T) throw DataError(what + ": feature rows differ from the period count");
    if (static_cast<int>(names.size()) != Z.cols()) throw DataError(what + ": feature names differ from columns");
    if (Z.cols() == 0) throw DataError(what + ": no feature columns");
    if (!Z.allFinite()) throw DataError(what + ": non-finite feature value");
  }
};

/// Feature blocks for c1, c2 and k of one technology.
struct TechnologyFeatures {
  std::array<FeatureBlock, 3> groups;

  static TechnologyFeatures intercepts(int T) {
    return {{FeatureBlock::intercept(T), FeatureBlock::intercept(T), FeatureBlock::intercept(T)}};
  }
};

struct CalibrationOptions {
  double binding_tol = 1e-6;
  int block_hours = 336;              ///< dual chains are cut every block_hours periods; 0 keeps one block
  bool pin_price = true;              ///< fix p to the observed price when one is supplied
  double bound = 1e5;                 ///< box on duals, costs and coefficients
  double storage_slack_weight = 1e3;  ///< L1 weight on storage-row slack; 0 makes those rows exact
  qp::SolverSettings solver{1e-8, 1e-9, 300, 1e-6};
};

struct CalibrationProblem {
  market::MarketScenario scenario;        ///< capacities, ramp limits and storage parameters
  ObservedDispatch observed;
  std::vector<TechnologyFeatures> features;  ///< one per technology
  Vector weights;                         ///< w_t
  Matrix lambda;                          ///< I x 3 penalties for b1, b2, b3

  void validate() const {
    scenario.validate();
    observed.validate();
    const int I = scenario.n_tech(), T = scenario.n_periods();
    if (observed.n_tech() != I || observed.n_periods() != T)
      throw DataError("CalibrationProblem: observations do not match the scenario dimensions");
    if (static_cast<int>(features.size()) != I) throw DataError("CalibrationProblem: one feature set per technology");
    for (int i = 0; i < I; ++i)
      for (int j = 0; j < 3; ++j)
        features[static_cast<std::size_t>(i)].groups[static_cast<std::size_t>(j)].validate(
            T, "technology " + scenario.technologies[static_cast<std::size_t>(i)].id);
    if (weights.size() != T) throw DataError("CalibrationProblem: weights length differs from periods");
    if ((weights.array() < 0.0).any() || !weights.allFinite()) throw DataError("CalibrationProblem: weights must be >= 0");
    if (!(weights.sum() > 0.0)) throw DataError("CalibrationProblem: weights sum to zero");
    if (lambda.rows() != I || lambda.cols() != 3) throw DataError("CalibrationProblem: lambda must be I x 3");
    if ((lambda.array() < 0.0).any() || !lambda.allFinite()) throw DataError("CalibrationProblem: lambda must be >= 0");
  }
};

using IndexGrid = Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic>;

/// Column positions of the inverse QP; -1 marks a quantity that is not a variable.
struct InverseIndex {
  IndexGrid c1, c2, k, eps1, eps2, eps3, mu;            ///< I x T
  IndexGrid alpha_upper, alpha_lower, delta_upper, delta_lower, theta_upper, theta_lower;
  IndexGrid price, pi;                                  ///< 1 x T
  IndexGrid beta_upper, beta_lower, gamma_plus_upper, gamma_plus_lower, gamma_minus_upper, gamma_minus_lower;
  IndexGrid slack_plus, slack_minus;                    ///< 3 x T: y_plus, y_minus and s rows
  IndexGrid mu_boundary;                                ///< I x (blocks - 1)
  IndexGrid pi_boundary;                                ///< 1 x (blocks - 1)
  /// b_plus[i][j][c] is the coefficient column (or its positive part when split); b_minus is -1 unless split.
  std::vector<std::array<std::vector<int>, 3>> b_plus, b_minus;
  bool storage = false;
  int blocks = 1;
};

struct StructureReport {
  std::map<std::string, int> variables;
  std::map<std::string, int> rows;
  int n_vars = 0;
  int n_rows = 0;

  [[nodiscard]] std::string to_string() const {
    std::string out = "variables " + std::to_string(n_vars) + ", rows " + std::to_string(n_rows) + "\n";
    for (const auto& [k, v] : variables) out += "  var " + k + ": " + std::to_string(v) + "\n";
    for (const auto& [k, v] : rows) out += "  row " + k + ": " + std::to_string(v) + "\n";
    return out;
  }
};

struct InverseQp {
  qp::QpProblem problem;
  InverseIndex index;
  StructureReport report;
  Vector price_used;  ///< pinned prices, empty when p is free
};

namespace detail {

inline bool has_storage(const market::MarketScenario& sc, const ObservedDispatch& obs) {
  auto nonzero = [](const Vector& v) { return v.size() > 0 && v.cwiseAbs().maxCoeff() > 0.0; };
  return nonzero(sc.storage_energy_cap) || nonzero(sc.storage_charge_cap) || nonzero(sc.storage_discharge_cap) ||
         nonzero(obs.s) || nonzero(obs.y_plus) || nonzero(obs.y_minus);
}

}  // namespace detail

/**
 * Builds the inverse QP. Within a block the ramp duals mu and storage duals pi chain
 * across periods; at the end of a non-final block the next period's dual is replaced by
 * a free boundary variable. The last period uses mu_{T+1} = 0 and pi_T + beta_lo - beta_up = 0.
 */
inline InverseQp build_inverse_qp(const CalibrationProblem& prob, const ActiveSets& sets,
                                  const CalibrationOptions& opt = {}) {
  prob.validate();
  require(opt.bound > 0.0, "build_inverse_qp: bound must be positive");
  require(opt.block_hours >= 0, "build_inverse_qp: block_hours must be >= 0");
  require(opt.storage_slack_weight >= 0.0, "build_inverse_qp: storage_slack_weight must be >= 0");
  const market::MarketScenario& sc = prob.scenario;
  const ObservedDispatch obs = clip_to_bounds(prob.observed, sc);
  const int I = sc.n_tech(), T = sc.n_periods();
  const double M = opt.bound;
  const double eta = sc.storage_efficiency;
  const bool pinned = opt.pin_price && obs.price.has_value();
  const int B = opt.block_hours > 0 ? opt.block_hours : T;

  InverseQp out;
  InverseIndex& ix = out.index;
  StructureReport& rep = out.report;
  qp::QpBuilder qb;
  ix.storage = detail::has_storage(sc, obs);
  ix.blocks = (T + B - 1) / B;

  auto var = [&](const std::string& family, double lo, double hi, double lin = 0.0, double quad = 0.0) {
    ++rep.variables[family];
    return qb.add_var(lo, hi, lin, quad);
  };
  auto dual = [&](const std::string& family, bool slack) { return slack ? -1 : var(family, -M, 0.0); };
  auto grid = [](int r, int c) { return IndexGrid::Constant(r, c, -1); };

  for (IndexGrid* g : {&ix.c1, &ix.c2, &ix.k, &ix.eps1, &ix.eps2, &ix.eps3, &ix.mu, &ix.alpha_upper, &ix.alpha_lower,
                       &ix.delta_upper, &ix.delta_lower, &ix.theta_upper, &ix.theta_lower})
    *g = grid(I, T);
  for (IndexGrid* g : {&ix.price, &ix.pi, &ix.beta_upper, &ix.beta_lower, &ix.gamma_plus_upper, &ix.gamma_plus_lower,
                       &ix.gamma_minus_upper, &ix.gamma_minus_lower})
    *g = grid(1, T);
  ix.slack_plus = grid(3, T);
  ix.slack_minus = grid(3, T);
  ix.mu_boundary = grid(I, ix.blocks - 1);
  ix.pi_boundary = grid(1, ix.blocks - 1);

  for (int i = 0; i < I; ++i)
    for (int t = 0; t < T; ++t) {
      const double w = prob.weights[t];
      ix.c1(i, t) = var("c1", -M, M);
      ix.c2(i, t) = var("c2", 0.0, M);
      ix.k(i, t) = var("k", -M, M);
      ix.eps1(i, t) = var("eps", -kInf, kInf, 0.0, w);
      ix.eps2(i, t) = var("eps", -kInf, kInf, 0.0, w);
      ix.eps3(i, t) = var("eps", -kInf, kInf, 0.0, w);
      ix.mu(i, t) = var("mu", -M, M);
      ix.alpha_upper(i, t) = dual("alpha", sets.alpha_upper(i, t));
      ix.alpha_lower(i, t) = dual("alpha", sets.alpha_lower(i, t));
      ix.delta_upper(i, t) = dual("delta", sets.delta_upper(i, t));
      ix.delta_lower(i, t) = dual("delta", sets.delta_lower(i, t));
      ix.theta_upper(i, t) = dual("theta", sets.theta_upper(i, t));
      ix.theta_lower(i, t) = dual("theta", sets.theta_lower(i, t));
    }
  for (int t = 0; t < T; ++t) {
    if (!pinned) ix.price(0, t) = var("price", -M, M);
    if (!ix.storage) continue;
    ix.pi(0, t) = var("pi", -M, M);
    ix.beta_upper(0, t) = dual("beta", sets.beta_upper(0, t));
    ix.beta_lower(0, t) = dual("beta", sets.beta_lower(0, t));
    ix.gamma_plus_upper(0, t) = dual("gamma", sets.gamma_plus_upper(0, t));
    ix.gamma_plus_lower(0, t) = dual("gamma", sets.gamma_plus_lower(0, t));
    ix.gamma_minus_upper(0, t) = dual("gamma", sets.gamma_minus_upper(0, t));
    ix.gamma_minus_lower(0, t) = dual("gamma", sets.gamma_minus_lower(0, t));
    if (opt.storage_slack_weight > 0.0)
      for (int r = 0; r < 3; ++r) {
        ix.slack_plus(r, t) = var("storage_slack", 0.0, M, opt.storage_slack_weight);
        ix.slack_minus(r, t) = var("storage_slack", 0.0, M, opt.storage_slack_weight);
      }
  }
  for (int blk = 0; blk + 1 < ix.blocks; ++blk) {
    for (int i = 0; i < I; ++i) ix.mu_boundary(i, blk) = var("boundary", -M, M);
    if (ix.storage) ix.pi_boundary(0, blk) = var("boundary", -M, M);
  }
  ix.b_plus.resize(static_cast<std::size_t>(I));
  ix.b_minus.resize(static_cast<std::size_t>(I));
  for (int i = 0; i < I; ++i)
    for (int j = 0; j < 3; ++j) {
      const FeatureBlock& fb = prob.features[static_cast<std::size_t>(i)].groups[static_cast<std::size_t>(j)];
      const double lam = prob.lambda(i, j);
      auto& bp = ix.b_plus[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      auto& bm = ix.b_minus[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      for (int c = 0; c < fb.n(); ++c) {
        if (lam > 0.0 && fb.penalized(c)) {
          bp.push_back(var("b_split", 0.0, M, lam));
          bm.push_back(var("b_split", 0.0, M, lam));
        } else {
          bp.push_back(var("b", -M, M));
          bm.push_back(-1);
        }
      }
    }

  using Row = std::vector<std::pair<int, double>>;
  auto put = [](Row& row, int col, double coef) {
    if (col >= 0) row.emplace_back(col, coef);
  };
  auto equality = [&](const std::string& family, const Row& row, double rhs) {
    ++rep.rows[family];
    qb.add_equality(row, rhs);
  };
  auto last_in_block = [&](int t) { return t == T - 1 || (t + 1) % B == 0; };

  Vector price_used;
  if (pinned) price_used = *obs.price;

  for (int t = 0; t < T; ++t) {
    const bool block_end = last_in_block(t);
    const int blk = t / B;
    for (int i = 0; i < I; ++i) {
      // c1 + 2 c2 x - p + alpha_lo - alpha_up - mu_t + mu_{t+1} = 0
      Row row;
      put(row, ix.c1(i, t), 1.0);
      put(row, ix.c2(i, t), 2.0 * obs.x(i, t));
      put(row, ix.price(0, t), -1.0);
      put(row, ix.alpha_lower(i, t), 1.0);
      put(row, ix.alpha_upper(i, t), -1.0);
      if (t > 0 || obs.initial_output) put(row, ix.mu(i, t), -1.0);
      if (!block_end) put(row, ix.mu(i, t + 1), 1.0);
      else if (t < T - 1) put(row, ix.mu_boundary(i, blk), 1.0);
      equality("x", row, pinned ? price_used[t] : 0.0);

      // mu + delta_lo - delta_up + k = 0
      row.clear();
      put(row, ix.mu(i, t), 1.0);
      put(row, ix.delta_lower(i, t), 1.0);
      put(row, ix.delta_upper(i, t), -1.0);
      put(row, ix.k(i, t), 1.0);
      equality("r_plus", row, 0.0);

      // -mu + theta_lo - theta_up = 0
      row.clear();
      put(row, ix.mu(i, t), -1.0);
      put(row, ix.theta_lower(i, t), 1.0);
      put(row, ix.theta_upper(i, t), -1.0);
      equality("r_minus", row, 0.0);
    }
    if (!ix.storage) continue;
    const double p_rhs = pinned ? price_used[t] : 0.0;
    // p - eta pi + gamma+_lo - gamma+_up = 0
    Row row;
    put(row, ix.price(0, t), 1.0);
    put(row, ix.pi(0, t), -eta);
    put(row, ix.gamma_plus_lower(0, t), 1.0);
    put(row, ix.gamma_plus_upper(0, t), -1.0);
    put(row, ix.slack_plus(0, t), 1.0);
    put(row, ix.slack_minus(0, t), -1.0);
    equality("y_plus", row, -p_rhs);
    // -p + pi / eta + gamma-_lo - gamma-_up = 0
    row.clear();
    put(row, ix.price(0, t), -1.0);
    put(row, ix.pi(0, t), 1.0 / eta);
    put(row, ix.gamma_minus_lower(0, t), 1.0);
    put(row, ix.gamma_minus_upper(0, t), -1.0);
    put(row, ix.slack_plus(1, t), 1.0);
    put(row, ix.slack_minus(1, t), -1.0);
    equality("y_minus", row, p_rhs);
    // pi_t - pi_{t+1} + beta_lo - beta_up = 0
    row.clear();
    put(row, ix.pi(0, t), 1.0);
    if (!block_end) put(row, ix.pi(0, t + 1), -1.0);
    else if (t < T - 1) put(row, ix.pi_boundary(0, blk), -1.0);
    put(row, ix.beta_lower(0, t), 1.0);
    put(row, ix.beta_upper(0, t), -1.0);
    put(row, ix.slack_plus(2, t), 1.0);
    put(row, ix.slack_minus(2, t), -1.0);
    equality("s", row, 0.0);
  }

  // c_it - <Z_it, b_i> - eps_it = 0 for each cost group
  for (int i = 0; i < I; ++i)
    for (int j = 0; j < 3; ++j) {
      const FeatureBlock& fb = prob.features[static_cast<std::size_t>(i)].groups[static_cast<std::size_t>(j)];
      const auto& bp = ix.b_plus[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      const auto& bm = ix.b_minus[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      const IndexGrid& cost = j == 0 ? ix.c1 : j == 1 ? ix.c2 : ix.k;
      const IndexGrid& eps = j == 0 ? ix.eps1 : j == 1 ? ix.eps2 : ix.eps3;
      for (int t = 0; t < T; ++t) {
        Row row;
        put(row, cost(i, t), 1.0);
        put(row, eps(i, t), -1.0);
        for (int c = 0; c < fb.n(); ++c) {
          const double z = fb.Z(t, c);
          if (z == 0.0) continue;
          put(row, bp[static_cast<std::size_t>(c)], -z);
          put(row, bm[static_cast<std::size_t>(c)], z);
        }
        equality("regression", row, 0.0);
      }
    }

  out.problem = qb.build();
  out.price_used = std::move(price_used);
  rep.n_vars = out.problem.n_vars();
  rep.n_rows = out.problem.n_rows();
  return out;
}

struct ImpliedDuals {
  Vector price;     ///< p_t (pinned or implied)
  Vector storage;   ///< pi_t
  Matrix ramp;      ///< mu_it
  Matrix alpha_upper, alpha_lower, delta_upper, delta_lower, theta_upper, theta_lower;  ///< all <= 0
  Vector beta_upper, beta_lower, gamma_plus_upper, gamma_plus_lower, gamma_minus_upper, gamma_minus_lower;
};

struct TechnologyCoefficients {
  std::array<Vector, 3> b;
  std::array<std::vector<std::string>, 3> names;
  std::array<std::string, 3> schema_hash;
};

struct CalibratedModel {
  std::vector<std::string> technologies;
  std::vector<TechnologyCoefficients> coefficients;
  Matrix lambda;
  double binding_tol = 0.0;
  bool price_pinned = false;

  Matrix c1, c2, k;            ///< fitted per (i, t)
  Matrix eps1, eps2, eps3;     ///< regression residuals
  ImpliedDuals duals;

  double weighted_residual = 0.0;  ///< sum w_t eps^2
  double penalty = 0.0;            ///< sum lambda ||b||_1
  double storage_slack = 0.0;      ///< weight * total storage-row slack
  double objective = 0.0;

  qp::QpStatus status = qp::QpStatus::IterLimit;
  int iterations = 0;
  qp::KktResiduals kkt;
  std::vector<std::string> violations;
  std::optional<time::Timestamp> first_period, last_period;
};

namespace detail {

inline double value_at(const Vector& v, int col) { return col >= 0 ? v[col] : 0.0; }

}  // namespace detail

inline CalibratedModel extract_model(const CalibrationProblem& prob, const InverseQp& iq, const qp::QpSolution& sol,
                                     const CalibrationOptions& opt) {
  const InverseIndex& ix = iq.index;
  const int I = prob.scenario.n_tech(), T = prob.scenario.n_periods();
  const Vector& v = sol.primal;
  auto at = [&](int col) { return detail::value_at(v, col); };
  auto fill = [&](const IndexGrid& g) {
    Matrix m(g.rows(), g.cols());
    for (Eigen::Index r = 0; r < g.rows(); ++r)
      for (Eigen::Index c = 0; c < g.cols(); ++c) m(r, c) = at(g(r, c));
    return m;
  };
  CalibratedModel m;
  for (const auto& tech : prob.scenario.technologies) m.technologies.push_back(tech.id);
  m.lambda = prob.lambda;
  m.binding_tol = opt.binding_tol;
  m.price_pinned = iq.price_used.size() > 0;
  m.c1 = fill(ix.c1);
  m.c2 = fill(ix.c2).cwiseMax(0.0);
  m.k = fill(ix.k);
  m.eps1 = fill(ix.eps1);
  m.eps2 = fill(ix.eps2);
  m.eps3 = fill(ix.eps3);

  ImpliedDuals& d = m.duals;
  d.price = m.price_pinned ? iq.price_used : Vector(fill(ix.price).row(0).transpose());
  d.storage = fill(ix.pi).row(0).transpose();
  d.ramp = fill(ix.mu);
  d.alpha_upper = fill(ix.alpha_upper);
  d.alpha_lower = fill(ix.alpha_lower);
  d.delta_upper = fill(ix.delta_upper);
  d.delta_lower = fill(ix.delta_lower);
  d.theta_upper = fill(ix.theta_upper);
  d.theta_lower = fill(ix.theta_lower);
  d.beta_upper = fill(ix.beta_upper).row(0).transpose();
  d.beta_lower = fill(ix.beta_lower).row(0).transpose();
  d.gamma_plus_upper = fill(ix.gamma_plus_upper).row(0).transpose();
  d.gamma_plus_lower = fill(ix.gamma_plus_lower).row(0).transpose();
  d.gamma_minus_upper = fill(ix.gamma_minus_upper).row(0).transpose();
  d.gamma_minus_lower = fill(ix.gamma_minus_lower).row(0).transpose();

  m.coefficients.resize(static_cast<std::size_t>(I));
  for (int i = 0; i < I; ++i)
    for (int j = 0; j < 3; ++j) {
      const auto si = static_cast<std::size_t>(i), sj = static_cast<std::size_t>(j);
      const FeatureBlock& fb = prob.features[si].groups[sj];
      Vector b(fb.n());
      for (int c = 0; c < fb.n(); ++c)
        b[c] = at(ix.b_plus[si][sj][static_cast<std::size_t>(c)]) - at(ix.b_minus[si][sj][static_cast<std::size_t>(c)]);
      double l1 = 0.0;
      for (int c = 0; c < fb.n(); ++c)
        if (fb.penalized(c)) l1 += std::abs(b[c]);
      m.penalty += prob.lambda(i, j) * l1;
      m.coefficients[si].b[sj] = std::move(b);
      m.coefficients[si].names[sj] = fb.names;
      m.coefficients[si].schema_hash[sj] = fb.schema_hash();
    }
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < I; ++i)
      m.weighted_residual += prob.weights[t] * (m.eps1(i, t) * m.eps1(i, t) + m.eps2(i, t) * m.eps2(i, t) +
                                                m.eps3(i, t) * m.eps3(i, t));
  for (Eigen::Index r = 0; r < ix.slack_plus.rows(); ++r)
    for (Eigen::Index c = 0; c < ix.slack_plus.cols(); ++c)
      m.storage_slack += opt.storage_slack_weight * (at(ix.slack_plus(r, c)) + at(ix.slack_minus(r, c)));
  m.objective = sol.objective_value;
  m.status = sol.status;
  m.iterations = sol.iterations;
  m.kkt = sol.kkt_residuals;
  if (!prob.scenario.timestamps.empty()) {
    m.first_period = prob.scenario.timestamps.front();
    m.last_period = prob.scenario.timestamps.back();
  }
  return m;
}

/**
 * Detects active sets, builds and solves the inverse QP. An iteration-limit result is
 * returned with its status and residuals; an infeasible or unbounded QP throws.
 */
inline CalibratedModel calibrate(const CalibrationProblem& prob, const CalibrationOptions& opt = {}) {
  prob.validate();
  const ActiveSets sets = detect_active_sets(prob.observed, prob.scenario, opt.binding_tol);
  if (!sets.violations.empty()) {
    log::warn("calibrate: " + std::to_string(sets.violations.size()) +
              " observations outside their bounds were clipped; first: " + sets.violations.front());
  }
  if (!(opt.pin_price && prob.observed.price))
    log::warn("calibrate: prices are not pinned; the cost scale is only anchored by the regressions");
  const InverseQp iq = build_inverse_qp(prob, sets, opt);
  const qp::QpSolution sol = qp::solve_qp(iq.problem, opt.solver);
  switch (sol.status) {
    case qp::QpStatus::Optimal:
      break;
    case qp::QpStatus::IterLimit:
      log::warn("calibrate: solver stopped at the iteration limit");
      break;
    default:
      throw SolverError("inverse problem " + std::string(qp::to_string(sol.status)) +
                        (opt.storage_slack_weight > 0.0 ? "" : " (storage rows are exact; consider storage slack)"));
  }
  CalibratedModel m = extract_model(prob, iq, sol, opt);
  m.violations = sets.violations;
  return m;
}

/**
 * Costs implied by the coefficients for new features: c1 = <Z1, b1>, c2 = max(<Z2, b2>, 0),
 * k = max(<Z3, b3>, 0). Feature names must match the training layout.
 */
inline market::CostCurves predict_costs(const CalibratedModel& model, const std::vector<TechnologyFeatures>& features) {
  const auto I = model.coefficients.size();
  if (features.size() != I) throw DataError("predict_costs: one feature set per technology required");
  const auto T = features.front().groups[0].Z.rows();
  market::CostCurves cc{Matrix(I, T), Matrix(I, T), Matrix(I, T)};
  for (std::size_t i = 0; i < I; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      const FeatureBlock& fb = features[i].groups[j];
      if (fb.Z.rows() != T) throw DataError("predict_costs: feature blocks differ in length");
      if (fb.schema_hash() != model.coefficients[i].schema_hash[j] || fb.names != model.coefficients[i].names[j])
        throw DataError("predict_costs: feature schema of technology " + model.technologies[i] +
                        " differs from the training layout");
      const Vector v = fb.Z * model.coefficients[i].b[j];
      Matrix& target = j == 0 ? cc.c1 : j == 1 ? cc.c2 : cc.k;
      target.row(static_cast<Eigen::Index>(i)) = v.transpose();
    }
  cc.c2 = cc.c2.cwiseMax(0.0);
  cc.k = cc.k.cwiseMax(0.0);
  return cc;
}

/// Rebuilds the training feature layout of every technology from a frame.
inline std::vector<TechnologyFeatures> features_for(const CalibratedModel& model, const HourlyFrame& frame) {
  std::vector<TechnologyFeatures> out;
  for (const auto& tc : model.coefficients) {
    TechnologyFeatures tf;
    for (std::size_t j = 0; j < 3; ++j) tf.groups[j] = FeatureBlock::from_frame(frame, tc.names[j]);
    out.push_back(std::move(tf));
  }
  return out;
}

/// Features of the training problem, for round-trip checks.
inline market::CostCurves predict_training_costs(const CalibratedModel& model, const CalibrationProblem& prob) {
  return predict_costs(model, prob.features);
}

}  // namespace ppaval::inverse
