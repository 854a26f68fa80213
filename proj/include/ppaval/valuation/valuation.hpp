#pragma once

// PPA economics. Discounting uses the compounding factor rho_t = (1 + r)^(t / 8760) >= 1,
// with t the hour index from contract start; present values divide by rho_t.

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ppaval/common.hpp"

namespace ppaval::valuation {

inline constexpr double kHoursPerYear = 8760.0;

namespace detail {

inline void same_length(const Vector& a, const Vector& b, const char* what) {
  if (a.size() != b.size())
    throw std::invalid_argument(std::string(what) + ": series lengths differ (" + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
}

}  // namespace detail

/// rho_t for t = 0..T-1.
inline Vector discount_factors(int T, double annual_rate) {
  require(T >= 0, "discount_factors: negative length");
  require(annual_rate >= 0.0 && std::isfinite(annual_rate), "discount_factors: rate must be >= 0");
  Vector rho(T);
  const double log_growth = std::log1p(annual_rate);
  for (int t = 0; t < T; ++t) rho[t] = std::exp(log_growth * t / kHoursPerYear);
  return rho;
}

/// Volume-weighted average price sum(q p) / sum(q).
inline double capture_price(const Vector& q, const Vector& p) {
  detail::same_length(q, p, "capture_price");
  const double total = q.sum();
  if (!(total > 0.0)) throw std::invalid_argument("capture_price: total volume must be positive");
  return q.dot(p) / total;
}

struct PpaContract {
  double fixed_price = 0.0;    ///< EUR/MWh
  Vector volumes;              ///< q_t, MWh
  double annual_discount_rate = 0.0;
  Vector green_premium;        ///< p^G_t; empty means zero

  [[nodiscard]] int horizon() const { return static_cast<int>(volumes.size()); }

  [[nodiscard]] Vector premium() const {
    return green_premium.size() ? green_premium : Vector::Zero(volumes.size());
  }

  void validate() const {
    require(volumes.size() > 0, "PpaContract: empty volume profile");
    require(volumes.allFinite() && (volumes.array() >= 0.0).all(), "PpaContract: volumes must be finite and >= 0");
    require(volumes.sum() > 0.0, "PpaContract: total volume must be positive");
    require(annual_discount_rate >= 0.0, "PpaContract: discount rate must be >= 0");
    require(std::isfinite(fixed_price), "PpaContract: fixed price must be finite");
    if (green_premium.size()) detail::same_length(volumes, green_premium, "PpaContract green premium");
  }
};

/// sum q_t (p^E_t - p + p^G_t) / rho_t for explicit compounding factors rho_t > 0.
inline double ppa_value(const Vector& q, const Vector& market_prices, double fixed_price, const Vector& green_premium,
                        const Vector& rho) {
  detail::same_length(q, market_prices, "ppa_value");
  detail::same_length(q, rho, "ppa_value discount factors");
  require((rho.array() > 0.0).all(), "ppa_value: discount factors must be positive");
  const Vector pg = green_premium.size() ? green_premium : Vector::Zero(q.size());
  detail::same_length(q, pg, "ppa_value green premium");
  const Vector margin = market_prices.array() - fixed_price + pg.array();
  return (q.array() * margin.array() / rho.array()).sum();
}

/// Present value for the buyer at the contract's discount rate.
inline double ppa_value(const PpaContract& c, const Vector& market_prices) {
  c.validate();
  return ppa_value(c.volumes, market_prices, c.fixed_price, c.premium(),
                   discount_factors(c.horizon(), c.annual_discount_rate));
}

/// Fixed price at which ppa_value is zero.
inline double indifference_price(const Vector& q, const Vector& market_prices, const Vector& green_premium,
                                 double annual_rate) {
  detail::same_length(q, market_prices, "indifference_price");
  const Vector pg = green_premium.size() ? green_premium : Vector::Zero(q.size());
  detail::same_length(q, pg, "indifference_price");
  const Vector w = q.array() / discount_factors(static_cast<int>(q.size()), annual_rate).array();
  const double denom = w.sum();
  if (!(denom > 0.0)) throw std::invalid_argument("indifference_price: discounted volume must be positive");
  return (w.dot(market_prices) + w.dot(pg)) / denom;
}

/// Price P solving sum Q_t (P - p_t) / rho_t = 0.
inline double break_even_price(const Vector& Q, const Vector& predicted_prices, double annual_rate) {
  return indifference_price(Q, predicted_prices, Vector(), annual_rate);
}

/// Net present value sum Q_t (P - p_t) / rho_t of selling at P.
inline double break_even_npv(const Vector& Q, const Vector& predicted_prices, double annual_rate, double P) {
  detail::same_length(Q, predicted_prices, "break_even_npv");
  const Vector rho = discount_factors(static_cast<int>(Q.size()), annual_rate);
  return (Q.array() * (P - predicted_prices.array()) / rho.array()).sum();
}

/// sum w |p_hat - p| / (mean(p) sum w).
inline double nmae(const Vector& predicted, const Vector& actual, const Vector& weights) {
  detail::same_length(predicted, actual, "nmae");
  detail::same_length(predicted, weights, "nmae weights");
  require(actual.size() > 0, "nmae: empty series");
  require((weights.array() >= 0.0).all(), "nmae: weights must be >= 0");
  const double wsum = weights.sum();
  if (!(wsum > 0.0)) throw std::invalid_argument("nmae: weights sum to zero");
  const double mean = actual.mean();
  if (mean == 0.0) throw DataError("nmae: mean actual price is zero, metric undefined");
  return weights.dot((predicted - actual).cwiseAbs()) / (mean * wsum);
}

inline double nmae(const Vector& predicted, const Vector& actual) {
  return nmae(predicted, actual, Vector::Ones(actual.size()));
}

struct BacktestReport {
  std::map<std::string, double> nmae;  ///< keyed by weighting profile
  Vector errors;                       ///< p_hat - p per period
  double mean_price = 0.0;
};

/// NMAE under each weighting profile (e.g. base = ones, solar and wind capacity factors).
inline BacktestReport backtest(const Vector& predicted, const Vector& actual,
                               const std::map<std::string, Vector>& profiles) {
  detail::same_length(predicted, actual, "backtest");
  BacktestReport r;
  r.errors = predicted - actual;
  r.mean_price = actual.mean();
  for (const auto& [name, w] : profiles) r.nmae[name] = nmae(predicted, actual, w);
  return r;
}

enum class Factor { GasPrice, CoalPrice, CarbonPrice, Demand, WindOutput, SolarOutput };

inline const std::vector<std::pair<Factor, std::string>>& factor_names() {
  static const std::vector<std::pair<Factor, std::string>> names{
      {Factor::GasPrice, "gas_price"},   {Factor::CoalPrice, "coal_price"},   {Factor::CarbonPrice, "carbon_price"},
      {Factor::Demand, "demand"},        {Factor::WindOutput, "wind_output"}, {Factor::SolarOutput, "solar_output"}};
  return names;
}

inline std::string to_string(Factor f) {
  for (const auto& [k, v] : factor_names())
    if (k == f) return v;
  return "unknown";
}

inline Factor parse_factor(const std::string& s) {
  for (const auto& [k, v] : factor_names())
    if (v == s) return k;
  throw std::invalid_argument("unknown sensitivity factor '" + s + "'");
}

/// Input series a factor scales: gas, coal, carbon, demand, wind or solar.
inline std::string factor_column(Factor f) {
  switch (f) {
    case Factor::GasPrice: return "gas";
    case Factor::CoalPrice: return "coal";
    case Factor::CarbonPrice: return "carbon";
    case Factor::Demand: return "demand";
    case Factor::WindOutput: return "wind";
    case Factor::SolarOutput: return "solar";
  }
  return "";
}

/// 0.70, 0.75, ..., 1.30 computed as (70 + 5k) / 100 so 1.0 is exact.
inline std::vector<double> sensitivity_multipliers() {
  std::vector<double> m;
  for (int k = 0; k < 13; ++k) m.push_back((70.0 + 5.0 * k) / 100.0);
  return m;
}

struct SensitivityGrid {
  Factor factor = Factor::GasPrice;
  std::vector<double> multipliers;
  std::vector<std::optional<double>> capture_prices;  ///< empty entries mark failed runs
  std::vector<std::string> failures;
  double base_capture_price = 0.0;
};

/**
 * Runs `pipeline(multiplier)` for every grid point. The pipeline returns the capture
 * price; a run that throws leaves a gap and the sweep continues. The base value is
 * the pipeline at multiplier 1.
 */
inline SensitivityGrid sensitivity_sweep(Factor factor, const std::function<double(double)>& pipeline) {
  SensitivityGrid g;
  g.factor = factor;
  g.base_capture_price = pipeline(1.0);
  g.multipliers = sensitivity_multipliers();
  for (double m : g.multipliers) {
    try {
      g.capture_prices.push_back(pipeline(m));
    } catch (const std::exception& e) {
      g.capture_prices.emplace_back();
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.2f", m);
      g.failures.push_back(std::string("multiplier ") + buf + ": " + e.what());
      log::warn("sensitivity run failed at multiplier " + std::string(buf) + ": " + e.what());
    }
  }
  return g;
}

}  // namespace ppaval::valuation
