#pragma once

// Synthetic hourly market: fundamentals, a three-technology thermal fleet whose marginal
// costs are linear in fuel and carbon prices, optional storage and the resulting dispatch.

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "ppaval/inverse/calibration.hpp"
#include "ppaval/market/dispatch.hpp"
#include "ppaval/series.hpp"

namespace ppaval::synthetic {

/// Cost regressors shared by every technology, in column order.
inline std::vector<std::string> cost_feature_names() { return {"intercept", "gas", "coal", "carbon"}; }

struct TechnologyTruth {
  std::string id;
  double capacity = 0.0;   ///< MW
  Eigen::Vector4d b1;      ///< c1 = b1 . (1, gas, coal, carbon)
  double c2 = 0.01;
  double k = 0.0;
};

inline std::vector<TechnologyTruth> default_fleet() {
  return {
      {"nuclear", 1500.0, {8.0, 0.0, 0.0, 0.0}, 0.01, 0.0},
      {"coal", 2500.0, {4.0, 0.0, 2.5, 0.9}, 0.01, 0.0},
      {"gas", 5000.0, {3.0, 1.9, 0.0, 0.37}, 0.01, 0.0},
  };
}

struct Config {
  int days = 14;
  std::uint64_t seed = 1;
  Timestamp start = time::make_timestamp(2023, 1, 2);
  std::vector<TechnologyTruth> fleet = default_fleet();
  double fuel_multiplier = 1.0;     ///< scales gas and coal prices
  double carbon_multiplier = 1.0;
  double demand_multiplier = 1.0;
  double solar_multiplier = 1.0;
  double wind_multiplier = 1.0;
  double solar_capacity = 2500.0;   ///< MW
  double wind_capacity = 1500.0;
  double storage_energy = 0.0;      ///< MWh; 0 disables storage
  double storage_power = 0.0;       ///< MW charge and discharge
  double storage_efficiency = 0.9;
};

struct Market {
  HourlyFrame frame;                ///< demand, gas, coal, carbon, temperature, solar, wind, run_of_river, residual_demand
  market::MarketScenario scenario;
  market::CostCurves costs;
  market::DispatchSolution dispatch;
};

namespace detail {

/// Daily AR(1) path around `mean`, held constant within each day.
inline Vector daily_path(std::mt19937_64& rng, int days, double mean, double sd, double phi, double floor) {
  std::normal_distribution<double> n01;
  Vector out(days * 24);
  double dev = sd * n01(rng);
  for (int d = 0; d < days; ++d) {
    if (d > 0) dev = phi * dev + sd * std::sqrt(1.0 - phi * phi) * n01(rng);
    out.segment(d * 24, 24).setConstant(std::max(floor, mean + dev));
  }
  return out;
}

}  // namespace detail

/// Fundamentals only; the random stream depends on the seed and the day count.
inline HourlyFrame generate_frame(const Config& cfg) {
  require(cfg.days >= 1, "synthetic: days must be >= 1");
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u01;
  const int T = cfg.days * 24;
  constexpr double pi = std::numbers::pi;

  HourlyFrame f;
  f.timestamps = time::hourly_grid(cfg.start, T);
  const Vector gas = detail::daily_path(rng, cfg.days, 40.0, 6.0, 0.8, 5.0) * cfg.fuel_multiplier;
  const Vector coal = detail::daily_path(rng, cfg.days, 12.0, 1.5, 0.8, 2.0) * cfg.fuel_multiplier;
  const Vector carbon = detail::daily_path(rng, cfg.days, 80.0, 8.0, 0.8, 5.0) * cfg.carbon_multiplier;

  Vector demand(T), temperature(T), solar(T), wind(T), ror(T);
  double wind_state = 0.4;
  std::vector<double> cloud(static_cast<std::size_t>(cfg.days));
  for (auto& c : cloud) c = 0.5 + 0.5 * u01(rng);
  for (int t = 0; t < T; ++t) {
    const Timestamp ts = f.timestamps[static_cast<std::size_t>(t)];
    const int h = time::hour_of_day(ts);
    const bool weekend = time::weekday(ts) >= 5;
    const double day_shape = std::cos(2.0 * pi * (h - 14) / 24.0);
    demand[t] = (6000.0 + 1000.0 * day_shape - (weekend ? 500.0 : 0.0) + 150.0 * n01(rng)) * cfg.demand_multiplier;
    temperature[t] = 12.0 + 5.0 * day_shape + 1.0 * n01(rng);
    const double sun = (h >= 6 && h <= 18) ? std::sin(pi * (h - 6) / 12.0) : 0.0;
    solar[t] = cfg.solar_capacity * sun * cloud[static_cast<std::size_t>(t / 24)] * cfg.solar_multiplier;
    wind_state = std::clamp(0.9 * wind_state + 0.04 + 0.08 * n01(rng), 0.0, 1.0);
    wind[t] = cfg.wind_capacity * wind_state * cfg.wind_multiplier;
    ror[t] = std::max(0.0, 300.0 + 30.0 * n01(rng));
  }
  f.set("demand", demand);
  f.set("gas", gas);
  f.set("coal", coal);
  f.set("carbon", carbon);
  f.set("temperature", temperature);
  f.set("solar", solar);
  f.set("wind", wind);
  f.set("run_of_river", ror);
  f.set("residual_demand", demand - solar - wind - ror);
  return f;
}

/// Cost regressors (intercept, gas, coal, carbon) for every technology and group.
inline std::vector<inverse::TechnologyFeatures> cost_features(const HourlyFrame& f, int n_tech) {
  const int T = f.size();
  inverse::FeatureBlock z1{Matrix(T, 4), cost_feature_names()};
  z1.Z.col(0).setOnes();
  z1.Z.col(1) = f.at("gas");
  z1.Z.col(2) = f.at("coal");
  z1.Z.col(3) = f.at("carbon");
  std::vector<inverse::TechnologyFeatures> out;
  for (int i = 0; i < n_tech; ++i)
    out.push_back({{z1, inverse::FeatureBlock::intercept(T), inverse::FeatureBlock::intercept(T)}});
  return out;
}

inline market::MarketScenario build_scenario(const Config& cfg, const HourlyFrame& f) {
  const int T = f.size();
  const auto I = static_cast<Eigen::Index>(cfg.fleet.size());
  std::vector<market::Technology> techs;
  Matrix cap(I, T);
  for (Eigen::Index i = 0; i < I; ++i) {
    techs.push_back({cfg.fleet[static_cast<std::size_t>(i)].id, true});
    cap.row(i).setConstant(cfg.fleet[static_cast<std::size_t>(i)].capacity);
  }
  market::MarketScenario sc = market::MarketScenario::simple(std::move(techs), f.at("residual_demand"), cap);
  sc.timestamps = f.timestamps;
  sc.storage_energy_cap.setConstant(cfg.storage_energy);
  sc.storage_charge_cap.setConstant(cfg.storage_energy > 0.0 ? cfg.storage_power : 0.0);
  sc.storage_discharge_cap.setConstant(cfg.storage_energy > 0.0 ? cfg.storage_power : 0.0);
  sc.storage_efficiency = cfg.storage_efficiency;
  return sc;
}

inline market::CostCurves true_costs(const Config& cfg, const HourlyFrame& f) {
  const int T = f.size();
  const auto I = static_cast<Eigen::Index>(cfg.fleet.size());
  market::CostCurves cc{Matrix(I, T), Matrix(I, T), Matrix(I, T)};
  const Vector& gas = f.at("gas");
  const Vector& coal = f.at("coal");
  const Vector& carbon = f.at("carbon");
  for (Eigen::Index i = 0; i < I; ++i) {
    const TechnologyTruth& tech = cfg.fleet[static_cast<std::size_t>(i)];
    for (int t = 0; t < T; ++t)
      cc.c1(i, t) = tech.b1[0] + tech.b1[1] * gas[t] + tech.b1[2] * coal[t] + tech.b1[3] * carbon[t];
    cc.c2.row(i).setConstant(tech.c2);
    cc.k.row(i).setConstant(tech.k);
  }
  return cc;
}

/// Fundamentals, scenario, true costs and the dispatch they produce.
inline Market generate(const Config& cfg, const qp::SolverSettings& solver = {}) {
  Market m;
  m.frame = generate_frame(cfg);
  m.scenario = build_scenario(cfg, m.frame);
  m.costs = true_costs(cfg, m.frame);
  m.dispatch = market::solve_dispatch(m.scenario, m.costs, solver);
  return m;
}

/// Calibration problem on a generated market with uniform weights and the given penalty.
inline inverse::CalibrationProblem calibration_problem(const Market& m, double lambda, bool with_price = true) {
  inverse::CalibrationProblem p;
  p.scenario = m.scenario;
  p.observed = inverse::ObservedDispatch::from_dispatch(m.dispatch, with_price);
  p.features = cost_features(m.frame, m.scenario.n_tech());
  p.weights = Vector::Ones(m.scenario.n_periods());
  p.lambda = Matrix::Constant(m.scenario.n_tech(), 3, lambda);
  return p;
}

}  // namespace ppaval::synthetic
