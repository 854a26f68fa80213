#pragma once

// Multi-year PPA case study on a Spain-like synthetic system (quantities in GW and GWh):
// history generation, shape-model fit, inverse calibration on a recent window, scenario
// build, rolling-horizon price forecast and solar PPA valuation.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ppaval/inverse/calibration.hpp"
#include "ppaval/market/dispatch.hpp"
#include "ppaval/scenario/builder.hpp"
#include "ppaval/synthetic.hpp"
#include "ppaval/valuation/valuation.hpp"

namespace ppaval::casestudy {

/// Marginal cost c1 = b . (1, gas, coal, carbon) plus a quadratic term, per GW.
struct CostTruth {
  std::string id;
  Eigen::Vector4d b;
  double c2 = 0.0;
};

struct HistoryConfig {
  int years = 2;             ///< full calendar years ending the year before the horizon
  std::uint64_t seed = 7;
  double gas = 40.0;         ///< mean price levels of the history
  double coal = 12.0;
  double carbon = 80.0;
  int calibration_days = 28;  ///< window at the end of the history used for calibration
  std::vector<CostTruth> fleet{{"nuclear", {8.0, 0.0, 0.0, 0.0}, 0.1},
                               {"coal", {4.0, 0.0, 2.5, 0.9}, 1.0},
                               {"gas", {3.0, 1.9, 0.0, 0.37}, 0.5}};
};

struct CaseConfig {
  scenario::ScenarioConfig scenarios;
  HistoryConfig history;
  int harmonics = 4;
  double lambda = 0.0;          ///< calibration penalty on every coefficient group
  double ramp_headroom = 1.5;   ///< multiplier on the ramp limits inferred from history
  int window_hours = 168;
  double ppa_plant_gw = 0.1;
  double discount_rate = 0.11;
};

inline CaseConfig parse_case_config(const nlohmann::json& j) {
  CaseConfig c;
  c.scenarios = scenario::parse_scenario_config(j);
  try {
    if (j.contains("history")) {
      const auto& h = j["history"];
      c.history.years = h.value("years", c.history.years);
      c.history.seed = h.value("seed", c.history.seed);
      c.history.gas = h.value("gas", c.history.gas);
      c.history.coal = h.value("coal", c.history.coal);
      c.history.carbon = h.value("carbon", c.history.carbon);
      c.history.calibration_days = h.value("calibration_days", c.history.calibration_days);
      if (h.contains("fleet")) {
        c.history.fleet.clear();
        for (const auto& [id, f] : h["fleet"].items()) {
          const auto b = f.at("b").get<std::vector<double>>();
          if (b.size() != 4) throw DataError("fleet '" + id + "': b needs 4 values");
          c.history.fleet.push_back({id, {b[0], b[1], b[2], b[3]}, f.at("c2").get<double>()});
        }
      }
    }
    c.harmonics = j.value("harmonics", c.harmonics);
    c.lambda = j.value("lambda", c.lambda);
    c.ramp_headroom = j.value("ramp_headroom", c.ramp_headroom);
    c.window_hours = j.value("window_hours", c.window_hours);
    if (j.contains("ppa")) {
      c.ppa_plant_gw = j["ppa"].value("plant_gw", c.ppa_plant_gw);
      c.discount_rate = j["ppa"].value("discount_rate", c.discount_rate);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed case config: ") + e.what());
  }
  // keep the fleet in the order of the conventional technologies
  std::vector<CostTruth> ordered;
  for (const auto& id : c.scenarios.conventional) {
    auto it = std::find_if(c.history.fleet.begin(), c.history.fleet.end(), [&](const CostTruth& t) { return t.id == id; });
    if (it == c.history.fleet.end()) throw DataError("history fleet has no entry for '" + id + "'");
    ordered.push_back(*it);
  }
  c.history.fleet = std::move(ordered);
  return c;
}

/// Fixed-date national holidays of the given years.
inline HolidayCalendar fixed_holidays(int first_year, int last_year) {
  HolidayCalendar cal;
  const int dates[][2] = {{1, 1}, {1, 6}, {5, 1}, {8, 15}, {10, 12}, {11, 1}, {12, 6}, {12, 8}, {12, 25}};
  for (int y = first_year; y <= last_year; ++y)
    for (const auto& d : dates) cal.add(y, d[0], d[1]);
  return cal;
}

/**
 * Hourly history: demand (GW), capacity factors of solar, wind and hydro, temperature
 * and daily fuel and carbon prices. Demand is scaled so its first year totals base_twh.
 */
inline HourlyFrame generate_history(const CaseConfig& cfg, const HolidayCalendar& calendar) {
  const auto& h = cfg.history;
  const int first_year = cfg.scenarios.start_year - h.years;
  const Timestamp t0 = time::make_timestamp(first_year, 1, 1, 0);
  const int T = static_cast<int>((time::make_timestamp(cfg.scenarios.start_year, 1, 1, 0) - t0) / time::kHour);
  const int days = T / 24;
  constexpr double pi = std::numbers::pi;
  std::mt19937_64 rng(h.seed);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u01;

  HourlyFrame f;
  f.timestamps = time::hourly_grid(t0, T);
  f.set("gas", synthetic::detail::daily_path(rng, days, h.gas, 0.15 * h.gas, 0.9, 1.0));
  f.set("coal", synthetic::detail::daily_path(rng, days, h.coal, 0.12 * h.coal, 0.9, 1.0));
  f.set("carbon", synthetic::detail::daily_path(rng, days, h.carbon, 0.1 * h.carbon, 0.9, 1.0));

  Vector demand(T), solar(T), wind(T), hydro(T), temperature(T);
  double wind_state = 0.0, hydro_state = 0.0, cloud = 1.0;
  for (int t = 0; t < T; ++t) {
    const Timestamp ts = f.timestamps[static_cast<std::size_t>(t)];
    const int hr = time::hour_of_day(ts);
    const auto date = time::date_of(ts);
    const double doy = static_cast<double>(time::day_number(ts) - time::days_from_civil({date.year, 1, 1}));
    const double season = 2.0 * pi * doy / 365.0;
    if (hr == 0) cloud = 0.55 + 0.45 * u01(rng);

    const bool off = time::weekday(ts) >= 5 || calendar.contains(ts);
    const double daily = 1.0 + 0.12 * std::cos(2.0 * pi * (hr - 13) / 24.0) + 0.05 * std::cos(2.0 * pi * (hr - 20) / 12.0);
    const double yearly = 1.0 + 0.07 * std::cos(season - 2.0 * pi * 15.0 / 365.0) + 0.05 * std::cos(2.0 * season - 2.0 * pi * 400.0 / 365.0);
    demand[t] = daily * yearly * (off ? 0.9 : 1.0) * (1.0 + 0.02 * n01(rng));

    const double daylight = 12.0 + 2.5 * std::cos(season - 2.0 * pi * 172.0 / 365.0);
    const double rise = 13.0 - daylight / 2.0;
    const double phase = (hr + 0.5 - rise) / daylight;
    const double peak = 0.62 + 0.18 * std::cos(season - 2.0 * pi * 172.0 / 365.0);
    solar[t] = phase > 0.0 && phase < 1.0 ? peak * std::sin(pi * phase) * cloud : 0.0;

    wind_state = 0.97 * wind_state + 0.06 * n01(rng);
    wind[t] = std::clamp(0.25 + 0.05 * std::cos(season - 0.3) + wind_state, 0.02, 0.95);
    hydro_state = 0.995 * hydro_state + 0.01 * n01(rng);
    hydro[t] = std::clamp(0.22 + 0.08 * std::cos(season - 2.0 * pi * 100.0 / 365.0) + hydro_state, 0.03, 0.8);
    temperature[t] = 16.0 - 8.0 * std::cos(season - 2.0 * pi * 20.0 / 365.0) + 4.0 * std::cos(2.0 * pi * (hr - 15) / 24.0) +
                     1.5 * n01(rng);
  }
  double first_year_sum = 0.0;
  for (int t = 0; t < T; ++t)
    if (time::date_of(f.timestamps[static_cast<std::size_t>(t)]).year == first_year) first_year_sum += demand[t];
  demand *= 1000.0 * cfg.scenarios.base_demand_twh / first_year_sum;
  f.set("demand", demand);
  f.set("solar_cf", solar);
  f.set("wind_cf", wind);
  f.set("hydro_cf", hydro);
  f.set("temperature", temperature);
  return f;
}

/// True marginal costs of the history fleet on a frame with gas, coal and carbon columns.
inline market::CostCurves true_costs(const HistoryConfig& h, const HourlyFrame& f) {
  const auto I = static_cast<Eigen::Index>(h.fleet.size());
  const int T = f.size();
  market::CostCurves cc{Matrix(I, T), Matrix(I, T), Matrix::Zero(I, T)};
  for (Eigen::Index i = 0; i < I; ++i) {
    const auto& b = h.fleet[static_cast<std::size_t>(i)].b;
    cc.c1.row(i) = (b[0] + b[1] * f.at("gas").array() + b[2] * f.at("coal").array() + b[3] * f.at("carbon").array())
                       .matrix()
                       .transpose();
    cc.c2.row(i).setConstant(h.fleet[static_cast<std::size_t>(i)].c2);
  }
  return cc;
}

/// Start-year fleet dispatched against the calibration window of the history.
struct TrainingData {
  HourlyFrame frame;
  market::MarketScenario scenario;
  market::DispatchSolution dispatch;
};

inline TrainingData training_window(const CaseConfig& cfg, const HourlyFrame& history,
                                    const qp::SolverSettings& solver = {}) {
  const auto& sc_cfg = cfg.scenarios;
  const int T = 24 * cfg.history.calibration_days;
  require(T >= 48 && T <= history.size(), "calibration window must span 2 days and fit in the history");
  TrainingData d;
  d.frame = history.slice(history.size() - T, T);
  auto& f = d.frame;
  const auto& caps = sc_cfg.capacities_start;
  auto cap = [&](const std::string& tech) { return caps.count(tech) ? caps.at(tech) : 0.0; };
  f.set("solar", cap("solar") * f.at("solar_cf"));
  f.set("wind", cap("wind") * f.at("wind_cf"));
  f.set("hydro", cap("hydro") * f.at("hydro_cf"));
  f.set("residual_demand", scenario::frame_residual_demand(f));

  const auto I = static_cast<Eigen::Index>(sc_cfg.conventional.size());
  std::vector<market::Technology> techs;
  Matrix capacity(I, T);
  for (Eigen::Index i = 0; i < I; ++i) {
    techs.push_back({sc_cfg.conventional[static_cast<std::size_t>(i)], true});
    capacity.row(i).setConstant(cap(sc_cfg.conventional[static_cast<std::size_t>(i)]));
  }
  d.scenario = market::MarketScenario::simple(std::move(techs), f.at("residual_demand"), capacity);
  d.scenario.timestamps = f.timestamps;
  if (cap(sc_cfg.storage) > 0.0) {
    d.scenario.storage_charge_cap.setConstant(cap(sc_cfg.storage));
    d.scenario.storage_discharge_cap.setConstant(cap(sc_cfg.storage));
    d.scenario.storage_energy_cap.setConstant(sc_cfg.storage_hours * cap(sc_cfg.storage));
    d.scenario.storage_efficiency = sc_cfg.storage_efficiency;
  }
  d.dispatch = market::solve_dispatch(d.scenario, true_costs(cfg.history, f), solver,
                                      {market::NegativeDemandPolicy::Curtailment});
  return d;
}

/// Regressors of every cost group: intercept plus gas, coal and carbon for c1.
inline std::vector<inverse::TechnologyFeatures> cost_features(const HourlyFrame& f, int n_tech) {
  return synthetic::cost_features(f, n_tech);
}

inline inverse::CalibrationProblem calibration_problem(const CaseConfig& cfg, const TrainingData& d) {
  inverse::CalibrationProblem p;
  p.scenario = d.scenario;
  p.observed = inverse::ObservedDispatch::from_dispatch(d.dispatch, true);
  p.features = cost_features(d.frame, d.scenario.n_tech());
  p.weights = Vector::Ones(d.scenario.n_periods());
  p.lambda = Matrix::Constant(d.scenario.n_tech(), 3, cfg.lambda);
  return p;
}

/// Observed ramps, widened by the headroom factor, at the start-year capacities.
inline scenario::RampReference ramp_reference(const CaseConfig& cfg, const TrainingData& d) {
  const auto r = inverse::infer_ramp_limits(d.dispatch.x);
  const auto I = static_cast<Eigen::Index>(cfg.scenarios.conventional.size());
  scenario::RampReference out{cfg.ramp_headroom * r.up, cfg.ramp_headroom * r.down, Vector(I)};
  for (Eigen::Index i = 0; i < I; ++i)
    out.capacity[i] = cfg.scenarios.capacities_start.at(cfg.scenarios.conventional[static_cast<std::size_t>(i)]);
  return out;
}

/// Rolling-horizon prices of a scenario frame under a calibrated model.
inline market::DispatchSolution forecast(const inverse::CalibratedModel& model, const market::MarketScenario& sc,
                                         const HourlyFrame& frame, int window_hours,
                                         const qp::SolverSettings& solver = {}) {
  const auto costs = inverse::predict_costs(model, inverse::features_for(model, frame));
  return market::rolling_horizon_dispatch(sc, costs, solver, window_hours, true,
                                          {market::NegativeDemandPolicy::Curtailment});
}

/**
 * Frame with one input factor scaled by `multiplier`; residual demand is recomputed
 * from demand and whichever of solar, wind, hydro and run_of_river are present.
 */
inline HourlyFrame apply_factor(const HourlyFrame& f, valuation::Factor factor, double multiplier) {
  HourlyFrame out = f;
  const auto name = valuation::factor_column(factor);
  out.set(name, multiplier * f.at(name));
  Vector r = out.at("demand");
  for (const char* res : {"solar", "wind", "hydro", "run_of_river"})
    if (out.has(res)) r -= out.at(res);
  out.set("residual_demand", r);
  return out;
}

struct ScenarioResult {
  std::string name;
  double capture_price = 0.0;
  double break_even = 0.0;
  double mean_price = 0.0;
  Vector price;
  Vector ppa_volume;
  std::vector<double> yearly_capture;
  double seconds = 0.0;
};

struct CaseStudyResult {
  inverse::CalibratedModel model;
  double training_nmae = 0.0;  ///< in-sample price fit of the calibrated model
  std::vector<scenario::BuiltScenario> scenarios;
  std::vector<ScenarioResult> results;
  double seconds = 0.0;

  [[nodiscard]] const ScenarioResult& result(const std::string& name) const {
    for (const auto& r : results)
      if (r.name == name) return r;
    throw DataError("no result for scenario '" + name + "'");
  }
};

inline ScenarioResult value_scenario(const CaseConfig& cfg, const scenario::BuiltScenario& b, const Vector& price,
                                     double seconds) {
  ScenarioResult r;
  r.name = b.spec.name;
  r.price = price;
  r.ppa_volume = cfg.ppa_plant_gw * b.frame.at("solar_cf");
  r.capture_price = valuation::capture_price(r.ppa_volume, price);
  r.break_even = valuation::break_even_price(r.ppa_volume, price, cfg.discount_rate);
  r.mean_price = price.mean();
  for (int y = cfg.scenarios.start_year; y <= cfg.scenarios.end_year; ++y) {
    double qp = 0.0, q = 0.0;
    for (int t = 0; t < price.size(); ++t)
      if (time::date_of(b.frame.timestamps[static_cast<std::size_t>(t)]).year == y) {
        qp += r.ppa_volume[t] * price[t];
        q += r.ppa_volume[t];
      }
    r.yearly_capture.push_back(q > 0.0 ? qp / q : std::nan(""));
  }
  r.seconds = seconds;
  return r;
}

/// Everything up to the built scenarios: history, calibration and shape models.
struct Prepared {
  inverse::CalibratedModel model;
  double training_nmae = 0.0;
  std::vector<scenario::BuiltScenario> scenarios;
};

inline Prepared prepare(const CaseConfig& cfg, const qp::SolverSettings& solver = {}) {
  const auto& sc = cfg.scenarios;
  const auto calendar = fixed_holidays(sc.start_year - cfg.history.years, sc.end_year);
  const HourlyFrame history = generate_history(cfg, calendar);
  const TrainingData train = training_window(cfg, history, solver);
  Prepared p;
  const auto problem = calibration_problem(cfg, train);
  p.model = inverse::calibrate(problem);
  const auto fitted = market::solve_dispatch(train.scenario, inverse::predict_training_costs(p.model, problem), solver,
                                             {market::NegativeDemandPolicy::Curtailment});
  p.training_nmae = valuation::nmae(fitted.price, train.dispatch.price);
  const auto shapes = scenario::fit_shape_models(history, calendar, cfg.harmonics);
  p.scenarios = scenario::build_market_scenarios(sc, shapes, ramp_reference(cfg, train));
  return p;
}

inline CaseStudyResult run_case_study(const CaseConfig& cfg, const qp::SolverSettings& solver = {}) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  Prepared p = prepare(cfg, solver);
  CaseStudyResult out;
  out.model = std::move(p.model);
  out.training_nmae = p.training_nmae;
  out.scenarios = std::move(p.scenarios);
  for (const auto& b : out.scenarios) {
    const auto s0 = clock::now();
    const auto d = forecast(out.model, b.market, b.frame, cfg.window_hours, solver);
    out.results.push_back(value_scenario(cfg, b, d.price, std::chrono::duration<double>(clock::now() - s0).count()));
  }
  out.seconds = std::chrono::duration<double>(clock::now() - start).count();
  return out;
}

}  // namespace ppaval::casestudy
