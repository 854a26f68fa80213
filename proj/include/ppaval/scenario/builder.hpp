#pragma once

// Hourly market scenarios for a multi-year horizon: yearly capacities, demand totals and
// monthly fuel curves from a policy config, hourly shapes from fitted seasonal models.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ppaval/features/seasonal.hpp"
#include "ppaval/market/scenario.hpp"
#include "ppaval/scenario/plan.hpp"
#include "ppaval/series.hpp"

namespace ppaval::scenario {

/// One named scenario relative to the planned (reference) path.
struct ScenarioSpec {
  std::string name;
  double renewable_share = 1.0;  ///< fraction of the planned renewable additions realized
  double demand_growth = 0.0;    ///< annual rate
  double fuel_change = 0.0;      ///< terminal change of fuel and carbon prices
};

struct ScenarioConfig {
  int start_year = 2023;
  int end_year = 2030;
  CapacityMap capacities_start;  ///< GW
  CapacityMap capacities_end;
  double base_demand_twh = 0.0;  ///< demand of the start year
  std::string reference;         ///< scenario whose capacities follow the plan
  std::vector<ScenarioSpec> scenarios;
  std::map<std::string, std::vector<double>> fuel_curves;  ///< monthly; 12 values repeat every year
  std::vector<std::string> conventional{"nuclear", "coal", "gas"};
  std::vector<std::string> renewables{"solar", "wind", "hydro"};
  std::string storage = "pumped_storage";
  double storage_hours = 8.0;    ///< energy capacity per unit of power
  double storage_efficiency = 0.9;
  CapacityMap firm_factors = default_firm_factors();

  [[nodiscard]] const ScenarioSpec& spec(const std::string& name) const {
    for (const auto& s : scenarios)
      if (s.name == name) return s;
    throw DataError("unknown scenario '" + name + "'");
  }

  void validate() const {
    if (end_year < start_year) throw DataError("scenario config: end_year before start_year");
    if (base_demand_twh <= 0.0) throw DataError("scenario config: base demand must be positive");
    if (scenarios.empty()) throw DataError("scenario config: no scenarios");
    for (const auto& [a, b] : {std::pair{&capacities_start, &capacities_end}, std::pair{&capacities_end, &capacities_start}})
      for (const auto& entry : *a)
        if (!b->count(entry.first))
          throw DataError("scenario config: technology '" + entry.first + "' appears in one capacity endpoint only");
    static_cast<void>(spec(reference));
    for (const char* f : {"gas", "coal", "carbon"}) {
      auto it = fuel_curves.find(f);
      if (it == fuel_curves.end()) throw DataError(std::string("scenario config: missing fuel curve '") + f + "'");
      const auto n = it->second.size();
      const auto months = static_cast<std::size_t>(12 * (end_year - start_year + 1));
      if (n != 12 && n != months)
        throw DataError(std::string("fuel curve '") + f + "' needs 12 or " + std::to_string(months) + " monthly values");
    }
    for (const auto& t : conventional)
      if (!capacities_start.count(t)) throw DataError("no capacity for conventional technology '" + t + "'");
  }
};

namespace detail {

inline CapacityMap capacity_map(const nlohmann::json& j) {
  CapacityMap out;
  for (const auto& [k, v] : j.items()) out[k] = v.get<double>();
  return out;
}

}  // namespace detail

/**
 * Parses the scenario blocks of a config document:
 *   capacities_start, capacities_end, demand_growth {base_twh, reference},
 *   fuel_curves {gas, coal, carbon}, scenario_overrides {name: {renewable_share,
 *   demand_growth, fuel_change}} and optional start_year, end_year, storage settings.
 */
inline ScenarioConfig parse_scenario_config(const nlohmann::json& j) {
  try {
    ScenarioConfig c;
    c.start_year = j.value("start_year", c.start_year);
    c.end_year = j.value("end_year", c.end_year);
    c.capacities_start = detail::capacity_map(j.at("capacities_start"));
    c.capacities_end = detail::capacity_map(j.at("capacities_end"));
    c.base_demand_twh = j.at("demand_growth").at("base_twh").get<double>();
    c.reference = j.at("demand_growth").at("reference").get<std::string>();
    for (const auto& [k, v] : j.at("fuel_curves").items()) c.fuel_curves[k] = v.get<std::vector<double>>();
    for (const auto& [name, o] : j.at("scenario_overrides").items())
      c.scenarios.push_back({name, o.at("renewable_share").get<double>(), o.at("demand_growth").get<double>(),
                             o.at("fuel_change").get<double>()});
    if (j.contains("conventional")) c.conventional = j["conventional"].get<std::vector<std::string>>();
    if (j.contains("renewables")) c.renewables = j["renewables"].get<std::vector<std::string>>();
    c.storage = j.value("storage", c.storage);
    c.storage_hours = j.value("storage_hours", c.storage_hours);
    c.storage_efficiency = j.value("storage_efficiency", c.storage_efficiency);
    if (j.contains("firm_factors"))
      for (const auto& [k, v] : detail::capacity_map(j["firm_factors"])) c.firm_factors[k] = v;
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed scenario config: ") + e.what());
  }
}

/// Hourly shape models; capacity factors are per unit of installed capacity.
struct ShapeModels {
  features::SeasonalModel demand;
  features::SeasonalModel solar_cf;
  features::SeasonalModel wind_cf;
  features::SeasonalModel hydro_cf;
  features::SeasonalModel temperature;
  HolidayCalendar calendar;
};

/// Fits the shape models on a history frame with columns demand, solar_cf, wind_cf,
/// hydro_cf and temperature.
inline ShapeModels fit_shape_models(const HourlyFrame& history, const HolidayCalendar& calendar, int harmonics) {
  features::SeasonalOptions plain;
  plain.harmonics = harmonics;
  plain.trend = false;
  features::SeasonalOptions with_calendar = plain;
  with_calendar.with_calendar = true;
  ShapeModels m;
  m.calendar = calendar;
  m.demand = features::fit_seasonal(history.timestamps, history.at("demand"), with_calendar, calendar);
  m.solar_cf = features::fit_seasonal(history.timestamps, history.at("solar_cf"), plain);
  m.wind_cf = features::fit_seasonal(history.timestamps, history.at("wind_cf"), plain);
  m.hydro_cf = features::fit_seasonal(history.timestamps, history.at("hydro_cf"), plain);
  m.temperature = features::fit_seasonal(history.timestamps, history.at("temperature"), plain);
  return m;
}

/// Reference ramp limits (per conventional technology) and the capacities they belong to.
struct RampReference {
  Vector up;
  Vector down;
  Vector capacity;
};

struct BuiltScenario {
  ScenarioSpec spec;
  CapacityPath capacities;
  std::vector<double> demand_twh;  ///< per year
  HourlyFrame frame;  ///< demand, residual_demand, solar, wind, hydro, solar_cf, gas, coal, carbon, temperature
  market::MarketScenario market;
};

/// Clamped capacity-factor prediction.
inline Vector predict_cf(const features::SeasonalModel& m, const std::vector<Timestamp>& ts) {
  return features::predict_seasonal(m, ts).cwiseMax(0.0).cwiseMin(1.0);
}

/// Hourly demand whose yearly sums equal totals (TWh) expressed in GWh.
inline Vector distribute_demand(const Vector& shape, const std::vector<Timestamp>& ts, int first_year,
                                const std::vector<double>& totals_twh) {
  Vector out = shape.cwiseMax(1e-6);
  std::vector<double> sums(totals_twh.size(), 0.0);
  auto year_of = [&](Timestamp t) { return static_cast<std::size_t>(time::date_of(t).year - first_year); };
  for (std::size_t t = 0; t < ts.size(); ++t) sums[year_of(ts[t])] += out[static_cast<Eigen::Index>(t)];
  for (std::size_t t = 0; t < ts.size(); ++t) {
    const auto y = year_of(ts[t]);
    out[static_cast<Eigen::Index>(t)] *= 1000.0 * totals_twh[y] / sums[y];
  }
  return out;
}

/// Hourly values of a monthly curve starting in January of first_year.
inline Vector monthly_to_hourly(const Vector& monthly, const std::vector<Timestamp>& ts, int first_year) {
  Vector out(static_cast<Eigen::Index>(ts.size()));
  for (std::size_t t = 0; t < ts.size(); ++t) {
    const auto c = time::date_of(ts[t]);
    const int k = 12 * (c.year - first_year) + (c.month - 1);
    if (k < 0 || k >= monthly.size()) throw DataError("fuel curve does not cover " + time::format_iso8601(ts[t]));
    out[static_cast<Eigen::Index>(t)] = monthly[k];
  }
  return out;
}

inline Vector full_fuel_curve(const ScenarioConfig& cfg, const std::string& name) {
  const auto& raw = cfg.fuel_curves.at(name);
  const int months = 12 * (cfg.end_year - cfg.start_year + 1);
  Vector out(months);
  for (int k = 0; k < months; ++k) out[k] = raw[raw.size() == 12 ? static_cast<std::size_t>(k % 12) : static_cast<std::size_t>(k)];
  return out;
}

/// Residual demand of a frame: demand minus solar, wind and hydro output.
inline Vector frame_residual_demand(const HourlyFrame& f) {
  return f.at("demand") - f.at("solar") - f.at("wind") - f.at("hydro");
}

/**
 * Builds every configured scenario. The reference scenario follows the planned
 * capacities and its own demand growth; the others realize a share of the renewable
 * additions and adjust nuclear and gas to keep the reference demand-to-firm-capacity
 * ratio. Ramp limits scale with capacity relative to `ramps`.
 */
inline std::vector<BuiltScenario> build_market_scenarios(const ScenarioConfig& cfg, const ShapeModels& shapes,
                                                         const RampReference& ramps) {
  cfg.validate();
  const int n_years = cfg.end_year - cfg.start_year;
  const auto I = static_cast<Eigen::Index>(cfg.conventional.size());
  require(ramps.up.size() == I && ramps.down.size() == I && ramps.capacity.size() == I,
          "build_market_scenarios: ramp reference must cover the conventional technologies");

  const Timestamp t0 = time::make_timestamp(cfg.start_year, 1, 1, 0);
  const int T = static_cast<int>((time::make_timestamp(cfg.end_year + 1, 1, 1, 0) - t0) / time::kHour);
  const auto ts = time::hourly_grid(t0, T);
  const Vector demand_shape = features::predict_seasonal(shapes.demand, ts, shapes.calendar);
  const Vector solar_cf = predict_cf(shapes.solar_cf, ts);
  const Vector wind_cf = predict_cf(shapes.wind_cf, ts);
  const Vector hydro_cf = predict_cf(shapes.hydro_cf, ts);
  const Vector temperature = features::predict_seasonal(shapes.temperature, ts);

  const auto reference_path = interpolate_capacities(cfg.capacities_start, cfg.capacities_end, cfg.start_year, cfg.end_year);
  const ScenarioSpec& ref_spec = cfg.spec(cfg.reference);
  const auto reference_demand = grow_demand(cfg.base_demand_twh, ref_spec.demand_growth, n_years);
  FirmRule rule;
  rule.factors = cfg.firm_factors;

  std::vector<BuiltScenario> out;
  for (const auto& spec : cfg.scenarios) {
    BuiltScenario b;
    b.spec = spec;
    b.demand_twh = grow_demand(cfg.base_demand_twh, spec.demand_growth, n_years);
    b.capacities = spec.name == cfg.reference
                       ? reference_path
                       : lagging_capacities(reference_path, reference_demand, b.demand_twh, cfg.renewables,
                                            spec.renewable_share, rule);

    auto hourly_capacity = [&](const std::string& tech) {
      Vector v(T);
      for (int t = 0; t < T; ++t)
        v[t] = b.capacities.at(tech, time::date_of(ts[static_cast<std::size_t>(t)]).year);
      return v;
    };

    HourlyFrame& f = b.frame;
    f.timestamps = ts;
    f.set("demand", distribute_demand(demand_shape, ts, cfg.start_year, b.demand_twh));
    f.set("solar_cf", solar_cf);
    f.set("solar", hourly_capacity("solar").cwiseProduct(solar_cf));
    f.set("wind", hourly_capacity("wind").cwiseProduct(wind_cf));
    f.set("hydro", hourly_capacity("hydro").cwiseProduct(hydro_cf));
    f.set("temperature", temperature);
    for (const char* fuel : {"gas", "coal", "carbon"})
      f.set(fuel, monthly_to_hourly(scale_fuel_curve(full_fuel_curve(cfg, fuel), spec.fuel_change), ts, cfg.start_year));
    f.set("residual_demand", frame_residual_demand(f));

    std::vector<market::Technology> techs;
    Matrix cap(I, T);
    for (Eigen::Index i = 0; i < I; ++i) {
      techs.push_back({cfg.conventional[static_cast<std::size_t>(i)], true});
      cap.row(i) = hourly_capacity(cfg.conventional[static_cast<std::size_t>(i)]).transpose();
    }
    auto& sc = b.market;
    sc = market::MarketScenario::simple(std::move(techs), f.at("residual_demand"), cap);
    sc.timestamps = ts;
    for (Eigen::Index i = 0; i < I; ++i)
      for (int t = 0; t < T; ++t) {
        sc.ramp_up(i, t) = scale_ramp(ramps.up[i], ramps.capacity[i], cap(i, t));
        sc.ramp_down(i, t) = scale_ramp(ramps.down[i], ramps.capacity[i], cap(i, t));
      }
    if (cfg.capacities_start.count(cfg.storage)) {
      const Vector power = hourly_capacity(cfg.storage);
      sc.storage_charge_cap = power;
      sc.storage_discharge_cap = power;
      sc.storage_energy_cap = cfg.storage_hours * power;
      sc.storage_efficiency = cfg.storage_efficiency;
    }
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace ppaval::scenario
