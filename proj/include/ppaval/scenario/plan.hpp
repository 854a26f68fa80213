#pragma once

// Yearly capacity and demand trajectories of policy scenarios.

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ppaval/common.hpp"

namespace ppaval::scenario {

using CapacityMap = std::map<std::string, double>;

/// Capacities per technology and year; values[tech][k] belongs to first_year + k.
struct CapacityPath {
  int first_year = 0;
  std::map<std::string, std::vector<double>> values;

  [[nodiscard]] int n_years() const { return values.empty() ? 0 : static_cast<int>(values.begin()->second.size()); }
  [[nodiscard]] int last_year() const { return first_year + n_years() - 1; }

  [[nodiscard]] double at(const std::string& tech, int year) const {
    auto it = values.find(tech);
    if (it == values.end()) throw DataError("no capacity path for technology '" + tech + "'");
    const int k = year - first_year;
    if (k < 0 || k >= n_years()) throw DataError("year " + std::to_string(year) + " outside the capacity path");
    return it->second[static_cast<std::size_t>(k)];
  }

  [[nodiscard]] CapacityMap year(int y) const {
    CapacityMap out;
    for (const auto& [tech, v] : values) out[tech] = at(tech, y);
    return out;
  }
};

/// Linear path from start_caps in start_year to end_caps in end_year, endpoints exact.
inline CapacityPath interpolate_capacities(const CapacityMap& start_caps, const CapacityMap& end_caps, int start_year,
                                           int end_year) {
  require(end_year >= start_year, "interpolate_capacities: end year before start year");
  for (const auto& [tech, v] : start_caps)
    if (!end_caps.count(tech)) throw DataError("technology '" + tech + "' has no end-year capacity");
  for (const auto& [tech, v] : end_caps)
    if (!start_caps.count(tech)) throw DataError("technology '" + tech + "' has no start-year capacity");
  CapacityPath path;
  path.first_year = start_year;
  const int n = end_year - start_year;
  for (const auto& [tech, a] : start_caps) {
    const double b = end_caps.at(tech);
    auto& v = path.values[tech];
    for (int k = 0; k <= n; ++k) {
      if (k == 0) v.push_back(a);
      else if (k == n) v.push_back(b);
      else v.push_back(a + (b - a) * static_cast<double>(k) / n);
    }
  }
  return path;
}

/// Ramp limit scaled by the same relative change as the capacity.
inline double scale_ramp(double ramp, double reference_capacity, double capacity) {
  if (reference_capacity <= 0.0) return capacity > 0.0 ? ramp : 0.0;
  return ramp * capacity / reference_capacity;
}

/// Totals for years 0..years: base (1 + rate)^k.
inline std::vector<double> grow_demand(double base, double annual_rate, int years) {
  require(annual_rate > -1.0, "grow_demand: rate must exceed -1");
  require(years >= 0, "grow_demand: negative horizon");
  std::vector<double> out;
  double level = base;
  for (int k = 0; k <= years; ++k) {
    out.push_back(level);
    level *= 1.0 + annual_rate;
  }
  return out;
}

/// Multiplier for month k of n ramping linearly from 1 to 1 + terminal_change.
inline double fuel_multiplier(int k, int n, double terminal_change) {
  require(n >= 1 && k >= 0 && k < n, "fuel_multiplier: month outside the curve");
  if (n == 1) return 1.0 + terminal_change;
  return 1.0 + terminal_change * static_cast<double>(k) / (n - 1);
}

/// Monthly curve times the linear ramp from 1 (first month) to 1 + terminal_change (last month).
inline Vector scale_fuel_curve(const Vector& monthly_curve, double terminal_change) {
  require(monthly_curve.size() >= 1, "scale_fuel_curve: empty curve");
  if (!monthly_curve.allFinite()) throw DataError("scale_fuel_curve: curve has gaps");
  const int n = static_cast<int>(monthly_curve.size());
  Vector out(n);
  for (int k = 0; k < n; ++k) out[k] = monthly_curve[k] * fuel_multiplier(k, n, terminal_change);
  return out;
}

inline CapacityMap default_firm_factors() {
  return {{"solar", 0.255}, {"wind", 0.235}, {"hydro", 0.121}, {"gas", 0.310},
          {"coal", 0.192},  {"nuclear", 0.900}, {"pumped_storage", 0.244}};
}

inline double firm_capacity(const CapacityMap& caps, const CapacityMap& factors) {
  double f = 0.0;
  for (const auto& [tech, c] : caps) {
    auto it = factors.find(tech);
    if (it == factors.end()) throw DataError("no firm capacity factor for technology '" + tech + "'");
    f += it->second * c;
  }
  return f;
}

struct FirmRule {
  std::vector<std::string> phase_out_order{"nuclear", "gas"};  ///< removed first to last
  std::string top_up = "gas";                                   ///< added when the fleet falls short
  CapacityMap factors = default_firm_factors();
};

/**
 * Fleet of a lagging scenario: renewables reach `renewable_share` of the planned
 * additions; the firm technologies start from their start-year capacities and are
 * phased out in `phase_out_order` until demand / firm capacity matches the reference
 * path in every year. Technologies outside the renewable list and the phase-out order
 * follow the reference path.
 */
inline CapacityPath lagging_capacities(const CapacityPath& reference, const std::vector<double>& reference_demand,
                                       const std::vector<double>& demand, const std::vector<std::string>& renewables,
                                       double renewable_share, const FirmRule& rule = {}) {
  const int n = reference.n_years();
  require(static_cast<int>(reference_demand.size()) == n && static_cast<int>(demand.size()) == n,
          "lagging_capacities: demand paths must cover every year");
  require(renewable_share >= 0.0, "lagging_capacities: renewable share must be >= 0");
  const int y0 = reference.first_year;
  std::set<std::string> adjustable(rule.phase_out_order.begin(), rule.phase_out_order.end());
  adjustable.insert(rule.top_up);
  for (const auto& tech : adjustable)
    if (!reference.values.count(tech)) throw DataError("firm rule names unknown technology '" + tech + "'");

  CapacityPath out;
  out.first_year = y0;
  for (const auto& [tech, v] : reference.values) out.values[tech] = v;
  for (const auto& tech : renewables) {
    auto& v = out.values.at(tech);
    const double start = v.front();
    for (int k = 0; k < n; ++k) {
      const double planned = reference.values.at(tech)[static_cast<std::size_t>(k)];
      v[static_cast<std::size_t>(k)] = start + renewable_share * (planned - start);
    }
  }
  for (int k = 0; k < n; ++k) {
    const auto sk = static_cast<std::size_t>(k);
    const double target = demand[sk] * firm_capacity(reference.year(y0 + k), rule.factors) / reference_demand[sk];
    for (const auto& tech : adjustable) out.values.at(tech)[sk] = reference.values.at(tech).front();
    double excess = firm_capacity(out.year(y0 + k), rule.factors) - target;
    for (const auto& tech : rule.phase_out_order) {
      if (excess <= 0.0) break;
      const double f = rule.factors.at(tech);
      double& cap = out.values.at(tech)[sk];
      const double cut = std::min(cap, excess / f);
      cap -= cut;
      excess -= cut * f;
    }
    if (excess < 0.0) out.values.at(rule.top_up)[sk] += -excess / rule.factors.at(rule.top_up);
  }
  return out;
}

}  // namespace ppaval::scenario
