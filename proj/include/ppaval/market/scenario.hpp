#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ppaval/common.hpp"
#include "ppaval/time.hpp"

namespace ppaval::market {

struct Technology {
  std::string id;
  bool is_conventional = true;
};

/**
 * Exogenous system description over an hourly grid of T periods and I technologies.
 *
 * Storage convention: y_plus charges (consumes) and y_minus discharges (supplies):
 *   sum_i x_it + y_minus_t - y_plus_t = demand_t
 *   s_t = s_{t-1} + eta * y_plus_t - y_minus_t / eta
 */
struct MarketScenario {
  std::vector<time::Timestamp> timestamps;  ///< empty or length T
  std::vector<Technology> technologies;
  Vector demand;                ///< residual demand, MWh per period (may be negative)
  Matrix capacity;              ///< I x T, MW
  Matrix ramp_up;               ///< I x T, MW per period; +inf when unlimited
  Matrix ramp_down;             ///< I x T
  Vector storage_energy_cap;    ///< T, MWh
  Vector storage_charge_cap;    ///< T, MW (bounds y_plus)
  Vector storage_discharge_cap; ///< T, MW (bounds y_minus)
  double storage_efficiency = 0.9;
  double initial_storage = 0.0;
  /// Output in the period before the first one; when absent the first ramp is zero.
  std::optional<Vector> initial_output;

  [[nodiscard]] int n_tech() const { return static_cast<int>(technologies.size()); }
  [[nodiscard]] int n_periods() const { return static_cast<int>(demand.size()); }

  /// Scenario without storage and without ramp limits.
  static MarketScenario simple(std::vector<Technology> techs, Vector demand, Matrix capacity) {
    MarketScenario s;
    s.technologies = std::move(techs);
    const auto T = demand.size();
    const auto I = static_cast<Eigen::Index>(s.technologies.size());
    s.demand = std::move(demand);
    s.capacity = std::move(capacity);
    s.ramp_up = Matrix::Constant(I, T, kInf);
    s.ramp_down = Matrix::Constant(I, T, kInf);
    s.storage_energy_cap = Vector::Zero(T);
    s.storage_charge_cap = Vector::Zero(T);
    s.storage_discharge_cap = Vector::Zero(T);
    return s;
  }

  void validate() const {
    const int I = n_tech(), T = n_periods();
    require(I > 0, "MarketScenario: no technologies");
    require(T > 0, "MarketScenario: empty horizon");
    std::set<std::string> ids;
    for (const auto& tech : technologies)
      require(ids.insert(tech.id).second, "MarketScenario: duplicate technology id '" + tech.id + "'");
    require(timestamps.empty() || static_cast<int>(timestamps.size()) == T,
            "MarketScenario: timestamp count does not match demand length");
    auto dims = [&](const Matrix& m, const char* name) {
      require(m.rows() == I && m.cols() == T, std::string("MarketScenario: ") + name + " must be I x T");
      require((m.array() >= 0.0).all(), std::string("MarketScenario: ") + name + " must be non-negative");
    };
    dims(capacity, "capacity");
    dims(ramp_up, "ramp_up");
    dims(ramp_down, "ramp_down");
    auto vec = [&](const Vector& v, const char* name) {
      require(v.size() == T, std::string("MarketScenario: ") + name + " must have length T");
      require((v.array() >= 0.0).all(), std::string("MarketScenario: ") + name + " must be non-negative");
    };
    vec(storage_energy_cap, "storage_energy_cap");
    vec(storage_charge_cap, "storage_charge_cap");
    vec(storage_discharge_cap, "storage_discharge_cap");
    require(demand.allFinite(), "MarketScenario: non-finite demand");
    require(storage_efficiency > 0.0 && storage_efficiency <= 1.0,
            "MarketScenario: storage efficiency must lie in (0, 1]");
    require(initial_storage >= 0.0 && initial_storage <= storage_energy_cap[0],
            "MarketScenario: initial storage must lie in [0, storage_energy_cap[0]]");
    if (initial_output) {
      require(initial_output->size() == I, "MarketScenario: initial_output must have length I");
      require(initial_output->allFinite(), "MarketScenario: non-finite initial_output");
    }
  }

  /// Periods [begin, begin + count).
  [[nodiscard]] MarketScenario slice(int begin, int count) const {
    require(begin >= 0 && count > 0 && begin + count <= n_periods(), "MarketScenario::slice out of range");
    MarketScenario s;
    s.technologies = technologies;
    if (!timestamps.empty())
      s.timestamps.assign(timestamps.begin() + begin, timestamps.begin() + begin + count);
    s.demand = demand.segment(begin, count);
    s.capacity = capacity.middleCols(begin, count);
    s.ramp_up = ramp_up.middleCols(begin, count);
    s.ramp_down = ramp_down.middleCols(begin, count);
    s.storage_energy_cap = storage_energy_cap.segment(begin, count);
    s.storage_charge_cap = storage_charge_cap.segment(begin, count);
    s.storage_discharge_cap = storage_discharge_cap.segment(begin, count);
    s.storage_efficiency = storage_efficiency;
    s.initial_storage = initial_storage;
    s.initial_output = initial_output;
    return s;
  }
};

/// Quadratic production cost c1 x + c2 x^2 and ramp-up cost k r_plus, all I x T.
struct CostCurves {
  Matrix c1;
  Matrix c2;
  Matrix k;

  static CostCurves linear(const Matrix& c1) {
    return {c1, Matrix::Zero(c1.rows(), c1.cols()), Matrix::Zero(c1.rows(), c1.cols())};
  }

  void validate(int I, int T) const {
    for (const Matrix* m : {&c1, &c2, &k}) {
      require(m->rows() == I && m->cols() == T, "CostCurves: dimensions do not match the scenario");
      require(m->allFinite(), "CostCurves: non-finite coefficient");
    }
    require((c2.array() >= 0.0).all(), "CostCurves: c2 must be non-negative");
  }

  [[nodiscard]] CostCurves slice(int begin, int count) const {
    return {c1.middleCols(begin, count), c2.middleCols(begin, count), k.middleCols(begin, count)};
  }
};

}  // namespace ppaval::market
