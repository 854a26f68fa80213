#pragma once

// File-level workflow: a data directory of hourly CSVs plus a market config becomes a
// calibration problem, a calibrated model document, and forecasts on new fundamentals.
//
// Data directory layout:
//   fundamentals.csv  timestamp, demand, renewable outputs, fuel and carbon prices, ...
//   generation.csv    timestamp, one column per technology, optional storage_charge,
//                     storage_discharge, storage_level (needed for calibration only)
//   prices.csv        timestamp, price (needed for calibration and backtests)

#include <string>
#include <vector>

#include "ppaval/inverse/calibration.hpp"
#include "ppaval/io/csv.hpp"
#include "ppaval/io/json.hpp"
#include "ppaval/market/dispatch.hpp"
#include "ppaval/synthetic.hpp"
#include "ppaval/valuation/valuation.hpp"

namespace ppaval::pipeline {

using io::Json;
namespace fs = std::filesystem;

struct TechnologySpec {
  std::string id;
  double capacity = 0.0;
};

struct StorageSpec {
  double energy = 0.0;  ///< 0 disables storage
  double power = 0.0;
  double efficiency = 0.9;
};

struct MarketConfig {
  std::vector<TechnologySpec> technologies;
  std::vector<std::string> renewables{"solar", "wind", "run_of_river"};
  std::string imports;  ///< optional column names of cross-border flows
  std::string exports;
  io::NetImportSign import_sign = io::NetImportSign::Subtract;
  StorageSpec storage;
  std::array<std::vector<std::string>, 3> features{
      std::vector<std::string>{"intercept", "gas", "coal", "carbon"}, {"intercept"}, {"intercept"}};
  double lambda = 0.0;
  int block_hours = 336;
  bool pin_price = true;
  bool infer_ramps = false;  ///< ramp limits from the largest observed ramps
  int window_hours = 168;
  io::GapPolicy gap_policy = io::GapPolicy::Fail;

  [[nodiscard]] int n_tech() const { return static_cast<int>(technologies.size()); }

  void validate() const {
    if (technologies.empty()) throw DataError("market config: no technologies");
    for (const auto& t : technologies)
      if (!(t.capacity >= 0.0)) throw DataError("market config: capacity of '" + t.id + "' must be >= 0");
    for (const auto& g : features)
      if (g.empty()) throw DataError("market config: every cost group needs at least one feature");
    if (window_hours < 24) throw DataError("market config: window_hours must be >= 24");
    if (lambda < 0.0) throw DataError("market config: lambda must be >= 0");
  }
};

inline const char* gap_policy_name(io::GapPolicy p) {
  switch (p) {
    case io::GapPolicy::Report: return "report";
    case io::GapPolicy::Fail: return "fail";
    case io::GapPolicy::ForwardFill: return "forward-fill";
    case io::GapPolicy::Linear: return "linear";
  }
  return "fail";
}

inline Json to_json(const MarketConfig& c) {
  Json techs = Json::array();
  for (const auto& t : c.technologies) techs.push_back({{"id", t.id}, {"capacity", t.capacity}});
  Json j;
  j["technologies"] = techs;
  j["renewables"] = c.renewables;
  if (!c.imports.empty()) j["imports"] = c.imports;
  if (!c.exports.empty()) j["exports"] = c.exports;
  j["net_import_sign"] = c.import_sign == io::NetImportSign::Subtract ? "subtract" : "add";
  j["storage"] = {{"energy", c.storage.energy}, {"power", c.storage.power}, {"efficiency", c.storage.efficiency}};
  j["features"] = {{"c1", c.features[0]}, {"c2", c.features[1]}, {"k", c.features[2]}};
  j["lambda"] = c.lambda;
  j["block_hours"] = c.block_hours;
  j["pin_price"] = c.pin_price;
  j["infer_ramps"] = c.infer_ramps;
  j["window_hours"] = c.window_hours;
  j["gap_policy"] = gap_policy_name(c.gap_policy);
  return j;
}

inline MarketConfig market_config_from_json(const Json& j) {
  try {
    MarketConfig c;
    for (const auto& t : j.at("technologies")) c.technologies.push_back({t.at("id"), t.at("capacity")});
    if (j.contains("renewables")) c.renewables = j["renewables"].get<std::vector<std::string>>();
    c.imports = j.value("imports", "");
    c.exports = j.value("exports", "");
    const std::string sign = j.value("net_import_sign", "subtract");
    if (sign != "subtract" && sign != "add") throw DataError("net_import_sign must be 'subtract' or 'add'");
    c.import_sign = sign == "subtract" ? io::NetImportSign::Subtract : io::NetImportSign::Add;
    if (j.contains("storage")) {
      c.storage.energy = j["storage"].value("energy", 0.0);
      c.storage.power = j["storage"].value("power", 0.0);
      c.storage.efficiency = j["storage"].value("efficiency", 0.9);
    }
    if (j.contains("features")) {
      const char* groups[] = {"c1", "c2", "k"};
      for (std::size_t g = 0; g < 3; ++g)
        if (j["features"].contains(groups[g])) c.features[g] = j["features"][groups[g]].get<std::vector<std::string>>();
    }
    c.lambda = j.value("lambda", c.lambda);
    c.block_hours = j.value("block_hours", c.block_hours);
    c.pin_price = j.value("pin_price", c.pin_price);
    c.infer_ramps = j.value("infer_ramps", c.infer_ramps);
    c.window_hours = j.value("window_hours", c.window_hours);
    if (j.contains("gap_policy")) c.gap_policy = io::parse_gap_policy(j["gap_policy"].get<std::string>());
    c.validate();
    return c;
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed market config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
}

/// Loads an hourly CSV and completes its grid with the configured gap policy.
inline HourlyFrame load_series(const fs::path& path, const io::CsvSchema& schema, io::GapPolicy policy) {
  const auto loaded = io::load_hourly_csv(path, schema);
  if (!loaded.gaps.empty())
    log::warn(path.string() + ": " + std::to_string(loaded.gaps.size()) + " missing hour(s), first at " +
              time::format_iso8601(loaded.gaps.front()));
  return io::fill_gaps(loaded, policy);
}

/// Fundamentals with a residual_demand column added.
inline HourlyFrame load_fundamentals(const fs::path& path, const MarketConfig& c) {
  std::vector<std::string> required{"demand"};
  for (const auto& r : c.renewables) required.push_back(r);
  if (!c.imports.empty()) required.push_back(c.imports);
  if (!c.exports.empty()) required.push_back(c.exports);
  HourlyFrame f = load_series(path, {required, {}, true}, c.gap_policy);
  std::vector<Vector> renewables;
  for (const auto& r : c.renewables) renewables.push_back(f.at(r));
  f.set("residual_demand", io::residual_demand(f.at("demand"), renewables, c.imports.empty() ? Vector() : f.at(c.imports),
                                               c.exports.empty() ? Vector() : f.at(c.exports), c.import_sign));
  return f;
}

inline void require_same_grid(const HourlyFrame& a, const HourlyFrame& b, const std::string& what) {
  if (a.timestamps != b.timestamps) throw DataError(what + ": timestamps differ from fundamentals.csv");
}

inline Vector load_prices(const fs::path& path, const HourlyFrame& fundamentals, io::GapPolicy policy) {
  const HourlyFrame p = load_series(path, {{"price"}, {}, false}, policy);
  require_same_grid(fundamentals, p, path.string());
  return p.at("price");
}

/// Market scenario on a fundamentals frame; ramp limits are unlimited unless given.
inline market::MarketScenario build_scenario(const MarketConfig& c, const HourlyFrame& f,
                                             const std::optional<inverse::RampLimits>& ramps = std::nullopt) {
  const int T = f.size();
  const auto I = static_cast<Eigen::Index>(c.n_tech());
  std::vector<market::Technology> techs;
  Matrix cap(I, T);
  for (Eigen::Index i = 0; i < I; ++i) {
    const auto& spec = c.technologies[static_cast<std::size_t>(i)];
    techs.push_back({spec.id, true});
    // a column named capacity_<id> overrides the constant capacity
    if (f.has("capacity_" + spec.id)) cap.row(i) = f.at("capacity_" + spec.id).transpose();
    else cap.row(i).setConstant(spec.capacity);
  }
  auto sc = market::MarketScenario::simple(std::move(techs), f.at("residual_demand"), cap);
  sc.timestamps = f.timestamps;
  if (ramps) {
    for (Eigen::Index i = 0; i < I; ++i) {
      sc.ramp_up.row(i).setConstant(ramps->up[i]);
      sc.ramp_down.row(i).setConstant(ramps->down[i]);
    }
  }
  if (c.storage.energy > 0.0) {
    sc.storage_energy_cap.setConstant(c.storage.energy);
    sc.storage_charge_cap.setConstant(c.storage.power);
    sc.storage_discharge_cap.setConstant(c.storage.power);
    sc.storage_efficiency = c.storage.efficiency;
  }
  return sc;
}

inline std::vector<inverse::TechnologyFeatures> cost_features(const MarketConfig& c, const HourlyFrame& f) {
  inverse::TechnologyFeatures tf;
  for (std::size_t g = 0; g < 3; ++g) tf.groups[g] = inverse::FeatureBlock::from_frame(f, c.features[g]);
  return std::vector<inverse::TechnologyFeatures>(static_cast<std::size_t>(c.n_tech()), tf);
}

/// Fundamentals with one sensitivity factor scaled and residual demand recomputed.
inline HourlyFrame with_factor(const MarketConfig& c, const HourlyFrame& f, valuation::Factor factor, double multiplier) {
  HourlyFrame out = f;
  const auto name = valuation::factor_column(factor);
  out.set(name, multiplier * f.at(name));
  std::vector<Vector> renewables;
  for (const auto& r : c.renewables) renewables.push_back(out.at(r));
  out.set("residual_demand",
          io::residual_demand(out.at("demand"), renewables, c.imports.empty() ? Vector() : out.at(c.imports),
                              c.exports.empty() ? Vector() : out.at(c.exports), c.import_sign));
  return out;
}

/// Observed dispatch, prices and fundamentals of a data directory.
struct DataSet {
  HourlyFrame fundamentals;
  inverse::ObservedDispatch observed;
  Vector price;
};

inline DataSet load_data_dir(const fs::path& dir, const MarketConfig& c, bool need_generation = true) {
  DataSet d;
  d.fundamentals = load_fundamentals(dir / "fundamentals.csv", c);
  d.price = load_prices(dir / "prices.csv", d.fundamentals, c.gap_policy);
  if (!need_generation) return d;
  std::vector<std::string> ids;
  for (const auto& t : c.technologies) ids.push_back(t.id);
  const HourlyFrame g =
      load_series(dir / "generation.csv", {ids, {"storage_charge", "storage_discharge", "storage_level"}, false},
                  c.gap_policy);
  require_same_grid(d.fundamentals, g, "generation.csv");
  Matrix x(c.n_tech(), g.size());
  for (int i = 0; i < c.n_tech(); ++i) x.row(i) = g.at(ids[static_cast<std::size_t>(i)]).transpose();
  auto column = [&](const char* name) { return g.has(name) ? g.at(name) : Vector(); };
  d.observed = inverse::ObservedDispatch::from_output(x, column("storage_level"), column("storage_charge"),
                                                      column("storage_discharge"), d.price);
  return d;
}

inline inverse::CalibrationProblem calibration_problem(const MarketConfig& c, const DataSet& d,
                                                       const std::optional<Matrix>& lambda = std::nullopt) {
  inverse::CalibrationProblem p;
  std::optional<inverse::RampLimits> ramps;
  if (c.infer_ramps) ramps = inverse::infer_ramp_limits(d.observed.x);
  p.scenario = build_scenario(c, d.fundamentals, ramps);
  p.observed = d.observed;
  p.features = cost_features(c, d.fundamentals);
  p.weights = Vector::Ones(d.fundamentals.size());
  p.lambda = lambda ? *lambda : Matrix::Constant(c.n_tech(), 3, c.lambda);
  return p;
}

inline inverse::CalibrationOptions calibration_options(const MarketConfig& c) {
  inverse::CalibrationOptions o;
  o.block_hours = c.block_hours;
  o.pin_price = c.pin_price;
  return o;
}

/// Model document: the calibrated coefficients plus the market config they belong to.
struct ModelBundle {
  inverse::CalibratedModel model;
  MarketConfig market;
  std::optional<inverse::RampLimits> ramps;
};

inline Json bundle_to_json(const ModelBundle& b) {
  Json doc = io::model_to_json(b.model);
  doc["market"] = to_json(b.market);
  if (b.ramps) doc["ramp_limits"] = {{"up", io::to_json(b.ramps->up)}, {"down", io::to_json(b.ramps->down)}};
  return doc;
}

inline ModelBundle bundle_from_json(const Json& doc) {
  ModelBundle b;
  b.model = io::model_from_json(doc);
  if (!doc.contains("market")) throw DataError("model document has no market block");
  b.market = market_config_from_json(doc["market"]);
  if (doc.contains("ramp_limits"))
    b.ramps = inverse::RampLimits{io::vector_from_json(doc["ramp_limits"].at("up"), "ramp_limits.up"),
                                  io::vector_from_json(doc["ramp_limits"].at("down"), "ramp_limits.down")};
  if (b.model.technologies.size() != b.market.technologies.size())
    throw DataError("model and market block list different technologies");
  for (std::size_t i = 0; i < b.model.technologies.size(); ++i)
    if (b.model.technologies[i] != b.market.technologies[i].id)
      throw DataError("model and market block list different technologies");
  return b;
}

inline ModelBundle calibrate_data_dir(const MarketConfig& c, const DataSet& d,
                                      const std::optional<Matrix>& lambda = std::nullopt) {
  ModelBundle b;
  b.market = c;
  const auto problem = calibration_problem(c, d, lambda);
  b.model = inverse::calibrate(problem, calibration_options(c));
  if (c.infer_ramps) b.ramps = inverse::infer_ramp_limits(d.observed.x);
  return b;
}

/// Rolling-horizon dispatch of a calibrated model on fundamentals.
inline market::DispatchSolution forecast(const ModelBundle& b, const HourlyFrame& fundamentals,
                                         const qp::SolverSettings& solver = {}) {
  const auto sc = build_scenario(b.market, fundamentals, b.ramps);
  const auto costs = inverse::predict_costs(b.model, cost_features(b.market, fundamentals));
  return market::rolling_horizon_dispatch(sc, costs, solver, b.market.window_hours, true,
                                          {market::NegativeDemandPolicy::Curtailment});
}

/// Writes a data directory from a synthetic market (fundamentals, generation, prices).
inline void write_synthetic_dir(const fs::path& dir, const synthetic::Market& m) {
  io::write_frame(dir / "fundamentals.csv", m.frame);
  std::vector<std::pair<std::string, Vector>> gen;
  for (int i = 0; i < m.scenario.n_tech(); ++i)
    gen.emplace_back(m.scenario.technologies[static_cast<std::size_t>(i)].id, m.dispatch.x.row(i).transpose());
  if (m.scenario.storage_energy_cap.size() && m.scenario.storage_energy_cap.maxCoeff() > 0.0) {
    gen.emplace_back("storage_charge", m.dispatch.y_plus);
    gen.emplace_back("storage_discharge", m.dispatch.y_minus);
    gen.emplace_back("storage_level", m.dispatch.s);
  }
  io::write_hourly_csv(dir / "generation.csv", m.frame.timestamps, gen);
  io::write_hourly_csv(dir / "prices.csv", m.frame.timestamps, {{"price", m.dispatch.price}});
}

/// Market config matching a synthetic configuration.
inline MarketConfig synthetic_market_config(const synthetic::Config& cfg) {
  MarketConfig c;
  for (const auto& t : cfg.fleet) c.technologies.push_back({t.id, t.capacity});
  c.renewables = {"solar", "wind", "run_of_river"};
  c.storage = {cfg.storage_energy, cfg.storage_power, cfg.storage_efficiency};
  return c;
}

}  // namespace ppaval::pipeline
