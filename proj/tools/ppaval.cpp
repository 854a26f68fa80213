// ppaval command-line tool: calibrate, forecast, value and stress PPA price scenarios.
//
// Exit codes: 0 success, 1 selftest failure, 2 data error, 3 solver failure, 64 usage error.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <random>
#include <string>

#include <CLI11.hpp>

#include "ppaval/casestudy.hpp"
#include "ppaval/learn/cmaes.hpp"
#include "ppaval/pipeline.hpp"
#include "ppaval/qp/brute_force.hpp"
#include "ppaval/testing/random_market.hpp"
#include "ppaval/testing/random_qp.hpp"

namespace {

using namespace ppaval;
using pipeline::Json;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitSelftest = 1;
constexpr int kExitData = 2;
constexpr int kExitSolver = 3;
constexpr int kExitUsage = 64;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

fs::path relative_to(const fs::path& file, const std::string& p) {
  const fs::path q(p);
  return q.is_absolute() ? q : file.parent_path() / q;
}

void write_json(const fs::path& path, const Json& j) { io::write_text(path, j.dump(2) + "\n"); }

/// Rounds every number in a document to 9 significant digits.
Json rounded(Json j) {
  if (j.is_number_float()) return io::round9(j.get<double>());
  if (j.is_structured())
    for (auto& v : j) v = rounded(v);
  return j;
}

// ---------------------------------------------------------------------------------- ppa

struct Ppa {
  Vector volumes;
  std::optional<double> fixed_price;
  double discount_rate = 0.0;
  Vector premium;
};

Vector series_from_json(const Json& j, const fs::path& base, const std::vector<Timestamp>& grid, const char* what) {
  if (j.is_array()) return io::vector_from_json(j, what);
  if (j.is_object()) {
    const auto loaded = io::load_hourly_csv(relative_to(base, j.at("csv").get<std::string>()));
    if (!loaded.gaps.empty()) throw DataError(std::string(what) + ": csv has missing hours");
    if (!grid.empty() && loaded.frame.timestamps != grid)
      throw DataError(std::string(what) + ": timestamps differ from the price series");
    return j.value("scale", 1.0) * loaded.frame.at(j.at("column").get<std::string>());
  }
  throw DataError(std::string(what) + ": expected an array or {csv, column}");
}

Ppa load_ppa(const fs::path& path, const std::vector<Timestamp>& grid, Eigen::Index T) {
  const Json j = io::read_json(path);
  try {
    Ppa p;
    p.volumes = series_from_json(j.at("volume"), path, grid, "volume");
    if (j.contains("fixed_price") && !j["fixed_price"].is_null()) p.fixed_price = j["fixed_price"].get<double>();
    p.discount_rate = j.value("discount_rate", 0.0);
    if (j.contains("green_premium")) {
      const auto& g = j["green_premium"];
      p.premium = g.is_number() ? Vector::Constant(T, g.get<double>()) : series_from_json(g, path, grid, "green_premium");
    }
    if (p.volumes.size() != T) throw DataError("volume has " + std::to_string(p.volumes.size()) + " values for " +
                                               std::to_string(T) + " prices");
    return p;
  } catch (const Json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Json valuation_report(const Ppa& ppa, const Vector& price) {
  Json out;
  out["periods"] = price.size();
  out["volume_total"] = ppa.volumes.sum();
  out["discount_rate"] = ppa.discount_rate;
  out["capture_price"] = valuation::capture_price(ppa.volumes, price);
  out["indifference_price"] = valuation::indifference_price(ppa.volumes, price, ppa.premium, ppa.discount_rate);
  out["break_even_price"] = valuation::break_even_price(ppa.volumes, price, ppa.discount_rate);
  if (ppa.fixed_price) {
    out["fixed_price"] = *ppa.fixed_price;
    out["ppa_value"] = valuation::ppa_value({*ppa.fixed_price, ppa.volumes, ppa.discount_rate, ppa.premium}, price);
  }
  return rounded(out);
}

// ------------------------------------------------------------------------------ scenario

struct ScenarioFile {
  HourlyFrame fundamentals;
  std::optional<fs::path> model;
};

/// {"fundamentals": CSV, "model": MODEL.json (optional), "capacities": {id: value}, "window_hours"}
ScenarioFile load_scenario(const fs::path& path, pipeline::MarketConfig& market) {
  const Json j = io::read_json(path);
  try {
    if (j.contains("capacities"))
      for (auto& t : market.technologies)
        if (j["capacities"].contains(t.id)) t.capacity = j["capacities"][t.id].get<double>();
    if (j.contains("storage")) {
      market.storage.energy = j["storage"].value("energy", market.storage.energy);
      market.storage.power = j["storage"].value("power", market.storage.power);
    }
    market.window_hours = j.value("window_hours", market.window_hours);
    market.validate();
    ScenarioFile s;
    s.fundamentals = pipeline::load_fundamentals(relative_to(path, j.at("fundamentals").get<std::string>()), market);
    if (j.contains("model")) s.model = relative_to(path, j["model"].get<std::string>());
    return s;
  } catch (const Json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

pipeline::ModelBundle load_bundle(const fs::path& path) { return pipeline::bundle_from_json(io::read_json(path)); }

// ------------------------------------------------------------------------------ commands

int cmd_synth(const fs::path& out, int days, std::uint64_t seed, const std::string& start, double fuel_multiplier,
              double storage_energy) {
  synthetic::Config cfg;
  cfg.days = days;
  cfg.seed = seed;
  cfg.start = time::parse_iso8601(start);
  cfg.fuel_multiplier = fuel_multiplier;
  if (storage_energy > 0.0) {
    cfg.storage_energy = storage_energy;
    cfg.storage_power = storage_energy / 4.0;
  }
  const auto m = synthetic::generate(cfg);
  pipeline::write_synthetic_dir(out, m);
  write_json(out / "config.json", pipeline::to_json(pipeline::synthetic_market_config(cfg)));
  std::cerr << "wrote " << days * 24 << " hours to " << out.string() << "\n";
  return kExitOk;
}

int cmd_calibrate(const fs::path& data, const fs::path& config, const fs::path& out) {
  const auto market = pipeline::market_config_from_json(io::read_json(config));
  const auto d = pipeline::load_data_dir(data, market);
  const auto bundle = pipeline::calibrate_data_dir(market, d);
  write_json(out, pipeline::bundle_to_json(bundle));
  std::cerr << "calibrated " << bundle.model.technologies.size() << " technologies on " << d.fundamentals.size()
            << " hours, objective " << fmt("%.6g", bundle.model.objective) << "\n";
  return kExitOk;
}

int cmd_backtest(const fs::path& model, const fs::path& data, const std::string& weights, const fs::path& out) {
  if (weights != "base" && weights != "solar" && weights != "wind")
    throw std::invalid_argument("--weights must be base, solar or wind");
  const auto bundle = load_bundle(model);
  const auto d = pipeline::load_data_dir(data, bundle.market, false);
  const auto dispatch = pipeline::forecast(bundle, d.fundamentals);
  Vector w = Vector::Ones(d.fundamentals.size());
  if (weights != "base") {
    // expected capacity factor: the output relative to its peak
    const std::string cf = weights + "_cf";
    w = d.fundamentals.has(cf) ? d.fundamentals.at(cf) : d.fundamentals.at(weights);
    if (!(w.maxCoeff() > 0.0)) throw DataError(weights + " output is zero throughout");
    w /= w.maxCoeff();
  }
  Json report;
  report["weights"] = weights;
  report["periods"] = d.fundamentals.size();
  report["first"] = time::format_iso8601(d.fundamentals.timestamps.front());
  report["last"] = time::format_iso8601(d.fundamentals.timestamps.back());
  report["nmae"] = valuation::nmae(dispatch.price, d.price, w);
  report["mean_price"] = d.price.mean();
  report["mean_forecast"] = dispatch.price.mean();
  write_json(out, rounded(report));
  std::cerr << "NMAE (" << weights << ") " << fmt("%.4f", report["nmae"].get<double>()) << "\n";
  return kExitOk;
}

int cmd_forecast(const fs::path& model, const fs::path& scenario, const fs::path& out) {
  auto bundle = load_bundle(model);
  const auto sc = load_scenario(scenario, bundle.market);
  const auto dispatch = pipeline::forecast(bundle, sc.fundamentals);
  io::RunArtifacts run;
  run.timestamps = sc.fundamentals.timestamps;
  run.price = dispatch.price;
  for (const auto& t : bundle.market.technologies) run.technologies.push_back(t.id);
  run.dispatch = dispatch;
  run.valuation = rounded({{"periods", dispatch.price.size()},
                           {"mean_price", dispatch.price.mean()},
                           {"curtailment", dispatch.curtailment.size() ? dispatch.curtailment.sum() : 0.0}});
  io::export_results(run, out);
  std::cerr << "forecast " << dispatch.price.size() << " hours, mean price " << fmt("%.2f", dispatch.price.mean()) << "\n";
  return kExitOk;
}

int cmd_value(const fs::path& prices, const fs::path& ppa_path, const fs::path& out) {
  const auto loaded = io::load_hourly_csv(prices, {{"price"}, {}, false});
  if (!loaded.gaps.empty()) throw DataError(prices.string() + ": missing hours in the price series");
  const Vector& p = loaded.frame.at("price");
  const auto ppa = load_ppa(ppa_path, loaded.frame.timestamps, p.size());
  const Json report = valuation_report(ppa, p);
  write_json(out, report);
  std::cerr << "capture price " << fmt("%.4f", report["capture_price"].get<double>()) << "\n";
  return kExitOk;
}

int cmd_sensitivity(const fs::path& base, const std::string& factor_name, const fs::path& ppa_path, const fs::path& out,
                    const std::string& model_flag) {
  const auto factor = valuation::parse_factor(factor_name);
  const Json doc = io::read_json(base);
  fs::path model_path;
  if (!model_flag.empty()) model_path = model_flag;
  else if (doc.contains("model")) model_path = relative_to(base, doc["model"].get<std::string>());
  else throw DataError("no model: pass --model or set \"model\" in the scenario file");
  auto bundle = load_bundle(model_path);
  const auto sc = load_scenario(base, bundle.market);
  const auto ppa = load_ppa(ppa_path, sc.fundamentals.timestamps, sc.fundamentals.size());
  const auto grid = valuation::sensitivity_sweep(factor, [&](double m) {
    const auto frame = m == 1.0 ? sc.fundamentals : pipeline::with_factor(bundle.market, sc.fundamentals, factor, m);
    return valuation::capture_price(ppa.volumes, pipeline::forecast(bundle, frame).price);
  });
  io::write_text(out, io::sensitivity_csv(grid));
  std::cerr << "base capture price " << fmt("%.4f", grid.base_capture_price) << ", " << grid.failures.size()
            << " failed point(s)\n";
  return kExitOk;
}

int cmd_tune(const fs::path& data, const std::string& config_flag, int budget, std::uint64_t seed,
             const fs::path& out) {
  const fs::path config = config_flag.empty() ? data / "config.json" : fs::path(config_flag);
  const auto market = pipeline::market_config_from_json(io::read_json(config));
  const auto d = pipeline::load_data_dir(data, market);
  const int T = d.fundamentals.size();
  const int split = 24 * ((3 * T / 4) / 24);
  if (split < 48 || T - split < 24) throw DataError("tune needs at least 3 days of data");

  pipeline::DataSet train;
  train.fundamentals = d.fundamentals.slice(0, split);
  train.price = d.price.head(split);
  train.observed = inverse::ObservedDispatch::from_output(d.observed.x.leftCols(split), d.observed.s.head(split),
                                                          d.observed.y_plus.head(split),
                                                          d.observed.y_minus.head(split), train.price);
  const HourlyFrame valid = d.fundamentals.slice(split, T - split);
  const Vector valid_price = d.price.tail(T - split);
  const int I = market.n_tech();

  auto lambdas = [&](const Vector& x) {
    Matrix lam(I, 3);
    for (int i = 0; i < I; ++i)
      for (int g = 0; g < 3; ++g) lam(i, g) = std::pow(10.0, x[3 * i + g]);
    return lam;
  };
  const auto saved = log::threshold();
  log::threshold() = log::Level::Error;
  auto objective = [&](const Vector& x) {
    try {
      const auto bundle = pipeline::calibrate_data_dir(market, train, lambdas(x));
      return valuation::nmae(pipeline::forecast(bundle, valid).price, valid_price);
    } catch (const std::exception&) {
      return kInf;
    }
  };
  learn::CmaesOptions opt;
  opt.budget = budget;
  opt.seed = seed;
  opt.sigma0 = 1.0;
  opt.lower = Vector::Constant(3 * I, -4.0);
  opt.upper = Vector::Constant(3 * I, 4.0);
  const auto res = learn::cmaes_minimize(objective, Vector::Constant(3 * I, -3.0), opt);
  log::threshold() = saved;

  Json report;
  report["seed"] = seed;
  report["evaluations"] = res.evaluations;
  report["validation_nmae"] = res.best_value;
  Json lam = Json::object();
  const Matrix best = lambdas(res.best_point);
  for (int i = 0; i < I; ++i)
    lam[market.technologies[static_cast<std::size_t>(i)].id] = {best(i, 0), best(i, 1), best(i, 2)};
  report["lambda"] = lam;
  report["log10_lambda"] = io::to_json(res.best_point);
  write_json(out, rounded(report));
  std::cerr << "best validation NMAE " << fmt("%.4f", res.best_value) << " after " << res.evaluations
            << " evaluations\n";
  return kExitOk;
}

int cmd_selftest(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  int failures = 0;
  auto line = [&](const std::string& name, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << "\n";
    if (!ok) ++failures;
  };

  int qp_bad = 0;
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const auto p = testing::random_feasible_qp(rng);
    const auto a = qp::solve_qp(p);
    const auto b = qp::brute_force_qp(p);
    const double gap = std::abs(a.objective_value - b.objective_value) / std::max(1.0, std::abs(b.objective_value));
    const double kkt = std::max({a.kkt_residuals.stationarity_inf_norm, a.kkt_residuals.primal_inf_norm,
                                 a.kkt_residuals.complementarity_inf_norm});
    worst = std::max(worst, std::max(gap, kkt));
    if (a.status != qp::QpStatus::Optimal || gap > 1e-6 || kkt > 1e-6) ++qp_bad;
  }
  line("qp_vs_brute_force", qp_bad == 0, std::to_string(qp_bad) + "/200 mismatches, worst " + fmt("%.2e", worst));

  int mo_bad = 0, mo_checked = 0;
  for (int k = 0; k < 100; ++k) {
    const auto inst = testing::random_linear_market(rng);
    const auto d = market::solve_dispatch(inst.scenario, inst.costs);
    for (int t = 0; t < inst.scenario.n_periods(); ++t) {
      const Vector c1 = inst.costs.c1.col(t), caps = inst.scenario.capacity.col(t);
      if (testing::near_breakpoint(c1, caps, inst.scenario.demand[t], 1e-6)) continue;
      ++mo_checked;
      if (std::abs(d.price[t] - market::merit_order_price(c1, caps, inst.scenario.demand[t])) > 1e-6) ++mo_bad;
    }
  }
  line("merit_order", mo_bad == 0, std::to_string(mo_bad) + "/" + std::to_string(mo_checked) + " hours differ");

  market::MarketScenario sc = market::MarketScenario::simple({{"g", true}}, Vector::Constant(2, 1.0),
                                                             (Matrix(1, 2) << 10.0, 0.0).finished());
  sc.storage_energy_cap.setConstant(10.0);
  sc.storage_charge_cap.setConstant(10.0);
  sc.storage_discharge_cap.setConstant(10.0);
  const auto d = market::solve_dispatch(sc, market::CostCurves::linear((Matrix(1, 2) << 10.0, 10.0).finished()));
  const double expected = 10.0 / (0.9 * 0.9);
  line("storage_arbitrage", std::abs(d.price[1] - expected) <= 1e-6,
       "price " + fmt("%.7f", d.price[1]) + " vs " + fmt("%.7f", expected));
  return failures == 0 ? kExitOk : kExitSelftest;
}

int cmd_casestudy(const fs::path& config, const fs::path& out) {
  const auto cfg = casestudy::parse_case_config(io::read_json(config));
  const auto res = casestudy::run_case_study(cfg);
  Json doc;
  doc["training_nmae"] = res.training_nmae;
  Json scen = Json::object();
  for (const auto& r : res.results) {
    scen[r.name] = {{"capture_price", r.capture_price},
                    {"break_even_price", r.break_even},
                    {"mean_price", r.mean_price},
                    {"yearly_capture_price", r.yearly_capture}};
    io::write_hourly_csv(out / ("prices_" + r.name + ".csv"), res.scenarios.front().frame.timestamps,
                         {{"price", r.price}, {"ppa_volume", r.ppa_volume}});
  }
  doc["scenarios"] = scen;
  write_json(out / "casestudy.json", rounded(doc));
  for (const auto& r : res.results)
    std::cerr << r.name << ": capture " << fmt("%.2f", r.capture_price) << ", break-even "
              << fmt("%.2f", r.break_even) << "\n";
  std::cerr << "case study finished in " << fmt("%.1f", res.seconds) << " s\n";
  return kExitOk;
}

log::Level parse_level(const std::string& s) {
  if (s == "debug") return log::Level::Debug;
  if (s == "info") return log::Level::Info;
  if (s == "warning") return log::Level::Warning;
  if (s == "error") return log::Level::Error;
  if (s == "off") return log::Level::Off;
  throw std::invalid_argument("unknown log level '" + s + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structural electricity price forecasts and PPA valuation"};
  app.require_subcommand(1);
  std::uint64_t seed = 1;
  std::string log_level = "warning";
  app.add_option("--seed", seed, "Seed for every random component")->capture_default_str();
  app.add_option("--log-level", log_level, "debug, info, warning, error or off")->capture_default_str();

  std::string data, config, out, model, scenario, prices, ppa, factor, weights = "base", start = "2023-01-02T00:00:00Z";
  int days = 14, budget = 200;
  double fuel = 1.0, storage = 0.0;

  auto* synth = app.add_subcommand("synth", "Write a synthetic data directory");
  synth->add_option("--out", out, "Output directory")->required();
  synth->add_option("--days", days, "Number of days")->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--start", start, "First hour (ISO-8601 UTC)")->capture_default_str();
  synth->add_option("--fuel-multiplier", fuel, "Scale of gas and coal prices")->capture_default_str();
  synth->add_option("--storage-energy", storage, "Storage energy in MWh (0: none)")->capture_default_str();

  auto* calibrate = app.add_subcommand("calibrate", "Fit the inverse model to observed dispatch and prices");
  calibrate->add_option("--data", data, "Data directory")->required();
  calibrate->add_option("--config", config, "Market config JSON")->required();
  calibrate->add_option("--out", out, "Model JSON to write")->required();

  auto* backtest = app.add_subcommand("backtest", "Price NMAE of a model on held-out data");
  backtest->add_option("--model", model, "Model JSON")->required();
  backtest->add_option("--data", data, "Data directory")->required();
  backtest->add_option("--weights", weights, "base, solar or wind")->capture_default_str();
  backtest->add_option("--out", out, "Report JSON")->required();

  auto* forecast = app.add_subcommand("forecast", "Predict costs and dispatch a scenario");
  forecast->add_option("--model", model, "Model JSON")->required();
  forecast->add_option("--scenario", scenario, "Scenario JSON")->required();
  forecast->add_option("--out", out, "Output directory")->required();

  auto* value = app.add_subcommand("value", "Capture, indifference and break-even prices of a PPA");
  value->add_option("--prices", prices, "Price CSV")->required();
  value->add_option("--ppa", ppa, "PPA JSON")->required();
  value->add_option("--out", out, "Valuation JSON")->required();

  auto* sensitivity = app.add_subcommand("sensitivity", "Capture price over the factor grid 0.70..1.30");
  sensitivity->add_option("--base", scenario, "Base scenario JSON")->required();
  sensitivity->add_option("--factor", factor, "gas_price, coal_price, carbon_price, demand, wind_output, solar_output")
      ->required();
  sensitivity->add_option("--ppa", ppa, "PPA JSON")->required();
  sensitivity->add_option("--out", out, "Sensitivity CSV")->required();
  sensitivity->add_option("--model", model, "Model JSON (default: the scenario's model entry)");

  auto* tune = app.add_subcommand("tune", "CMA-ES search over log10 penalties");
  tune->add_option("--data", data, "Data directory")->required();
  tune->add_option("--config", config, "Market config JSON (default: DATA/config.json)");
  tune->add_option("--budget", budget, "Objective evaluations")->check(CLI::PositiveNumber)->capture_default_str();
  tune->add_option("--out", out, "Report JSON")->required();

  auto* selftest = app.add_subcommand("selftest", "Solver, merit-order and storage property checks");

  auto* casestudy_cmd = app.add_subcommand("casestudy", "Multi-year scenario study from a case config");
  casestudy_cmd->add_option("--config", config, "Case config JSON")->required();
  casestudy_cmd->add_option("--out", out, "Output directory")->required();

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    log::threshold() = parse_level(log_level);
    if (*synth) return cmd_synth(out, days, seed, start, fuel, storage);
    if (*calibrate) return cmd_calibrate(data, config, out);
    if (*backtest) return cmd_backtest(model, data, weights, out);
    if (*forecast) return cmd_forecast(model, scenario, out);
    if (*value) return cmd_value(prices, ppa, out);
    if (*sensitivity) return cmd_sensitivity(scenario, factor, ppa, out, model);
    if (*tune) return cmd_tune(data, config, budget, seed, out);
    if (*selftest) return cmd_selftest(seed);
    if (*casestudy_cmd) return cmd_casestudy(config, out);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
