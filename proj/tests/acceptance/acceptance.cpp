// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "ppaval/casestudy.hpp"
#include "ppaval/features/features.hpp"
#include "ppaval/learn/cmaes.hpp"
#include "ppaval/learn/cross_validation.hpp"
#include "ppaval/pipeline.hpp"
#include "ppaval/qp/brute_force.hpp"
#include "ppaval/testing/random_market.hpp"
#include "ppaval/testing/random_qp.hpp"

using namespace ppaval;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Outcome qp_solver() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  double worst_gap = 0.0, worst_kkt = 0.0;
  int failures = 0;
  for (int k = 0; k < 500; ++k) {
    const auto p = testing::random_feasible_qp(rng);
    const auto a = qp::solve_qp(p);
    const auto b = qp::brute_force_qp(p);
    const double gap = std::abs(a.objective_value - b.objective_value);
    const double kkt = std::max({a.kkt_residuals.stationarity_inf_norm, a.kkt_residuals.primal_inf_norm,
                                 a.kkt_residuals.complementarity_inf_norm});
    worst_gap = std::max(worst_gap, gap);
    worst_kkt = std::max(worst_kkt, kkt);
    if (a.status != qp::QpStatus::Optimal || gap > 1e-6 || kkt > 1e-6) ++failures;
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {failures == 0 && s < 10.0,
          fmt("500 QPs, %.0f failures, worst objective gap %.1e, worst KKT %.1e", failures, worst_gap, worst_kkt) +
              fmt(", %.2f s", s)};
}

Outcome merit_order() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(99);
  int checked = 0, bad = 0, ties = 0;
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const auto inst = testing::random_linear_market(rng);
    const auto d = market::solve_dispatch(inst.scenario, inst.costs);
    for (int t = 0; t < inst.scenario.n_periods(); ++t) {
      const Vector c1 = inst.costs.c1.col(t), caps = inst.scenario.capacity.col(t);
      if (testing::near_breakpoint(c1, caps, inst.scenario.demand[t], 1e-6)) {
        ++ties;
        continue;
      }
      ++checked;
      const double diff = std::abs(d.price[t] - market::merit_order_price(c1, caps, inst.scenario.demand[t]));
      worst = std::max(worst, diff);
      if (diff > 1e-6) ++bad;
    }
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {bad == 0 && checked > 0 && s < 30.0,
          fmt("%.0f hours compared (%.0f ties skipped), worst %.1e", checked, ties, worst) + fmt(", %.2f s", s)};
}

Outcome storage_arbitrage() {
  auto sc = market::MarketScenario::simple({{"g", true}}, Vector::Constant(2, 1.0),
                                           (Matrix(1, 2) << 10.0, 0.0).finished());
  sc.storage_energy_cap.setConstant(10.0);
  sc.storage_charge_cap.setConstant(10.0);
  sc.storage_discharge_cap.setConstant(10.0);
  sc.storage_efficiency = 0.9;
  const auto d = market::solve_dispatch(sc, market::CostCurves::linear((Matrix(1, 2) << 10.0, 10.0).finished()));
  const double oracle = 12.3456790;
  return {std::abs(d.price[1] - oracle) <= 1e-6, fmt("price_2 = %.8f, expected %.7f", d.price[1], oracle)};
}

pipeline::DataSet dataset(const synthetic::Market& m) {
  return {m.frame, inverse::ObservedDispatch::from_dispatch(m.dispatch, true), m.dispatch.price};
}

Outcome inverse_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  synthetic::Config cfg{.days = 14, .seed = 101};
  const auto train = synthetic::generate(cfg);
  const auto model = inverse::calibrate(synthetic::calibration_problem(train, 0.0, true));
  cfg.days = 7;
  cfg.seed = 202;
  cfg.start = time::make_timestamp(2023, 2, 6);
  const auto test = synthetic::generate(cfg);
  const auto costs = inverse::predict_costs(model, synthetic::cost_features(test.frame, test.scenario.n_tech()));
  const auto forecast = market::solve_dispatch(test.scenario, costs);
  const double e = valuation::nmae(forecast.price, test.dispatch.price);
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {model.status == qp::QpStatus::Optimal && e <= 0.01 && s < 60.0, fmt("fresh 7-day NMAE %.2e, %.2f s", e, s)};
}

Outcome distribution_shift() {
  synthetic::Config cfg{.days = 14, .seed = 303};
  const auto train = synthetic::generate(cfg);
  cfg.days = 7;
  cfg.seed = 304;
  cfg.start = time::make_timestamp(2023, 2, 6);
  cfg.fuel_multiplier = 2.0;
  const auto test = synthetic::generate(cfg);

  const auto model = inverse::calibrate(synthetic::calibration_problem(train, 0.0, true));
  const auto costs = inverse::predict_costs(model, synthetic::cost_features(test.frame, test.scenario.n_tech()));
  const double structural = valuation::nmae(market::solve_dispatch(test.scenario, costs).price, test.dispatch.price);

  HolidayCalendar calendar;
  const auto fm = features::build_features(train.frame, calendar);
  const auto fm_test = features::apply_features(test.frame, calendar, fm);
  const auto lasso = learn::fit_lasso_cv(fm.values, train.dispatch.price, Vector::Ones(train.frame.size()));
  const double baseline = valuation::nmae(lasso.predict(fm_test.values), test.dispatch.price);

  const double gas_max_train = train.frame.at("gas").maxCoeff(), gas_min_test = test.frame.at("gas").minCoeff();
  return {structural < baseline && gas_min_test > gas_max_train,
          fmt("structural NMAE %.4f vs LASSO %.4f on fuel prices x2 (min test gas %.1f", structural, baseline,
              gas_min_test) +
              fmt(" > max train gas %.1f)", gas_max_train)};
}

Outcome lasso_oracle() {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n01;
  const int n = 50, p = 6;
  Matrix A(n, p);
  for (auto& v : A.reshaped()) v = n01(rng);
  A = A.rowwise() - A.colwise().mean();
  const Matrix Q = A.householderQr().householderQ() * Matrix::Identity(n, p);
  Vector y(n);
  for (auto& v : y) v = 3.0 * n01(rng) + 2.0;
  const Vector ones = Vector::Ones(n);
  double worst = 0.0;
  for (double lambda : {0.0, 0.005, 0.02, 0.1}) {
    const auto m = learn::fit_lasso_cd(Q, y, ones, lambda);
    for (int j = 0; j < p; ++j) {
      // objective (1/n) sum r^2 + lambda |b|_1 on an orthonormal centered design
      const double z = Q.col(j).dot(y), g = lambda * n / 2.0;
      const double oracle = std::copysign(std::max(std::abs(z) - g, 0.0), z);
      worst = std::max(worst, std::abs(m.coefficients[j] - oracle));
    }
    worst = std::max(worst, std::abs(m.intercept - y.mean()));
  }

  Matrix X(n, 4);
  for (auto& v : X.reshaped()) v = n01(rng);
  std::uniform_real_distribution<double> u(0.2, 4.0);
  Vector w(n);
  for (auto& v : w) v = u(rng);
  Matrix Xa(n, 5);
  Xa << X, ones;
  const Vector sw = w.cwiseSqrt();
  const Vector wls = (sw.asDiagonal() * Xa).colPivHouseholderQr().solve(sw.cwiseProduct(y));
  const auto m0 = learn::fit_lasso_cd(X, y, w, 0.0);
  double worst_ols = std::abs(m0.intercept - wls[4]);
  for (int j = 0; j < 4; ++j) worst_ols = std::max(worst_ols, std::abs(m0.coefficients[j] - wls[j]));
  return {worst <= 1e-8 && worst_ols <= 1e-8,
          fmt("soft-threshold max error %.1e, weighted OLS max error %.1e", worst, worst_ols)};
}

Outcome cmaes_sphere() {
  learn::CmaesOptions opt;
  opt.sigma0 = 1.0;
  opt.budget = 2000;
  opt.seed = 42;
  const auto r = learn::cmaes_minimize([](const Vector& x) { return x.squaredNorm(); }, Vector::Constant(2, 3.0), opt);
  return {r.best_value <= 1e-6 && r.evaluations <= 2000,
          fmt("best %.2e after %.0f evaluations", r.best_value, r.evaluations)};
}

Outcome valuation_identities() {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_npv = 0.0, worst_value = 0.0;
  bool reduction_exact = true, capture_bounded = true;
  for (int rep = 0; rep < 1000; ++rep) {
    const int T = 24 * (1 + static_cast<int>(u(rng) * 30));
    Vector q(T), p(T), pg(T);
    for (int t = 0; t < T; ++t) {
      q[t] = u(rng) < 0.3 ? 0.0 : 5.0 * u(rng);
      p[t] = 200.0 * u(rng) - 20.0;
      pg[t] = 5.0 * u(rng);
    }
    q[0] += 0.5;
    const double r = 0.2 * u(rng);
    const double P = valuation::break_even_price(q, p, r);
    worst_npv = std::max(worst_npv, std::abs(valuation::break_even_npv(q, p, r, P)));
    const double F = valuation::indifference_price(q, p, pg, r);
    worst_value = std::max(worst_value, std::abs(valuation::ppa_value({F, q, r, pg}, p)));
    const double cap = valuation::capture_price(q, p);
    if (valuation::indifference_price(q, p, Vector::Zero(T), 0.0) != cap) reduction_exact = false;
    if (cap < p.minCoeff() - 1e-12 || cap > p.maxCoeff() + 1e-12) capture_bounded = false;
  }
  return {worst_npv <= 1e-9 && worst_value <= 1e-9 && reduction_exact && capture_bounded,
          fmt("1000 instances, max |NPV| at break-even %.1e, max |value| at indifference %.1e", worst_npv,
              worst_value) +
              (reduction_exact ? ", zero-rate zero-premium reduction exact" : ", reduction NOT exact")};
}

Outcome sensitivity() {
  synthetic::Config cfg{.days = 14, .seed = 505};
  const auto train = synthetic::generate(cfg);
  auto market = pipeline::synthetic_market_config(cfg);
  const auto bundle = pipeline::calibrate_data_dir(market, dataset(train));
  cfg.days = 7;
  cfg.seed = 506;
  cfg.start = time::make_timestamp(2023, 2, 6);
  const auto base = synthetic::generate(cfg);
  const Vector volume = base.frame.at("solar");

  const auto grid = valuation::sensitivity_multipliers();
  bool grid_ok = grid.size() == 13;
  for (std::size_t k = 0; k < grid.size() && grid_ok; ++k) grid_ok = std::abs(grid[k] - (0.70 + 0.05 * k)) < 1e-12;

  // which technology sets the price most often in the base case
  const auto base_run = pipeline::forecast(bundle, base.frame);
  int gas_marginal = 0;
  for (int t = 0; t < base_run.price.size(); ++t) {
    const double x = base_run.x(2, t);
    if (x > 1e-6 && x < market.technologies[2].capacity - 1e-6) ++gas_marginal;
  }
  const double base_capture = valuation::capture_price(volume, base_run.price);

  std::string detail;
  bool signs_ok = true, identity_ok = true;
  for (auto [factor, sign] : {std::pair{valuation::Factor::CarbonPrice, 1}, std::pair{valuation::Factor::GasPrice, 1},
                              std::pair{valuation::Factor::Demand, 1}, std::pair{valuation::Factor::SolarOutput, -1}}) {
    const auto g = valuation::sensitivity_sweep(factor, [&](double m) {
      const auto frame = m == 1.0 ? base.frame : pipeline::with_factor(market, base.frame, factor, m);
      return valuation::capture_price(volume, pipeline::forecast(bundle, frame).price);
    });
    if (!g.failures.empty() || !(g.capture_prices[6] && *g.capture_prices[6] == base_capture)) identity_ok = false;
    bool monotone = g.failures.empty();
    for (std::size_t k = 1; k < g.capture_prices.size() && monotone; ++k)
      monotone = sign * (*g.capture_prices[k] - *g.capture_prices[k - 1]) >= -1e-9;
    monotone = monotone && sign * (*g.capture_prices.back() - *g.capture_prices.front()) > 0.0;
    signs_ok = signs_ok && monotone;
    detail += " " + valuation::to_string(factor) + (monotone ? (sign > 0 ? " up" : " down") : " WRONG") +
              fmt(" (%.2f..%.2f)", *g.capture_prices.front(), *g.capture_prices.back());
  }
  return {grid_ok && identity_ok && signs_ok && 2 * gas_marginal > base_run.price.size(),
          std::string("13-point grid ") + (grid_ok ? "ok" : "BAD") +
              fmt(", gas marginal in %.0f/%.0f hours;", gas_marginal, static_cast<double>(base_run.price.size())) +
              detail};
}

Outcome scenario_math() {
  const scenario::CapacityMap start{{"solar", 24.00}, {"coal", 3.22}}, end{{"solar", 46.00}, {"coal", 0.0}};
  const auto path = scenario::interpolate_capacities(start, end, 2023, 2030);
  const auto demand = scenario::grow_demand(247.64, 0.03, 1);
  auto r2 = [](double v) { return std::round(v * 100.0) / 100.0; };
  const double solar = path.at("solar", 2024), coal = path.at("coal", 2029), d = demand[1];
  return {r2(solar) == 27.14 && r2(coal) == 0.46 && r2(d) == 255.07,
          fmt("solar 2024 = %.4f, coal 2029 = %.4f, demand 2024 = %.4f", solar, coal, d)};
}

Outcome case_study() {
  const auto cfg =
      casestudy::parse_case_config(io::read_json(std::filesystem::path(PPAVAL_SOURCE_DIR) / "data" / "spain_like.json"));
  const auto res = casestudy::run_case_study(cfg);
  const double bau = res.result("bau").capture_price, mid = res.result("intermediate").capture_price,
               amb = res.result("ambitious").capture_price;
  return {bau > mid && mid > amb && res.seconds < 300.0,
          fmt("capture BAU %.2f > intermediate %.2f > ambitious %.2f", bau, mid, amb) + fmt(", %.1f s", res.seconds)};
}

}  // namespace

int main() {
  log::threshold() = log::Level::Error;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"qp_solver_correctness", qp_solver},     {"merit_order_equivalence", merit_order},
      {"storage_arbitrage", storage_arbitrage}, {"synthetic_inverse_recovery", inverse_recovery},
      {"distribution_shift", distribution_shift}, {"lasso_oracle", lasso_oracle},
      {"cmaes_sphere", cmaes_sphere},           {"valuation_identities", valuation_identities},
      {"sensitivity_sweep", sensitivity},       {"scenario_math", scenario_math},
      {"case_study_ordering", case_study}};
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
