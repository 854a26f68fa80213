#include <cmath>
#include <memory>

#include <gtest/gtest.h>

#include "ppaval/casestudy.hpp"
#include "ppaval/io/json.hpp"

using namespace ppaval;
using scenario::BuiltScenario;

namespace {

io::Json spain_like() { return io::read_json(std::filesystem::path(PPAVAL_SOURCE_DIR) / "data" / "spain_like.json"); }

class Builder : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    cfg_ = std::make_unique<casestudy::CaseConfig>(casestudy::parse_case_config(spain_like()));
    const auto& sc = cfg_->scenarios;
    const auto calendar = casestudy::fixed_holidays(sc.start_year - cfg_->history.years, sc.end_year);
    const auto history = casestudy::generate_history(*cfg_, calendar);
    const auto shapes = scenario::fit_shape_models(history, calendar, cfg_->harmonics);
    scenario::RampReference ramps;
    ramps.up = Vector::Constant(3, 2.0);
    ramps.down = Vector::Constant(3, 3.0);
    ramps.capacity = Vector::Constant(3, 10.0);
    built_ = std::make_unique<std::vector<BuiltScenario>>(scenario::build_market_scenarios(sc, shapes, ramps));
  }
  static void TearDownTestSuite() {
    built_.reset();
    cfg_.reset();
  }

  static const BuiltScenario& get(const std::string& name) {
    for (const auto& b : *built_)
      if (b.spec.name == name) return b;
    throw std::runtime_error("no scenario " + name);
  }

  static std::unique_ptr<casestudy::CaseConfig> cfg_;
  static std::unique_ptr<std::vector<BuiltScenario>> built_;
};

std::unique_ptr<casestudy::CaseConfig> Builder::cfg_;
std::unique_ptr<std::vector<BuiltScenario>> Builder::built_;

}  // namespace

TEST_F(Builder, AmbitiousFollowsThePlanToTheEndYear) {
  const auto& a = get("ambitious");
  for (const auto& [tech, cap] : cfg_->scenarios.capacities_end) EXPECT_EQ(a.capacities.at(tech, 2030), cap) << tech;
  for (const auto& [tech, cap] : cfg_->scenarios.capacities_start) EXPECT_EQ(a.capacities.at(tech, 2023), cap) << tech;
  EXPECT_NEAR(a.capacities.at("solar", 2024), 27.14, 0.005);
  EXPECT_NEAR(a.capacities.at("coal", 2029), 0.46, 0.005);
  EXPECT_NEAR(a.demand_twh[1], 255.07, 0.005);
}

TEST_F(Builder, BauRealizesThirtyPercentOfRenewableAdditions) {
  const auto& bau = get("bau");
  const auto& s = cfg_->scenarios;
  for (const char* tech : {"solar", "wind", "hydro"}) {
    const double start = s.capacities_start.at(tech), end = s.capacities_end.at(tech);
    EXPECT_NEAR(bau.capacities.at(tech, 2030), start + 0.3 * (end - start), 1e-12) << tech;
  }
  EXPECT_NEAR(bau.capacities.at("solar", 2030), 30.6, 1e-12);
}

TEST_F(Builder, FirmRatioMatchesTheReferenceEveryYear) {
  const auto& ref = get("ambitious");
  const auto& factors = cfg_->scenarios.firm_factors;
  for (const char* name : {"bau", "intermediate"}) {
    const auto& b = get(name);
    for (int y = 2023; y <= 2030; ++y) {
      const auto k = static_cast<std::size_t>(y - 2023);
      const double want = ref.demand_twh[k] / scenario::firm_capacity(ref.capacities.year(y), factors);
      const double got = b.demand_twh[k] / scenario::firm_capacity(b.capacities.year(y), factors);
      EXPECT_NEAR(got, want, 1e-9) << name << " " << y;
    }
  }
}

TEST_F(Builder, YearlyDemandMatchesConfiguredTotals) {
  for (const auto& b : *built_) {
    std::vector<double> sums(b.demand_twh.size(), 0.0);
    const Vector& d = b.frame.at("demand");
    for (std::size_t t = 0; t < b.frame.timestamps.size(); ++t)
      sums[static_cast<std::size_t>(time::date_of(b.frame.timestamps[t]).year - 2023)] += d[static_cast<Eigen::Index>(t)];
    for (std::size_t k = 0; k < sums.size(); ++k)
      EXPECT_NEAR(sums[k] / 1000.0, b.demand_twh[k], 1e-3 * b.demand_twh[k]) << b.spec.name << " year " << k;
  }
}

TEST_F(Builder, FuelCurvesRampToTheTerminalChange) {
  const auto& a = get("ambitious");
  const auto& curve = cfg_->scenarios.fuel_curves.at("gas");
  const Vector& gas = a.frame.at("gas");
  const Eigen::Index last = gas.size() - 1;
  EXPECT_DOUBLE_EQ(gas[0], curve.front());
  EXPECT_NEAR(gas[last], 0.9 * curve.back(), 1e-12);
  const auto& im = get("intermediate");
  EXPECT_NEAR(im.frame.at("carbon")[last], 1.05 * cfg_->scenarios.fuel_curves.at("carbon").back(), 1e-12);
  EXPECT_DOUBLE_EQ(get("bau").frame.at("coal")[last], cfg_->scenarios.fuel_curves.at("coal").back());
}

TEST_F(Builder, MarketCarriesResidualDemandCapacitiesAndScaledRamps) {
  const auto& a = get("ambitious");
  const auto& m = a.market;
  const HourlyFrame& f = a.frame;
  const Vector residual = f.at("demand") - f.at("solar") - f.at("wind") - f.at("hydro");
  EXPECT_LT((m.demand - residual).cwiseAbs().maxCoeff(), 1e-12);
  ASSERT_EQ(m.n_tech(), 3);
  const Eigen::Index last = m.n_periods() - 1;
  EXPECT_EQ(m.capacity(0, last), cfg_->scenarios.capacities_end.at("nuclear"));
  // ramp limits grow and shrink with capacity: 2 GW/h per 10 GW of reference capacity
  EXPECT_NEAR(m.ramp_up(2, last), 2.0 * m.capacity(2, last) / 10.0, 1e-12);
  EXPECT_NEAR(m.storage_energy_cap[last], 8.0 * 9.5, 1e-12);
  EXPECT_DOUBLE_EQ(m.storage_discharge_cap[0], 3.42);
}

TEST(ScenarioConfig, MalformedDocumentsAreRejected) {
  auto base = spain_like();
  EXPECT_NO_THROW(scenario::parse_scenario_config(base));

  auto j = base;
  j["end_year"] = 2020;
  EXPECT_THROW(scenario::parse_scenario_config(j), DataError);
  j = base;
  j["fuel_curves"].erase("carbon");
  EXPECT_THROW(scenario::parse_scenario_config(j), DataError);
  j = base;
  j["fuel_curves"]["gas"] = {1.0, 2.0, 3.0};
  EXPECT_THROW(scenario::parse_scenario_config(j), DataError);
  j = base;
  j["demand_growth"]["reference"] = "utopia";
  EXPECT_THROW(scenario::parse_scenario_config(j), DataError);
  j = base;
  j.erase("scenario_overrides");
  EXPECT_THROW(scenario::parse_scenario_config(j), DataError);
  j = base;
  j["capacities_end"].erase("solar");
  EXPECT_THROW(scenario::parse_scenario_config(j), DataError);
}

TEST(CaseConfig, FleetFollowsTheConventionalOrder) {
  const auto c = casestudy::parse_case_config(spain_like());
  ASSERT_EQ(c.history.fleet.size(), c.scenarios.conventional.size());
  for (std::size_t i = 0; i < c.history.fleet.size(); ++i) EXPECT_EQ(c.history.fleet[i].id, c.scenarios.conventional[i]);

  auto j = spain_like();
  j["history"]["fleet"].erase("coal");
  EXPECT_THROW(casestudy::parse_case_config(j), DataError);
}

TEST(CaseStudy, FactorsScaleTheirColumnAndResidualDemand) {
  HourlyFrame f;
  f.timestamps = time::hourly_grid(time::make_timestamp(2024, 3, 1, 0), 3);
  f.set("demand", Vector::Constant(3, 30.0));
  f.set("solar", Vector::LinSpaced(3, 0.0, 4.0));
  f.set("wind", Vector::Constant(3, 5.0));
  f.set("hydro", Vector::Constant(3, 1.0));
  f.set("gas", Vector::Constant(3, 50.0));
  f.set("residual_demand", f.at("demand") - f.at("solar") - f.at("wind") - f.at("hydro"));

  const auto gas = casestudy::apply_factor(f, valuation::Factor::GasPrice, 1.3);
  EXPECT_NEAR(gas.at("gas")[1], 65.0, 1e-12);
  EXPECT_EQ(gas.at("residual_demand"), f.at("residual_demand"));

  const auto solar = casestudy::apply_factor(f, valuation::Factor::SolarOutput, 0.5);
  EXPECT_NEAR(solar.at("residual_demand")[2], 30.0 - 2.0 - 5.0 - 1.0, 1e-12);

  const auto demand = casestudy::apply_factor(f, valuation::Factor::Demand, 1.1);
  EXPECT_NEAR(demand.at("residual_demand")[0], 33.0 - 0.0 - 5.0 - 1.0, 1e-12);
}
