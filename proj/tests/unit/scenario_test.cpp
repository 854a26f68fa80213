#include <gtest/gtest.h>

#include <cmath>

#include "ppaval/scenario/plan.hpp"

namespace {

using namespace ppaval;
using namespace ppaval::scenario;

double round2(double v) { return std::round(v * 100.0) / 100.0; }

CapacityMap necp_2023() {
  return {{"solar", 24.00}, {"wind", 30.00}, {"hydro", 16.00},  {"gas", 29.90},
          {"coal", 3.22},   {"nuclear", 7.10}, {"pumped_storage", 3.42}};
}

CapacityMap necp_2030() {
  return {{"solar", 46.00}, {"wind", 50.00}, {"hydro", 16.00},  {"gas", 27.00},
          {"coal", 0.00},   {"nuclear", 3.00}, {"pumped_storage", 9.50}};
}

TEST(Interpolation, TableSpotChecks) {
  const auto path = interpolate_capacities(necp_2023(), necp_2030(), 2023, 2030);
  EXPECT_EQ(path.n_years(), 8);
  EXPECT_DOUBLE_EQ(round2(path.at("solar", 2024)), 27.14);
  EXPECT_DOUBLE_EQ(round2(path.at("coal", 2029)), 0.46);
  EXPECT_DOUBLE_EQ(round2(path.at("wind", 2027)), 41.43);
  EXPECT_DOUBLE_EQ(round2(path.at("pumped_storage", 2026)), 6.03);
  EXPECT_DOUBLE_EQ(round2(path.at("nuclear", 2028)), 4.17);
}

TEST(Interpolation, EndpointsExactAndInteriorBetween) {
  const auto path = interpolate_capacities(necp_2023(), necp_2030(), 2023, 2030);
  for (const auto& [tech, v] : necp_2023()) {
    EXPECT_EQ(path.at(tech, 2023), v);
    EXPECT_EQ(path.at(tech, 2030), necp_2030().at(tech));
    const double lo = std::min(v, necp_2030().at(tech)), hi = std::max(v, necp_2030().at(tech));
    for (int y = 2024; y < 2030; ++y) {
      if (lo == hi) {
        EXPECT_EQ(path.at(tech, y), lo);
      } else {
        EXPECT_GT(path.at(tech, y), lo);
        EXPECT_LT(path.at(tech, y), hi);
      }
    }
  }
}

TEST(Interpolation, ConstantAndErrors) {
  const auto path = interpolate_capacities({{"gas", 5.0}}, {{"gas", 5.0}}, 2020, 2024);
  for (int y = 2020; y <= 2024; ++y) EXPECT_EQ(path.at("gas", y), 5.0);
  EXPECT_THROW(interpolate_capacities({{"gas", 5.0}}, {{"coal", 5.0}}, 2020, 2024), DataError);
  EXPECT_THROW(path.at("gas", 2025), DataError);
}

TEST(Interpolation, RampsScaleWithCapacity) {
  EXPECT_DOUBLE_EQ(scale_ramp(2.0, 10.0, 5.0), 1.0);
  EXPECT_DOUBLE_EQ(scale_ramp(2.0, 10.0, 0.0), 0.0);
}

TEST(Demand, CompoundGrowth) {
  const auto d = grow_demand(247.64, 0.03, 7);
  EXPECT_DOUBLE_EQ(round2(d[1]), 255.07);
  EXPECT_DOUBLE_EQ(round2(d[7]), 304.57);
  for (double v : grow_demand(100.0, 0.0, 4)) EXPECT_EQ(v, 100.0);
  EXPECT_NEAR(grow_demand(100.0, 0.01, 2)[2], 100.0 * 1.01 * 1.01, 1e-12);
  EXPECT_THROW(grow_demand(1.0, -1.0, 2), std::invalid_argument);
}

TEST(FuelCurve, LinearRamp) {
  EXPECT_DOUBLE_EQ(fuel_multiplier(0, 96, -0.10), 1.0);
  EXPECT_NEAR(fuel_multiplier(5, 11, -0.10), 0.95, 1e-15);
  EXPECT_NEAR(fuel_multiplier(95, 96, 0.05), 1.05, 1e-15);
  const Vector curve = Vector::Constant(3, 40.0);
  const Vector scaled = scale_fuel_curve(curve, -0.10);
  EXPECT_DOUBLE_EQ(scaled[0], 40.0);
  EXPECT_NEAR(scaled[1], 38.0, 1e-12);
  EXPECT_NEAR(scaled[2], 36.0, 1e-12);
  Vector gap = curve;
  gap[1] = std::nan("");
  EXPECT_THROW(scale_fuel_curve(gap, 0.0), DataError);
}

TEST(FirmRule, RatioMatchesReferenceEveryYear) {
  const auto reference = interpolate_capacities(necp_2023(), necp_2030(), 2023, 2030);
  const auto d_ref = grow_demand(247.64, 0.03, 7);
  for (auto [share, rate] : {std::pair{0.3, 0.01}, std::pair{0.6, 0.02}}) {
    const auto d = grow_demand(247.64, rate, 7);
    const auto path = lagging_capacities(reference, d_ref, d, {"solar", "wind"}, share);
    const auto factors = default_firm_factors();
    for (int y = 2023; y <= 2030; ++y) {
      const double r_ref = d_ref[static_cast<std::size_t>(y - 2023)] / firm_capacity(reference.year(y), factors);
      const double r = d[static_cast<std::size_t>(y - 2023)] / firm_capacity(path.year(y), factors);
      EXPECT_NEAR(r, r_ref, 1e-9 * r_ref) << y;
    }
    // renewables reach the requested share of the planned additions
    EXPECT_NEAR(path.at("solar", 2030), 24.0 + share * 22.0, 1e-12);
    EXPECT_NEAR(path.at("wind", 2030), 30.0 + share * 20.0, 1e-12);
    // coal follows the reference phase-out, nuclear is reduced before gas
    EXPECT_EQ(path.at("coal", 2030), 0.0);
    EXPECT_EQ(path.at("gas", 2030), 29.9);
    EXPECT_LT(path.at("nuclear", 2030), 7.1);
    EXPECT_GT(path.at("nuclear", 2030), reference.at("nuclear", 2030));
  }
}

TEST(FirmRule, FullShareAndSameDemandKeepsStartFleet) {
  const auto reference = interpolate_capacities(necp_2023(), necp_2030(), 2023, 2030);
  const auto d = grow_demand(247.64, 0.03, 7);
  const auto path = lagging_capacities(reference, d, d, {"solar", "wind"}, 1.0);
  EXPECT_NEAR(path.at("nuclear", 2023), 7.1, 1e-9);
  EXPECT_NEAR(path.at("gas", 2023), 29.9, 1e-9);
}

}  // namespace
