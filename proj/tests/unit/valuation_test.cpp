#include <gtest/gtest.h>

#include <random>

#include "ppaval/valuation/valuation.hpp"

namespace {

using namespace ppaval;
using namespace ppaval::valuation;

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out[k++] = x;
  return out;
}

TEST(CapturePrice, Examples) {
  EXPECT_DOUBLE_EQ(capture_price(vec({1, 1}), vec({10, 20})), 15.0);
  EXPECT_DOUBLE_EQ(capture_price(vec({1, 3}), vec({10, 20})), 17.5);
  EXPECT_THROW(capture_price(vec({0, 0}), vec({10, 20})), std::invalid_argument);
  EXPECT_THROW(capture_price(vec({1}), vec({10, 20})), std::invalid_argument);
}

TEST(CapturePrice, ScaleInvariantAndBounded) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    Vector q(24), p(24);
    for (int t = 0; t < 24; ++t) {
      q[t] = u(rng);
      p[t] = 200.0 * u(rng) - 20.0;
    }
    const double c = capture_price(q, p);
    EXPECT_NEAR(capture_price(7.5 * q, p), c, 1e-12 * std::abs(c) + 1e-12);
    EXPECT_GE(c, p.minCoeff() - 1e-12);
    EXPECT_LE(c, p.maxCoeff() + 1e-12);
  }
}

TEST(DiscountFactors, CompoundHourly) {
  const Vector rho = discount_factors(8761, 0.11);
  EXPECT_DOUBLE_EQ(rho[0], 1.0);
  EXPECT_NEAR(rho[8760], 1.11, 1e-12);
  EXPECT_THROW(discount_factors(3, -0.1), std::invalid_argument);
}

TEST(PpaValue, Examples) {
  PpaContract c{0.0, vec({1, 1}), 0.0, {}};
  const Vector p = vec({10, 20});
  c.fixed_price = capture_price(c.volumes, p);
  EXPECT_DOUBLE_EQ(ppa_value(c, p), 0.0);

  c.fixed_price = 12.0;
  c.green_premium = vec({4, 4});
  EXPECT_DOUBLE_EQ(ppa_value(c, p), 2.0 * (15.0 - 12.0 + 4.0));

  // multiplying by (1, 0.5) is dividing by compounding factors (1, 2)
  EXPECT_DOUBLE_EQ(ppa_value(vec({1, 1}), p, 0.0, Vector(), vec({1, 2})), 20.0);
}

TEST(IndifferencePrice, ReducesToCaptureAndShiftsByPremium) {
  const Vector q = vec({2, 1, 3}), p = vec({40, 55, 31});
  EXPECT_DOUBLE_EQ(indifference_price(q, p, Vector(), 0.0), capture_price(q, p));
  EXPECT_NEAR(indifference_price(q, p, Vector::Constant(3, 6.5), 0.0), capture_price(q, p) + 6.5, 1e-12);
  EXPECT_THROW(indifference_price(Vector::Zero(3), p, Vector(), 0.05), std::invalid_argument);
}

TEST(IndifferencePrice, RandomInstancesZeroValue) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 1000; ++rep) {
    const int T = 1 + static_cast<int>(u(rng) * 500);
    PpaContract c;
    c.volumes = Vector(T);
    c.green_premium = Vector(T);
    Vector p(T);
    for (int t = 0; t < T; ++t) {
      c.volumes[t] = u(rng) < 0.3 ? 0.0 : 10.0 * u(rng);
      p[t] = 300.0 * u(rng) - 50.0;
      c.green_premium[t] = 5.0 * u(rng);
    }
    c.volumes[0] += 1.0;
    c.annual_discount_rate = 0.2 * u(rng);
    c.fixed_price = indifference_price(c.volumes, p, c.green_premium, c.annual_discount_rate);
    EXPECT_LE(std::abs(ppa_value(c, p)), 1e-9 * std::max(1.0, c.volumes.sum()));
  }
}

TEST(IndifferencePrice, MonotoneInPricesAndPremium) {
  const Vector q = vec({1, 2, 3});
  Vector p = vec({10, 20, 30});
  const double base = indifference_price(q, p, Vector(), 0.11);
  p[1] += 1.0;
  EXPECT_GT(indifference_price(q, p, Vector(), 0.11), base);
  EXPECT_GT(indifference_price(q, p, vec({0, 0.5, 0}), 0.11), indifference_price(q, p, Vector(), 0.11));
}

TEST(BreakEven, Examples) {
  const Vector Q = vec({3, 1, 4, 1, 5});
  EXPECT_NEAR(break_even_price(Q, Vector::Constant(5, 42.0), 0.11), 42.0, 1e-12);
  const Vector p = vec({50, 60, 70, 80, 90});
  EXPECT_DOUBLE_EQ(break_even_price(Q, p, 0.0), capture_price(Q, p));
}

TEST(BreakEven, RandomInstancesZeroNpv) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 1000; ++rep) {
    const int T = 24 * (1 + static_cast<int>(u(rng) * 400));
    Vector Q(T), p(T);
    for (int t = 0; t < T; ++t) {
      Q[t] = std::max(0.0, std::sin(0.26 * t)) * u(rng);
      p[t] = 150.0 * u(rng);
    }
    Q[0] += 0.1;
    const double r = 0.3 * u(rng);
    const double P = break_even_price(Q, p, r);
    EXPECT_LE(std::abs(break_even_npv(Q, p, r, P)), 1e-9 * std::max(1.0, Q.sum()));
  }
}

TEST(Nmae, Examples) {
  const Vector p = vec({10, 20}), ph = vec({12, 18});
  EXPECT_DOUBLE_EQ(nmae(p, p), 0.0);
  EXPECT_NEAR(nmae(ph, p), 4.0 / 30.0, 1e-15);
  EXPECT_NEAR(nmae(7.0 * ph, 7.0 * p), nmae(ph, p), 1e-15);
  EXPECT_THROW(nmae(ph, vec({-5, 5})), DataError);
  EXPECT_THROW(nmae(ph, p, Vector::Zero(2)), std::invalid_argument);
}

TEST(Backtest, ProfilesAreKeyed) {
  const Vector p = vec({10, 20, 30}), ph = vec({11, 20, 27});
  const auto r = backtest(ph, p, {{"base", Vector::Ones(3)}, {"solar", vec({0, 1, 0})}});
  EXPECT_DOUBLE_EQ(r.nmae.at("solar"), 0.0);
  EXPECT_NEAR(r.nmae.at("base"), 4.0 / (20.0 * 3.0), 1e-15);
  EXPECT_DOUBLE_EQ(r.mean_price, 20.0);
}

TEST(Sensitivity, GridIsExactAndFailuresLeaveGaps) {
  const auto m = sensitivity_multipliers();
  ASSERT_EQ(m.size(), 13u);
  EXPECT_EQ(m.front(), 0.7);
  EXPECT_EQ(m[6], 1.0);
  EXPECT_EQ(m.back(), 1.3);
  for (std::size_t k = 1; k < m.size(); ++k) EXPECT_NEAR(m[k] - m[k - 1], 0.05, 1e-15);

  const auto saved = log::threshold();
  log::threshold() = log::Level::Error;
  const auto g = sensitivity_sweep(Factor::Demand, [](double x) {
    if (x > 1.25) throw std::runtime_error("infeasible");
    return 100.0 * x;
  });
  log::threshold() = saved;
  EXPECT_EQ(g.capture_prices[6].value(), g.base_capture_price);
  EXPECT_FALSE(g.capture_prices[12].has_value());
  EXPECT_EQ(g.failures.size(), 1u);
}

TEST(Sensitivity, FactorNamesRoundTrip) {
  for (const auto& [f, name] : factor_names()) EXPECT_EQ(parse_factor(to_string(f)), f);
  EXPECT_THROW(parse_factor("oil_price"), std::invalid_argument);
}

}  // namespace
