#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "ppaval/features/features.hpp"
#include "ppaval/features/seasonal.hpp"

namespace ppaval::features {
namespace {

HourlyFrame three_feature_frame(int hours = 48) {
  HourlyFrame f;
  f.timestamps = hourly_grid(make_timestamp(2021, 3, 1), hours);
  Vector a(hours), b(hours), c(hours);
  for (int t = 0; t < hours; ++t) {
    a[t] = 1.0 + t % 3;
    b[t] = 10.0 * std::sin(0.3 * t);
    c[t] = 100.0 + t;
  }
  f.set("a", a);
  f.set("b", b);
  f.set("c", c);
  return f;
}

FeatureSpec abc_spec() {
  FeatureSpec s;
  s.base = {"a", "b", "c"};
  return s;
}

TEST(Features, PairwiseWithSquaresColumnCount) {
  FeatureSpec numeric_only = abc_spec();
  numeric_only.hour_dummies = numeric_only.weekday_dummies = numeric_only.holiday_dummy = false;
  numeric_only.intercept = false;
  EXPECT_EQ(build_features(three_feature_frame(), {}, numeric_only).n_columns(), 3 + 6);
  EXPECT_EQ(build_features(three_feature_frame(), {}, abc_spec()).n_columns(), 3 + 6 + 23 + 6 + 1 + 1);
}

TEST(Features, ColumnOrderIsDeterministic) {
  const FeatureMatrix fm = build_features(three_feature_frame(), {}, abc_spec());
  const std::vector<std::string> head = {"a", "b", "c", "a*a", "a*b", "a*c", "b*b", "b*c", "c*c", "hour_01"};
  for (std::size_t j = 0; j < head.size(); ++j) EXPECT_EQ(fm.column_names[j], head[j]);
  EXPECT_EQ(fm.column_names.back(), "intercept");
  EXPECT_EQ(fm.column_names[fm.column_names.size() - 2], "holiday");
  EXPECT_EQ(fm.column_names[fm.column_names.size() - 3], "weekday_sat");
}

TEST(Features, MinMaxScalingDoesNotClip) {
  Matrix train(3, 1);
  train << 1.0, 3.0, 2.0;
  const MinMaxScaler s = MinMaxScaler::fit(train);
  Matrix test(2, 1);
  test << 2.0, 4.0;
  const Matrix out = s.transform(test);
  EXPECT_DOUBLE_EQ(out(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(out(1, 0), 1.5);
}

TEST(Features, TrainingColumnsLandInUnitIntervalAndDummiesStayBinary) {
  HolidayCalendar cal;
  cal.add(2021, 3, 2);
  const FeatureMatrix fm = build_features(three_feature_frame(), cal, abc_spec());
  for (int j = 0; j < fm.n_columns(); ++j) {
    EXPECT_GE(fm.values.col(j).minCoeff(), 0.0) << fm.column_names[static_cast<std::size_t>(j)];
    EXPECT_LE(fm.values.col(j).maxCoeff(), 1.0) << fm.column_names[static_cast<std::size_t>(j)];
  }
  const int hol = select_columns(fm, {"holiday"})[0];
  EXPECT_EQ(fm.values.col(hol).sum(), 24.0);
  EXPECT_TRUE((fm.values.col(fm.n_columns() - 1).array() == 1.0).all());
  // 2021-03-01 is a Monday.
  EXPECT_EQ(fm.values(0, select_columns(fm, {"weekday_mon"})[0]), 1.0);
  EXPECT_EQ(fm.values(5, select_columns(fm, {"hour_05"})[0]), 1.0);
}

TEST(Features, ScalingRoundTripsTrainingData) {
  const HourlyFrame f = three_feature_frame();
  const FeatureMatrix fm = build_features(f, {}, abc_spec());
  const Matrix raw = detail::raw_features(f, {}, abc_spec()).values;
  EXPECT_LE((fm.scaler.inverse_transform(fm.values) - raw).cwiseAbs().maxCoeff(), 1e-12 * raw.cwiseAbs().maxCoeff());
}

TEST(Features, SchemaHashIsStable) {
  const FeatureMatrix a = build_features(three_feature_frame(), {}, abc_spec());
  const FeatureMatrix b = build_features(three_feature_frame(72), {}, abc_spec());
  EXPECT_EQ(a.schema_hash, b.schema_hash);
  EXPECT_EQ(a.schema_hash.size(), 16u);
  FeatureSpec other = abc_spec();
  other.holiday_dummy = false;
  EXPECT_NE(a.schema_hash, build_features(three_feature_frame(), {}, other).schema_hash);
}

TEST(Features, ApplyUsesTrainingScaler) {
  const FeatureMatrix train = build_features(three_feature_frame(), {}, abc_spec());
  HourlyFrame later = three_feature_frame();
  Vector c = later.at("c");
  c.array() += 1000.0;
  later.set("c", c);
  const FeatureMatrix test = apply_features(later, {}, train);
  EXPECT_EQ(test.schema_hash, train.schema_hash);
  EXPECT_GT(test.values.col(2).minCoeff(), 1.0);
}

TEST(Features, MissingAndNonFiniteInputsAreReported) {
  HourlyFrame f = three_feature_frame();
  FeatureSpec spec = abc_spec();
  spec.base.push_back("d");
  EXPECT_THROW(build_features(f, {}, spec), DataError);

  Vector b = f.at("b");
  b[7] = std::nan("");
  b[11] = kInf;
  f.set("b", b);
  try {
    build_features(f, {}, abc_spec());
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("'b' rows 7 11"), std::string::npos) << msg;
  }
}

TEST(Quantile, UniformSampleMapsToLevels) {
  Vector x(5);
  x << 4.0, 0.0, 2.0, 1.0, 3.0;
  const QuantileTransformer q = QuantileTransformer::fit(x);
  EXPECT_DOUBLE_EQ(q(0.0), 0.0);
  EXPECT_DOUBLE_EQ(q(2.0), 0.5);
  EXPECT_DOUBLE_EQ(q(2.5), 0.625);
  EXPECT_DOUBLE_EQ(q(-1.0), 0.0);
  EXPECT_DOUBLE_EQ(q(9.0), 1.0);
}

TEST(Quantile, TiesTakeTheMiddleLevel) {
  Vector x(4);
  x << 0.0, 0.0, 0.0, 1.0;
  const QuantileTransformer q = QuantileTransformer::fit(x);
  EXPECT_DOUBLE_EQ(q(0.0), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(q(1.0), 1.0);
}

struct DailySeries {
  std::vector<Timestamp> ts;
  Vector y;
};

template <class F>
DailySeries hourly_series(int days, F&& value) {
  DailySeries s;
  s.ts = hourly_grid(make_timestamp(2019, 1, 1), days * 24);
  s.y.resize(static_cast<Eigen::Index>(s.ts.size()));
  for (std::size_t t = 0; t < s.ts.size(); ++t) s.y[static_cast<Eigen::Index>(t)] = value(s.ts[t]);
  return s;
}

SeasonalOptions small_options(int H) {
  SeasonalOptions o;
  o.harmonics = H;
  return o;
}

TEST(Seasonal, CosineIsFittedAlmostExactly) {
  const std::int64_t origin = days_from_civil({2019, 1, 1});
  const auto s = hourly_series(730, [&](Timestamp t) {
    return 5.0 + 2.0 * std::cos(2.0 * std::numbers::pi * static_cast<double>(day_number(t) - origin) / 365.0);
  });
  const SeasonalModel m = fit_seasonal(s.ts, s.y, small_options(2));
  EXPECT_GE(m.metrics.r2, 0.999);
  for (const auto& h : m.hours) EXPECT_GE(h.metrics.r2, 0.999);
  const Vector again = predict_seasonal(m, s.ts);
  EXPECT_LE((again - s.y).cwiseAbs().maxCoeff(), 0.05);
}

TEST(Seasonal, ConstantSeriesHasOnlyIntercept) {
  const auto s = hourly_series(400, [](Timestamp) { return 7.25; });
  SeasonalOptions o = small_options(3);
  o.with_calendar = true;
  HolidayCalendar cal;
  cal.add(2019, 12, 25);
  const SeasonalModel m = fit_seasonal(s.ts, s.y, o, cal);
  for (const auto& h : m.hours) {
    EXPECT_NEAR(h.b0, 7.25, 1e-6);
    EXPECT_LE(std::abs(h.b1), 1e-6);
    EXPECT_LE(std::abs(h.b3), 1e-6);
    for (double b : h.b2) EXPECT_LE(std::abs(b), 1e-6);
    EXPECT_LE(h.b4.cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LE(h.b5.cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Seasonal, WithoutTrendPredictionsRepeatEvery365Days) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.3);
  const std::int64_t origin = days_from_civil({2019, 1, 1});
  const auto s = hourly_series(800, [&](Timestamp t) {
    const double d = static_cast<double>(day_number(t) - origin);
    return 3.0 + std::sin(2.0 * std::numbers::pi * d / 365.0) + 0.1 * hour_of_day(t) + noise(rng);
  });
  SeasonalOptions o = small_options(4);
  o.trend = false;
  const SeasonalModel m = fit_seasonal(s.ts, s.y, o);
  std::vector<Timestamp> a, b;
  for (int k = 0; k < 24 * 400; k += 7) {
    a.push_back(s.ts[static_cast<std::size_t>(k)]);
    b.push_back(s.ts[static_cast<std::size_t>(k)] + 365 * kDay);
  }
  const Vector pa = predict_seasonal(m, a), pb = predict_seasonal(m, b);
  for (Eigen::Index k = 0; k < pa.size(); ++k) ASSERT_EQ(pa[k], pb[k]);
}

TEST(Seasonal, HolidayShiftEqualsHolidayCoefficient) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> noise(0.0, 0.5);
  HolidayCalendar cal;
  for (int y : {2019, 2020}) {
    cal.add(y, 1, 1);
    cal.add(y, 5, 1);
    cal.add(y, 8, 15);
    cal.add(y, 12, 25);
    cal.add(y, 12, 26);
  }
  const auto s = hourly_series(730, [&](Timestamp t) {
    return 50.0 + (weekday(t) >= 5 ? -8.0 : 0.0) + (cal.contains(t) ? -12.0 : 0.0) + noise(rng);
  });
  SeasonalOptions o = small_options(2);
  o.with_calendar = true;
  const SeasonalModel m = fit_seasonal(s.ts, s.y, o, cal);
  HolidayCalendar none;
  const std::vector<Timestamp> day = hourly_grid(make_timestamp(2021, 3, 10), 24);  // a Wednesday
  HolidayCalendar that_day;
  that_day.add(2021, 3, 10);
  const Vector plain = predict_seasonal(m, day, none), festive = predict_seasonal(m, day, that_day);
  for (int h = 0; h < 24; ++h) {
    EXPECT_NEAR(festive[h] - plain[h], m.hours[static_cast<std::size_t>(h)].b3, 1e-9);
    EXPECT_NEAR(m.hours[static_cast<std::size_t>(h)].b3, -12.0, 1.5);
  }
}

TEST(Seasonal, TrendExtrapolatesLinearly) {
  const std::int64_t origin = days_from_civil({2019, 1, 1});
  const auto s = hourly_series(730, [&](Timestamp t) {
    const double d = static_cast<double>(day_number(t) - origin);
    return 10.0 + 0.01 * d + std::cos(2.0 * std::numbers::pi * d / 365.0);
  });
  const SeasonalModel m = fit_seasonal(s.ts, s.y, small_options(2));
  const Timestamp t0 = make_timestamp(2030, 6, 1, 12);
  const Vector p = predict_seasonal(m, {t0, t0 + 365 * kDay});
  EXPECT_NEAR(p[1] - p[0], 365.0 * m.hours[12].b1, 1e-9);
  EXPECT_NEAR(m.hours[12].b1, 0.01, 1e-3);
}

TEST(Seasonal, RefusesLessThanOneCycle) {
  const auto s = hourly_series(300, [](Timestamp) { return 1.0; });
  EXPECT_THROW(fit_seasonal(s.ts, s.y, small_options(2)), DataError);
  const auto ok = hourly_series(400, [](Timestamp) { return 1.0; });
  EXPECT_THROW(fit_seasonal(ok.ts, ok.y, small_options(0)), std::invalid_argument);
  EXPECT_THROW(fit_seasonal(ok.ts, ok.y, small_options(181)), std::invalid_argument);
}

TEST(Seasonal, QuantileQuadraticRegressorsFitSmoothSeason) {
  const std::int64_t origin = days_from_civil({2019, 1, 1});
  const auto s = hourly_series(730, [&](Timestamp t) {
    return 5.0 + 2.0 * std::cos(2.0 * std::numbers::pi * static_cast<double>(day_number(t) - origin) / 365.0);
  });
  SeasonalOptions o = small_options(2);
  o.regressors = SeasonalRegressors::QuantileQuadratic;
  const SeasonalModel m = fit_seasonal(s.ts, s.y, o);
  EXPECT_GE(m.metrics.r2, 0.99);
  EXPECT_LE((predict_seasonal(m, s.ts) - s.y).cwiseAbs().maxCoeff(), 0.5);
}

}  // namespace
}  // namespace ppaval::features
