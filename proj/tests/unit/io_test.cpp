#include <gtest/gtest.h>

#include <filesystem>

#include "ppaval/io/json.hpp"
#include "ppaval/synthetic.hpp"

namespace {

using namespace ppaval;
using namespace ppaval::io;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("ppaval_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

using Csv = TempDir;
using Export = TempDir;
using ModelJson = TempDir;

TEST_F(Csv, WellFormedFile) {
  write_text(dir_ / "load.csv",
             "\xEF\xBB\xBFtimestamp,load,solar\n"
             "2023-01-01T00:00:00Z,100,0\n"
             "2023-01-01T01:00:00Z, 98.5 ,\"1.5\"\n"
             "2023-01-01T02:00:00Z,97,NaN\n");
  const auto loaded = load_hourly_csv(dir_ / "load.csv", {{"load"}, {}, true});
  EXPECT_EQ(loaded.frame.size(), 3);
  EXPECT_TRUE(loaded.gaps.empty());
  EXPECT_DOUBLE_EQ(loaded.frame.at("load")[1], 98.5);
  EXPECT_DOUBLE_EQ(loaded.frame.at("solar")[1], 1.5);
  EXPECT_TRUE(std::isnan(loaded.frame.at("solar")[2]));
  EXPECT_EQ(loaded.frame.timestamps[1] - loaded.frame.timestamps[0], time::kHour);
}

TEST_F(Csv, SchemaSelectsColumns) {
  write_text(dir_ / "f.csv", "timestamp,a,b,c\n2023-01-01T00:00:00Z,1,2,3\n");
  const auto loaded = load_hourly_csv(dir_ / "f.csv", {{"a"}, {"c"}, false});
  EXPECT_TRUE(loaded.frame.has("a"));
  EXPECT_FALSE(loaded.frame.has("b"));
  EXPECT_TRUE(loaded.frame.has("c"));
  EXPECT_THROW(load_hourly_csv(dir_ / "f.csv", {{"load"}, {}, true}), DataError);
}

TEST_F(Csv, MissingHourIsReported) {
  write_text(dir_ / "gap.csv",
             "timestamp,load\n"
             "2023-01-01T00:00:00Z,10\n"
             "2023-01-01T03:00:00Z,40\n");
  const auto loaded = load_hourly_csv(dir_ / "gap.csv");
  ASSERT_EQ(loaded.gaps.size(), 2u);
  EXPECT_EQ(time::format_iso8601(loaded.gaps[0]), "2023-01-01T01:00:00Z");
  EXPECT_EQ(time::format_iso8601(loaded.gaps[1]), "2023-01-01T02:00:00Z");

  EXPECT_EQ(fill_gaps(loaded, GapPolicy::Report).size(), 2);
  EXPECT_THROW(fill_gaps(loaded, GapPolicy::Fail), DataError);
  const auto ff = fill_gaps(loaded, GapPolicy::ForwardFill);
  ASSERT_EQ(ff.size(), 4);
  EXPECT_DOUBLE_EQ(ff.at("load")[2], 10.0);
  const auto lin = fill_gaps(loaded, GapPolicy::Linear);
  EXPECT_DOUBLE_EQ(lin.at("load")[1], 20.0);
  EXPECT_DOUBLE_EQ(lin.at("load")[2], 30.0);
  EXPECT_DOUBLE_EQ(lin.at("load")[3], 40.0);
}

TEST_F(Csv, MalformedFilesAreRejected) {
  write_text(dir_ / "dup.csv", "timestamp,load\n2023-01-01T00:00:00Z,1\n2023-01-01T00:00:00Z,2\n");
  EXPECT_THROW(load_hourly_csv(dir_ / "dup.csv"), DataError);
  write_text(dir_ / "dec.csv", "timestamp,load\n2023-01-01T05:00:00Z,1\n2023-01-01T04:00:00Z,2\n");
  EXPECT_THROW(load_hourly_csv(dir_ / "dec.csv"), DataError);
  write_text(dir_ / "txt.csv", "timestamp,load\n2023-01-01T00:00:00Z,abc\n");
  EXPECT_THROW(load_hourly_csv(dir_ / "txt.csv"), DataError);
  write_text(dir_ / "short.csv", "timestamp,load,solar\n2023-01-01T00:00:00Z,1\n");
  EXPECT_THROW(load_hourly_csv(dir_ / "short.csv"), DataError);
  EXPECT_THROW(load_hourly_csv(dir_ / "absent.csv"), DataError);
  EXPECT_THROW(parse_gap_policy("mean"), std::invalid_argument);
  EXPECT_EQ(parse_gap_policy("forward-fill"), GapPolicy::ForwardFill);
}

TEST(ResidualDemand, Examples) {
  const Vector load = Vector::Constant(1, 100.0);
  EXPECT_DOUBLE_EQ(
      residual_demand(load, {Vector::Constant(1, 30.0)}, Vector::Constant(1, 10.0), Vector::Constant(1, 5.0))[0], 65.0);
  EXPECT_DOUBLE_EQ(residual_demand(load, {})[0], 100.0);
  EXPECT_DOUBLE_EQ(residual_demand(load, {}, Vector::Constant(1, 10.0), Vector::Constant(1, 5.0),
                                   NetImportSign::Add)[0],
                   105.0);

  const auto saved = log::threshold();
  log::threshold() = log::Level::Error;
  EXPECT_DOUBLE_EQ(residual_demand(load, {Vector::Constant(1, 130.0)})[0], -30.0);
  log::threshold() = saved;
  EXPECT_THROW(residual_demand(load, {Vector::Zero(2)}), DataError);
}

TEST(ResidualDemand, LinearInEachInput) {
  Vector load(3), sun(3), imp(3), exp(3);
  load << 50, 60, 70;
  sun << 1, 2, 3;
  imp << 4, 0, 2;
  exp << 0, 1, 1;
  const Vector a = residual_demand(load, {sun}, imp, exp);
  const Vector b = residual_demand(load, {2.0 * sun}, imp, exp);
  EXPECT_TRUE((a - b).isApprox(sun));
  const Vector c = residual_demand(2.0 * load, {2.0 * sun}, 2.0 * imp, 2.0 * exp);
  EXPECT_TRUE(c.isApprox(2.0 * a));
}

RunArtifacts sample_run() {
  synthetic::Config cfg;
  cfg.days = 2;
  const auto m = synthetic::generate(cfg);
  RunArtifacts run;
  run.timestamps = m.frame.timestamps;
  run.price = m.dispatch.price;
  for (const auto& t : m.scenario.technologies) run.technologies.push_back(t.id);
  run.dispatch = m.dispatch;
  run.valuation = {{"capture_price", round9(valuation::capture_price(m.frame.at("solar"), m.dispatch.price))}};
  run.sensitivity = valuation::sensitivity_sweep(valuation::Factor::GasPrice, [](double x) { return 50.0 + 10.0 * x; });
  return run;
}

TEST_F(Export, EmptyRunWritesHeaders) {
  RunArtifacts run;
  run.technologies = {"gas", "coal"};
  export_results(run, dir_);
  EXPECT_EQ(read_text(dir_ / "prices.csv"), "timestamp,price\n");
  EXPECT_EQ(read_text(dir_ / "dispatch.csv"), "timestamp,gas,coal,storage_charge,storage_discharge,storage_level\n");
  EXPECT_EQ(read_text(dir_ / "valuation.json"), "{}\n");
  EXPECT_EQ(read_text(dir_ / "sensitivity.csv"), "factor,multiplier,capture_price,relative_change\n");
}

TEST_F(Export, RoundTripAndIdenticalBytes) {
  const auto run = sample_run();
  export_results(run, dir_ / "a");
  export_results(sample_run(), dir_ / "b");
  for (const char* f : {"prices.csv", "dispatch.csv", "valuation.json", "sensitivity.csv"})
    EXPECT_EQ(read_text(dir_ / "a" / f), read_text(dir_ / "b" / f)) << f;

  const auto prices = load_hourly_csv(dir_ / "a" / "prices.csv");
  ASSERT_EQ(prices.frame.size(), static_cast<int>(run.timestamps.size()));
  EXPECT_EQ(prices.frame.timestamps, run.timestamps);
  for (int t = 0; t < prices.frame.size(); ++t)
    EXPECT_NEAR(prices.frame.at("price")[t], run.price[t], 5e-9 * std::max(1.0, std::abs(run.price[t])));
  const auto dispatch = load_hourly_csv(dir_ / "a" / "dispatch.csv");
  EXPECT_NEAR((dispatch.frame.at("gas") - run.dispatch->x.row(2).transpose()).cwiseAbs().maxCoeff(), 0.0, 1e-4);
}

TEST_F(ModelJson, RoundTripPredictsSameCosts) {
  synthetic::Config cfg;
  cfg.days = 3;
  const auto m = synthetic::generate(cfg);
  const auto model = inverse::calibrate(synthetic::calibration_problem(m, 0.0));
  save_model(dir_ / "model.json", model);
  const auto back = load_model(dir_ / "model.json");
  EXPECT_EQ(back.technologies, model.technologies);
  EXPECT_EQ(back.first_period, model.first_period);
  EXPECT_EQ(back.price_pinned, model.price_pinned);

  const auto features = inverse::features_for(back, m.frame);
  const auto a = inverse::predict_costs(model, features);
  const auto b = inverse::predict_costs(back, features);
  EXPECT_TRUE(a.c1.isApprox(b.c1, 1e-15));
  EXPECT_TRUE(a.c2.isApprox(b.c2, 1e-15));

  save_model(dir_ / "again.json", back);
  const auto doc1 = read_json(dir_ / "model.json"), doc2 = read_json(dir_ / "again.json");
  EXPECT_EQ(doc1["coefficients"], doc2["coefficients"]);
}

TEST_F(ModelJson, RejectsForeignDocuments) {
  write_text(dir_ / "bad.json", R"({"format": "other", "version": 1})");
  EXPECT_THROW(load_model(dir_ / "bad.json"), DataError);
  write_text(dir_ / "v2.json", R"({"format": "ppaval-model", "version": 2})");
  EXPECT_THROW(load_model(dir_ / "v2.json"), DataError);
  write_text(dir_ / "broken.json", "{");
  EXPECT_THROW(load_model(dir_ / "broken.json"), DataError);
  write_text(dir_ / "partial.json", R"({"format": "ppaval-model", "version": 1, "technologies": ["gas"]})");
  EXPECT_THROW(load_model(dir_ / "partial.json"), DataError);
}

}  // namespace
