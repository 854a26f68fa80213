#pragma once

// Regressor matrix for the cost regressions: numeric base series, their pairwise
// products (squares included), calendar dummies and an intercept. Numeric columns are
// min-max scaled with the training range; dummies and the intercept are left as 0/1.

#include <cmath>
#include <string>
#include <vector>

#include "ppaval/features/scaling.hpp"
#include "ppaval/series.hpp"

namespace ppaval::features {

using namespace ppaval::time;

inline std::vector<std::string> default_base_features() {
  return {"demand", "gas", "coal", "carbon", "temperature", "solar", "wind", "run_of_river"};
}

struct FeatureSpec {
  std::vector<std::string> base = default_base_features();
  bool interactions = true;
  bool hour_dummies = true;     ///< hours 1..23; hour 0 is the baseline
  bool weekday_dummies = true;  ///< Monday..Saturday; Sunday is the baseline
  bool holiday_dummy = true;
  bool intercept = true;
};

struct FeatureMatrix {
  FeatureSpec spec;
  std::vector<std::string> column_names;
  Matrix values;          ///< T x n, scaled
  MinMaxScaler scaler;    ///< fitted on the training frame
  std::string schema_hash;

  [[nodiscard]] int n_columns() const { return static_cast<int>(column_names.size()); }
};

namespace detail {

inline std::string pad2(int v) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02d", v);
  return buf;
}

inline void check_finite(const HourlyFrame& frame, const std::vector<std::string>& names) {
  std::string report;
  for (const auto& name : names) {
    const Vector& v = frame.at(name);
    std::vector<int> bad;
    for (Eigen::Index t = 0; t < v.size(); ++t)
      if (!std::isfinite(v[t])) bad.push_back(static_cast<int>(t));
    if (bad.empty()) continue;
    report += " '" + name + "' rows";
    for (std::size_t k = 0; k < bad.size() && k < 10; ++k) report += " " + std::to_string(bad[k]);
    if (bad.size() > 10) report += " ... (" + std::to_string(bad.size()) + " total)";
    report += ";";
  }
  if (!report.empty()) throw DataError("non-finite feature values:" + report);
}

struct RawFeatures {
  std::vector<std::string> names;
  std::vector<bool> exempt;
  Matrix values;
};

inline RawFeatures raw_features(const HourlyFrame& frame, const HolidayCalendar& calendar, const FeatureSpec& spec) {
  check_finite(frame, spec.base);
  const int T = frame.size();
  const auto nb = spec.base.size();
  RawFeatures out;
  std::vector<Vector> cols;
  auto add = [&](std::string name, Vector v, bool exempt) {
    out.names.push_back(std::move(name));
    out.exempt.push_back(exempt);
    cols.push_back(std::move(v));
  };
  for (const auto& name : spec.base) add(name, frame.at(name), false);
  if (spec.interactions)
    for (std::size_t i = 0; i < nb; ++i)
      for (std::size_t j = i; j < nb; ++j)
        add(spec.base[i] + "*" + spec.base[j], cols[i].cwiseProduct(cols[j]), false);
  if (spec.hour_dummies)
    for (int h = 1; h < 24; ++h) {
      Vector v(T);
      for (int t = 0; t < T; ++t) v[t] = hour_of_day(frame.timestamps[static_cast<std::size_t>(t)]) == h;
      add("hour_" + pad2(h), std::move(v), true);
    }
  if (spec.weekday_dummies) {
    static const char* const kDays[] = {"mon", "tue", "wed", "thu", "fri", "sat"};
    for (int d = 0; d < 6; ++d) {
      Vector v(T);
      for (int t = 0; t < T; ++t) v[t] = weekday(frame.timestamps[static_cast<std::size_t>(t)]) == d;
      add(std::string("weekday_") + kDays[d], std::move(v), true);
    }
  }
  if (spec.holiday_dummy) {
    Vector v(T);
    for (int t = 0; t < T; ++t) v[t] = calendar.contains(frame.timestamps[static_cast<std::size_t>(t)]);
    add("holiday", std::move(v), true);
  }
  if (spec.intercept) add("intercept", Vector::Ones(T), true);

  out.values.resize(T, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) out.values.col(static_cast<Eigen::Index>(j)) = cols[j];
  return out;
}

inline std::string schema_hash(const FeatureSpec& spec, const std::vector<std::string>& names) {
  std::string text = "v1";
  text += spec.interactions ? "|I" : "|-";
  for (const auto& n : names) text += "\n" + n;
  return fnv1a_hex(text);
}

}  // namespace detail

/// Builds the training feature matrix and fits its scaler.
inline FeatureMatrix build_features(const HourlyFrame& frame, const HolidayCalendar& calendar,
                                    const FeatureSpec& spec = {}) {
  if (frame.size() == 0) throw DataError("build_features: empty frame");
  detail::RawFeatures raw = detail::raw_features(frame, calendar, spec);
  FeatureMatrix fm;
  fm.spec = spec;
  fm.column_names = std::move(raw.names);
  fm.scaler = MinMaxScaler::fit(raw.values, std::move(raw.exempt));
  fm.values = fm.scaler.transform(raw.values);
  fm.schema_hash = detail::schema_hash(spec, fm.column_names);
  return fm;
}

/// Builds features for new data with the schema and scaler of a trained matrix.
inline FeatureMatrix apply_features(const HourlyFrame& frame, const HolidayCalendar& calendar,
                                    const FeatureMatrix& trained) {
  detail::RawFeatures raw = detail::raw_features(frame, calendar, trained.spec);
  if (raw.names != trained.column_names) throw DataError("apply_features: feature schema mismatch");
  FeatureMatrix fm;
  fm.spec = trained.spec;
  fm.column_names = trained.column_names;
  fm.scaler = trained.scaler;
  fm.values = trained.scaler.transform(raw.values);
  fm.schema_hash = trained.schema_hash;
  return fm;
}

/// Column indices whose names appear in `keep` (in matrix order); used to select Z subsets.
inline std::vector<int> select_columns(const FeatureMatrix& fm, const std::vector<std::string>& keep) {
  std::vector<int> idx;
  for (const auto& k : keep) {
    bool found = false;
    for (int j = 0; j < fm.n_columns(); ++j)
      if (fm.column_names[static_cast<std::size_t>(j)] == k) {
        idx.push_back(j);
        found = true;
      }
    if (!found) throw DataError("unknown feature column '" + k + "'");
  }
  return idx;
}

}  // namespace ppaval::features
