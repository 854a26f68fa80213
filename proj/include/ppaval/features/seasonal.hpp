#pragma once

// Hour-of-day seasonal regressions for capacity factors, temperature and demand:
//
//   Y_dh = b0_h + b1_h d + sum_j b2_hj 1{weekday j}(d) + b3_h 1{holiday}(d)
//          + sum_{i=1..H} ( b4_hi sin(2 pi d i / 365) + b5_hi cos(2 pi d i / 365) )
//
// d counts days from the model origin (first training day). The calendar terms are
// present only when the model is fitted with_calendar. Each hour gets its own LASSO fit
// with the penalty chosen by contiguous 5-fold cross-validation.

#include <array>
#include <cmath>
#include <future>
#include <numbers>
#include <string>
#include <vector>

#include "ppaval/features/scaling.hpp"
#include "ppaval/learn/cross_validation.hpp"
#include "ppaval/series.hpp"

namespace ppaval::features {

using namespace ppaval::time;

enum class SeasonalRegressors {
  Structural,         ///< the stated basis, min-max scaled for the penalty, coefficients mapped back
  QuantileQuadratic,  ///< quantile-transformed basis expanded to second order
};

struct SeasonalOptions {
  int harmonics = 180;
  bool with_calendar = false;
  bool trend = true;
  SeasonalRegressors regressors = SeasonalRegressors::Structural;
  int cv_folds = 5;
  int n_lambdas = 30;
  learn::LassoOptions lasso{1e-10, 100000};
  bool parallel = false;
};

struct FitMetrics {
  double rmse = 0.0;
  double mae = 0.0;
  double r2 = 0.0;
  double rmse_std = 0.0;  ///< on the target standardized by its training mean and deviation
  double mae_std = 0.0;
};

struct HourCoefficients {
  double b0 = 0.0;
  double b1 = 0.0;
  std::array<double, 6> b2{};  ///< Monday..Saturday; Sunday is the baseline
  double b3 = 0.0;
  Vector b4;                   ///< sin terms, i = 1..H
  Vector b5;                   ///< cos terms
  double lambda = 0.0;
  FitMetrics metrics;

  // QuantileQuadratic models only.
  std::vector<QuantileTransformer> transformers;
  learn::LassoModel expanded;
};

struct SeasonalModel {
  std::int64_t origin_day = 0;
  int harmonics = 0;
  bool includes_calendar = false;
  bool trend = true;
  SeasonalRegressors regressors = SeasonalRegressors::Structural;
  std::array<HourCoefficients, 24> hours;
  FitMetrics metrics;  ///< pooled over all hours
};

namespace detail {

/// Raw basis row for day d: [d, weekday dummies, holiday, sin_1..sin_H, cos_1..cos_H].
/// The phase uses (d i) mod 365 so that d and d + 365 give identical rows.
inline Vector seasonal_basis(std::int64_t d, int weekday_index, bool holiday, int H, bool trend, bool calendar) {
  Vector row(static_cast<Eigen::Index>((trend ? 1 : 0) + (calendar ? 7 : 0) + 2 * H));
  Eigen::Index k = 0;
  if (trend) row[k++] = static_cast<double>(d);
  if (calendar) {
    for (int j = 0; j < 6; ++j) row[k++] = weekday_index == j ? 1.0 : 0.0;
    row[k++] = holiday ? 1.0 : 0.0;
  }
  const std::int64_t dm = ((d % 365) + 365) % 365;
  for (int i = 1; i <= H; ++i) row[k + i - 1] = std::sin(2.0 * std::numbers::pi * static_cast<double>((dm * i) % 365) / 365.0);
  for (int i = 1; i <= H; ++i) row[k + H + i - 1] = std::cos(2.0 * std::numbers::pi * static_cast<double>((dm * i) % 365) / 365.0);
  return row;
}

inline Matrix quadratic_expand(const Matrix& Q) {
  const Eigen::Index p = Q.cols();
  Matrix out(Q.rows(), p + p * (p + 1) / 2);
  out.leftCols(p) = Q;
  Eigen::Index k = p;
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index j = i; j < p; ++j) out.col(k++) = Q.col(i).cwiseProduct(Q.col(j));
  return out;
}

inline FitMetrics metrics(const Vector& y, const Vector& fitted) {
  FitMetrics m;
  const double n = static_cast<double>(y.size());
  const Vector r = y - fitted;
  m.rmse = std::sqrt(r.squaredNorm() / n);
  m.mae = r.cwiseAbs().sum() / n;
  const double ss_tot = (y.array() - y.mean()).square().sum();
  m.r2 = ss_tot > 0.0 ? 1.0 - r.squaredNorm() / ss_tot : (r.squaredNorm() == 0.0 ? 1.0 : 0.0);
  const double sd = std::sqrt(ss_tot / n);
  m.rmse_std = sd > 0.0 ? m.rmse / sd : 0.0;
  m.mae_std = sd > 0.0 ? m.mae / sd : 0.0;
  return m;
}

inline double evaluate(const SeasonalModel& model, const HourCoefficients& c, std::int64_t d, int wd, bool holiday) {
  const Vector row = seasonal_basis(d, wd, holiday, model.harmonics, model.trend, model.includes_calendar);
  if (model.regressors == SeasonalRegressors::QuantileQuadratic) {
    Matrix q(1, row.size());
    for (Eigen::Index j = 0; j < row.size(); ++j) q(0, j) = c.transformers[static_cast<std::size_t>(j)](row[j]);
    return c.expanded.predict(quadratic_expand(q))[0];
  }
  double v = c.b0;
  Eigen::Index k = 0;
  if (model.trend) v += c.b1 * row[k++];
  if (model.includes_calendar) {
    for (int j = 0; j < 6; ++j) v += c.b2[static_cast<std::size_t>(j)] * row[k++];
    v += c.b3 * row[k++];
  }
  const int H = model.harmonics;
  v += c.b4.dot(row.segment(k, H)) + c.b5.dot(row.segment(k + H, H));
  return v;
}

inline HourCoefficients fit_hour(const Matrix& basis, const Vector& y, const SeasonalOptions& opt) {
  HourCoefficients c;
  const int H = opt.harmonics;
  const Vector w = Vector::Ones(y.size());
  if (opt.regressors == SeasonalRegressors::QuantileQuadratic) {
    Matrix Q(basis.rows(), basis.cols());
    for (Eigen::Index j = 0; j < basis.cols(); ++j) {
      c.transformers.push_back(QuantileTransformer::fit(basis.col(j)));
      Q.col(j) = c.transformers.back().transform(basis.col(j));
    }
    const auto fit = learn::fit_lasso_cv_path(quadratic_expand(Q), y, w, opt.cv_folds, opt.n_lambdas, opt.lasso);
    c.expanded = fit.model;
    c.lambda = fit.cv.best_lambda;
    c.b4 = Vector::Zero(H);
    c.b5 = Vector::Zero(H);
    return c;
  }
  const MinMaxScaler scaler = MinMaxScaler::fit(basis);
  const auto fit = learn::fit_lasso_cv_path(scaler.transform(basis), y, w, opt.cv_folds, opt.n_lambdas, opt.lasso);
  c.lambda = fit.cv.best_lambda;
  // Undo the scaling: b_raw = b_scaled / span, intercept absorbs -b_raw * min.
  Vector b(basis.cols());
  double b0 = fit.model.intercept;
  for (Eigen::Index j = 0; j < basis.cols(); ++j) {
    b[j] = fit.model.coefficients[j] / scaler.span(j);
    b0 -= b[j] * scaler.min[j];
  }
  c.b0 = b0;
  Eigen::Index k = 0;
  if (opt.trend) c.b1 = b[k++];
  if (opt.with_calendar) {
    for (std::size_t j = 0; j < 6; ++j) c.b2[j] = b[k++];
    c.b3 = b[k++];
  }
  c.b4 = b.segment(k, H);
  c.b5 = b.segment(k + H, H);
  return c;
}

}  // namespace detail

/**
 * Fits one model per hour of day to an hourly series. The series must span at least
 * 365 days. Hours with no observations keep zero coefficients.
 */
inline SeasonalModel fit_seasonal(const std::vector<Timestamp>& timestamps, const Vector& values,
                                  const SeasonalOptions& opt = {}, const HolidayCalendar& calendar = {}) {
  require(opt.harmonics >= 1 && opt.harmonics <= 180, "fit_seasonal: harmonics must be in [1, 180]");
  if (static_cast<Eigen::Index>(timestamps.size()) != values.size())
    throw DataError("fit_seasonal: timestamps and values differ in length");
  if (timestamps.empty()) throw DataError("fit_seasonal: empty series");
  for (Eigen::Index t = 0; t < values.size(); ++t)
    if (!std::isfinite(values[t])) throw DataError("fit_seasonal: non-finite value at row " + std::to_string(t));
  const auto [first, last] = std::minmax_element(timestamps.begin(), timestamps.end());
  const std::int64_t span_days = day_number(*last) - day_number(*first) + 1;
  if (span_days < 365)
    throw DataError("fit_seasonal: series covers " + std::to_string(span_days) + " days; at least 365 required");

  SeasonalModel model;
  model.origin_day = day_number(*first);
  model.harmonics = opt.harmonics;
  model.includes_calendar = opt.with_calendar;
  model.trend = opt.trend;
  model.regressors = opt.regressors;

  std::array<std::vector<std::size_t>, 24> rows_by_hour;
  for (std::size_t t = 0; t < timestamps.size(); ++t)
    rows_by_hour[static_cast<std::size_t>(hour_of_day(timestamps[t]))].push_back(t);

  auto fit_one = [&](int h) {
    const auto& rows = rows_by_hour[static_cast<std::size_t>(h)];
    HourCoefficients c;
    c.b4 = Vector::Zero(opt.harmonics);
    c.b5 = Vector::Zero(opt.harmonics);
    if (rows.size() < static_cast<std::size_t>(std::max(opt.cv_folds, 2))) return c;
    Matrix basis(static_cast<Eigen::Index>(rows.size()),
                 static_cast<Eigen::Index>((opt.trend ? 1 : 0) + (opt.with_calendar ? 7 : 0) + 2 * opt.harmonics));
    Vector y(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const Timestamp ts = timestamps[rows[r]];
      basis.row(static_cast<Eigen::Index>(r)) =
          detail::seasonal_basis(day_number(ts) - model.origin_day, weekday(ts), calendar.contains(ts),
                                 opt.harmonics, opt.trend, opt.with_calendar)
              .transpose();
      y[static_cast<Eigen::Index>(r)] = values[static_cast<Eigen::Index>(rows[r])];
    }
    c = detail::fit_hour(basis, y, opt);
    Vector fitted(y.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const Timestamp ts = timestamps[rows[r]];
      fitted[static_cast<Eigen::Index>(r)] =
          detail::evaluate(model, c, day_number(ts) - model.origin_day, weekday(ts), calendar.contains(ts));
    }
    c.metrics = detail::metrics(y, fitted);
    return c;
  };

  if (opt.parallel) {
    std::vector<std::future<HourCoefficients>> jobs;
    for (int h = 0; h < 24; ++h) jobs.push_back(std::async(std::launch::async, fit_one, h));
    for (int h = 0; h < 24; ++h) model.hours[static_cast<std::size_t>(h)] = jobs[static_cast<std::size_t>(h)].get();
  } else {
    for (int h = 0; h < 24; ++h) model.hours[static_cast<std::size_t>(h)] = fit_one(h);
  }

  Vector fitted(values.size());
  for (std::size_t t = 0; t < timestamps.size(); ++t) {
    const Timestamp ts = timestamps[t];
    fitted[static_cast<Eigen::Index>(t)] =
        detail::evaluate(model, model.hours[static_cast<std::size_t>(hour_of_day(ts))], day_number(ts) - model.origin_day,
                         weekday(ts), calendar.contains(ts));
  }
  model.metrics = detail::metrics(values, fitted);
  return model;
}

inline Vector predict_seasonal(const SeasonalModel& model, const std::vector<Timestamp>& timestamps,
                               const HolidayCalendar& calendar = {}) {
  Vector out(static_cast<Eigen::Index>(timestamps.size()));
  for (std::size_t t = 0; t < timestamps.size(); ++t) {
    const Timestamp ts = timestamps[t];
    out[static_cast<Eigen::Index>(t)] =
        detail::evaluate(model, model.hours[static_cast<std::size_t>(hour_of_day(ts))], day_number(ts) - model.origin_day,
                         weekday(ts), calendar.contains(ts));
  }
  return out;
}

}  // namespace ppaval::features
