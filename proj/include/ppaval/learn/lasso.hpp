#pragma once

// Weighted LASSO by cyclic coordinate descent.
//
//   J(b0, b) = (1 / sum w) * sum_t w_t (y_t - b0 - <x_t, b>)^2 + lambda * ||b||_1
//
// The intercept b0 is not penalized. With this normalization the coordinate update is
// b_j = S(rho_j, lambda / 2) / a_j, where a_j is the weighted second moment of the
// centred column and rho_j its weighted covariance with the partial residual. Updates
// run on the weighted Gram matrix, so a sweep costs O(p^2) once it is formed.

#include <algorithm>
#include <cmath>
#include <vector>

#include "ppaval/common.hpp"

namespace ppaval::learn {

struct LassoModel {
  Vector coefficients;
  double intercept = 0.0;
  double lambda = 0.0;
  double training_wmse = 0.0;  ///< (1/sum w) sum w r^2 at the solution
  int sweeps = 0;

  [[nodiscard]] Vector predict(const Matrix& X) const {
    require(X.cols() == coefficients.size(), "LassoModel::predict: column count mismatch");
    return (X * coefficients).array() + intercept;
  }
};

struct LassoOptions {
  double tolerance = 1e-13;  ///< on the largest scaled coordinate change per sweep
  int max_sweeps = 100000;
};

inline double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

namespace detail {

struct WeightedDesign {
  Vector w;      // normalized weights, sum 1
  Vector x_mean;
  double y_mean = 0.0;
  Matrix Xc;     // centred columns
  Vector yc;
  Vector second_moment;
};

inline WeightedDesign center(const Matrix& X, const Vector& y, const Vector& weights) {
  require(X.rows() == y.size() && y.size() == weights.size(), "lasso: dimension mismatch");
  require((weights.array() >= 0.0).all(), "lasso: negative sample weight");
  const double W = weights.sum();
  if (!(W > 0.0)) throw DataError("lasso: all sample weights are zero");
  WeightedDesign d;
  d.w = weights / W;
  d.x_mean = X.transpose() * d.w;
  d.y_mean = d.w.dot(y);
  d.Xc = X.rowwise() - d.x_mean.transpose();
  d.yc = y.array() - d.y_mean;
  d.second_moment = d.Xc.array().square().matrix().transpose() * d.w;
  return d;
}

}  // namespace detail

/// Smallest lambda for which every penalized coefficient is zero.
inline double lasso_lambda_max(const Matrix& X, const Vector& y, const Vector& weights) {
  const detail::WeightedDesign d = detail::center(X, y, weights);
  if (X.cols() == 0) return 0.0;
  return 2.0 * (d.Xc.transpose() * d.w.cwiseProduct(d.yc)).cwiseAbs().maxCoeff();
}

inline double lasso_objective(const Matrix& X, const Vector& y, const Vector& weights, const LassoModel& m) {
  const Vector r = y - m.predict(X);
  return weights.dot(r.cwiseProduct(r)) / weights.sum() + m.lambda * m.coefficients.lpNorm<1>();
}

namespace detail {

/// Sufficient statistics for covariance-form coordinate descent (normalized weights).
struct GramProblem {
  Vector x_mean;
  double y_mean = 0.0;
  Matrix gram;   // Xc' W Xc
  Vector xty;    // Xc' W yc
  double yy = 0.0;

  static GramProblem from(const Matrix& X, const Vector& y, const Vector& weights) {
    const WeightedDesign d = center(X, y, weights);
    GramProblem g;
    g.x_mean = d.x_mean;
    g.y_mean = d.y_mean;
    const Matrix wx = d.w.asDiagonal() * d.Xc;
    g.gram = d.Xc.transpose() * wx;
    g.xty = wx.transpose() * d.yc;
    g.yy = d.w.dot(d.yc.cwiseProduct(d.yc));
    return g;
  }
};

/// Runs coordinate descent from `b` in place; returns the number of sweeps.
inline int solve_cd(const GramProblem& g, double lambda, const LassoOptions& opt, Vector& b) {
  const auto p = g.xty.size();
  Vector grad = g.xty - g.gram * b;  // Xc' W r
  const double half = 0.5 * lambda;
  const double scale = std::max(1.0, std::sqrt(g.yy));
  int sweeps = 0;
  while (sweeps < opt.max_sweeps) {
    ++sweeps;
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double a = g.gram(j, j);
      const double old = b[j];
      const double next = a > 0.0 ? soft_threshold(grad[j] + a * old, half) / a : 0.0;
      if (next != old) {
        grad -= g.gram.col(j) * (next - old);
        b[j] = next;
        max_change = std::max(max_change, std::abs(next - old) * std::sqrt(std::max(a, 0.0)));
      }
    }
    if (max_change <= opt.tolerance * scale) break;
  }
  return sweeps;
}

inline LassoModel finish(const Matrix& X, const Vector& y, const Vector& weights, const GramProblem& g,
                         double lambda, Vector b, int sweeps) {
  LassoModel m;
  m.lambda = lambda;
  m.coefficients = std::move(b);
  m.sweeps = sweeps;
  m.intercept = g.y_mean - g.x_mean.dot(m.coefficients);
  const Vector r = y - m.predict(X);
  m.training_wmse = weights.dot(r.cwiseProduct(r)) / weights.sum();
  return m;
}

}  // namespace detail

/// Fits the model; `warm_start` (same column count) seeds the coefficients.
inline LassoModel fit_lasso_cd(const Matrix& X, const Vector& y, const Vector& weights, double lambda,
                               const LassoOptions& opt = {}, const Vector* warm_start = nullptr) {
  require(lambda >= 0.0 && std::isfinite(lambda), "fit_lasso_cd: lambda must be finite and >= 0");
  const detail::GramProblem g = detail::GramProblem::from(X, y, weights);
  Vector b = Vector::Zero(X.cols());
  if (warm_start) {
    require(warm_start->size() == X.cols(), "fit_lasso_cd: warm start size mismatch");
    b = *warm_start;
  }
  const int sweeps = detail::solve_cd(g, lambda, opt, b);
  return detail::finish(X, y, weights, g, lambda, std::move(b), sweeps);
}

/**
 * Largest violation of the optimality conditions: for b_j != 0 the scaled gradient
 * 2/W <X_j, W r> must equal lambda sign(b_j); for b_j = 0 its magnitude must not
 * exceed lambda. The intercept condition sum w r = 0 is included.
 */
inline double lasso_subgradient_violation(const Matrix& X, const Vector& y, const Vector& weights,
                                          const LassoModel& m) {
  const Vector w = weights / weights.sum();
  const Vector r = y - m.predict(X);
  double worst = std::abs(w.dot(r));
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double g = 2.0 * X.col(j).dot(w.cwiseProduct(r));
    const double b = m.coefficients[j];
    if (b > 0) worst = std::max(worst, std::abs(g - m.lambda));
    else if (b < 0) worst = std::max(worst, std::abs(g + m.lambda));
    else worst = std::max(worst, std::abs(g) - m.lambda);
  }
  return worst;
}

/// Log-spaced grid of `count` values from lambda_max down to ratio * lambda_max, descending.
inline std::vector<double> lambda_path(double lambda_max, int count = 50, double ratio = 1e-4) {
  require(count >= 1, "lambda_path: count must be positive");
  std::vector<double> grid;
  if (lambda_max <= 0.0) return {0.0};
  for (int k = 0; k < count; ++k)
    grid.push_back(lambda_max * std::pow(ratio, count == 1 ? 0.0 : static_cast<double>(k) / (count - 1)));
  return grid;
}

}  // namespace ppaval::learn
