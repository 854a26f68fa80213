#pragma once

#include <algorithm>
#include <utility>
#include <vector>

#include "ppaval/common.hpp"
#include "ppaval/learn/lasso.hpp"

namespace ppaval::learn {

namespace lasso_detail = ppaval::learn::detail;

struct Fold {
  int begin = 0;  ///< validation block [begin, end)
  int end = 0;
};

/// k contiguous validation blocks covering [0, n); earlier blocks take the remainder.
inline std::vector<Fold> contiguous_folds(int n, int k) {
  require(k >= 2, "contiguous_folds: k must be >= 2");
  require(n >= k, "contiguous_folds: fewer samples than folds");
  std::vector<Fold> folds;
  int start = 0;
  for (int f = 0; f < k; ++f) {
    const int size = n / k + (f < n % k ? 1 : 0);
    folds.push_back({start, start + size});
    start += size;
  }
  return folds;
}

struct CvResult {
  double best_lambda = 0.0;
  std::vector<double> lambdas;  ///< sorted ascending
  std::vector<double> losses;   ///< mean validation weighted MSE per lambda
};

namespace detail {

inline Matrix take_rows(const Matrix& X, const std::vector<int>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = X.row(rows[k]);
  return out;
}

inline Vector take(const Vector& v, const std::vector<int>& rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) out[static_cast<Eigen::Index>(k)] = v[rows[k]];
  return out;
}

}  // namespace detail

/**
 * k-fold cross-validation over contiguous time blocks. `fit_fn(X, y, w, lambda)` returns a
 * model exposing `predict(X)`. The selected lambda minimizes the mean validation weighted
 * MSE; ties go to the smallest lambda.
 */
template <class FitFn>
CvResult cross_validate(FitFn&& fit_fn, const Matrix& X, const Vector& y, const Vector& weights, int k,
                        std::vector<double> lambda_grid) {
  require(!lambda_grid.empty(), "cross_validate: empty lambda grid");
  require(X.rows() == y.size() && y.size() == weights.size(), "cross_validate: dimension mismatch");
  std::sort(lambda_grid.begin(), lambda_grid.end());
  const int n = static_cast<int>(y.size());
  const std::vector<Fold> folds = contiguous_folds(n, k);

  CvResult res;
  res.lambdas = lambda_grid;
  res.losses.assign(lambda_grid.size(), 0.0);
  int used_folds = 0;
  for (const Fold& f : folds) {
    std::vector<int> train, valid;
    for (int t = 0; t < n; ++t) (t >= f.begin && t < f.end ? valid : train).push_back(t);
    const Vector w_valid = detail::take(weights, valid);
    const Vector w_train = detail::take(weights, train);
    if (w_valid.sum() <= 0.0 || w_train.sum() <= 0.0) continue;
    const Matrix X_train = detail::take_rows(X, train), X_valid = detail::take_rows(X, valid);
    const Vector y_train = detail::take(y, train), y_valid = detail::take(y, valid);
    for (std::size_t g = 0; g < lambda_grid.size(); ++g) {
      const auto model = fit_fn(X_train, y_train, w_train, lambda_grid[g]);
      const Vector r = y_valid - model.predict(X_valid);
      res.losses[g] += w_valid.dot(r.cwiseProduct(r)) / w_valid.sum();
    }
    ++used_folds;
  }
  if (used_folds == 0) throw DataError("cross_validate: every fold has zero weight");
  for (double& l : res.losses) l /= used_folds;

  std::size_t best = 0;
  for (std::size_t g = 1; g < res.losses.size(); ++g)
    if (res.losses[g] < res.losses[best] * (1.0 - 1e-12) - 1e-300) best = g;
  res.best_lambda = lambda_grid[best];
  return res;
}

struct LassoCvFit {
  LassoModel model;  ///< refit on all data at the selected lambda
  CvResult cv;
};

/**
 * Cross-validated LASSO over a log-spaced path from lambda_max. Each fold walks the path
 * from the largest lambda down with warm starts; selection follows cross_validate.
 */
inline LassoCvFit fit_lasso_cv_path(const Matrix& X, const Vector& y, const Vector& weights, int k = 5,
                                    int n_lambdas = 30, const LassoOptions& opt = {}) {
  require(X.rows() == y.size() && y.size() == weights.size(), "fit_lasso_cv: dimension mismatch");
  const std::vector<double> path = lambda_path(lasso_lambda_max(X, y, weights), n_lambdas);  // descending
  const int n = static_cast<int>(y.size());
  const std::vector<Fold> folds = contiguous_folds(n, k);
  std::vector<double> losses(path.size(), 0.0);
  int used_folds = 0;
  for (const Fold& f : folds) {
    std::vector<int> train, valid;
    for (int t = 0; t < n; ++t) (t >= f.begin && t < f.end ? valid : train).push_back(t);
    const Vector w_valid = detail::take(weights, valid), w_train = detail::take(weights, train);
    if (w_valid.sum() <= 0.0 || w_train.sum() <= 0.0) continue;
    const Matrix X_train = detail::take_rows(X, train), X_valid = detail::take_rows(X, valid);
    const Vector y_train = detail::take(y, train), y_valid = detail::take(y, valid);
    const lasso_detail::GramProblem gram = lasso_detail::GramProblem::from(X_train, y_train, w_train);
    Vector b = Vector::Zero(X.cols());
    for (std::size_t g = 0; g < path.size(); ++g) {
      lasso_detail::solve_cd(gram, path[g], opt, b);
      const Vector r = (y_valid.array() - (gram.y_mean - gram.x_mean.dot(b))).matrix() - X_valid * b;
      losses[g] += w_valid.dot(r.cwiseProduct(r)) / w_valid.sum();
    }
    ++used_folds;
  }
  if (used_folds == 0) throw DataError("fit_lasso_cv: every fold has zero weight");

  LassoCvFit out;
  out.cv.lambdas.assign(path.rbegin(), path.rend());
  out.cv.losses.assign(losses.rbegin(), losses.rend());
  for (double& l : out.cv.losses) l /= used_folds;
  std::size_t best = 0;
  for (std::size_t g = 1; g < out.cv.losses.size(); ++g)
    if (out.cv.losses[g] < out.cv.losses[best] * (1.0 - 1e-12) - 1e-300) best = g;
  out.cv.best_lambda = out.cv.lambdas[best];
  out.model = fit_lasso_cd(X, y, weights, out.cv.best_lambda, opt);
  return out;
}

inline LassoModel fit_lasso_cv(const Matrix& X, const Vector& y, const Vector& weights, int k = 5,
                               int n_lambdas = 30, const LassoOptions& opt = {}) {
  return fit_lasso_cv_path(X, y, weights, k, n_lambdas, opt).model;
}

}  // namespace ppaval::learn
