#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>

#include "ppaval/common.hpp"

namespace ppaval::qp {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Triplet = Eigen::Triplet<double, int>;

/**
 * Separable convex QP
 *
 *   min   sum_j linear_j x_j + quadratic_j x_j^2
 *   s.t.  row_lower <= A x <= row_upper
 *         var_lower <= x   <= var_upper
 *
 * Rows with row_lower == row_upper are equalities. Bounds may be infinite.
 * Note the quadratic term carries no 1/2: the Hessian is 2*diag(quadratic).
 */
struct QpProblem {
  Vector linear;
  Vector quadratic;
  SparseMatrix A;
  Vector row_lower;
  Vector row_upper;
  Vector var_lower;
  Vector var_upper;

  [[nodiscard]] int n_vars() const { return static_cast<int>(linear.size()); }
  [[nodiscard]] int n_rows() const { return static_cast<int>(A.rows()); }

  [[nodiscard]] double objective(const Vector& x) const {
    return linear.dot(x) + quadratic.dot(x.cwiseProduct(x));
  }

  /// Throws std::invalid_argument when the problem is not a well-formed convex QP.
  void validate() const {
    const auto n = linear.size();
    require(quadratic.size() == n, "QpProblem: quadratic size mismatch");
    require(var_lower.size() == n && var_upper.size() == n,
            "QpProblem: variable bound size mismatch");
    require(A.cols() == n, "QpProblem: constraint matrix column count mismatch");
    require(row_lower.size() == A.rows() && row_upper.size() == A.rows(),
            "QpProblem: row bound size mismatch");
    for (Eigen::Index j = 0; j < n; ++j) {
      require(std::isfinite(linear[j]) && std::isfinite(quadratic[j]),
              "QpProblem: non-finite objective coefficient at column " + std::to_string(j));
      require(quadratic[j] >= 0.0,
              "QpProblem: negative quadratic coefficient at column " + std::to_string(j));
      require(!std::isnan(var_lower[j]) && !std::isnan(var_upper[j]) &&
                  var_lower[j] <= var_upper[j],
              "QpProblem: inconsistent bounds at column " + std::to_string(j));
      require(var_lower[j] < kInf && var_upper[j] > -kInf,
              "QpProblem: empty bound interval at column " + std::to_string(j));
    }
    std::vector<int> row_nnz(static_cast<std::size_t>(A.rows()), 0);
    for (int k = 0; k < A.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(A, k); it; ++it) {
        require(std::isfinite(it.value()), "QpProblem: non-finite constraint coefficient");
        if (it.value() != 0.0) ++row_nnz[static_cast<std::size_t>(it.row())];
      }
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      require(row_nnz[static_cast<std::size_t>(i)] > 0,
              "QpProblem: empty constraint row " + std::to_string(i));
      require(!std::isnan(row_lower[i]) && !std::isnan(row_upper[i]) &&
                  row_lower[i] <= row_upper[i],
              "QpProblem: inconsistent row bounds at row " + std::to_string(i));
    }
  }
};

/// Incremental construction of a QpProblem from columns and sparse rows.
class QpBuilder {
 public:
  int add_var(double lower, double upper, double linear = 0.0, double quadratic = 0.0) {
    linear_.push_back(linear);
    quadratic_.push_back(quadratic);
    lower_.push_back(lower);
    upper_.push_back(upper);
    return static_cast<int>(linear_.size()) - 1;
  }

  int add_row(const std::vector<std::pair<int, double>>& entries, double lower, double upper) {
    const int row = static_cast<int>(row_lower_.size());
    for (const auto& [col, value] : entries) triplets_.emplace_back(row, col, value);
    row_lower_.push_back(lower);
    row_upper_.push_back(upper);
    return row;
  }

  int add_equality(const std::vector<std::pair<int, double>>& entries, double rhs) {
    return add_row(entries, rhs, rhs);
  }

  void set_linear(int col, double value) { linear_[static_cast<std::size_t>(col)] = value; }
  void set_quadratic(int col, double value) { quadratic_[static_cast<std::size_t>(col)] = value; }

  [[nodiscard]] int n_vars() const { return static_cast<int>(linear_.size()); }
  [[nodiscard]] int n_rows() const { return static_cast<int>(row_lower_.size()); }

  [[nodiscard]] QpProblem build() const {
    QpProblem p;
    const auto n = static_cast<Eigen::Index>(linear_.size());
    const auto m = static_cast<Eigen::Index>(row_lower_.size());
    p.linear = Eigen::Map<const Vector>(linear_.data(), n);
    p.quadratic = Eigen::Map<const Vector>(quadratic_.data(), n);
    p.var_lower = Eigen::Map<const Vector>(lower_.data(), n);
    p.var_upper = Eigen::Map<const Vector>(upper_.data(), n);
    p.row_lower = Eigen::Map<const Vector>(row_lower_.data(), m);
    p.row_upper = Eigen::Map<const Vector>(row_upper_.data(), m);
    p.A.resize(m, n);
    p.A.setFromTriplets(triplets_.begin(), triplets_.end());
    p.A.makeCompressed();
    return p;
  }

 private:
  std::vector<double> linear_, quadratic_, lower_, upper_;
  std::vector<double> row_lower_, row_upper_;
  std::vector<Triplet> triplets_;
};

}  // namespace ppaval::qp
