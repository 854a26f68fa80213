#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "ppaval/common.hpp"

namespace ppaval::features {

/**
 * Per-column min-max scaling fitted on training data. Exempt columns pass through.
 * Out-of-range test values are not clipped. A constant training column maps to 0.
 */
struct MinMaxScaler {
  Vector min;
  Vector max;
  std::vector<bool> exempt;

  [[nodiscard]] bool fitted() const { return min.size() > 0; }

  static MinMaxScaler fit(const Matrix& X, std::vector<bool> exempt = {}) {
    require(X.rows() > 0, "MinMaxScaler::fit: empty matrix");
    if (exempt.empty()) exempt.assign(static_cast<std::size_t>(X.cols()), false);
    require(static_cast<Eigen::Index>(exempt.size()) == X.cols(), "MinMaxScaler::fit: exempt mask size");
    MinMaxScaler s;
    s.min = X.colwise().minCoeff().transpose();
    s.max = X.colwise().maxCoeff().transpose();
    s.exempt = std::move(exempt);
    return s;
  }

  [[nodiscard]] double span(Eigen::Index j) const {
    const double r = max[j] - min[j];
    return r > 0.0 ? r : 1.0;
  }

  [[nodiscard]] Matrix transform(const Matrix& X) const {
    require(X.cols() == min.size(), "MinMaxScaler::transform: column count mismatch");
    Matrix out = X;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      if (exempt[static_cast<std::size_t>(j)]) continue;
      out.col(j) = (X.col(j).array() - min[j]) / span(j);
    }
    return out;
  }

  [[nodiscard]] Matrix inverse_transform(const Matrix& S) const {
    require(S.cols() == min.size(), "MinMaxScaler::inverse_transform: column count mismatch");
    Matrix out = S;
    for (Eigen::Index j = 0; j < S.cols(); ++j) {
      if (exempt[static_cast<std::size_t>(j)]) continue;
      out.col(j) = S.col(j).array() * span(j) + min[j];
    }
    return out;
  }
};

/**
 * Maps a value to its empirical CDF level in [0, 1] by linear interpolation between
 * stored quantile breakpoints. Ties average the first and last matching level; values
 * outside the training range clip to 0 or 1.
 */
struct QuantileTransformer {
  std::vector<double> breakpoints;
  std::vector<double> levels;

  static QuantileTransformer fit(const Vector& x, int n_quantiles = 1000) {
    require(x.size() > 0, "QuantileTransformer::fit: empty input");
    std::vector<double> sorted(x.data(), x.data() + x.size());
    std::sort(sorted.begin(), sorted.end());
    const int m = std::max(2, std::min<int>(n_quantiles, static_cast<int>(sorted.size())));
    QuantileTransformer q;
    for (int k = 0; k < m; ++k) {
      const double level = static_cast<double>(k) / (m - 1);
      const double pos = level * static_cast<double>(sorted.size() - 1);
      const auto lo = static_cast<std::size_t>(std::floor(pos));
      const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
      q.breakpoints.push_back(sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]));
      q.levels.push_back(level);
    }
    return q;
  }

  [[nodiscard]] double operator()(double v) const {
    const auto& b = breakpoints;
    if (v <= b.front()) return v == b.front() ? tie_level(v) : 0.0;
    if (v >= b.back()) return v == b.back() ? tie_level(v) : 1.0;
    const auto lo = std::lower_bound(b.begin(), b.end(), v);
    if (*lo == v) return tie_level(v);
    const auto k = static_cast<std::size_t>(lo - b.begin());
    const double t = (v - b[k - 1]) / (b[k] - b[k - 1]);
    return levels[k - 1] + t * (levels[k] - levels[k - 1]);
  }

  [[nodiscard]] Vector transform(const Vector& x) const {
    Vector out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = (*this)(x[i]);
    return out;
  }

 private:
  [[nodiscard]] double tie_level(double v) const {
    const auto first = std::lower_bound(breakpoints.begin(), breakpoints.end(), v);
    const auto last = std::upper_bound(breakpoints.begin(), breakpoints.end(), v) - 1;
    return 0.5 * (levels[static_cast<std::size_t>(first - breakpoints.begin())] +
                  levels[static_cast<std::size_t>(last - breakpoints.begin())]);
  }
};

/// 64-bit FNV-1a, rendered as 16 hex digits.
inline std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace ppaval::features
