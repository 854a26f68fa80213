#pragma once

#include <random>

#include "ppaval/qp/problem.hpp"

namespace ppaval::testing {

struct RandomQpOptions {
  int max_vars = 6;
  int max_rows = 6;
  double zero_quadratic_probability = 0.3;
};

/// Random feasible, bounded convex QP: boxed variables, rows built around an interior point.
inline qp::QpProblem random_feasible_qp(std::mt19937_64& rng, const RandomQpOptions& opt = {}) {
  std::uniform_int_distribution<int> n_dist(1, opt.max_vars);
  std::uniform_int_distribution<int> m_dist(0, opt.max_rows);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uniform = [&](double a, double b) { return a + (b - a) * u01(rng); };

  const int n = n_dist(rng);
  const int m = m_dist(rng);
  qp::QpBuilder b;
  Vector x0(n);
  for (int j = 0; j < n; ++j) {
    const double lo = uniform(-5.0, 0.0);
    const double hi = lo + uniform(0.5, 5.0);
    const double quad = u01(rng) < opt.zero_quadratic_probability ? 0.0 : uniform(0.1, 2.0);
    b.add_var(lo, hi, uniform(-5.0, 5.0), quad);
    x0[j] = uniform(lo, hi);
  }
  int equalities = 0;
  for (int i = 0; i < m; ++i) {
    std::vector<std::pair<int, double>> entries;
    double ax = 0.0;
    for (int j = 0; j < n; ++j) {
      if (u01(rng) < 0.6) {
        const double a = uniform(-2.0, 2.0);
        entries.emplace_back(j, a);
        ax += a * x0[j];
      }
    }
    if (entries.empty()) {
      const int j = std::uniform_int_distribution<int>(0, n - 1)(rng);
      entries.emplace_back(j, 1.0);
      ax = x0[j];
    }
    const double kind = u01(rng);
    if (kind < 0.2 && equalities < n - 1) {
      b.add_equality(entries, ax);
      ++equalities;
    } else if (kind < 0.5) {
      b.add_row(entries, -kInf, ax + uniform(0.0, 2.0));
    } else if (kind < 0.8) {
      b.add_row(entries, ax - uniform(0.0, 2.0), kInf);
    } else {
      b.add_row(entries, ax - uniform(0.0, 1.0), ax + uniform(0.0, 1.0));
    }
  }
  return b.build();
}

}  // namespace ppaval::testing
