#pragma once

// (mu/mu_w, lambda)-CMA-ES with cumulative step-size adaptation, rank-one and rank-mu
// covariance updates. Default strategy parameters follow Hansen's tutorial.

#include <algorithm>
#include <cmath>
#include <functional>
#include <future>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

#include "ppaval/common.hpp"

namespace ppaval::learn {

struct CmaesOptions {
  double sigma0 = 0.5;
  int budget = 2000;           ///< maximum objective evaluations
  std::uint64_t seed = 1;
  int population = 0;          ///< 0: 4 + floor(3 ln n)
  std::optional<Vector> lower; ///< candidates are clipped into [lower, upper] before evaluation
  std::optional<Vector> upper;
  double ftarget = -kInf;      ///< stop once best_value <= ftarget
  double tol_sigma = 1e-14;    ///< stop once sigma * sqrt(max eig C) falls below this
  bool parallel = false;       ///< evaluate each generation concurrently
};

struct CmaesResult {
  Vector best_point;
  double best_value = kInf;
  int evaluations = 0;
  int generations = 0;
  int rejected = 0;            ///< non-finite objective values
  std::vector<double> trace;   ///< best-so-far after each evaluation
};

inline int cmaes_default_population(int n) {
  return 4 + static_cast<int>(std::floor(3.0 * std::log(static_cast<double>(n))));
}

inline CmaesResult cmaes_minimize(const std::function<double(const Vector&)>& objective, const Vector& x0,
                                  const CmaesOptions& opt = {}) {
  const int n = static_cast<int>(x0.size());
  require(n >= 1, "cmaes_minimize: dimension must be >= 1");
  require(opt.sigma0 > 0.0, "cmaes_minimize: sigma0 must be positive");
  const int lambda = opt.population > 0 ? opt.population : cmaes_default_population(n);
  require(lambda >= 2, "cmaes_minimize: population must be >= 2");
  require(opt.budget >= lambda, "cmaes_minimize: budget smaller than one generation");
  if (opt.lower) require(opt.lower->size() == n, "cmaes_minimize: lower bound size mismatch");
  if (opt.upper) require(opt.upper->size() == n, "cmaes_minimize: upper bound size mismatch");

  const int mu = lambda / 2;
  Vector weights(mu);
  for (int i = 0; i < mu; ++i) weights[i] = std::log((lambda + 1) / 2.0) - std::log(i + 1.0);
  weights /= weights.sum();
  const double mueff = 1.0 / weights.squaredNorm();
  const double dn = n;

  const double cc = (4.0 + mueff / dn) / (dn + 4.0 + 2.0 * mueff / dn);
  const double cs = (mueff + 2.0) / (dn + mueff + 5.0);
  const double c1 = 2.0 / ((dn + 1.3) * (dn + 1.3) + mueff);
  const double cmu = std::min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((dn + 2.0) * (dn + 2.0) + mueff));
  const double damps = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff - 1.0) / (dn + 1.0)) - 1.0) + cs;
  const double chi_n = std::sqrt(dn) * (1.0 - 1.0 / (4.0 * dn) + 1.0 / (21.0 * dn * dn));

  auto clip = [&](Vector x) {
    if (opt.lower) x = x.cwiseMax(*opt.lower);
    if (opt.upper) x = x.cwiseMin(*opt.upper);
    return x;
  };

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Vector mean = clip(x0);
  double sigma = opt.sigma0;
  Vector pc = Vector::Zero(n), ps = Vector::Zero(n);
  Matrix C = Matrix::Identity(n, n), B = Matrix::Identity(n, n);
  Vector D = Vector::Ones(n);
  int eigen_age = 0;

  CmaesResult res;
  res.best_point = mean;
  res.trace.reserve(static_cast<std::size_t>(opt.budget));

  Matrix Z(n, lambda), Y(n, lambda), X(n, lambda);
  std::vector<double> f(static_cast<std::size_t>(lambda));
  while (res.evaluations + lambda <= opt.budget) {
    for (int k = 0; k < lambda; ++k) {
      for (int i = 0; i < n; ++i) Z(i, k) = normal(rng);
      Y.col(k) = B * D.asDiagonal() * Z.col(k);
      X.col(k) = clip(mean + sigma * Y.col(k));
    }
    if (opt.parallel) {
      std::vector<std::future<double>> jobs;
      for (int k = 0; k < lambda; ++k) {
        const Vector xk = X.col(k);
        jobs.push_back(std::async(std::launch::async, [&objective, xk] { return objective(xk); }));
      }
      for (int k = 0; k < lambda; ++k) f[static_cast<std::size_t>(k)] = jobs[static_cast<std::size_t>(k)].get();
    } else {
      for (int k = 0; k < lambda; ++k) f[static_cast<std::size_t>(k)] = objective(X.col(k));
    }
    int rejected_now = 0;
    for (int k = 0; k < lambda; ++k) {
      double& v = f[static_cast<std::size_t>(k)];
      if (!std::isfinite(v)) {
        ++rejected_now;
        v = kInf;
      } else if (v < res.best_value) {
        res.best_value = v;
        res.best_point = X.col(k);
      }
      ++res.evaluations;
      res.trace.push_back(res.best_value);
    }
    ++res.generations;
    if (rejected_now > 0) {
      res.rejected += rejected_now;
      log::warn("cmaes: generation " + std::to_string(res.generations) + " rejected " +
                std::to_string(rejected_now) + " non-finite objective values");
    }
    if (res.best_value <= opt.ftarget) break;

    std::vector<int> order(static_cast<std::size_t>(lambda));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return f[static_cast<std::size_t>(a)] < f[static_cast<std::size_t>(b)]; });

    // Steps are taken from the clipped points so the mean never leaves the box.
    const Vector old_mean = mean;
    mean.setZero();
    for (int i = 0; i < mu; ++i) mean += weights[i] * X.col(order[static_cast<std::size_t>(i)]);
    const Vector y_w = (mean - old_mean) / sigma;

    const Vector c_inv_sqrt_y = B * D.cwiseInverse().asDiagonal() * B.transpose() * y_w;
    ps = (1.0 - cs) * ps + std::sqrt(cs * (2.0 - cs) * mueff) * c_inv_sqrt_y;
    const double ps_norm = ps.norm();
    const double gen = res.generations;
    const bool hsig =
        ps_norm / std::sqrt(1.0 - std::pow(1.0 - cs, 2.0 * gen)) / chi_n < 1.4 + 2.0 / (dn + 1.0);
    pc = (1.0 - cc) * pc + (hsig ? std::sqrt(cc * (2.0 - cc) * mueff) : 0.0) * y_w;

    Matrix rank_mu = Matrix::Zero(n, n);
    for (int i = 0; i < mu; ++i) {
      const Vector yi = (X.col(order[static_cast<std::size_t>(i)]) - old_mean) / sigma;
      rank_mu += weights[i] * yi * yi.transpose();
    }
    const double delta_h = hsig ? 0.0 : cc * (2.0 - cc);
    C = (1.0 - c1 - cmu) * C + c1 * (pc * pc.transpose() + delta_h * C) + cmu * rank_mu;
    sigma *= std::exp((cs / damps) * (ps_norm / chi_n - 1.0));

    if (++eigen_age >= std::max(1, static_cast<int>(lambda / (10.0 * dn * (c1 + cmu))))) {
      eigen_age = 0;
      C = 0.5 * (C + C.transpose()).eval();
      Eigen::SelfAdjointEigenSolver<Matrix> es(C);
      B = es.eigenvectors();
      D = es.eigenvalues().cwiseMax(1e-300).cwiseSqrt();
    }
    if (sigma * D.maxCoeff() < opt.tol_sigma) break;
  }
  return res;
}

}  // namespace ppaval::learn
