#pragma once

#include "moralscope/analysis.hpp"
#include "moralscope/stats.hpp"
#include "moralscope/tensor.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

namespace stats_oracles {

using moralscope::num::Rng;

/// Solves X'X b = X'y by Gaussian elimination with partial pivoting in long
/// double.
inline std::vector<long double> normal_equations(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const auto p = static_cast<std::size_t>(X.cols());
  std::vector<std::vector<long double>> a(p, std::vector<long double>(p + 1, 0.0L));
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      long double s = 0;
      for (Eigen::Index r = 0; r < X.rows(); ++r) s += static_cast<long double>(X(r, i)) * X(r, j);
      a[i][j] = s;
    }
    long double s = 0;
    for (Eigen::Index r = 0; r < X.rows(); ++r) s += static_cast<long double>(X(r, i)) * y(r);
    a[i][p] = s;
  }
  for (std::size_t c = 0; c < p; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < p; ++r) {
      if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
    }
    std::swap(a[c], a[piv]);
    for (std::size_t r = 0; r < p; ++r) {
      if (r == c) continue;
      const long double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k <= p; ++k) a[r][k] -= f * a[c][k];
    }
  }
  std::vector<long double> b(p);
  for (std::size_t i = 0; i < p; ++i) b[i] = a[i][p] / a[i][i];
  return b;
}

/// Two-sided normal tail via long double erfc.
inline long double normal_tail(long double z) { return std::erfc(std::fabs(z) / std::sqrt(2.0L)); }

/// Max |beta - oracle| over random n x p designs with an intercept column.
inline double ols_max_error(int trials = 20) {
  Rng rng(31);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const int n = 50, p = 3;
    Eigen::MatrixXd X(n, p);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      X(i, 0) = 1.0;
      for (int j = 1; j < p; ++j) X(i, j) = rng.normal() * (1 + j);
      y(i) = 0.5 - X(i, 1) + 2 * X(i, 2) + rng.normal();
    }
    const auto fit = moralscope::stats::ols_fit(X, y);
    const auto want = normal_equations(X, y);
    for (int j = 0; j < p; ++j) {
      worst = std::max(worst, static_cast<double>(std::fabs(fit.beta[static_cast<std::size_t>(j)] - want[static_cast<std::size_t>(j)])));
    }
  }
  return worst;
}

/// Interest-category corpus: categories "A" and "B" with n/2 comments each.
/// Each comment has 40-80 tokens; each token is a cluster hit with
/// probability rate_a (A) or rate_b (B). Returns usage for cluster 0.
struct SimCorpus {
  std::vector<std::string> categories;
  std::map<int, std::vector<double>> usage;
};

inline SimCorpus simulate_interest(Rng& rng, std::size_t n, double rate_a, double rate_b) {
  SimCorpus c;
  auto& u = c.usage[0];
  for (std::size_t i = 0; i < n; ++i) {
    const bool a = i % 2 == 0;
    const std::size_t tokens = 40 + rng.below(41);
    std::size_t hits = 0;
    for (std::size_t k = 0; k < tokens; ++k) hits += rng.uniform() < (a ? rate_a : rate_b);
    c.categories.push_back(a ? "A" : "B");
    u.push_back(static_cast<double>(hits) / static_cast<double>(tokens));
  }
  return c;
}

struct Calibration {
  double planted_beta = 0.0;
  double planted_p = 1.0;
  double false_positive_rate = 1.0;
};

/// Planted 2x rate effect at n = 500 plus 100 null corpora, reference "B".
inline Calibration calibrate(std::uint64_t seed = 2024, std::size_t n = 500, int null_corpora = 100) {
  using namespace moralscope::analysis;
  Rng rng(seed);
  InterestOptions opts;
  opts.reference = "B";
  Calibration out;
  const auto planted = simulate_interest(rng, n, 0.04, 0.02);
  const auto eff = interest_effects(planted.categories, planted.usage, {}, opts);
  for (const auto& r : eff.rows) {
    if (r.category == "A") {
      out.planted_beta = r.beta;
      out.planted_p = r.p_value;
    }
  }
  int positives = 0;
  for (int k = 0; k < null_corpora; ++k) {
    const auto null = simulate_interest(rng, n, 0.03, 0.03);
    const auto e = interest_effects(null.categories, null.usage, {}, opts);
    bool any = false;
    for (const auto& r : e.rows) any |= r.p_value < 0.05;
    positives += any;
  }
  out.false_positive_rate = static_cast<double>(positives) / null_corpora;
  return out;
}

}  // namespace stats_oracles
