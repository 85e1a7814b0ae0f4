#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace moralscope::stats {

/// Two-sided standard normal tail probability 2 * (1 - Phi(|z|)).
double normal_two_sided_p(double z);
/// Two-sided Student t tail probability with `dof` degrees of freedom.
double t_two_sided_p(double t, double dof);

/// Rows female / male authors, columns cluster present / absent.
struct ContingencyTable2x2 {
  std::int64_t a = 0;  // female, present
  std::int64_t b = 0;  // female, absent
  std::int64_t c = 0;  // male, present
  std::int64_t d = 0;  // male, absent

  std::int64_t total() const { return a + b + c + d; }
};

struct OddsRatio {
  double odds_ratio = 1.0;
  double log_se = 0.0;
  double z = 0.0;
  double p_value = 1.0;
  bool corrected = false;  // +0.5 added to every cell
};

/// Wald inference on ln(OR); Haldane-Anscombe correction when any cell is 0.
OddsRatio odds_ratio(const ContingencyTable2x2& table);

class RankDeficientError : public std::invalid_argument {
 public:
  RankDeficientError(const std::string& what, std::vector<std::string> columns)
      : std::invalid_argument(what), columns_(std::move(columns)) {}
  const std::vector<std::string>& columns() const { return columns_; }

 private:
  std::vector<std::string> columns_;
};

struct RegressionResult {
  std::vector<std::string> names;  // intercept first
  std::vector<double> beta;
  std::vector<double> stderr_;
  std::vector<double> t_stats;
  std::vector<double> p_values;
  double sigma2 = 0.0;
  std::size_t n = 0;
  std::string note;
};

/// Least squares with classical standard errors; requires n > p and full
/// column rank. Column names default to x0, x1, ...
RegressionResult ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<std::string> names = {});

/// Significance band used in reports: "<1e-4", "<1e-3", "<0.05" or "n.s.".
std::string p_band(double p);

}  // namespace moralscope::stats
