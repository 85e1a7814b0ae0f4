#include "moralscope/stats.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <cmath>

namespace moralscope::stats {

double normal_two_sided_p(double z) {
  if (std::isnan(z)) return 1.0;
  if (std::isinf(z)) return 0.0;
  const boost::math::normal_distribution<double> n;
  return 2.0 * boost::math::cdf(boost::math::complement(n, std::abs(z)));
}

double t_two_sided_p(double t, double dof) {
  if (std::isnan(t)) return 1.0;
  if (std::isinf(t)) return 0.0;
  const boost::math::students_t_distribution<double> dist(dof);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

OddsRatio odds_ratio(const ContingencyTable2x2& t) {
  if (t.a < 0 || t.b < 0 || t.c < 0 || t.d < 0) throw std::invalid_argument("contingency counts must be non-negative");
  if (t.total() == 0) throw std::invalid_argument("odds_ratio: empty contingency table");
  OddsRatio r;
  double a = static_cast<double>(t.a), b = static_cast<double>(t.b);
  double c = static_cast<double>(t.c), d = static_cast<double>(t.d);
  if (t.a == 0 || t.b == 0 || t.c == 0 || t.d == 0) {
    a += 0.5;
    b += 0.5;
    c += 0.5;
    d += 0.5;
    r.corrected = true;
  }
  r.odds_ratio = (a * d) / (b * c);
  r.log_se = std::sqrt(1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d);
  r.z = std::log(r.odds_ratio) / r.log_se;
  r.p_value = normal_two_sided_p(r.z);
  return r;
}

RegressionResult ols_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<std::string> names) {
  const auto n = X.rows();
  const auto p = X.cols();
  if (y.size() != n) throw std::invalid_argument("ols_fit: X and y have different row counts");
  if (p < 1) throw std::invalid_argument("ols_fit: empty design");
  if (n <= p) throw std::invalid_argument("ols_fit: need more observations than columns");
  if (names.empty()) {
    for (Eigen::Index j = 0; j < p; ++j) names.push_back("x" + std::to_string(j));
  }
  if (static_cast<Eigen::Index>(names.size()) != p) throw std::invalid_argument("ols_fit: one name per column required");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) {
    // Columns pivoted past the rank are linear combinations of the others.
    std::vector<std::string> collinear;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index j = qr.rank(); j < p; ++j) collinear.push_back(names[static_cast<std::size_t>(perm(j))]);
    std::string msg = "design matrix is rank deficient; collinear columns:";
    for (const auto& c : collinear) msg += " " + c;
    throw RankDeficientError(msg, collinear);
  }
  RegressionResult r;
  r.names = std::move(names);
  r.n = static_cast<std::size_t>(n);
  const Eigen::VectorXd beta = qr.solve(y);
  const Eigen::VectorXd resid = y - X * beta;
  const double dof = static_cast<double>(n - p);
  r.sigma2 = resid.squaredNorm() / dof;
  const Eigen::MatrixXd xtx_inv = (X.transpose() * X).ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  for (Eigen::Index j = 0; j < p; ++j) {
    const double se = std::sqrt(std::max(0.0, r.sigma2 * xtx_inv(j, j)));
    const double t = se > 0.0 ? beta(j) / se : (beta(j) == 0.0 ? 0.0 : std::copysign(INFINITY, beta(j)));
    r.beta.push_back(beta(j));
    r.stderr_.push_back(se);
    r.t_stats.push_back(t);
    r.p_values.push_back(se > 0.0 || beta(j) != 0.0 ? t_two_sided_p(t, dof) : 1.0);
  }
  return r;
}

std::string p_band(double p) {
  if (p < 1e-4) return "<1e-4";
  if (p < 1e-3) return "<1e-3";
  if (p < 0.05) return "<0.05";
  return "n.s.";
}

}  // namespace moralscope::stats
