#include "mixfda/distributions.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <numbers>

namespace mixfda {

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double log_normal_cdf(double x) {
  if (x > -30.0) return std::log(normal_cdf(x));
  // Mills-ratio asymptotics: Φ(x) ≈ φ(x)/(-x) · (1 - 1/x² + 3/x⁴).
  const double x2 = x * x;
  return -0.5 * x2 - 0.5 * std::log(2.0 * std::numbers::pi) - std::log(-x) +
         std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("normal_quantile needs p in (0,1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double sample_lower_truncated_std_normal(double lower, Rng& rng) {
  if (lower <= 5.0) {
    // Solve 1 - Φ(x) = u (1 - Φ(lower)) in the complement, which keeps
    // precision when the retained mass is small.
    const double tail = 0.5 * std::erfc(lower / std::numbers::sqrt2);
    const double q = rng.uniform() * tail;
    const double x = -normal_quantile(q);
    return x > lower ? x : std::nextafter(lower, INFINITY);
  }
  // Robert (1995) translated-exponential proposal with the optimal rate.
  const double rate = 0.5 * (lower + std::sqrt(lower * lower + 4.0));
  for (;;) {
    const double z = lower - std::log(rng.uniform()) / rate;
    const double d = z - rate;
    if (std::log(rng.uniform()) <= -0.5 * d * d) return z;
  }
}

double sample_truncated_normal(double mean, double sd, Side side, Rng& rng) {
  if (side == Side::positive) {
    return mean + sd * sample_lower_truncated_std_normal(-mean / sd, rng);
  }
  return mean - sd * sample_lower_truncated_std_normal(mean / sd, rng);
}

double sample_gamma(double shape, double rate, Rng& rng) {
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

double sample_inverse_gamma(double shape, double rate, Rng& rng) {
  return 1.0 / sample_gamma(shape, rate, rng);
}

Mat sample_wishart(const Mat& scale, double df, Rng& rng) {
  const Eigen::Index m = scale.rows();
  if (scale.cols() != m) throw DimensionError("Wishart scale must be square");
  if (!(df > static_cast<double>(m) - 1.0)) throw NumericalError("Wishart df must exceed dim - 1");
  Eigen::LLT<Mat> llt(scale);
  if (llt.info() != Eigen::Success) throw NumericalError("Wishart scale is not positive definite");
  Mat a = Mat::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    a(i, i) = std::sqrt(sample_gamma(0.5 * (df - static_cast<double>(i)), 0.5, rng));
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = std::normal_distribution<double>{}(rng);
  }
  const Mat la = llt.matrixL() * a;
  Mat w = la * la.transpose();
  return 0.5 * (w + w.transpose());
}

Mat sample_inverse_wishart_via_precision(const Mat& precision_scale, double df, Rng& rng) {
  const Mat q = sample_wishart(precision_scale, df, rng);
  Eigen::LLT<Mat> llt(q);
  if (llt.info() != Eigen::Success) throw NumericalError("Wishart draw is not positive definite");
  Mat sigma = llt.solve(Mat::Identity(q.rows(), q.cols()));
  return 0.5 * (sigma + sigma.transpose());
}

Vec sample_gaussian_canonical(const Mat& precision, const Vec& b, Rng& rng) {
  Eigen::LLT<Mat> llt(precision);
  if (llt.info() != Eigen::Success) throw NumericalError("conditional precision is not positive definite");
  Vec z(b.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = std_normal(rng);
  Vec mean = llt.solve(b);
  // L Lᵀ = A, so Lᵀ x = z gives Cov(x) = A⁻¹.
  llt.matrixU().solveInPlace(z);
  return mean + z;
}

Vec sample_gaussian(const Mat& cov, Rng& rng) {
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("covariance is not positive definite");
  Vec z(cov.rows());
  for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = std_normal(rng);
  return llt.matrixL() * z;
}

}  // namespace mixfda
