#pragma once

#include <random>

#include "mixfda/rng.hpp"
#include "mixfda/types.hpp"

namespace mixfda {

double normal_pdf(double x);
double normal_cdf(double x);
/// log Φ(x), accurate far into the lower tail.
double log_normal_cdf(double x);
double normal_quantile(double p);

inline double std_normal(Rng& rng) { return std::normal_distribution<double>{}(rng); }

enum class Side { positive, negative };

/// N(mean, sd²) conditioned on (0, ∞) or (−∞, 0). Inverse-CDF on the
/// complementary tail when the standardized bound is at most 5, exponential
/// rejection beyond that.
double sample_truncated_normal(double mean, double sd, Side side, Rng& rng);

/// Standard normal restricted to (lower, ∞).
double sample_lower_truncated_std_normal(double lower, Rng& rng);

/// Gamma with shape/rate parameterization.
double sample_gamma(double shape, double rate, Rng& rng);
double sample_inverse_gamma(double shape, double rate, Rng& rng);

/// Wishart(V, ν) through the Bartlett decomposition. Requires ν > dim − 1.
Mat sample_wishart(const Mat& scale, double df, Rng& rng);

/// Σ = Q⁻¹ with Q ~ Wishart(V, ν), the precision parameterization.
Mat sample_inverse_wishart_via_precision(const Mat& precision_scale, double df, Rng& rng);

/// x ~ N(A⁻¹ b, A⁻¹) for SPD precision A. Throws NumericalError when A is not PD.
Vec sample_gaussian_canonical(const Mat& precision, const Vec& b, Rng& rng);

/// x ~ N(0, Σ).
Vec sample_gaussian(const Mat& cov, Rng& rng);

}  // namespace mixfda
