#pragma once

#include <map>
#include <utility>
#include <vector>

#include "mixfda/data.hpp"
#include "mixfda/smoothing.hpp"

namespace mixfda {

struct LatentCovConfig {
  SmootherConfig smoother;
  /// Binary η̂ is clamped into [clamp, 1 - clamp] before the inverse link.
  double clamp = 0.025;
  int grid_points = 101;
};

/// Pooled first and second moment estimates on a grid.
///
/// `eta` is the smoothed E[g(Z_p(t))], `mu` the latent mean g⁻¹(η̂) (equal to
/// η̂ for Gaussian responses, Φ⁻¹ of the clamped η̂ for binary ones).
/// `second[(p, q)]`, p ≤ q, is the smoothed E[Y_p(t) Y_q(s)] surface for
/// every pair involving a binary response.
struct MomentEstimates {
  GridSpec grid;
  std::vector<ResponseKind> kinds;
  std::vector<SmoothedCurve<double>> eta_fit;
  std::vector<Vec> eta;
  std::vector<Vec> mu;
  std::map<std::pair<int, int>, Mat> second;
  bool clamped = false;
};

/// Grid-evaluated P×P block covariance of the latent process.
struct LatentCovarianceEstimate {
  GridSpec grid;
  int P = 0;
  std::vector<Mat> blocks;  // row-major P × P

  const Mat& block(int p, int q) const { return blocks[static_cast<std::size_t>(p * P + q)]; }
  /// (P·G) × (P·G) matrix with block (p, q) in rows p·G.., columns q·G..
  Mat assembled() const;
};

/// Smooths η̂_p and the binary-involving second-moment surfaces. Diagonal
/// (same subject, t = s) products are excluded from every surface.
MomentEstimates estimate_moments(const FunctionalDataset& d, const LatentCovConfig& cfg,
                                 bool second_moments = true);

/// {Ŝ_pp − η̂_p η̂_pᵀ} / [φ(μ̂_p(t)) φ(μ̂_p(s))] for a binary response p.
Mat binary_auto_covariance(const MomentEstimates& m, int p);

/// {Ŝ_pq − η̂_p(t) η̂_q(s)} / [g'_p(μ̂_p(t)) g'_q(μ̂_q(s))], with g' = 1 for a
/// Gaussian response and φ for a binary one. For Gaussian p and binary q this
/// is the mixed cross-covariance estimator; the result is not symmetrized.
Mat cross_covariance(const MomentEstimates& m, int p, int q);

/// Smooth of cross-products of Gaussian responses centered by η̂, diagonal
/// removed (which drops the measurement-error nugget when p = q). Symmetrized
/// when p = q.
Mat gaussian_covariance(const FunctionalDataset& d, const MomentEstimates& m, int p, int q,
                        const LatentCovConfig& cfg);

/// Blocks keyed by (p, q), p ≤ q; fills the lower blocks by transposition.
LatentCovarianceEstimate assemble(const GridSpec& grid, int P, const std::map<std::pair<int, int>, Mat>& upper);

/// Full estimator: moments, every block by the rule for its response kinds, assembly.
/// With `residuals` (as returned by residualize), every block is the centered
/// residual cross-product smooth divided by the link slopes taken from the raw
/// data's μ̂.
LatentCovarianceEstimate estimate_latent_covariance(const FunctionalDataset& d, const LatentCovConfig& cfg,
                                                    const FunctionalDataset* residuals = nullptr);

enum class ResidualMode { none, subject_mean, covariates };

/// Removes per-subject structure before covariance estimation. subject_mean
/// subtracts each subject's own mean from Gaussian responses and leaves binary
/// ones as observed. covariates subtracts a fit on [1, subject covariates]:
/// least squares for Gaussian responses, probit regression (Y − Φ(x'b̂)) for
/// binary ones. Every response of the result is typed Gaussian.
FunctionalDataset residualize(const FunctionalDataset& d, ResidualMode mode, const SubjectCovariates& covariates,
                              const std::vector<std::string>& covariate_names);

}  // namespace mixfda
