#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mixfda/design.hpp"
#include "mixfda/latent_cov.hpp"
#include "mixfda/mfpca.hpp"
#include "mixfda/posterior.hpp"
#include "mixfda/sampler.hpp"

namespace mixfda {

enum class RandomEffectsMode { fpca, predetermined };

/// Model structure independent of the data values.
struct ModelSpec {
  std::vector<MeanSpec> mean;  // one per response
  RandomEffectsMode mode = RandomEffectsMode::fpca;
  /// fpca: one joint decomposition of the full latent covariance; otherwise one per response.
  bool multivariate = true;
  TruncationRule truncation;
  std::vector<BasisSpec> basis;  // predetermined mode, one per response
  bool subject_intercept = false;
  ResidualMode residual = ResidualMode::none;
  std::vector<std::string> residual_covariates;
  LatentCovConfig cov;
  PriorConfig prior;
  bool scale = true;

  void validate(int responses) const;
};

/// Data-driven random-effect basis and the estimates behind it.
struct FpcaFit {
  LatentCovarianceEstimate covariance;
  std::vector<EigenSystem<double>> eigen;  // one (multivariate) or one per response
  std::vector<int> components;             // retained M per decomposition
  std::vector<FpcaBasis<double>> basis;
};

struct FittedModel {
  ScalingInfo scaling;
  DesignSet designs;
  PosteriorDraws draws;
  std::optional<FpcaFit> fpca;
  std::optional<DicReport> dic;
};

/// Scaled (when requested) data and its scaling.
std::pair<FunctionalDataset, ScalingInfo> prepare_data(const FunctionalDataset& d, const ModelSpec& spec);

/// Latent covariance of already-prepared data, residualized per the spec.
LatentCovarianceEstimate estimate_covariance(const FunctionalDataset& prepared, const SubjectCovariates& covariates,
                                             const ModelSpec& spec);

FpcaFit fit_fpca(const FunctionalDataset& prepared, const SubjectCovariates& covariates, const ModelSpec& spec);

RandomEffectsBasis random_effects_from(const FpcaFit& fit);
RandomEffectsBasis random_effects_from(const std::vector<BasisSpec>& specs);

/// Builds the random-effect basis (FPCA or predetermined) and the designs
/// for prepared data, without running the chain.
std::pair<DesignSet, std::optional<FpcaFit>> build_model(const FunctionalDataset& prepared,
                                                         const SubjectCovariates& covariates,
                                                         const ModelSpec& spec);

/// Scale, covariance, FPCA, designs, Gibbs sampler.
/// With `with_dic`, the conditional DIC is accumulated while sampling.
FittedModel fit_model(const FunctionalDataset& d, const SubjectCovariates& covariates, const ModelSpec& spec,
                      const ChainConfig& chain, bool with_dic = false);

}  // namespace mixfda
