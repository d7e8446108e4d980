#include "mixfda/pipeline.hpp"

#include "mixfda/log.hpp"

namespace mixfda {

void ModelSpec::validate(int responses) const {
  if (static_cast<int>(mean.size()) != responses) throw ConfigError("one mean specification per response is required");
  if (mode == RandomEffectsMode::predetermined && static_cast<int>(basis.size()) != responses)
    throw ConfigError("predetermined random effects need one basis per response");
  if (mode == RandomEffectsMode::fpca && !basis.empty())
    throw ConfigError("fpca random effects do not take per-response basis settings");
  if (residual == ResidualMode::covariates && residual_covariates.empty())
    throw ConfigError("covariate residualization needs covariate names");
  truncation.validate();
  prior.validate();
  cov.smoother.validate();
  if (cov.grid_points < 2) throw ConfigError("grid needs at least two points");
  if (!(cov.clamp > 0.0 && cov.clamp < 0.5)) throw ConfigError("clamp must lie in (0, 0.5)");
}

std::pair<FunctionalDataset, ScalingInfo> prepare_data(const FunctionalDataset& d, const ModelSpec& spec) {
  if (spec.scale) return scale_continuous(d);
  return {d, identity_scaling(d)};
}

LatentCovarianceEstimate estimate_covariance(const FunctionalDataset& prepared, const SubjectCovariates& covariates,
                                             const ModelSpec& spec) {
  if (spec.residual == ResidualMode::none) return estimate_latent_covariance(prepared, spec.cov);
  const FunctionalDataset res = residualize(prepared, spec.residual, covariates, spec.residual_covariates);
  return estimate_latent_covariance(prepared, spec.cov, &res);
}

FpcaFit fit_fpca(const FunctionalDataset& prepared, const SubjectCovariates& covariates, const ModelSpec& spec) {
  FpcaFit fit;
  fit.covariance = estimate_covariance(prepared, covariates, spec);
  const int P = fit.covariance.P;
  const Vec& grid = fit.covariance.grid.points;
  auto add = [&](const Mat& k, int responses) {
    auto es = eigendecompose<double>(k, responses, grid);
    const int M = truncate(es, spec.truncation);
    fit.basis.push_back(build_basis(es, M));
    fit.components.push_back(M);
    fit.eigen.push_back(std::move(es));
  };
  if (spec.multivariate || P == 1) {
    add(fit.covariance.assembled(), P);
  } else {
    for (int p = 0; p < P; ++p) add(fit.covariance.block(p, p), 1);
  }
  std::string msg = "FPCA retained";
  for (int m : fit.components) msg += " " + std::to_string(m);
  log::info(msg + " components");
  return fit;
}

RandomEffectsBasis random_effects_from(const FpcaFit& fit) {
  std::vector<RandomEffectsBasis::Evaluator> ev;
  if (fit.basis.size() == 1) {
    const auto& b = fit.basis.front();
    for (int p = 0; p < b.responses(); ++p) ev.push_back([b, p](double t) { return b(p, t); });
    return RandomEffectsBasis::shared(b.size(), std::move(ev));
  }
  std::vector<int> widths;
  for (const auto& b : fit.basis) {
    widths.push_back(b.size());
    ev.push_back([b](double t) { return b(0, t); });
  }
  return RandomEffectsBasis::separate(std::move(widths), std::move(ev));
}

RandomEffectsBasis random_effects_from(const std::vector<BasisSpec>& specs) {
  return RandomEffectsBasis::predetermined(specs);
}

std::pair<DesignSet, std::optional<FpcaFit>> build_model(const FunctionalDataset& prepared,
                                                         const SubjectCovariates& covariates,
                                                         const ModelSpec& spec) {
  spec.validate(prepared.num_responses());
  std::optional<FpcaFit> fpca;
  RandomEffectsBasis re;
  if (spec.mode == RandomEffectsMode::fpca) {
    fpca = fit_fpca(prepared, covariates, spec);
    re = random_effects_from(*fpca);
  } else {
    re = random_effects_from(spec.basis);
  }
  if (spec.subject_intercept) re = re.with_subject_intercept();
  return {build_designs(prepared, spec.mean, covariates, re), std::move(fpca)};
}

FittedModel fit_model(const FunctionalDataset& d, const SubjectCovariates& covariates, const ModelSpec& spec,
                      const ChainConfig& chain, bool with_dic) {
  FittedModel out;
  auto [prepared, scaling] = prepare_data(d, spec);
  out.scaling = std::move(scaling);
  auto [designs, fpca] = build_model(prepared, covariates, spec);
  out.fpca = std::move(fpca);
  PriorConfig prior = spec.prior;
  if (prior.sigma_mode == SigmaMode::block && prior.block_size == 0)
    prior.block_size = designs.random_effects.intercepts();
  out.designs = std::move(designs);
  if (with_dic) {
    DicAccumulator acc(out.designs, out.scaling);
    out.draws = run_gibbs(out.designs, prior, chain, [&](int, const SamplerState& s) { acc.add(s); });
    out.dic = acc.finish();
  } else {
    out.draws = run_gibbs(out.designs, prior, chain);
  }
  return out;
}

}  // namespace mixfda
