#pragma once

#include <map>
#include <string>
#include <vector>

#include "mixfda/data.hpp"
#include "mixfda/sampler.hpp"

namespace mixfda {

/// Pointwise posterior summaries of one mean function on a grid.
struct CurveSummary {
  Vec mean;
  Vec variance;
  Vec median;
  Vec lower;  // 2.5%
  Vec upper;  // 97.5%
};

struct PosteriorSummary {
  GridSpec grid;
  std::vector<CurveSummary> curves;  // one per response
};

/// Type-7 (linear interpolation) sample quantile; sorts `values` in place.
double sample_quantile(std::vector<double>& values, double prob);

/// Summaries of draw-wise values (rows = draws, columns = points).
CurveSummary summarize_columns(const Mat& values);

/// Marginal mean functions per draw: s_p·u_p(t)'β for Gaussian responses,
/// Φ(u_p(t)'β / √(ψ_p(t)'Σψ_p(t) + 1)) for binary ones. `covariates` supplies
/// subject-level covariate values for the mean row.
PosteriorSummary summarize(const PosteriorDraws& draws, const DesignSet& layout, const GridSpec& grid,
                           const ScalingInfo& scaling, const std::map<std::string, double>& covariates = {});

/// The draw-wise matrix behind summarize for response p.
Mat marginal_mean_draws(const PosteriorDraws& draws, const DesignSet& layout, int p, const GridSpec& grid,
                        const ScalingInfo& scaling, const std::map<std::string, double>& covariates = {});

/// A held-out subject: the responses it observes (original scale) and the
/// locations at which the left-out response is to be predicted.
struct HeldoutQuery {
  SubjectData observed;
  int target_response = 0;
  std::vector<double> t;
  std::map<std::string, double> covariates;
};

struct Prediction {
  std::string subject;
  int response = 0;
  double t = 0.0;
  double value = 0.0;  // posterior mean (Gaussian) or P(Y = 1) (binary)
  double lower = 0.0;
  double upper = 0.0;
};

struct PredictionResult {
  std::vector<Prediction> points;
};

struct PredictionConfig {
  int refinement_sweeps = 20;
  /// Uses at most this many evenly spaced stored draws (0: all).
  int max_draws = 0;
  std::uint64_t seed = 1;
  /// When false, a subject with no observations is predicted from the α prior.
  bool require_observed = true;
};

/// For every stored draw, samples α_new from its conditional given the
/// observed responses (binary ones through `refinement_sweeps` inner (W, α)
/// sweeps), then evaluates u'β + ψ'α (Gaussian, original scale) or
/// Φ(u'β + ψ'α) (binary) at the target locations, averaging over draws.
PredictionResult predict_heldout(const PosteriorDraws& draws, const DesignSet& layout,
                                 const std::vector<HeldoutQuery>& queries, const ScalingInfo& scaling,
                                 const PredictionConfig& cfg);

/// Trapezoid rule over the grid.
double integrate(const GridSpec& grid, const Vec& values);

/// Mean over replications of ∫ {ω̂(t) − ω(t)}² dt.
double compute_mise(const std::vector<Vec>& estimates, const std::vector<Vec>& truths, const GridSpec& grid);

struct CoverageReport {
  double coverage_percent = 0.0;
  double mean_length = 0.0;
};

/// Share of (t, rep) with |ω̂ − ω| ≤ 1.96√ν̂, and the mean of 2·1.96√ν̂.
CoverageReport compute_coverage_and_length(const std::vector<Vec>& estimates, const std::vector<Vec>& variances,
                                           const std::vector<Vec>& truths);

/// Mean squared difference; the Brier score when predictions are probabilities.
double compute_mspe(const std::vector<double>& predictions, const std::vector<double>& observed);

struct DicReport {
  double Dbar = 0.0;
  double D_at_mean = 0.0;
  double pD = 0.0;
  double DIC = 0.0;
};

/// −2 log-likelihood conditional on α, on the original data scale.
double deviance(const DesignSet& designs, const Vec& beta, const std::vector<Vec>& alpha, const Vec& tau2,
                const ScalingInfo& scaling);

/// Streaming DIC: feed each stored sampler state, then finish.
class DicAccumulator {
 public:
  DicAccumulator(const DesignSet& designs, const ScalingInfo& scaling);
  void add(const SamplerState& s);
  DicReport finish() const;

 private:
  const DesignSet* designs_;
  ScalingInfo scaling_;
  std::size_t n_ = 0;
  double dsum_ = 0.0;
  Vec beta_sum_, tau2_sum_;
  std::vector<Vec> alpha_sum_;
};

/// Conditional-on-α DIC. Needs stored α draws.
DicReport compute_dic(const PosteriorDraws& draws, const DesignSet& designs, const ScalingInfo& scaling);

}  // namespace mixfda
