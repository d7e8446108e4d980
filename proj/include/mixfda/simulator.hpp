#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mixfda/pipeline.hpp"

namespace mixfda {

/// Bivariate generator: response 1 Gaussian with the sine deviation basis,
/// response 2 (binary by default) with the cosine basis, quadratic means and
/// α ~ N(0, A⊗C).
struct SimulationConfig {
  int subjects = 50;
  int locations = 30;
  int components = 7;
  double rho_a = 0.8;
  double rho = 0.5;
  double tau2 = 1.0;
  std::vector<double> beta1{-0.64, 4.0, -4.0};
  std::vector<double> beta2{0.97, -6.0, 6.0};
  double lower = 0.0;
  double upper = 1.0;
  int heldout = 20;
  ResponseKind second = ResponseKind::binary;
  double tau2_second = 1.0;  // second response noise when it is Gaussian
  /// Multiplies A⊗C.
  double sigma_scale = 1.0;
  /// Optional subject random intercept b_i ~ N(0, v [[1, r], [r, 1]]).
  double intercept_var = 0.0;
  double intercept_corr = 0.0;

  void validate() const;
  Vec locations_grid() const { return Vec::LinSpaced(locations, lower, upper); }
};

/// Σ = A⊗C, index (response − 1)·M + basis, scaled by sigma_scale.
Mat build_sigma(const SimulationConfig& cfg);

/// True marginal mean functions: ω₁ = u'β₁, ω₂ = Φ(u'β₂ / √v₂) for a binary
/// second response with v₂ = ψ₂'Σ₂₂ψ₂ (+ intercept variance) + 1.
struct TruthSpec {
  GridSpec grid;
  std::vector<Vec> omega;
  Mat sigma;
};

TruthSpec make_truth(const SimulationConfig& cfg, const GridSpec& grid);

/// Latent deviation basis row of response p (0-based) at t.
Vec sim_deviation_row(const SimulationConfig& cfg, int p, double t);
double sim_mean(const SimulationConfig& cfg, int p, double t);

struct SimulatedData {
  FunctionalDataset data;
  TruthSpec truth;
  std::vector<Vec> alpha;
  std::vector<Vec> intercepts;
};

SimulatedData generate_dataset(const SimulationConfig& cfg, Rng& rng, const GridSpec& grid);

/// Fresh subjects, the first half missing response 1 and the second half
/// missing response 2; `actual[q]` holds the withheld values of query q.
struct HeldoutSet {
  std::vector<HeldoutQuery> queries;
  std::vector<std::vector<double>> actual;
};

HeldoutSet generate_heldout(const SimulationConfig& cfg, Rng& rng);

enum class Variant { bfpca, bbsp, ufpca, ubsp };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);

struct StudyConfig {
  SimulationConfig sim;
  int reps = 100;
  std::vector<Variant> variants{Variant::bfpca, Variant::bbsp, Variant::ufpca, Variant::ubsp};
  ChainConfig chain;
  PredictionConfig prediction;
  PriorConfig prior;
  TruncationRule truncation;
  LatentCovConfig cov;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Model used by a variant for the simulation design.
ModelSpec variant_model(Variant v, const StudyConfig& cfg, int responses);

struct ResponseMetrics {
  double mise = 0.0;
  double coverage_percent = 0.0;
  double ci_length = 0.0;
  double mspe = 0.0;
};

struct RepFailure {
  int rep = 0;
  std::uint64_t seed = 0;
  std::string message;
};

struct VariantResult {
  Variant variant;
  std::vector<std::vector<ResponseMetrics>> per_rep;  // successful reps only
  std::vector<int> reps;                              // replication index of each entry
  std::vector<ResponseMetrics> mean;                  // per response
  std::vector<RepFailure> failures;
};

struct StudyReport {
  StudyConfig config;
  std::vector<VariantResult> results;
};

/// Fits `v` to one generated replication and evaluates it.
std::vector<ResponseMetrics> evaluate_variant(Variant v, const StudyConfig& cfg, const SimulatedData& sim,
                                              const HeldoutSet& heldout, std::uint64_t chain_seed);

StudyReport run_study(const StudyConfig& cfg);

}  // namespace mixfda
