#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mixfda/design.hpp"
#include "mixfda/distributions.hpp"

namespace mixfda {

enum class SigmaMode { full, diagonal, block };

std::string to_string(SigmaMode m);
SigmaMode parse_sigma_mode(const std::string& s);

struct PriorConfig {
  double sigma_beta2 = 100.0;
  double q1 = 0.1;
  double q2 = 0.1;
  double l = 0.1;
  double h = 0.1;
  SigmaMode sigma_mode = SigmaMode::full;
  /// Leading columns of α drawn jointly in block mode (the subject intercepts).
  int block_size = 0;

  void validate() const;
};

struct ChainConfig {
  int n_iter = 20000;
  int burn_in = 5000;
  int thin = 1;
  std::uint64_t seed = 1;
  bool store_alpha = false;
  /// Holds τ² or Σ at the given value instead of sampling it.
  std::optional<Vec> fixed_tau2;
  std::optional<Mat> fixed_sigma;

  int stored_count() const { return (n_iter - burn_in) / thin; }
  bool stores(int it) const { return it >= burn_in && (it - burn_in + 1) % thin == 0; }
  void validate() const;
};

struct SamplerState {
  Vec beta;
  std::vector<Vec> alpha;
  Mat sigma;
  Vec tau2;              // one per response; binary entries stay at 1
  std::vector<Vec> w;    // latent W_i; Gaussian rows equal the data
};

struct PosteriorDraws {
  std::vector<int> iteration;
  std::vector<Vec> beta;
  std::vector<Mat> sigma;
  std::vector<Vec> tau2;
  std::vector<std::vector<Vec>> alpha;  // empty unless stored
  std::uint64_t seed = 0;

  std::size_t size() const { return beta.size(); }
  bool has_alpha() const { return !alpha.empty(); }
  Vec beta_mean() const;
  Vec tau2_mean() const;
  Mat sigma_mean() const;
};

/// Mean and covariance of a Gaussian full conditional.
struct GaussianConditional {
  Vec mean;
  Mat cov;
};

/// Gibbs sampler over a fixed design. Holds its own copy of the designs so
/// the data can be replaced between sweeps (as the prior-coupled correctness
/// check does).
class GibbsSampler {
 public:
  GibbsSampler(DesignSet designs, PriorConfig prior, ChainConfig chain);

  /// β = 0, α = 0, Σ = I (or the fixed value), τ² = 1, W = ±0.5.
  void initialize();

  void update_latent_w(int iter);
  void update_beta(int iter);
  void update_alpha(int iter);
  void update_sigma(int iter);
  void update_tau(int iter);
  /// Steps 2 to 6 in order.
  void sweep(int iter);

  /// Called with each stored state, after it is recorded.
  using Observer = std::function<void(int iter, const SamplerState&)>;
  PosteriorDraws run(const Observer& observer = {});

  GaussianConditional beta_conditional() const;
  GaussianConditional alpha_conditional(std::size_t i) const;

  SamplerState& state() { return state_; }
  const SamplerState& state() const { return state_; }
  DesignSet& designs() { return d_; }
  const DesignSet& designs() const { return d_; }
  const PriorConfig& prior() const { return prior_; }
  const ChainConfig& chain() const { return chain_; }

 private:
  enum Step : std::uint64_t { step_w = 2, step_beta = 3, step_alpha = 4, step_sigma = 5, step_tau = 6 };

  Rng stream(int iter, Step s, std::uint64_t subject = 0) const;
  Vec row_weights(std::size_t i) const;
  Mat beta_precision() const;
  Vec beta_rhs() const;
  Mat alpha_precision(std::size_t i, const Mat& sigma_inv) const;
  Vec alpha_rhs(std::size_t i) const;

  DesignSet d_;
  PriorConfig prior_;
  ChainConfig chain_;
  SamplerState state_;
  // Per subject and response: UᵀU and ΨᵀΨ restricted to that response's rows.
  std::vector<std::vector<Mat>> utu_, psitpsi_;
  std::vector<Mat> utu_total_;  // Σ_i UᵀU per response
  Mat sigma_inv_;
};

/// Convenience wrapper: construct, initialize, run.
PosteriorDraws run_gibbs(const DesignSet& designs, const PriorConfig& prior, const ChainConfig& chain,
                         const GibbsSampler::Observer& observer = {});

}  // namespace mixfda
