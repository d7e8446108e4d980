#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mixfda/basis.hpp"
#include "mixfda/data.hpp"

namespace mixfda {

/// Location-dependent subject covariate: 1 when lower < t ≤ upper, else 0
/// (the jaw indicator of a tooth-indexed domain is one such covariate).
struct LocationCovariate {
  std::string name;
  double lower = 0.0;
  double upper = 0.0;

  double operator()(double t) const { return (t > lower && t <= upper) ? 1.0 : 0.0; }
};

/// Fixed-effect row for one response: subject covariates, then location
/// covariates, then the smooth mean basis.
struct MeanSpec {
  std::vector<std::string> covariates;
  std::vector<LocationCovariate> location_covariates;
  BasisSpec smooth;

  int dimension() const {
    return static_cast<int>(covariates.size() + location_covariates.size()) + smooth.dimension();
  }
};

/// Random-effect basis: maps (response, t) to a row of length m. Column
/// blocks are arbitrary; the layout helpers below build the predetermined
/// (block diagonal), shared FPCA, and intercept-augmented variants.
class RandomEffectsBasis {
 public:
  using Evaluator = std::function<Vec(double)>;

  struct Block {
    int offset = 0;
    int width = 0;
    Evaluator eval;
  };

  RandomEffectsBasis() = default;
  RandomEffectsBasis(int columns, std::vector<Block> per_response, int intercepts = 0)
      : columns_(columns), intercepts_(intercepts), blocks_(std::move(per_response)) {}

  /// Block-diagonal layout, M_p columns per response in response order.
  static RandomEffectsBasis predetermined(const std::vector<BasisSpec>& specs);
  /// One shared set of M columns; evaluators[p] gives ψ_p·(t).
  static RandomEffectsBasis shared(int m, std::vector<Evaluator> evaluators);
  /// Block diagonal from per-response evaluators of the given widths.
  static RandomEffectsBasis separate(std::vector<int> widths, std::vector<Evaluator> evaluators);
  /// Prepends one intercept column per response (column p is 1 on response p rows).
  RandomEffectsBasis with_subject_intercept() const;

  int columns() const { return columns_; }
  int intercepts() const { return intercepts_; }
  int num_responses() const { return static_cast<int>(blocks_.size()); }
  const Block& block(int p) const { return blocks_[static_cast<std::size_t>(p)]; }

  Vec row(int p, double t) const;

 private:
  int columns_ = 0;
  int intercepts_ = 0;
  std::vector<Block> blocks_;
};

/// Design matrices for one subject. Rows follow the stacking of W_i:
/// response 1 locations in increasing t, then response 2, ...
struct SubjectDesign {
  std::string id;
  Mat U;    // L_i × J
  Mat Psi;  // L_i × m
  Vec y;
  std::vector<int> response;  // 0-based response per row
  std::vector<double> t;
  std::vector<Eigen::Index> response_start;  // row offset of each response, size P + 1
};

struct DesignSet {
  std::vector<ResponseKind> kinds;
  std::vector<MeanSpec> mean;
  std::vector<int> beta_offset;  // column offset of response p's block in U, size P + 1
  RandomEffectsBasis random_effects;
  std::vector<SubjectDesign> subjects;

  int num_responses() const { return static_cast<int>(kinds.size()); }
  int fixed_dim() const { return beta_offset.back(); }
  int random_dim() const { return random_effects.columns(); }

  /// u_p(t) for a subject's covariate values, embedded in the full J-vector.
  Vec fixed_row(int p, double t, const std::map<std::string, double>& covariates) const;
};

/// Builds U_i and Ψ_i for every subject. Missing subject covariates are a DataError.
DesignSet build_designs(const FunctionalDataset& d, const std::vector<MeanSpec>& mean,
                        const SubjectCovariates& covariates, const RandomEffectsBasis& random_effects);

/// Design for a single subject against an existing model layout.
SubjectDesign build_subject_design(const SubjectData& s, const DesignSet& layout,
                                   const std::map<std::string, double>& covariates);

/// K_pp'(t,t') = Σ_k Σ_l ψ_pk(t) ψ_p'l(t') ξ_klpp' for a given Σ.
class InducedCovariance {
 public:
  InducedCovariance(RandomEffectsBasis basis, Mat sigma);

  double operator()(int p, double t, int q, double s) const;
  /// Block (p, q) on a grid.
  Mat block(int p, int q, const GridSpec& grid) const;

 private:
  RandomEffectsBasis basis_;
  Mat sigma_;
};

}  // namespace mixfda
