#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mixfda/design.hpp"
#include "mixfda/sampler.hpp"

namespace mixfda::testing_support {

/// Monte Carlo standard error of a chain mean by non-overlapping batch means.
inline double batch_means_se(const std::vector<double>& x, int batches = 40) {
  const std::size_t n = x.size();
  const std::size_t b = n / static_cast<std::size_t>(batches);
  if (b < 1) return INFINITY;
  double total = 0.0;
  std::vector<double> m(static_cast<std::size_t>(batches), 0.0);
  for (int k = 0; k < batches; ++k) {
    for (std::size_t i = 0; i < b; ++i) m[static_cast<std::size_t>(k)] += x[static_cast<std::size_t>(k) * b + i];
    m[static_cast<std::size_t>(k)] /= static_cast<double>(b);
    total += m[static_cast<std::size_t>(k)];
  }
  const double mean = total / batches;
  double ss = 0.0;
  for (double v : m) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (batches - 1) / batches);
}

inline double mean_of(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

/// Designs for `d` with the given mean and random-effect bases per response.
inline DesignSet simple_designs(const FunctionalDataset& d, const std::vector<BasisSpec>& mean,
                                const std::vector<BasisSpec>& random) {
  std::vector<MeanSpec> ms;
  for (const auto& b : mean) ms.push_back(MeanSpec{{}, {}, b});
  return build_designs(d, ms, {}, RandomEffectsBasis::predetermined(random));
}

/// One scalar-design subject per entry of `rows` (each a list of (t, y)).
inline FunctionalDataset records_dataset(ResponseKind kind,
                                         const std::vector<std::vector<std::pair<double, double>>>& rows) {
  std::vector<ObservationRecord> recs;
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (const auto& [t, y] : rows[i]) recs.push_back({"s" + std::to_string(i), 1, t, y});
  return FunctionalDataset({kind}, recs, std::make_pair(0.0, 1.0));
}

}  // namespace mixfda::testing_support
