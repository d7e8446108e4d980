#pragma once

#include <algorithm>
#include <array>
#include <vector>

#include "mixfda/types.hpp"

namespace mixfda {

/// B-spline basis of arbitrary order on a fixed knot vector, evaluated with
/// de Boor's recurrence. Valid on [knots[order-1], knots[size()]].
template <typename Scalar>
class BSplineBasis {
 public:
  static constexpr int max_order = 8;

  BSplineBasis() = default;
  BSplineBasis(std::vector<Scalar> knots, int order) : knots_(std::move(knots)), order_(order) {
    if (order_ < 1 || order_ > max_order) throw ConfigError("B-spline order must be in [1, 8]");
    if (static_cast<int>(knots_.size()) < 2 * order_) throw ConfigError("too few knots for B-spline order");
    if (!std::is_sorted(knots_.begin(), knots_.end())) throw ConfigError("knots must be non-decreasing");
  }

  /// Boundary knots of multiplicity `order`, `interior` equally spaced breaks.
  static BSplineBasis clamped(Scalar lo, Scalar hi, int order, int interior) {
    if (interior < 0) throw ConfigError("negative interior break count");
    std::vector<Scalar> k(static_cast<std::size_t>(order), lo);
    for (int j = 1; j <= interior; ++j) k.push_back(lo + (hi - lo) * Scalar(j) / Scalar(interior + 1));
    k.insert(k.end(), static_cast<std::size_t>(order), hi);
    return BSplineBasis(std::move(k), order);
  }

  /// Equally spaced knots extended past the domain (the P-spline layout), so
  /// that second differences of the coefficients of a linear function vanish.
  static BSplineBasis uniform(Scalar lo, Scalar hi, int order, int size) {
    const int segments = size - order + 1;
    if (segments < 1) throw ConfigError("P-spline basis size must be at least the order");
    const Scalar h = (hi - lo) / Scalar(segments);
    std::vector<Scalar> k;
    for (int j = -(order - 1); j <= segments + order - 1; ++j) k.push_back(lo + h * Scalar(j));
    // Pin the domain ends exactly so endpoint evaluation never loses a span.
    k[static_cast<std::size_t>(order - 1)] = lo;
    k[static_cast<std::size_t>(order - 1 + segments)] = hi;
    return BSplineBasis(std::move(k), order);
  }

  int order() const { return order_; }
  int size() const { return static_cast<int>(knots_.size()) - order_; }
  Scalar lower() const { return knots_[static_cast<std::size_t>(order_ - 1)]; }
  Scalar upper() const { return knots_[static_cast<std::size_t>(size())]; }
  const std::vector<Scalar>& knots() const { return knots_; }

  /// Writes the `order` possibly nonzero values at t; returns the index of
  /// the first of them.
  int local(Scalar t, Scalar* values) const {
    const int d = order_ - 1;
    int mu = static_cast<int>(std::upper_bound(knots_.begin(), knots_.end(), t) - knots_.begin()) - 1;
    mu = std::clamp(mu, d, size() - 1);
    std::array<Scalar, max_order> left{}, right{};
    values[0] = Scalar(1);
    for (int j = 1; j <= d; ++j) {
      left[static_cast<std::size_t>(j)] = t - knots_[static_cast<std::size_t>(mu + 1 - j)];
      right[static_cast<std::size_t>(j)] = knots_[static_cast<std::size_t>(mu + j)] - t;
      Scalar saved(0);
      for (int r = 0; r < j; ++r) {
        const Scalar denom = right[static_cast<std::size_t>(r + 1)] + left[static_cast<std::size_t>(j - r)];
        const Scalar temp = denom != Scalar(0) ? values[r] / denom : Scalar(0);
        values[r] = saved + right[static_cast<std::size_t>(r + 1)] * temp;
        saved = left[static_cast<std::size_t>(j - r)] * temp;
      }
      values[j] = saved;
    }
    return mu - d;
  }

  Vector<Scalar> eval(Scalar t) const {
    Vector<Scalar> out = Vector<Scalar>::Zero(size());
    std::array<Scalar, max_order> v{};
    const int first = local(t, v.data());
    for (int r = 0; r < order_; ++r) out(first + r) = v[static_cast<std::size_t>(r)];
    return out;
  }

  Matrix<Scalar> design(const Vector<Scalar>& ts) const {
    Matrix<Scalar> out = Matrix<Scalar>::Zero(ts.size(), size());
    std::array<Scalar, max_order> v{};
    for (Eigen::Index i = 0; i < ts.size(); ++i) {
      const int first = local(ts(i), v.data());
      for (int r = 0; r < order_; ++r) out(i, first + r) = v[static_cast<std::size_t>(r)];
    }
    return out;
  }

 private:
  std::vector<Scalar> knots_;
  int order_ = 4;
};

/// Matrix of k-th order differences, (n - k) × n.
template <typename Scalar>
Matrix<Scalar> difference_matrix(int n, int k) {
  Matrix<Scalar> d = Matrix<Scalar>::Identity(n, n);
  for (int step = 0; step < k; ++step) {
    Matrix<Scalar> next(d.rows() - 1, n);
    for (Eigen::Index r = 0; r + 1 < d.rows(); ++r) next.row(r) = d.row(r + 1) - d.row(r);
    d = std::move(next);
  }
  return d;
}

}  // namespace mixfda
