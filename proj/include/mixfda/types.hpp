#pragma once

#include <Eigen/Dense>

#include <cstddef>

#include "mixfda/errors.hpp"

namespace mixfda {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using Vec = Vector<double>;
using Mat = Matrix<double>;

/// Equally spaced evaluation grid over a closed interval.
struct GridSpec {
  Vec points;
  double spacing = 0.0;

  GridSpec() = default;
  GridSpec(double lo, double hi, Eigen::Index n) {
    if (n < 2 || !(hi > lo)) throw DimensionError("grid needs n >= 2 points over a non-empty interval");
    points = Vec::LinSpaced(n, lo, hi);
    spacing = (hi - lo) / static_cast<double>(n - 1);
  }

  Eigen::Index size() const { return points.size(); }
  double lower() const { return points(0); }
  double upper() const { return points(points.size() - 1); }

  bool operator==(const GridSpec& o) const {
    return points.size() == o.points.size() && spacing == o.spacing && points == o.points;
  }
};

}  // namespace mixfda
