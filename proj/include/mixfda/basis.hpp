#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "mixfda/bspline.hpp"
#include "mixfda/types.hpp"

namespace mixfda {

enum class BasisFamily { bspline, fourier, polynomial, constant, sim_sine, sim_cosine, segment_polynomial };

/// Piece of a piecewise-centered polynomial: applies to t ≤ upper (first match).
struct Segment {
  double upper;
  double center;
};

/// Predetermined basis family over a closed domain.
struct BasisSpec {
  BasisFamily family = BasisFamily::constant;
  int order = 4;          // bspline
  int breaks = 6;         // bspline interior breaks
  int harmonics = 1;      // fourier
  int degree = 2;         // polynomial, segment_polynomial
  int count = 7;          // sim_sine / sim_cosine: M
  std::vector<Segment> segments;  // segment_polynomial
  double lower = 0.0;
  double upper = 1.0;

  static BasisSpec bspline(int order, int breaks, double lo, double hi) {
    BasisSpec s;
    s.family = BasisFamily::bspline;
    s.order = order;
    s.breaks = breaks;
    s.lower = lo;
    s.upper = hi;
    return s;
  }
  static BasisSpec polynomial(int degree, double lo, double hi) {
    BasisSpec s;
    s.family = BasisFamily::polynomial;
    s.degree = degree;
    s.lower = lo;
    s.upper = hi;
    return s;
  }
  static BasisSpec constant(double lo, double hi) {
    BasisSpec s;
    s.lower = lo;
    s.upper = hi;
    return s;
  }
  static BasisSpec fourier(int harmonics, double lo, double hi) {
    BasisSpec s;
    s.family = BasisFamily::fourier;
    s.harmonics = harmonics;
    s.lower = lo;
    s.upper = hi;
    return s;
  }
  static BasisSpec simulation(bool sine, int m, double lo, double hi) {
    BasisSpec s;
    s.family = sine ? BasisFamily::sim_sine : BasisFamily::sim_cosine;
    s.count = m;
    s.lower = lo;
    s.upper = hi;
    return s;
  }

  int dimension() const {
    switch (family) {
      case BasisFamily::bspline: return order + breaks;
      case BasisFamily::fourier: return 2 * harmonics + 1;
      case BasisFamily::polynomial:
      case BasisFamily::segment_polynomial: return degree + 1;
      case BasisFamily::constant: return 1;
      case BasisFamily::sim_sine:
      case BasisFamily::sim_cosine: return count;
    }
    return 0;
  }
};

std::string to_string(BasisFamily f);
BasisFamily parse_basis_family(const std::string& s);

/// Sinusoidal deviation basis of the simulation design:
/// response 1 uses sin{(2πk/M)(t + 2πk/M)}, response 2 the cosine.
/// `response` is 1-based.
template <typename Scalar>
Scalar sim_basis(int k, int m, Scalar t, int response) {
  using std::cos;
  using std::sin;
  const Scalar w = Scalar(2) * std::numbers::pi_v<Scalar> * Scalar(k) / Scalar(m);
  const Scalar arg = w * (t + w);
  return response == 1 ? sin(arg) : cos(arg);
}

/// Evaluates every basis function at t. Out-of-domain t is an error.
template <typename Scalar>
Vector<Scalar> eval_basis(const BasisSpec& spec, Scalar t) {
  if (t < Scalar(spec.lower) || t > Scalar(spec.upper))
    throw DomainError("basis evaluated at t=" + std::to_string(static_cast<double>(t)) + " outside [" +
                      std::to_string(spec.lower) + ", " + std::to_string(spec.upper) + "]");
  const int n = spec.dimension();
  Vector<Scalar> out(n);
  switch (spec.family) {
    case BasisFamily::bspline: {
      const auto b = BSplineBasis<Scalar>::clamped(Scalar(spec.lower), Scalar(spec.upper), spec.order, spec.breaks);
      return b.eval(t);
    }
    case BasisFamily::fourier: {
      const Scalar x = Scalar(2) * std::numbers::pi_v<Scalar> * (t - Scalar(spec.lower)) /
                       Scalar(spec.upper - spec.lower);
      out(0) = Scalar(1);
      for (int k = 1; k <= spec.harmonics; ++k) {
        out(2 * k - 1) = std::sin(Scalar(k) * x);
        out(2 * k) = std::cos(Scalar(k) * x);
      }
      return out;
    }
    case BasisFamily::polynomial: {
      Scalar v(1);
      for (int j = 0; j < n; ++j, v *= t) out(j) = v;
      return out;
    }
    case BasisFamily::segment_polynomial: {
      Scalar center = spec.segments.empty() ? Scalar(0) : Scalar(spec.segments.back().center);
      for (const auto& seg : spec.segments) {
        if (t <= Scalar(seg.upper)) {
          center = Scalar(seg.center);
          break;
        }
      }
      const Scalar d = t - center;
      Scalar v(1);
      for (int j = 0; j < n; ++j, v *= d) out(j) = v;
      return out;
    }
    case BasisFamily::constant: out(0) = Scalar(1); return out;
    case BasisFamily::sim_sine:
    case BasisFamily::sim_cosine: {
      const int resp = spec.family == BasisFamily::sim_sine ? 1 : 2;
      for (int k = 1; k <= spec.count; ++k) out(k - 1) = sim_basis<Scalar>(k, spec.count, t, resp);
      return out;
    }
  }
  return out;
}

/// Rows of eval_basis at each location.
template <typename Scalar>
Matrix<Scalar> basis_matrix(const BasisSpec& spec, const Vector<Scalar>& ts) {
  Matrix<Scalar> out(ts.size(), spec.dimension());
  for (Eigen::Index i = 0; i < ts.size(); ++i) out.row(i) = eval_basis<Scalar>(spec, ts(i)).transpose();
  return out;
}

/// Σ = Θ Ψᵀ Ω Ψ Θ with Θ = (ΨᵀΨ)⁻¹, the exact inverse of Ω = Ψ Σ Ψᵀ for a
/// square full-rank Ψ.
template <typename Scalar>
Matrix<Scalar> recover_sigma(const Matrix<Scalar>& omega, const Matrix<Scalar>& psi) {
  if (psi.rows() != psi.cols()) throw DimensionError("recover_sigma needs a square basis matrix");
  if (omega.rows() != psi.rows() || omega.cols() != psi.rows())
    throw DimensionError("covariance and basis matrix dimensions differ");
  Eigen::ColPivHouseholderQR<Matrix<Scalar>> qr(psi);
  if (qr.rank() < psi.cols()) throw SingularityError("basis matrix is rank deficient");
  const Matrix<Scalar> gram = psi.transpose() * psi;
  Eigen::LDLT<Matrix<Scalar>> ldlt(gram);
  const Matrix<Scalar> theta = ldlt.solve(Matrix<Scalar>::Identity(gram.rows(), gram.cols()));
  Matrix<Scalar> sigma = theta * (psi.transpose() * omega * psi) * theta;
  return Scalar(0.5) * (sigma + sigma.transpose());
}

}  // namespace mixfda
