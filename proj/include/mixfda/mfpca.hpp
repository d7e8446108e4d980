#pragma once

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <optional>
#include <string>

#include "mixfda/log.hpp"
#include "mixfda/types.hpp"

namespace mixfda {

/// Positive part of the spectrum of a discretized covariance operator.
/// Column k of `functions` stacks θ_1k, …, θ_Pk on the grid.
template <typename Scalar>
struct EigenSystem {
  Vector<Scalar> values;     // descending, all > 0
  Matrix<Scalar> functions;  // (P·G) × n
  int P = 1;
  Vector<Scalar> grid;
  Scalar spacing = Scalar(0);

  int count() const { return static_cast<int>(values.size()); }
  Eigen::Index grid_size() const { return grid.size(); }
  /// θ_pk on the grid.
  auto function(int p, int k) const { return functions.col(k).segment(p * grid.size(), grid.size()); }
};

/// Eigen-decomposes Δ·K and rescales eigenvectors by 1/√Δ, so the returned
/// eigenfunctions are orthonormal under the Riemann inner product.
template <typename Scalar>
EigenSystem<Scalar> eigendecompose(const Matrix<Scalar>& K, int P, const Vector<Scalar>& grid) {
  const Eigen::Index G = grid.size();
  if (G < 2 || K.rows() != P * G || K.cols() != P * G)
    throw DimensionError("eigendecompose: matrix is not (P*G) x (P*G)");
  const Scalar scale = std::max(K.cwiseAbs().maxCoeff(), Scalar(1e-300));
  if ((K - K.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-10) * scale)
    throw DimensionError("eigendecompose: covariance matrix is not symmetric");
  const Scalar delta = (grid(G - 1) - grid(0)) / static_cast<Scalar>(G - 1);
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(delta * K);
  if (es.info() != Eigen::Success) throw SingularityError("eigendecomposition failed");
  // Eigen returns ascending order; positive eigenvalues below round-off are noise.
  const Vector<Scalar>& ev = es.eigenvalues();
  const Scalar tol = std::numeric_limits<Scalar>::epsilon() * static_cast<Scalar>(K.rows()) *
                     std::max(ev.cwiseAbs().maxCoeff(), Scalar(0));
  Eigen::Index n = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i) > tol) ++n;
  EigenSystem<Scalar> out;
  out.P = P;
  out.grid = grid;
  out.spacing = delta;
  out.values.resize(n);
  out.functions.resize(K.rows(), n);
  const Scalar inv_sqrt = Scalar(1) / std::sqrt(delta);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = ev.size() - 1 - k;
    out.values(k) = ev(src);
    out.functions.col(k) = es.eigenvectors().col(src) * inv_sqrt;
  }
  return out;
}

struct TruncationRule {
  double P1 = 0.99;
  /// Defaults to 1 / (number of positive eigenvalues).
  std::optional<double> P2;

  void validate() const {
    if (!(P1 > 0.0 && P1 <= 1.0)) throw ConfigError("P1 must lie in (0, 1]");
    if (P2 && !(*P2 > 0.0 && *P2 < 1.0)) throw ConfigError("P2 must lie in (0, 1)");
  }
};

/// M = min{k : Σ_{j≤k} λ_j / Σ λ ≥ P1 and λ_k / Σ λ < P2}; all positive
/// components when no k qualifies.
template <typename Scalar>
int truncate(const EigenSystem<Scalar>& es, const TruncationRule& rule) {
  rule.validate();
  const int n = es.count();
  if (n == 0) throw DegenerateError("covariance estimate has no positive eigenvalues");
  const double P2 = rule.P2.value_or(1.0 / n);
  const double total = static_cast<double>(es.values.sum());
  double cum = 0.0;
  for (int k = 0; k < n; ++k) {
    const double lk = static_cast<double>(es.values(k));
    cum += lk;
    if (cum / total >= rule.P1 && lk / total < P2) return k + 1;
  }
  log::warn("truncation rule (P1=" + std::to_string(rule.P1) + ", P2=" + std::to_string(P2) +
            ") has no solution; keeping all " + std::to_string(n) + " positive components");
  return n;
}

/// ψ_pk = √λ_k θ_pk on the grid, linearly interpolated in between.
template <typename Scalar>
class FpcaBasis {
 public:
  FpcaBasis() = default;
  FpcaBasis(Matrix<Scalar> psi, Vector<Scalar> grid, int P) : psi_(std::move(psi)), grid_(std::move(grid)), P_(P) {}

  int size() const { return static_cast<int>(psi_.cols()); }
  int responses() const { return P_; }
  const Vector<Scalar>& grid() const { return grid_; }
  /// (P·G) × M grid values.
  const Matrix<Scalar>& values() const { return psi_; }
  auto on_grid(int p) const { return psi_.middleRows(p * grid_.size(), grid_.size()); }

  /// [ψ_p1(t), …, ψ_pM(t)].
  Vector<Scalar> operator()(int p, Scalar t) const {
    const Eigen::Index G = grid_.size();
    if (!(t >= grid_(0) && t <= grid_(G - 1))) throw DomainError("FPCA basis evaluated outside the grid");
    const Scalar* begin = grid_.data();
    Eigen::Index g = std::upper_bound(begin, begin + G, t) - begin - 1;
    g = std::clamp<Eigen::Index>(g, 0, G - 2);
    const Scalar w = (t - grid_(g)) / (grid_(g + 1) - grid_(g));
    const Eigen::Index r = p * G + g;
    return (psi_.row(r) * (Scalar(1) - w) + psi_.row(r + 1) * w).transpose();
  }

 private:
  Matrix<Scalar> psi_;
  Vector<Scalar> grid_;
  int P_ = 1;
};

template <typename Scalar>
FpcaBasis<Scalar> build_basis(const EigenSystem<Scalar>& es, int M) {
  if (M < 1 || M > es.count()) throw DimensionError("build_basis: M out of range");
  Matrix<Scalar> psi = es.functions.leftCols(M);
  for (int k = 0; k < M; ++k) psi.col(k) *= std::sqrt(es.values(k));
  return FpcaBasis<Scalar>(std::move(psi), es.grid, es.P);
}

}  // namespace mixfda
