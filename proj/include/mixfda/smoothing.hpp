#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <vector>

#include "mixfda/bspline.hpp"
#include "mixfda/types.hpp"

namespace mixfda {

/// Global P-spline smoother settings: cubic B-splines on equally spaced
/// knots with a difference penalty on adjacent coefficients.
struct SmootherConfig {
  int basis_size = 10;
  int order = 4;
  int penalty_order = 2;
  std::optional<double> lambda;  // empty = select by GCV

  static std::vector<double> default_gcv_grid() {
    std::vector<double> g;
    for (int k = 0; k <= 20; ++k) g.push_back(std::pow(10.0, -4.0 + 0.4 * k));
    return g;
  }
  std::vector<double> gcv_grid = default_gcv_grid();

  void validate() const {
    if (basis_size < order) throw ConfigError("smoother basis size must be at least the spline order");
    if (lambda && !(*lambda > 0.0)) throw ConfigError("smoothing parameter must be positive");
    if (!lambda && gcv_grid.empty()) throw ConfigError("GCV grid is empty");
  }
};

namespace detail {

template <typename Scalar>
struct PenalizedFit {
  Vector<Scalar> coef;
  Scalar lambda;
  Scalar edf;
  Scalar gcv;
};

/// Solves (G + λP) c = r over the candidate λ values, keeping the GCV
/// minimizer; later (larger) candidates win ties.
template <typename Scalar>
PenalizedFit<Scalar> solve_penalized(const Matrix<Scalar>& gram, const Vector<Scalar>& rhs, Scalar yy, Scalar n,
                                     const Matrix<Scalar>& penalty, const SmootherConfig& cfg) {
  std::vector<double> lambdas = cfg.lambda ? std::vector<double>{*cfg.lambda} : cfg.gcv_grid;
  PenalizedFit<Scalar> best{Vector<Scalar>(), Scalar(0), Scalar(0), std::numeric_limits<Scalar>::infinity()};
  bool any = false;
  for (double lam : lambdas) {
    const Matrix<Scalar> a = gram + Scalar(lam) * penalty;
    Eigen::LLT<Matrix<Scalar>> llt(a);
    if (llt.info() != Eigen::Success) continue;
    Vector<Scalar> c = llt.solve(rhs);
    const Scalar edf = llt.solve(gram).trace();
    const Scalar rss = std::max(Scalar(0), yy - Scalar(2) * c.dot(rhs) + c.dot(gram * c));
    const Scalar dof = n - edf;
    const Scalar gcv = dof > Scalar(0) ? n * rss / (dof * dof) : std::numeric_limits<Scalar>::infinity();
    if (!any || gcv <= best.gcv) {
      best = {std::move(c), Scalar(lam), edf, gcv};
      any = true;
    }
  }
  if (!any) throw SingularityError("penalized normal equations are singular for every smoothing parameter");
  return best;
}

}  // namespace detail

/// Penalized spline fit of a curve; evaluable anywhere in the domain.
template <typename Scalar>
class SmoothedCurve {
 public:
  SmoothedCurve() = default;
  SmoothedCurve(BSplineBasis<Scalar> basis, Vector<Scalar> coef, Scalar lambda, Scalar edf)
      : basis_(std::move(basis)), coef_(std::move(coef)), lambda_(lambda), edf_(edf) {}

  Scalar operator()(Scalar t) const {
    std::array<Scalar, BSplineBasis<Scalar>::max_order> v{};
    const int first = basis_.local(t, v.data());
    Scalar out(0);
    for (int r = 0; r < basis_.order(); ++r) out += v[static_cast<std::size_t>(r)] * coef_(first + r);
    return out;
  }

  Vector<Scalar> on(const Vector<Scalar>& ts) const {
    Vector<Scalar> out(ts.size());
    for (Eigen::Index i = 0; i < ts.size(); ++i) out(i) = (*this)(ts(i));
    return out;
  }

  Scalar lambda() const { return lambda_; }
  Scalar edf() const { return edf_; }
  const Vector<Scalar>& coefficients() const { return coef_; }

 private:
  BSplineBasis<Scalar> basis_;
  Vector<Scalar> coef_;
  Scalar lambda_ = Scalar(0);
  Scalar edf_ = Scalar(0);
};

/// Normal-equation accumulator for a univariate P-spline.
template <typename Scalar>
class CurveAccumulator {
 public:
  CurveAccumulator(Scalar lo, Scalar hi, const SmootherConfig& cfg)
      : basis_(BSplineBasis<Scalar>::uniform(lo, hi, cfg.order, cfg.basis_size)),
        gram_(Matrix<Scalar>::Zero(cfg.basis_size, cfg.basis_size)),
        rhs_(Vector<Scalar>::Zero(cfg.basis_size)) {}

  void add(Scalar t, Scalar y, Scalar w = Scalar(1)) {
    std::array<Scalar, BSplineBasis<Scalar>::max_order> v{};
    const int first = basis_.local(t, v.data());
    const int k = basis_.order();
    for (int a = 0; a < k; ++a) {
      rhs_(first + a) += w * v[a] * y;
      for (int b = 0; b < k; ++b) gram_(first + a, first + b) += w * v[a] * v[b];
    }
    yy_ += w * y * y;
    n_ += w;
    distinct_.insert(static_cast<double>(t));
  }

  SmoothedCurve<Scalar> fit(const SmootherConfig& cfg) const {
    cfg.validate();
    if (static_cast<int>(distinct_.size()) < cfg.basis_size)
      throw SingularityError("curve smoother needs at least " + std::to_string(cfg.basis_size) +
                             " distinct locations, got " + std::to_string(distinct_.size()));
    const Matrix<Scalar> d = difference_matrix<Scalar>(cfg.basis_size, cfg.penalty_order);
    const auto f = detail::solve_penalized<Scalar>(gram_, rhs_, yy_, n_, d.transpose() * d, cfg);
    return SmoothedCurve<Scalar>(basis_, f.coef, f.lambda, f.edf);
  }

 private:
  BSplineBasis<Scalar> basis_;
  Matrix<Scalar> gram_;
  Vector<Scalar> rhs_;
  Scalar yy_ = Scalar(0);
  Scalar n_ = Scalar(0);
  std::set<double> distinct_;
};

/// Smooths (t, y) pairs on [lo, hi].
template <typename Scalar>
SmoothedCurve<Scalar> smooth_curve(const Vector<Scalar>& t, const Vector<Scalar>& y, const SmootherConfig& cfg,
                                   Scalar lo, Scalar hi) {
  if (t.size() != y.size()) throw DimensionError("smooth_curve: t and y lengths differ");
  CurveAccumulator<Scalar> acc(lo, hi, cfg);
  for (Eigen::Index i = 0; i < t.size(); ++i) acc.add(t(i), y(i));
  return acc.fit(cfg);
}

/// Tensor-product P-spline surface F(t, s) = b(t)ᵀ C b(s).
template <typename Scalar>
class SmoothedSurface {
 public:
  SmoothedSurface() = default;
  SmoothedSurface(BSplineBasis<Scalar> basis, Matrix<Scalar> coef, Scalar lambda, bool symmetric)
      : basis_(std::move(basis)), coef_(std::move(coef)), lambda_(lambda), symmetric_(symmetric) {}

  Scalar operator()(Scalar t, Scalar s) const { return basis_.eval(t).dot(coef_ * basis_.eval(s)); }

  /// Values on grid × grid; exactly symmetric for symmetrized surfaces.
  Matrix<Scalar> on(const Vector<Scalar>& ts) const {
    const Matrix<Scalar> b = basis_.design(ts);
    Matrix<Scalar> f = b * coef_ * b.transpose();
    if (symmetric_) f = Scalar(0.5) * (f + f.transpose()).eval();
    return f;
  }

  Scalar lambda() const { return lambda_; }
  bool symmetric() const { return symmetric_; }
  const Matrix<Scalar>& coefficients() const { return coef_; }

 private:
  BSplineBasis<Scalar> basis_;
  Matrix<Scalar> coef_;
  Scalar lambda_ = Scalar(0);
  bool symmetric_ = false;
};

/// Normal-equation accumulator for a tensor-product P-spline surface.
template <typename Scalar>
class SurfaceAccumulator {
 public:
  SurfaceAccumulator(Scalar lo, Scalar hi, const SmootherConfig& cfg)
      : basis_(BSplineBasis<Scalar>::uniform(lo, hi, cfg.order, cfg.basis_size)),
        k_(cfg.basis_size),
        gram_(Matrix<Scalar>::Zero(k_ * k_, k_ * k_)),
        rhs_(Vector<Scalar>::Zero(k_ * k_)) {}

  /// Local basis values of one location, reusable across many pairs.
  struct Local {
    int first = 0;
    std::array<Scalar, BSplineBasis<Scalar>::max_order> v{};
  };

  Local local(Scalar t) const {
    Local l;
    l.first = basis_.local(t, l.v.data());
    return l;
  }

  void add(const Local& a, const Local& b, Scalar value, Scalar w = Scalar(1)) {
    const int k = basis_.order();
    std::array<int, BSplineBasis<Scalar>::max_order * BSplineBasis<Scalar>::max_order> idx{};
    std::array<Scalar, BSplineBasis<Scalar>::max_order * BSplineBasis<Scalar>::max_order> val{};
    int n = 0;
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j, ++n) {
        idx[static_cast<std::size_t>(n)] = (a.first + i) * k_ + (b.first + j);
        val[static_cast<std::size_t>(n)] = a.v[static_cast<std::size_t>(i)] * b.v[static_cast<std::size_t>(j)];
      }
    }
    for (int r = 0; r < n; ++r) {
      const Scalar wr = w * val[static_cast<std::size_t>(r)];
      rhs_(idx[static_cast<std::size_t>(r)]) += wr * value;
      for (int c = 0; c < n; ++c) gram_(idx[static_cast<std::size_t>(r)], idx[static_cast<std::size_t>(c)]) += wr * val[static_cast<std::size_t>(c)];
    }
    yy_ += w * value * value;
    n_ += w;
  }

  void add(Scalar t, Scalar s, Scalar value, Scalar w = Scalar(1)) { add(local(t), local(s), value, w); }

  Scalar count() const { return n_; }

  /// Fits the surface; `symmetrize` averages the surface with its transpose.
  SmoothedSurface<Scalar> fit(const SmootherConfig& cfg, bool symmetrize) const {
    cfg.validate();
    if (!(n_ > Scalar(0))) throw DataError("surface smoother received no data");
    const Matrix<Scalar> d = difference_matrix<Scalar>(k_, cfg.penalty_order);
    const Matrix<Scalar> dd = d.transpose() * d;
    const Matrix<Scalar> eye = Matrix<Scalar>::Identity(k_, k_);
    Matrix<Scalar> penalty(k_ * k_, k_ * k_);
    // Coefficient index is i * k + j (i along t, j along s).
    penalty = kron(dd, eye) + kron(eye, dd);
    const auto f = detail::solve_penalized<Scalar>(gram_, rhs_, yy_, n_, penalty, cfg);
    Matrix<Scalar> c(k_, k_);
    for (int i = 0; i < k_; ++i)
      for (int j = 0; j < k_; ++j) c(i, j) = f.coef(i * k_ + j);
    if (symmetrize) c = Scalar(0.5) * (c + c.transpose()).eval();
    return SmoothedSurface<Scalar>(basis_, std::move(c), f.lambda, symmetrize);
  }

 private:
  static Matrix<Scalar> kron(const Matrix<Scalar>& a, const Matrix<Scalar>& b) {
    Matrix<Scalar> out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
  }

  BSplineBasis<Scalar> basis_;
  int k_;
  Matrix<Scalar> gram_;
  Vector<Scalar> rhs_;
  Scalar yy_ = Scalar(0);
  Scalar n_ = Scalar(0);
};

/// ((t, s), v) sample for the surface smoother.
template <typename Scalar>
struct SurfacePoint {
  Scalar t;
  Scalar s;
  Scalar v;
};

/// Smooths surface samples; with `remove_diagonal`, samples with t == s are
/// dropped first.
template <typename Scalar>
SmoothedSurface<Scalar> smooth_surface(const std::vector<SurfacePoint<Scalar>>& pts, bool remove_diagonal,
                                       bool symmetrize, const SmootherConfig& cfg, Scalar lo, Scalar hi) {
  SurfaceAccumulator<Scalar> acc(lo, hi, cfg);
  for (const auto& p : pts) {
    if (remove_diagonal && p.t == p.s) continue;
    acc.add(p.t, p.s, p.v);
  }
  if (!(acc.count() > Scalar(0))) throw DataError("no surface samples left after diagonal removal");
  return acc.fit(cfg, symmetrize);
}

}  // namespace mixfda
