#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mixfda/smoothing.hpp"

using namespace mixfda;

namespace {

Vec uniform_points(int n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec t(n);
  for (int i = 0; i < n; ++i) t(i) = u(gen);
  return t;
}

}  // namespace

TEST(SmoothCurve, ConstantData) {
  const Vec t = uniform_points(200, 1);
  const Vec y = Vec::Constant(200, 3.7);
  SmootherConfig cfg;
  const auto fit = smooth_curve<double>(t, y, cfg, 0.0, 1.0);
  const Vec g = Vec::LinSpaced(101, 0.0, 1.0);
  EXPECT_LT((fit.on(g).array() - 3.7).abs().maxCoeff(), 1e-8);
}

TEST(SmoothCurve, LinearDataAnyLambda) {
  const Vec t = uniform_points(150, 2);
  const Vec y = 2.0 * t;
  const Vec g = Vec::LinSpaced(101, 0.0, 1.0);
  for (double lam : {1e-4, 1.0, 1e4}) {
    SmootherConfig cfg;
    cfg.lambda = lam;
    const auto fit = smooth_curve<double>(t, y, cfg, 0.0, 1.0);
    EXPECT_LT((fit.on(g) - 2.0 * g).cwiseAbs().maxCoeff(), 1e-6) << "lambda " << lam;
  }
}

TEST(SmoothCurve, NoisySineIntegratedError) {
  const int n = 3000;
  const Vec t = uniform_points(n, 3);
  std::mt19937_64 gen(4);
  std::normal_distribution<double> z(0.0, 0.5);
  Vec y(n);
  for (int i = 0; i < n; ++i) y(i) = std::sin(2.0 * std::numbers::pi * t(i)) + z(gen);
  const auto fit = smooth_curve<double>(t, y, SmootherConfig{}, 0.0, 1.0);
  const int G = 1001;
  const Vec g = Vec::LinSpaced(G, 0.0, 1.0);
  const Vec f = fit.on(g);
  double ise = 0.0;
  for (int k = 0; k < G; ++k) {
    const double e = f(k) - std::sin(2.0 * std::numbers::pi * g(k));
    ise += e * e * (k == 0 || k == G - 1 ? 0.5 : 1.0) / (G - 1);
  }
  EXPECT_LT(ise, 0.01);
}

TEST(SmoothCurve, TooFewDistinctLocationsIsRankError) {
  Vec t(5), y(5);
  t << 0.1, 0.2, 0.3, 0.4, 0.5;
  y.setOnes();
  EXPECT_THROW(smooth_curve<double>(t, y, SmootherConfig{}, 0.0, 1.0), SingularityError);
}

TEST(SmoothCurve, LinearInData) {
  const Vec t = uniform_points(400, 5);
  std::mt19937_64 gen(6);
  std::normal_distribution<double> z;
  Vec y1(400), y2(400);
  for (int i = 0; i < 400; ++i) {
    y1(i) = z(gen);
    y2(i) = std::cos(3.0 * t(i)) + z(gen);
  }
  SmootherConfig cfg;
  cfg.lambda = 0.3;
  const double a = 1.7, b = -0.4;
  const Vec g = Vec::LinSpaced(51, 0.0, 1.0);
  const Vec lhs = smooth_curve<double>(t, a * y1 + b * y2, cfg, 0.0, 1.0).on(g);
  const Vec rhs = a * smooth_curve<double>(t, y1, cfg, 0.0, 1.0).on(g) + b * smooth_curve<double>(t, y2, cfg, 0.0, 1.0).on(g);
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SmoothCurve, GcvIsDeterministic) {
  const Vec t = uniform_points(500, 7);
  std::mt19937_64 gen(8);
  std::normal_distribution<double> z(0.0, 0.3);
  Vec y(500);
  for (int i = 0; i < 500; ++i) y(i) = t(i) * t(i) + z(gen);
  const auto a = smooth_curve<double>(t, y, SmootherConfig{}, 0.0, 1.0);
  const auto b = smooth_curve<double>(t, y, SmootherConfig{}, 0.0, 1.0);
  EXPECT_EQ(a.lambda(), b.lambda());
  EXPECT_EQ(a.coefficients(), b.coefficients());
}

TEST(SmootherConfig, Validation) {
  SmootherConfig cfg;
  cfg.lambda = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  SmootherConfig g;
  g.gcv_grid.clear();
  EXPECT_THROW(g.validate(), ConfigError);
  EXPECT_EQ(SmootherConfig::default_gcv_grid().size(), 21u);
  EXPECT_NEAR(SmootherConfig::default_gcv_grid().front(), 1e-4, 1e-18);
  EXPECT_NEAR(SmootherConfig::default_gcv_grid().back(), 1e4, 1e-8);
}

TEST(SmoothSurface, ConstantOffDiagonal) {
  std::vector<SurfacePoint<double>> pts;
  const Vec t = uniform_points(60, 10);
  for (int i = 0; i < 60; ++i)
    for (int j = 0; j < 60; ++j) pts.push_back({t(i), t(j), i == j ? 99.0 : -1.25});
  const auto s = smooth_surface<double>(pts, true, true, SmootherConfig{}, 0.0, 1.0);
  const Vec g = Vec::LinSpaced(41, 0.0, 1.0);
  EXPECT_LT((s.on(g).array() + 1.25).abs().maxCoeff(), 1e-6);
}

TEST(SmoothSurface, PlaneRecovered) {
  std::vector<SurfacePoint<double>> pts;
  const Vec t = uniform_points(50, 11);
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 50; ++j)
      if (i != j) pts.push_back({t(i), t(j), t(i) + t(j)});
  const auto s = smooth_surface<double>(pts, true, false, SmootherConfig{}, 0.0, 1.0);
  const Vec g = Vec::LinSpaced(21, 0.05, 0.95);
  const Mat f = s.on(g);
  for (int a = 0; a < g.size(); ++a)
    for (int b = 0; b < g.size(); ++b) EXPECT_NEAR(f(a, b), g(a) + g(b), 1e-4);
}

TEST(SmoothSurface, SingleLocationWithDiagonalRemovalIsDataError) {
  std::vector<SurfacePoint<double>> pts{{0.4, 0.4, 1.0}};
  EXPECT_THROW(smooth_surface<double>(pts, true, true, SmootherConfig{}, 0.0, 1.0), DataError);
}

TEST(SmoothSurface, SymmetrizedExactly) {
  std::vector<SurfacePoint<double>> pts;
  const Vec t = uniform_points(40, 12);
  std::mt19937_64 gen(13);
  std::normal_distribution<double> z;
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 40; ++j)
      if (i != j) pts.push_back({t(i), t(j), t(i) * t(j) * 3.0 + z(gen)});
  const auto s = smooth_surface<double>(pts, true, true, SmootherConfig{}, 0.0, 1.0);
  const Mat f = s.on(Vec::LinSpaced(33, 0.0, 1.0));
  EXPECT_EQ((f - f.transpose()).cwiseAbs().maxCoeff(), 0.0);
  const auto u = smooth_surface<double>(pts, true, false, SmootherConfig{}, 0.0, 1.0);
  const Mat h = u.on(Vec::LinSpaced(33, 0.0, 1.0));
  EXPECT_GT((h - h.transpose()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(SmoothSurface, LinearInData) {
  const Vec t = uniform_points(30, 14);
  std::mt19937_64 gen(15);
  std::normal_distribution<double> z;
  std::vector<SurfacePoint<double>> p1, p2, mix;
  const double a = 0.6, b = 2.5;
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 30; ++j) {
      const double v1 = z(gen), v2 = z(gen);
      p1.push_back({t(i), t(j), v1});
      p2.push_back({t(i), t(j), v2});
      mix.push_back({t(i), t(j), a * v1 + b * v2});
    }
  SmootherConfig cfg;
  cfg.lambda = 1.0;
  const Vec g = Vec::LinSpaced(17, 0.0, 1.0);
  const Mat lhs = smooth_surface<double>(mix, true, false, cfg, 0.0, 1.0).on(g);
  const Mat rhs = a * smooth_surface<double>(p1, true, false, cfg, 0.0, 1.0).on(g) +
                  b * smooth_surface<double>(p2, true, false, cfg, 0.0, 1.0).on(g);
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-10);
}
