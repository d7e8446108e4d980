#include <gtest/gtest.h>

#include <cmath>
#include <random>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fixtures.hpp"
#include "mixfda/sampler.hpp"

using namespace mixfda;
using namespace mixfda::testing_support;

namespace {

const BasisSpec kConst = BasisSpec::constant(0.0, 1.0);

SubjectDesign empty_subject(int J, int m, int P) {
  SubjectDesign s;
  s.id = "empty";
  s.U = Mat::Zero(0, J);
  s.Psi = Mat::Zero(0, m);
  s.y = Vec::Zero(0);
  s.response_start.assign(static_cast<std::size_t>(P + 1), 0);
  return s;
}

/// Scalar model y = β + α_i + ε with `n` subjects of `L` observations.
DesignSet scalar_gaussian(int n, int L, std::uint64_t seed, double beta = 1.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z;
  std::vector<std::vector<std::pair<double, double>>> rows(static_cast<std::size_t>(n));
  for (auto& r : rows) {
    const double a = z(gen);
    for (int l = 0; l < L; ++l) r.emplace_back((l + 0.5) / L, beta + a + z(gen));
  }
  return simple_designs(records_dataset(ResponseKind::gaussian, rows), {kConst}, {kConst});
}

ChainConfig short_chain(int n_iter, int burn_in, std::uint64_t seed = 3) {
  ChainConfig c;
  c.n_iter = n_iter;
  c.burn_in = burn_in;
  c.seed = seed;
  return c;
}

/// Random full-rank Gaussian fixture with a quadratic mean and 3 random effects.
DesignSet gaussian_fixture(std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<std::pair<double, double>>> rows(12);
  for (auto& r : rows)
    for (int l = 0; l < 6; ++l) r.emplace_back(u(gen), z(gen));
  return simple_designs(records_dataset(ResponseKind::gaussian, rows), {BasisSpec::polynomial(2, 0.0, 1.0)},
                        {BasisSpec::polynomial(2, 0.0, 1.0)});
}

}  // namespace

TEST(LatentW, SignsFollowData) {
  std::vector<std::vector<std::pair<double, double>>> rows{{{0.1, 1}, {0.4, 0}, {0.8, 1}}, {{0.2, 0}, {0.6, 0}}};
  const auto d = simple_designs(records_dataset(ResponseKind::binary, rows), {kConst}, {kConst});
  GibbsSampler g(d, PriorConfig{}, short_chain(200, 100));
  for (int it = 0; it < 200; ++it) {
    g.sweep(it);
    for (std::size_t i = 0; i < d.subjects.size(); ++i)
      for (Eigen::Index r = 0; r < d.subjects[i].y.size(); ++r)
        ASSERT_EQ(g.state().w[i](r) > 0.0, d.subjects[i].y(r) > 0.5);
  }
}

TEST(LatentW, TruncatedMeanAtPredictorTwo) {
  std::vector<std::vector<std::pair<double, double>>> rows{{{0.5, 1}}};
  const auto d = simple_designs(records_dataset(ResponseKind::binary, rows), {kConst}, {kConst});
  GibbsSampler g(d, PriorConfig{}, short_chain(10, 0));
  g.state().beta(0) = 2.0;
  g.state().alpha[0](0) = 0.0;
  double sum = 0.0;
  const int n = 200000;
  for (int it = 0; it < n; ++it) {
    g.update_latent_w(it);
    sum += g.state().w[0](0);
  }
  EXPECT_NEAR(sum / n, 2.0552, 0.004);
}

TEST(BetaConditional, PriorWhenNoData) {
  DesignSet d = scalar_gaussian(1, 1, 1);
  d.subjects = {empty_subject(1, 1, 1), empty_subject(1, 1, 1)};
  GibbsSampler g(d, PriorConfig{}, short_chain(10, 0));
  const auto c = g.beta_conditional();
  EXPECT_NEAR(c.mean(0), 0.0, 1e-15);
  EXPECT_NEAR(c.cov(0, 0), 100.0, 1e-12);
  double s = 0.0, s2 = 0.0;
  const int n = 50000;
  for (int it = 0; it < n; ++it) {
    g.update_beta(it);
    s += g.state().beta(0);
    s2 += g.state().beta(0) * g.state().beta(0);
  }
  EXPECT_NEAR(s / n, 0.0, 0.2);
  EXPECT_NEAR(s2 / n, 100.0, 2.0);
}

TEST(BetaConditional, SingleObservationHandAlgebra) {
  std::vector<std::vector<std::pair<double, double>>> rows{{{0.5, 3.0}}};
  const auto d = simple_designs(records_dataset(ResponseKind::gaussian, rows), {kConst}, {kConst});
  GibbsSampler g(d, PriorConfig{}, short_chain(10, 0));
  g.state().alpha[0].setZero();
  g.state().tau2(0) = 1.0;
  const auto c = g.beta_conditional();
  EXPECT_NEAR(c.mean(0), 3.0 / 1.01, 1e-12);
  EXPECT_NEAR(c.mean(0), 2.9703, 1e-4);
  EXPECT_NEAR(c.cov(0, 0), 1.0 / 1.01, 1e-12);
  EXPECT_NEAR(c.cov(0, 0), 0.9901, 1e-4);
}

TEST(BetaConditional, MatchesGeneralizedLeastSquares) {
  const DesignSet d = gaussian_fixture(2);
  GibbsSampler g(d, PriorConfig{}, short_chain(10, 0));
  std::mt19937_64 gen(3);
  std::normal_distribution<double> z;
  for (auto& a : g.state().alpha)
    for (Eigen::Index k = 0; k < a.size(); ++k) a(k) = z(gen);
  g.state().tau2(0) = 0.37;
  const auto c = g.beta_conditional();
  const int J = d.fixed_dim();
  Mat A = Mat::Identity(J, J) / 100.0;
  Vec b = Vec::Zero(J);
  for (std::size_t i = 0; i < d.subjects.size(); ++i) {
    const auto& s = d.subjects[i];
    A += s.U.transpose() * s.U / 0.37;
    b += s.U.transpose() * (s.y - s.Psi * g.state().alpha[i]) / 0.37;
  }
  const Vec direct = A.fullPivLu().solve(b);
  EXPECT_LT((c.mean - direct).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((c.cov - A.inverse()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(AlphaConditional, ScalarHandAlgebra) {
  std::vector<std::vector<std::pair<double, double>>> rows{{{0.5, 1.6}}};
  const auto d = simple_designs(records_dataset(ResponseKind::gaussian, rows), {kConst}, {kConst});
  GibbsSampler g(d, PriorConfig{}, short_chain(10, 0));
  g.state().beta(0) = 0.4;  // residual r = 1.2
  const auto c = g.alpha_conditional(0);
  EXPECT_NEAR(c.mean(0), 0.6, 1e-12);
  EXPECT_NEAR(c.cov(0, 0), 0.5, 1e-12);
}

TEST(AlphaConditional, PriorWhenSubjectHasNoData) {
  DesignSet d = gaussian_fixture(4);
  d.subjects.push_back(empty_subject(d.fixed_dim(), d.random_dim(), 1));
  ChainConfig c = short_chain(10, 0);
  Mat sigma(3, 3);
  sigma << 2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 0.5;
  c.fixed_sigma = sigma;
  GibbsSampler g(d, PriorConfig{}, c);
  const auto a = g.alpha_conditional(d.subjects.size() - 1);
  EXPECT_LT(a.mean.cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((a.cov - sigma).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SigmaUpdate, PriorDrawWithoutSubjects) {
  DesignSet d = scalar_gaussian(1, 1, 5);
  d.subjects.clear();
  PriorConfig prior;
  prior.q1 = 10.0;
  prior.q2 = 0.5;
  GibbsSampler g(d, prior, short_chain(10, 0));
  double s = 0.0;
  const int n = 100000;
  for (int it = 0; it < n; ++it) {
    g.update_sigma(it);
    s += g.state().sigma(0, 0);
  }
  // Q ~ W(q2, q1) in one dimension: E[1/Q] = 1 / (q2 (q1 − 2)).
  EXPECT_NEAR(s / n, 1.0 / (0.5 * 8.0), 0.01 * 0.25 + 0.005);
}

TEST(SigmaUpdate, ConsistentForLargeN) {
  DesignSet d = gaussian_fixture(6);
  d.subjects.assign(5000, d.subjects.front());
  Mat sigma0(3, 3);
  sigma0 << 1.0, 0.4, -0.2, 0.4, 0.8, 0.1, -0.2, 0.1, 0.5;
  GibbsSampler g(d, PriorConfig{}, short_chain(10, 0));
  Rng rng(7);
  for (auto& a : g.state().alpha) a = sample_gaussian(sigma0, rng);
  Mat mean = Mat::Zero(3, 3);
  for (int it = 0; it < 400; ++it) {
    g.update_sigma(it);
    mean += g.state().sigma;
  }
  mean /= 400.0;
  EXPECT_LT((mean - sigma0).cwiseAbs().maxCoeff(), 0.05 * sigma0.cwiseAbs().maxCoeff());
}

TEST(SigmaUpdate, DiagonalAndBlockStructure) {
  DesignSet d = gaussian_fixture(8);
  PriorConfig diag;
  diag.sigma_mode = SigmaMode::diagonal;
  GibbsSampler g(d, diag, short_chain(10, 0));
  g.update_sigma(0);
  EXPECT_EQ(g.state().sigma(0, 1), 0.0);
  EXPECT_GT(g.state().sigma.diagonal().minCoeff(), 0.0);
  PriorConfig block;
  block.sigma_mode = SigmaMode::block;
  block.block_size = 2;
  GibbsSampler h(d, block, short_chain(10, 0));
  for (auto& a : h.state().alpha) a = Vec::Constant(3, 1.0);
  h.update_sigma(0);
  EXPECT_NE(h.state().sigma(0, 1), 0.0);
  EXPECT_EQ(h.state().sigma(0, 2), 0.0);
  EXPECT_EQ(h.state().sigma(1, 2), 0.0);
  PriorConfig bad;
  bad.sigma_mode = SigmaMode::block;
  EXPECT_THROW(GibbsSampler(d, bad, short_chain(10, 0)), ConfigError);
}

TEST(TauUpdate, ZeroResidualsInverseGamma) {
  std::vector<std::vector<std::pair<double, double>>> rows{{}};
  for (int l = 0; l < 10; ++l) rows[0].emplace_back(0.05 + 0.1 * l, 0.0);
  const auto d = simple_designs(records_dataset(ResponseKind::gaussian, rows), {kConst}, {kConst});
  GibbsSampler g(d, PriorConfig{}, short_chain(10, 0));
  g.state().beta.setZero();
  g.state().alpha[0].setZero();
  double s = 0.0;
  const int n = 200000;
  for (int it = 0; it < n; ++it) {
    g.update_tau(it);
    s += g.state().tau2(0);
  }
  EXPECT_NEAR(s / n, 0.1 / 4.1, 0.0005);
}

TEST(TauUpdate, ResidualSumOfSquaresTwenty) {
  std::vector<std::vector<std::pair<double, double>>> rows{{}};
  for (int l = 0; l < 10; ++l) rows[0].emplace_back(0.05 + 0.1 * l, (l % 2 ? 1.0 : -1.0) * std::sqrt(2.0));
  const auto d = simple_designs(records_dataset(ResponseKind::gaussian, rows), {kConst}, {kConst});
  GibbsSampler g(d, PriorConfig{}, short_chain(10, 0));
  g.state().beta.setZero();
  g.state().alpha[0].setZero();
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int it = 0; it < n; ++it) {
    g.update_tau(it);
    s += g.state().tau2(0);
    s2 += g.state().tau2(0) * g.state().tau2(0);
  }
  const double mean = 10.1 / 4.1;
  const double var = 10.1 * 10.1 / (4.1 * 4.1 * 3.1);
  EXPECT_NEAR(s / n, mean, 0.01);
  EXPECT_NEAR(s2 / n - (s / n) * (s / n), var, 0.05 * var);
}

TEST(TauUpdate, BinaryOnlyIsNoOp) {
  std::vector<std::vector<std::pair<double, double>>> rows{{{0.3, 1}, {0.6, 0}}};
  const auto d = simple_designs(records_dataset(ResponseKind::binary, rows), {kConst}, {kConst});
  GibbsSampler g(d, PriorConfig{}, short_chain(10, 0));
  for (int it = 0; it < 20; ++it) {
    g.sweep(it);
    ASSERT_EQ(g.state().tau2(0), 1.0);
  }
}

TEST(Chain, ZeroStoredDrawsIsConfigError) {
  ChainConfig c = short_chain(10, 5);
  c.thin = 10;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(run_gibbs(scalar_gaussian(3, 3, 1), PriorConfig{}, c), ConfigError);
  ChainConfig b = short_chain(10, 10);
  EXPECT_THROW(b.validate(), ConfigError);
}

TEST(Chain, StoredCountAndIterations) {
  ChainConfig c = short_chain(105, 20);
  c.thin = 4;
  const auto draws = run_gibbs(scalar_gaussian(3, 3, 1), PriorConfig{}, c);
  EXPECT_EQ(static_cast<int>(draws.size()), (105 - 20) / 4);
  EXPECT_EQ(draws.iteration.front(), 23);
  for (std::size_t k = 1; k < draws.size(); ++k) EXPECT_EQ(draws.iteration[k] - draws.iteration[k - 1], 4);
}

TEST(Chain, NumericalErrorsCarryIterationIndex) {
  ChainConfig c = short_chain(10, 0);
  c.fixed_tau2 = Vec::Constant(1, -1.0);
  try {
    run_gibbs(scalar_gaussian(3, 3, 1), PriorConfig{}, c);
    FAIL() << "expected a numerical error";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("Gibbs iteration 0"), std::string::npos);
  }
}

TEST(Chain, SameSeedBitIdenticalAcrossThreadCounts) {
  std::vector<std::vector<std::pair<double, double>>> rows;
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    rows.emplace_back();
    for (int l = 0; l < 5; ++l) rows.back().emplace_back(u(gen), u(gen) < 0.4 ? 1.0 : 0.0);
  }
  const auto d = simple_designs(records_dataset(ResponseKind::binary, rows), {BasisSpec::polynomial(1, 0.0, 1.0)},
                                {BasisSpec::polynomial(1, 0.0, 1.0)});
  ChainConfig c = short_chain(300, 100, 77);
  c.store_alpha = true;
  const auto a = run_gibbs(d, PriorConfig{}, c);
#ifdef _OPENMP
  const int saved = omp_get_max_threads();
  omp_set_num_threads(4);
#endif
  const auto b = run_gibbs(d, PriorConfig{}, c);
#ifdef _OPENMP
  omp_set_num_threads(saved);
#endif
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    ASSERT_EQ(a.beta[k], b.beta[k]);
    ASSERT_EQ(a.sigma[k], b.sigma[k]);
    for (std::size_t i = 0; i < a.alpha[k].size(); ++i) ASSERT_EQ(a.alpha[k][i], b.alpha[k][i]);
  }
  ChainConfig other = c;
  other.seed = 78;
  EXPECT_NE(run_gibbs(d, PriorConfig{}, other).beta.back(), a.beta.back());
}

TEST(Chain, SigmaStaysPositiveDefinite) {
  const auto d = scalar_gaussian(15, 4, 10);
  const DesignSet wide = gaussian_fixture(11);
  for (const DesignSet* ds : {&d, &wide}) {
    run_gibbs(*ds, PriorConfig{}, short_chain(300, 0), [](int, const SamplerState& s) {
      ASSERT_EQ((s.sigma - s.sigma.transpose()).cwiseAbs().maxCoeff(), 0.0);
      Eigen::LLT<Mat> llt(s.sigma);
      ASSERT_EQ(llt.info(), Eigen::Success);
    });
  }
}

namespace {

/// Analytic posterior of β with α integrated out, given fixed τ² and Σ.
std::pair<double, double> conjugate_beta(const DesignSet& d, double tau2, const Mat& sigma, double sb2) {
  double prec = 1.0 / sb2, rhs = 0.0;
  for (const auto& s : d.subjects) {
    const Mat V = s.Psi * sigma * s.Psi.transpose() + tau2 * Mat::Identity(s.y.size(), s.y.size());
    const Eigen::LLT<Mat> llt(V);
    prec += (s.U.transpose() * llt.solve(s.U))(0, 0);
    rhs += (s.U.transpose() * llt.solve(s.y))(0, 0);
  }
  return {rhs / prec, 1.0 / prec};
}

}  // namespace

TEST(Chain, ConjugateFixtureAndInitializationIndependence) {
  const auto d = scalar_gaussian(1, 8, 12, 2.0);
  ChainConfig c = short_chain(20000, 1000, 13);
  c.fixed_tau2 = Vec::Constant(1, 1.0);
  c.fixed_sigma = Mat::Constant(1, 1, 0.5);
  const auto [mean, var] = conjugate_beta(d, 1.0, *c.fixed_sigma, 100.0);
  std::vector<double> chains[2];
  for (int k = 0; k < 2; ++k) {
    ChainConfig ck = c;
    ck.seed = 13 + static_cast<std::uint64_t>(k);
    GibbsSampler g(d, PriorConfig{}, ck);
    if (k == 1) {
      g.state().beta(0) = 25.0;
      g.state().alpha[0](0) = -10.0;
    }
    const auto draws = g.run();
    for (const auto& b : draws.beta) chains[k].push_back(b(0));
  }
  const double m0 = mean_of(chains[0]), m1 = mean_of(chains[1]);
  const double se0 = batch_means_se(chains[0]), se1 = batch_means_se(chains[1]);
  EXPECT_LT(std::abs(m0 - mean), 3.0 * se0) << "analytic " << mean << " chain " << m0;
  EXPECT_LT(std::abs(m0 - m1), 3.0 * std::hypot(se0, se1));
  double v = 0.0;
  for (double x : chains[0]) v += (x - m0) * (x - m0);
  EXPECT_NEAR(v / static_cast<double>(chains[0].size()), var, 0.1 * var);
}

TEST(PriorConfig, Validation) {
  PriorConfig p;
  p.q1 = 0.0;
  EXPECT_THROW(p.validate(), ConfigError);
  EXPECT_EQ(parse_sigma_mode("block"), SigmaMode::block);
  EXPECT_THROW(parse_sigma_mode("banded"), ConfigError);
  EXPECT_EQ(to_string(SigmaMode::diagonal), "diagonal");
}
