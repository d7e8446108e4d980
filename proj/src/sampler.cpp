#include "mixfda/sampler.hpp"

#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mixfda {

std::string to_string(SigmaMode m) {
  switch (m) {
    case SigmaMode::full: return "full";
    case SigmaMode::diagonal: return "diagonal";
    case SigmaMode::block: return "block";
  }
  return "unknown";
}

SigmaMode parse_sigma_mode(const std::string& s) {
  if (s == "full") return SigmaMode::full;
  if (s == "diagonal") return SigmaMode::diagonal;
  if (s == "block") return SigmaMode::block;
  throw ConfigError("unknown sigma prior mode '" + s + "' (expected full, diagonal or block)");
}

void PriorConfig::validate() const {
  if (!(sigma_beta2 > 0.0 && q1 > 0.0 && q2 > 0.0 && l > 0.0 && h > 0.0))
    throw ConfigError("prior hyperparameters must be positive");
  if (block_size < 0) throw ConfigError("block size must be non-negative");
}

void ChainConfig::validate() const {
  if (n_iter < 1) throw ConfigError("n_iter must be positive");
  if (burn_in < 0 || burn_in >= n_iter) throw ConfigError("burn_in must lie in [0, n_iter)");
  if (thin < 1) throw ConfigError("thin must be at least 1");
  if (stored_count() < 1) throw ConfigError("chain stores no post-burn-in draws");
}

Vec PosteriorDraws::beta_mean() const {
  if (beta.empty()) throw ConfigError("no stored draws");
  Vec m = Vec::Zero(beta.front().size());
  for (const auto& b : beta) m += b;
  return m / static_cast<double>(beta.size());
}

Vec PosteriorDraws::tau2_mean() const {
  if (tau2.empty()) throw ConfigError("no stored draws");
  Vec m = Vec::Zero(tau2.front().size());
  for (const auto& t : tau2) m += t;
  return m / static_cast<double>(tau2.size());
}

Mat PosteriorDraws::sigma_mean() const {
  if (sigma.empty()) throw ConfigError("no stored draws");
  Mat m = Mat::Zero(sigma.front().rows(), sigma.front().cols());
  for (const auto& s : sigma) m += s;
  return m / static_cast<double>(sigma.size());
}

namespace {

/// Runs body(i) for i in [0, n) across threads and rethrows the first error
/// (lowest index) afterwards.
template <typename F>
void parallel_subjects(std::size_t n, F&& body) {
  std::exception_ptr first;
  std::size_t first_index = n;
  std::mutex mu;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(n); ++k) {
    try {
      body(static_cast<std::size_t>(k));
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu);
      if (static_cast<std::size_t>(k) < first_index) {
        first_index = static_cast<std::size_t>(k);
        first = std::current_exception();
      }
    }
  }
  if (first) std::rethrow_exception(first);
}

Mat invert_spd(const Mat& a, const char* what) {
  Eigen::LLT<Mat> llt(a);
  if (llt.info() != Eigen::Success) throw SingularityError(std::string(what) + " is not positive definite");
  Mat inv = llt.solve(Mat::Identity(a.rows(), a.cols()));
  return 0.5 * (inv + inv.transpose());
}

}  // namespace

GibbsSampler::GibbsSampler(DesignSet designs, PriorConfig prior, ChainConfig chain)
    : d_(std::move(designs)), prior_(prior), chain_(std::move(chain)) {
  prior_.validate();
  chain_.validate();
  const int P = d_.num_responses();
  const int J = d_.fixed_dim();
  const int m = d_.random_dim();
  if (prior_.sigma_mode == SigmaMode::block && (prior_.block_size < 1 || prior_.block_size > m))
    throw ConfigError("block sigma mode needs 1 <= block size <= number of random effects");
  if (!chain_.fixed_sigma && prior_.sigma_mode != SigmaMode::diagonal) {
    const int b = prior_.sigma_mode == SigmaMode::full ? m : prior_.block_size;
    const double df = static_cast<double>(d_.subjects.size()) + prior_.q1;
    if (df <= b - 1)
      throw ConfigError("inverse-Wishart update on " + std::to_string(b) + " random effects needs subjects + q1 > " +
                        std::to_string(b - 1) + "; use more subjects or sigma_prior \"diagonal\"");
  }
  if (chain_.fixed_tau2 && chain_.fixed_tau2->size() != P) throw DimensionError("fixed τ² has the wrong length");
  if (chain_.fixed_sigma && (chain_.fixed_sigma->rows() != m || chain_.fixed_sigma->cols() != m))
    throw DimensionError("fixed Σ has the wrong dimension");
  utu_total_.assign(static_cast<std::size_t>(P), Mat::Zero(J, J));
  for (const auto& s : d_.subjects) {
    std::vector<Mat> u(static_cast<std::size_t>(P)), psi(static_cast<std::size_t>(P));
    for (int p = 0; p < P; ++p) {
      const auto pi = static_cast<std::size_t>(p);
      const Eigen::Index a = s.response_start[pi];
      const Eigen::Index n = s.response_start[pi + 1] - a;
      u[pi] = s.U.middleRows(a, n).transpose() * s.U.middleRows(a, n);
      psi[pi] = s.Psi.middleRows(a, n).transpose() * s.Psi.middleRows(a, n);
      utu_total_[pi] += u[pi];
    }
    utu_.push_back(std::move(u));
    psitpsi_.push_back(std::move(psi));
  }
  initialize();
}

void GibbsSampler::initialize() {
  const int P = d_.num_responses();
  const int m = d_.random_dim();
  state_.beta = Vec::Zero(d_.fixed_dim());
  state_.alpha.assign(d_.subjects.size(), Vec::Zero(m));
  state_.sigma = chain_.fixed_sigma ? *chain_.fixed_sigma : Mat::Identity(m, m);
  state_.tau2 = Vec::Ones(P);
  if (chain_.fixed_tau2) state_.tau2 = *chain_.fixed_tau2;
  for (int p = 0; p < P; ++p)
    if (d_.kinds[static_cast<std::size_t>(p)] == ResponseKind::binary) state_.tau2(p) = 1.0;
  state_.w.clear();
  for (const auto& s : d_.subjects) {
    Vec w = s.y;
    for (Eigen::Index r = 0; r < w.size(); ++r)
      if (d_.kinds[static_cast<std::size_t>(s.response[static_cast<std::size_t>(r)])] == ResponseKind::binary)
        w(r) = s.y(r) > 0.5 ? 0.5 : -0.5;
    state_.w.push_back(std::move(w));
  }
  sigma_inv_ = invert_spd(state_.sigma, "Σ");
}

Rng GibbsSampler::stream(int iter, Step s, std::uint64_t subject) const {
  return substream(chain_.seed, {static_cast<std::uint64_t>(iter), static_cast<std::uint64_t>(s), subject});
}

Vec GibbsSampler::row_weights(std::size_t i) const {
  const auto& s = d_.subjects[i];
  Vec w(s.y.size());
  for (Eigen::Index r = 0; r < w.size(); ++r) w(r) = 1.0 / state_.tau2(s.response[static_cast<std::size_t>(r)]);
  return w;
}

void GibbsSampler::update_latent_w(int iter) {
  parallel_subjects(d_.subjects.size(), [&](std::size_t i) {
    const auto& s = d_.subjects[i];
    Rng rng = stream(iter, step_w, i);
    Vec& w = state_.w[i];
    for (Eigen::Index r = 0; r < w.size(); ++r) {
      if (d_.kinds[static_cast<std::size_t>(s.response[static_cast<std::size_t>(r)])] != ResponseKind::binary) continue;
      const double mean = s.U.row(r).dot(state_.beta) + s.Psi.row(r).dot(state_.alpha[i]);
      w(r) = sample_truncated_normal(mean, 1.0, s.y(r) > 0.5 ? Side::positive : Side::negative, rng);
    }
  });
}

Mat GibbsSampler::beta_precision() const {
  const int J = d_.fixed_dim();
  Mat a = Mat::Identity(J, J) / prior_.sigma_beta2;
  for (std::size_t p = 0; p < utu_total_.size(); ++p) a += utu_total_[p] / state_.tau2(static_cast<Eigen::Index>(p));
  return a;
}

Vec GibbsSampler::beta_rhs() const {
  Vec b = Vec::Zero(d_.fixed_dim());
  for (std::size_t i = 0; i < d_.subjects.size(); ++i) {
    const auto& s = d_.subjects[i];
    if (s.y.size() == 0) continue;
    const Vec r = (state_.w[i] - s.Psi * state_.alpha[i]).cwiseProduct(row_weights(i));
    b.noalias() += s.U.transpose() * r;
  }
  return b;
}

GaussianConditional GibbsSampler::beta_conditional() const {
  const Mat cov = invert_spd(beta_precision(), "β conditional precision");
  return {cov * beta_rhs(), cov};
}

void GibbsSampler::update_beta(int iter) {
  Rng rng = stream(iter, step_beta);
  state_.beta = sample_gaussian_canonical(beta_precision(), beta_rhs(), rng);
}

Mat GibbsSampler::alpha_precision(std::size_t i, const Mat& sigma_inv) const {
  Mat a = sigma_inv;
  for (std::size_t p = 0; p < psitpsi_[i].size(); ++p)
    a += psitpsi_[i][p] / state_.tau2(static_cast<Eigen::Index>(p));
  return a;
}

Vec GibbsSampler::alpha_rhs(std::size_t i) const {
  const auto& s = d_.subjects[i];
  if (s.y.size() == 0) return Vec::Zero(d_.random_dim());
  const Vec r = (state_.w[i] - s.U * state_.beta).cwiseProduct(row_weights(i));
  return s.Psi.transpose() * r;
}

GaussianConditional GibbsSampler::alpha_conditional(std::size_t i) const {
  const Mat cov = invert_spd(alpha_precision(i, sigma_inv_), "α conditional precision");
  return {cov * alpha_rhs(i), cov};
}

void GibbsSampler::update_alpha(int iter) {
  parallel_subjects(d_.subjects.size(), [&](std::size_t i) {
    Rng rng = stream(iter, step_alpha, i);
    state_.alpha[i] = sample_gaussian_canonical(alpha_precision(i, sigma_inv_), alpha_rhs(i), rng);
  });
}

void GibbsSampler::update_sigma(int iter) {
  if (chain_.fixed_sigma) return;
  Rng rng = stream(iter, step_sigma);
  const int m = d_.random_dim();
  const double N = static_cast<double>(d_.subjects.size());
  Mat S = Mat::Zero(m, m);
  for (const auto& a : state_.alpha) S.noalias() += a * a.transpose();
  Mat sigma = Mat::Zero(m, m);
  int first_diag = 0;
  if (prior_.sigma_mode == SigmaMode::full || prior_.sigma_mode == SigmaMode::block) {
    const int b = prior_.sigma_mode == SigmaMode::full ? m : prior_.block_size;
    const Mat scale_inv = S.topLeftCorner(b, b) + Mat::Identity(b, b) / prior_.q2;
    sigma.topLeftCorner(b, b) =
        sample_inverse_wishart_via_precision(invert_spd(scale_inv, "Wishart scale"), N + prior_.q1, rng);
    first_diag = b;
  }
  for (int k = first_diag; k < m; ++k)
    sigma(k, k) = sample_inverse_gamma(0.5 * (N + prior_.q1), 0.5 * (S(k, k) + 1.0 / prior_.q2), rng);
  state_.sigma = std::move(sigma);
  sigma_inv_ = invert_spd(state_.sigma, "Σ");
}

void GibbsSampler::update_tau(int iter) {
  if (chain_.fixed_tau2) return;
  const int P = d_.num_responses();
  Vec rss = Vec::Zero(P);
  Vec n = Vec::Zero(P);
  for (std::size_t i = 0; i < d_.subjects.size(); ++i) {
    const auto& s = d_.subjects[i];
    if (s.y.size() == 0) continue;
    const Vec r = state_.w[i] - s.U * state_.beta - s.Psi * state_.alpha[i];
    for (Eigen::Index k = 0; k < r.size(); ++k) {
      const int p = s.response[static_cast<std::size_t>(k)];
      rss(p) += r(k) * r(k);
      n(p) += 1.0;
    }
  }
  for (int p = 0; p < P; ++p) {
    if (d_.kinds[static_cast<std::size_t>(p)] == ResponseKind::binary) continue;
    Rng rng = stream(iter, step_tau, static_cast<std::uint64_t>(p));
    state_.tau2(p) = sample_inverse_gamma(0.5 * n(p) + prior_.l, prior_.h + 0.5 * rss(p), rng);
  }
}

void GibbsSampler::sweep(int iter) {
  update_latent_w(iter);
  update_beta(iter);
  update_alpha(iter);
  update_sigma(iter);
  update_tau(iter);
}

PosteriorDraws GibbsSampler::run(const Observer& observer) {
  PosteriorDraws out;
  out.seed = chain_.seed;
  const auto n = static_cast<std::size_t>(chain_.stored_count());
  out.iteration.reserve(n);
  out.beta.reserve(n);
  out.sigma.reserve(n);
  out.tau2.reserve(n);
  if (chain_.store_alpha) out.alpha.reserve(n);
  for (int it = 0; it < chain_.n_iter; ++it) {
    try {
      sweep(it);
    } catch (const NumericalError& e) {
      throw NumericalError("Gibbs iteration " + std::to_string(it) + ": " + e.what());
    }
    if (!chain_.stores(it)) continue;
    out.iteration.push_back(it);
    out.beta.push_back(state_.beta);
    out.sigma.push_back(state_.sigma);
    out.tau2.push_back(state_.tau2);
    if (chain_.store_alpha) out.alpha.push_back(state_.alpha);
    if (observer) observer(it, state_);
  }
  return out;
}

PosteriorDraws run_gibbs(const DesignSet& designs, const PriorConfig& prior, const ChainConfig& chain,
                         const GibbsSampler::Observer& observer) {
  GibbsSampler s(designs, prior, chain);
  return s.run(observer);
}

}  // namespace mixfda
