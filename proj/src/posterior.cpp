#include "mixfda/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

namespace mixfda {

double sample_quantile(std::vector<double>& values, double prob) {
  if (values.empty()) throw ConfigError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

CurveSummary summarize_columns(const Mat& values) {
  const Eigen::Index n = values.rows();
  if (n < 2) throw ConfigError("posterior summaries need at least two stored draws");
  CurveSummary c;
  c.mean = values.colwise().mean().transpose();
  const Mat centered = values.rowwise() - c.mean.transpose();
  c.variance = centered.colwise().squaredNorm().transpose() / static_cast<double>(n - 1);
  const Eigen::Index G = values.cols();
  c.median.resize(G);
  c.lower.resize(G);
  c.upper.resize(G);
  std::vector<double> col(static_cast<std::size_t>(n));
  for (Eigen::Index g = 0; g < G; ++g) {
    for (Eigen::Index r = 0; r < n; ++r) col[static_cast<std::size_t>(r)] = values(r, g);
    c.lower(g) = sample_quantile(col, 0.025);
    c.median(g) = sample_quantile(col, 0.5);
    c.upper(g) = sample_quantile(col, 0.975);
  }
  return c;
}

Mat marginal_mean_draws(const PosteriorDraws& draws, const DesignSet& layout, int p, const GridSpec& grid,
                        const ScalingInfo& scaling, const std::map<std::string, double>& covariates) {
  const Eigen::Index G = grid.size();
  const auto n = static_cast<Eigen::Index>(draws.size());
  Mat u(G, layout.fixed_dim()), psi(G, layout.random_dim());
  for (Eigen::Index g = 0; g < G; ++g) {
    u.row(g) = layout.fixed_row(p, grid.points(g), covariates).transpose();
    psi.row(g) = layout.random_effects.row(p, grid.points(g)).transpose();
  }
  const bool binary = layout.kinds[static_cast<std::size_t>(p)] == ResponseKind::binary;
  Mat out(n, G);
  for (Eigen::Index d = 0; d < n; ++d) {
    const Vec lin = u * draws.beta[static_cast<std::size_t>(d)];
    if (!binary) {
      out.row(d) = scaling.of(p) * lin.transpose();
      continue;
    }
    const Mat& sigma = draws.sigma[static_cast<std::size_t>(d)];
    const Vec v = ((psi * sigma).cwiseProduct(psi)).rowwise().sum().array() + 1.0;
    for (Eigen::Index g = 0; g < G; ++g) out(d, g) = normal_cdf(lin(g) / std::sqrt(v(g)));
  }
  return out;
}

PosteriorSummary summarize(const PosteriorDraws& draws, const DesignSet& layout, const GridSpec& grid,
                           const ScalingInfo& scaling, const std::map<std::string, double>& covariates) {
  if (draws.size() < 2) throw ConfigError("posterior summaries need at least two stored draws");
  PosteriorSummary s;
  s.grid = grid;
  for (int p = 0; p < layout.num_responses(); ++p)
    s.curves.push_back(summarize_columns(marginal_mean_draws(draws, layout, p, grid, scaling, covariates)));
  return s;
}

namespace {

std::vector<std::size_t> selected_draws(std::size_t n, int max_draws) {
  std::vector<std::size_t> idx;
  if (max_draws <= 0 || static_cast<std::size_t>(max_draws) >= n) {
    for (std::size_t d = 0; d < n; ++d) idx.push_back(d);
    return idx;
  }
  const auto k = static_cast<std::size_t>(max_draws);
  for (std::size_t j = 0; j < k; ++j) idx.push_back(j * n / k);
  return idx;
}

}  // namespace

PredictionResult predict_heldout(const PosteriorDraws& draws, const DesignSet& layout,
                                 const std::vector<HeldoutQuery>& queries, const ScalingInfo& scaling,
                                 const PredictionConfig& cfg) {
  if (draws.size() == 0) throw ConfigError("prediction needs stored draws");
  if (cfg.refinement_sweeps < 1) throw ConfigError("refinement_sweeps must be positive");
  const int P = layout.num_responses();
  const auto use = selected_draws(draws.size(), cfg.max_draws);
  const auto nd = static_cast<Eigen::Index>(use.size());
  std::vector<std::vector<Prediction>> per_query(queries.size());
  std::exception_ptr first;
  std::size_t first_index = queries.size();

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t qi = 0; qi < static_cast<std::ptrdiff_t>(queries.size()); ++qi) {
    try {
      const HeldoutQuery& q = queries[static_cast<std::size_t>(qi)];
      if (q.target_response < 0 || q.target_response >= P) throw ConfigError("target response out of range");
      if (static_cast<int>(q.observed.by_response.size()) != P)
        throw DimensionError("held-out subject has the wrong number of responses");
      SubjectData scaled = q.observed;
      for (int p = 0; p < P; ++p)
        for (auto& o : scaled.by_response[static_cast<std::size_t>(p)]) o.y /= scaling.of(p);
      if (scaled.total() == 0 && cfg.require_observed) throw DataError("held-out subject '" + q.observed.id + "' observes no response");
      const SubjectDesign sd = build_subject_design(scaled, layout, q.covariates);
      const auto T = static_cast<Eigen::Index>(q.t.size());
      Mat ut(T, layout.fixed_dim()), pt(T, layout.random_dim());
      for (Eigen::Index k = 0; k < T; ++k) {
        ut.row(k) = layout.fixed_row(q.target_response, q.t[static_cast<std::size_t>(k)], q.covariates).transpose();
        pt.row(k) = layout.random_effects.row(q.target_response, q.t[static_cast<std::size_t>(k)]).transpose();
      }
      std::vector<bool> is_binary(static_cast<std::size_t>(sd.y.size()));
      bool any_binary = false;
      for (Eigen::Index r = 0; r < sd.y.size(); ++r) {
        is_binary[static_cast<std::size_t>(r)] =
            layout.kinds[static_cast<std::size_t>(sd.response[static_cast<std::size_t>(r)])] == ResponseKind::binary;
        any_binary = any_binary || is_binary[static_cast<std::size_t>(r)];
      }
      const bool target_binary = layout.kinds[static_cast<std::size_t>(q.target_response)] == ResponseKind::binary;
      Mat values(nd, T);
      Vec alpha = Vec::Zero(layout.random_dim());
      for (Eigen::Index j = 0; j < nd; ++j) {
        const std::size_t d = use[static_cast<std::size_t>(j)];
        Rng rng = substream(cfg.seed, {static_cast<std::uint64_t>(qi), static_cast<std::uint64_t>(d)});
        const Vec& beta = draws.beta[d];
        const Vec& tau2 = draws.tau2[d];
        Eigen::LLT<Mat> sllt(draws.sigma[d]);
        if (sllt.info() != Eigen::Success) throw SingularityError("stored Σ draw is not positive definite");
        const Mat sigma_inv = sllt.solve(Mat::Identity(layout.random_dim(), layout.random_dim()));
        Vec wts(sd.y.size());
        for (Eigen::Index r = 0; r < wts.size(); ++r) wts(r) = 1.0 / tau2(sd.response[static_cast<std::size_t>(r)]);
        const Mat prec = sigma_inv + sd.Psi.transpose() * wts.asDiagonal() * sd.Psi;
        const Vec fixed = sd.U * beta;
        Vec w = sd.y;
        const int sweeps = any_binary ? cfg.refinement_sweeps : 1;
        for (int it = 0; it < sweeps; ++it) {
          if (any_binary) {
            const Vec lin = fixed + sd.Psi * alpha;
            for (Eigen::Index r = 0; r < w.size(); ++r) {
              if (!is_binary[static_cast<std::size_t>(r)]) continue;
              w(r) = sample_truncated_normal(lin(r), 1.0, sd.y(r) > 0.5 ? Side::positive : Side::negative, rng);
            }
          }
          alpha = sample_gaussian_canonical(prec, sd.Psi.transpose() * (w - fixed).cwiseProduct(wts), rng);
        }
        const Vec eta = ut * beta + pt * alpha;
        for (Eigen::Index k = 0; k < T; ++k)
          values(j, k) = target_binary ? normal_cdf(eta(k)) : scaling.of(q.target_response) * eta(k);
      }
      auto& out = per_query[static_cast<std::size_t>(qi)];
      std::vector<double> col(static_cast<std::size_t>(nd));
      for (Eigen::Index k = 0; k < T; ++k) {
        Prediction pr;
        pr.subject = q.observed.id;
        pr.response = q.target_response;
        pr.t = q.t[static_cast<std::size_t>(k)];
        pr.value = values.col(k).mean();
        for (Eigen::Index j = 0; j < nd; ++j) col[static_cast<std::size_t>(j)] = values(j, k);
        pr.lower = sample_quantile(col, 0.025);
        pr.upper = sample_quantile(col, 0.975);
        out.push_back(pr);
      }
    } catch (...) {
#pragma omp critical(mixfda_predict_error)
      {
        if (static_cast<std::size_t>(qi) < first_index) {
          first_index = static_cast<std::size_t>(qi);
          first = std::current_exception();
        }
      }
    }
  }
  if (first) std::rethrow_exception(first);
  PredictionResult res;
  for (auto& v : per_query) res.points.insert(res.points.end(), v.begin(), v.end());
  return res;
}

double integrate(const GridSpec& grid, const Vec& values) {
  if (values.size() != grid.size()) throw DimensionError("values do not match the grid");
  const Eigen::Index G = values.size();
  return grid.spacing * (values.sum() - 0.5 * (values(0) + values(G - 1)));
}

double compute_mise(const std::vector<Vec>& estimates, const std::vector<Vec>& truths, const GridSpec& grid) {
  if (estimates.empty() || estimates.size() != truths.size()) throw DimensionError("MISE needs matching replications");
  double total = 0.0;
  for (std::size_t r = 0; r < estimates.size(); ++r) {
    if (estimates[r].size() != grid.size() || truths[r].size() != grid.size())
      throw DimensionError("MISE inputs are not on the grid");
    total += integrate(grid, (estimates[r] - truths[r]).array().square().matrix());
  }
  return total / static_cast<double>(estimates.size());
}

CoverageReport compute_coverage_and_length(const std::vector<Vec>& estimates, const std::vector<Vec>& variances,
                                           const std::vector<Vec>& truths) {
  if (estimates.empty() || estimates.size() != variances.size() || estimates.size() != truths.size())
    throw DimensionError("coverage needs matching replications");
  double hits = 0.0, length = 0.0, count = 0.0;
  for (std::size_t r = 0; r < estimates.size(); ++r) {
    const Eigen::Index G = estimates[r].size();
    if (variances[r].size() != G || truths[r].size() != G) throw DimensionError("coverage inputs differ in length");
    for (Eigen::Index g = 0; g < G; ++g) {
      const double l = 1.96 * std::sqrt(std::max(variances[r](g), 0.0));
      if (std::abs(estimates[r](g) - truths[r](g)) <= l) hits += 1.0;
      length += 2.0 * l;
      count += 1.0;
    }
  }
  return {100.0 * hits / count, length / count};
}

double compute_mspe(const std::vector<double>& predictions, const std::vector<double>& observed) {
  if (predictions.size() != observed.size()) throw DataError("a prediction is missing for some held-out point");
  if (predictions.empty()) throw DataError("no held-out points");
  double s = 0.0;
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    const double e = observed[k] - predictions[k];
    s += e * e;
  }
  return s / static_cast<double>(predictions.size());
}

double deviance(const DesignSet& designs, const Vec& beta, const std::vector<Vec>& alpha, const Vec& tau2,
                const ScalingInfo& scaling) {
  constexpr double log_2pi = 1.8378770664093454836;
  if (alpha.size() != designs.subjects.size()) throw DimensionError("one α per subject is required");
  double ll = 0.0;
  for (std::size_t i = 0; i < designs.subjects.size(); ++i) {
    const auto& s = designs.subjects[i];
    if (s.y.size() == 0) continue;
    const Vec eta = s.U * beta + s.Psi * alpha[i];
    for (Eigen::Index r = 0; r < eta.size(); ++r) {
      const int p = s.response[static_cast<std::size_t>(r)];
      if (designs.kinds[static_cast<std::size_t>(p)] == ResponseKind::binary) {
        ll += s.y(r) > 0.5 ? log_normal_cdf(eta(r)) : log_normal_cdf(-eta(r));
      } else {
        const double e = s.y(r) - eta(r);
        ll += -0.5 * (log_2pi + std::log(tau2(p)) + e * e / tau2(p)) - std::log(scaling.of(p));
      }
    }
  }
  return -2.0 * ll;
}

DicAccumulator::DicAccumulator(const DesignSet& designs, const ScalingInfo& scaling)
    : designs_(&designs),
      scaling_(scaling),
      beta_sum_(Vec::Zero(designs.fixed_dim())),
      tau2_sum_(Vec::Zero(designs.num_responses())),
      alpha_sum_(designs.subjects.size(), Vec::Zero(designs.random_dim())) {}

void DicAccumulator::add(const SamplerState& s) {
  dsum_ += deviance(*designs_, s.beta, s.alpha, s.tau2, scaling_);
  beta_sum_ += s.beta;
  tau2_sum_ += s.tau2;
  for (std::size_t i = 0; i < alpha_sum_.size(); ++i) alpha_sum_[i] += s.alpha[i];
  ++n_;
}

DicReport DicAccumulator::finish() const {
  if (n_ == 0) throw ConfigError("DIC needs at least one stored draw");
  const double n = static_cast<double>(n_);
  std::vector<Vec> alpha(alpha_sum_.size());
  for (std::size_t i = 0; i < alpha.size(); ++i) alpha[i] = alpha_sum_[i] / n;
  DicReport r;
  r.Dbar = dsum_ / n;
  r.D_at_mean = deviance(*designs_, beta_sum_ / n, alpha, tau2_sum_ / n, scaling_);
  r.pD = r.Dbar - r.D_at_mean;
  r.DIC = r.Dbar + r.pD;
  return r;
}

DicReport compute_dic(const PosteriorDraws& draws, const DesignSet& designs, const ScalingInfo& scaling) {
  if (!draws.has_alpha())
    throw ConfigError("DIC needs stored random effects; re-run with chain.store_alpha = true");
  const std::size_t n = draws.size();
  double dbar = 0.0;
  std::vector<Vec> alpha_mean(designs.subjects.size(), Vec::Zero(designs.random_dim()));
  for (std::size_t d = 0; d < n; ++d) {
    dbar += deviance(designs, draws.beta[d], draws.alpha[d], draws.tau2[d], scaling);
    for (std::size_t i = 0; i < alpha_mean.size(); ++i) alpha_mean[i] += draws.alpha[d][i];
  }
  dbar /= static_cast<double>(n);
  for (auto& a : alpha_mean) a /= static_cast<double>(n);
  DicReport r;
  r.Dbar = dbar;
  r.D_at_mean = deviance(designs, draws.beta_mean(), alpha_mean, draws.tau2_mean(), scaling);
  r.pD = r.Dbar - r.D_at_mean;
  r.DIC = r.Dbar + r.pD;
  return r;
}

}  // namespace mixfda
