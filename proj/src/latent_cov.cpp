#include "mixfda/latent_cov.hpp"

#include <algorithm>

#include "mixfda/distributions.hpp"
#include "mixfda/log.hpp"

namespace mixfda {

Mat LatentCovarianceEstimate::assembled() const {
  const Eigen::Index G = grid.size();
  Mat out(P * G, P * G);
  for (int p = 0; p < P; ++p)
    for (int q = 0; q < P; ++q) out.block(p * G, q * G, G, G) = block(p, q);
  return out;
}

namespace {

using Acc = SurfaceAccumulator<double>;

/// Accumulates same-subject products f(Y_p(t)) g(Y_q(s)) with t != s.
template <typename F, typename G>
Acc accumulate_pairs(const FunctionalDataset& d, int p, int q, const SmootherConfig& cfg, F&& left, G&& right) {
  const auto [lo, hi] = d.domain();
  Acc acc(lo, hi, cfg);
  std::vector<Acc::Local> lp, lq;
  std::vector<double> vp, vq;
  for (const auto& s : d.subjects()) {
    const auto& op = s.by_response[static_cast<std::size_t>(p)];
    const auto& oq = s.by_response[static_cast<std::size_t>(q)];
    if (op.empty() || oq.empty()) continue;
    lp.clear();
    lq.clear();
    vp.clear();
    vq.clear();
    for (const auto& o : op) {
      lp.push_back(acc.local(o.t));
      vp.push_back(left(o));
    }
    for (const auto& o : oq) {
      lq.push_back(acc.local(o.t));
      vq.push_back(right(o));
    }
    for (std::size_t a = 0; a < op.size(); ++a) {
      for (std::size_t b = 0; b < oq.size(); ++b) {
        if (op[a].t == oq[b].t) continue;
        acc.add(lp[a], lq[b], vp[a] * vq[b]);
      }
    }
  }
  if (!(acc.count() > 0.0))
    throw DataError("no off-diagonal same-subject pairs for responses " + std::to_string(p + 1) + "," +
                    std::to_string(q + 1));
  return acc;
}

double link_slope(ResponseKind k, double mu) { return k == ResponseKind::binary ? normal_pdf(mu) : 1.0; }

}  // namespace

MomentEstimates estimate_moments(const FunctionalDataset& d, const LatentCovConfig& cfg, bool second_moments) {
  const auto [lo, hi] = d.domain();
  MomentEstimates m;
  m.grid = GridSpec(lo, hi, cfg.grid_points);
  m.kinds = d.kinds();
  const int P = d.num_responses();
  for (int p = 0; p < P; ++p) {
    CurveAccumulator<double> acc(lo, hi, cfg.smoother);
    for (const auto& s : d.subjects())
      for (const auto& o : s.by_response[static_cast<std::size_t>(p)]) acc.add(o.t, o.y);
    m.eta_fit.push_back(acc.fit(cfg.smoother));
    Vec eta = m.eta_fit.back().on(m.grid.points);
    Vec mu = eta;
    if (d.kind(p) == ResponseKind::binary) {
      for (Eigen::Index g = 0; g < eta.size(); ++g) {
        const double c = std::clamp(eta(g), cfg.clamp, 1.0 - cfg.clamp);
        if (c != eta(g)) m.clamped = true;
        eta(g) = c;
        mu(g) = normal_quantile(c);
      }
    }
    m.eta.push_back(std::move(eta));
    m.mu.push_back(std::move(mu));
  }
  if (m.clamped) log::warn("binary mean estimate clamped into [" + std::to_string(cfg.clamp) + ", " +
                           std::to_string(1.0 - cfg.clamp) + "]");
  for (int p = 0; p < P && second_moments; ++p) {
    for (int q = p; q < P; ++q) {
      if (d.kind(p) == ResponseKind::gaussian && d.kind(q) == ResponseKind::gaussian) continue;
      auto y = [](const Observation& o) { return o.y; };
      const Acc acc = accumulate_pairs(d, p, q, cfg.smoother, y, y);
      m.second[{p, q}] = acc.fit(cfg.smoother, p == q).on(m.grid.points);
    }
  }
  return m;
}

Mat binary_auto_covariance(const MomentEstimates& m, int p) {
  if (m.kinds[static_cast<std::size_t>(p)] != ResponseKind::binary)
    throw ConfigError("binary_auto_covariance on a Gaussian response");
  return cross_covariance(m, p, p);
}

Mat cross_covariance(const MomentEstimates& m, int p, int q) {
  auto it = m.second.find({p, q});
  if (it == m.second.end()) throw DimensionError("second-moment surface missing for this response pair");
  const Vec& ep = m.eta[static_cast<std::size_t>(p)];
  const Vec& eq = m.eta[static_cast<std::size_t>(q)];
  const Eigen::Index G = ep.size();
  Vec dp(G), dq(G);
  for (Eigen::Index g = 0; g < G; ++g) {
    dp(g) = link_slope(m.kinds[static_cast<std::size_t>(p)], m.mu[static_cast<std::size_t>(p)](g));
    dq(g) = link_slope(m.kinds[static_cast<std::size_t>(q)], m.mu[static_cast<std::size_t>(q)](g));
  }
  Mat k = (it->second - ep * eq.transpose()).array() / (dp * dq.transpose()).array();
  if (p == q) k = 0.5 * (k + k.transpose()).eval();
  return k;
}

Mat gaussian_covariance(const FunctionalDataset& d, const MomentEstimates& m, int p, int q,
                        const LatentCovConfig& cfg) {
  if (d.kind(p) != ResponseKind::gaussian || d.kind(q) != ResponseKind::gaussian)
    throw ConfigError("gaussian_covariance needs two Gaussian responses");
  const auto& fp = m.eta_fit[static_cast<std::size_t>(p)];
  const auto& fq = m.eta_fit[static_cast<std::size_t>(q)];
  const Acc acc = accumulate_pairs(
      d, p, q, cfg.smoother, [&](const Observation& o) { return o.y - fp(o.t); },
      [&](const Observation& o) { return o.y - fq(o.t); });
  return acc.fit(cfg.smoother, p == q).on(m.grid.points);
}

LatentCovarianceEstimate assemble(const GridSpec& grid, int P, const std::map<std::pair<int, int>, Mat>& upper) {
  LatentCovarianceEstimate out;
  out.grid = grid;
  out.P = P;
  out.blocks.resize(static_cast<std::size_t>(P * P));
  const Eigen::Index G = grid.size();
  for (int p = 0; p < P; ++p) {
    for (int q = p; q < P; ++q) {
      auto it = upper.find({p, q});
      if (it == upper.end()) throw DimensionError("covariance block missing");
      if (it->second.rows() != G || it->second.cols() != G) throw DimensionError("covariance block not on the grid");
      Mat b = it->second;
      if (p == q) b = 0.5 * (b + b.transpose()).eval();
      out.blocks[static_cast<std::size_t>(q * P + p)] = b.transpose();
      out.blocks[static_cast<std::size_t>(p * P + q)] = std::move(b);
    }
  }
  return out;
}

LatentCovarianceEstimate estimate_latent_covariance(const FunctionalDataset& d, const LatentCovConfig& cfg,
                                                    const FunctionalDataset* residuals) {
  const int P = d.num_responses();
  std::map<std::pair<int, int>, Mat> upper;
  if (residuals != nullptr) {
    if (residuals->num_responses() != P) throw DimensionError("residual dataset has a different response count");
    const MomentEstimates raw = estimate_moments(d, cfg, false);
    const MomentEstimates res = estimate_moments(*residuals, cfg, false);
    const Eigen::Index G = raw.grid.size();
    std::vector<Vec> slope(static_cast<std::size_t>(P), Vec::Ones(G));
    for (int p = 0; p < P; ++p)
      if (d.kind(p) == ResponseKind::binary)
        for (Eigen::Index g = 0; g < G; ++g) slope[static_cast<std::size_t>(p)](g) = normal_pdf(raw.mu[static_cast<std::size_t>(p)](g));
    for (int p = 0; p < P; ++p)
      for (int q = p; q < P; ++q) {
        const Mat num = gaussian_covariance(*residuals, res, p, q, cfg);
        upper[{p, q}] =
            num.array() / (slope[static_cast<std::size_t>(p)] * slope[static_cast<std::size_t>(q)].transpose()).array();
      }
    return assemble(raw.grid, P, upper);
  }
  const MomentEstimates m = estimate_moments(d, cfg);
  for (int p = 0; p < P; ++p) {
    for (int q = p; q < P; ++q) {
      if (d.kind(p) == ResponseKind::gaussian && d.kind(q) == ResponseKind::gaussian)
        upper[{p, q}] = gaussian_covariance(d, m, p, q, cfg);
      else
        upper[{p, q}] = cross_covariance(m, p, q);
    }
  }
  return assemble(m.grid, P, upper);
}

namespace {

/// Probit regression by Fisher scoring.
Vec fit_probit(const std::vector<std::pair<Vec, double>>& rows, Eigen::Index k) {
  Vec b = Vec::Zero(k);
  for (int it = 0; it < 50; ++it) {
    Mat info = Mat::Zero(k, k);
    Vec score = Vec::Zero(k);
    for (const auto& [x, y] : rows) {
      const double eta = x.dot(b);
      const double p = std::clamp(normal_cdf(eta), 1e-10, 1.0 - 1e-10);
      const double f = normal_pdf(eta);
      score += x * (f * (y - p) / (p * (1.0 - p)));
      info += x * x.transpose() * (f * f / (p * (1.0 - p)));
    }
    const Vec step = info.ldlt().solve(score);
    b += step;
    if (step.lpNorm<Eigen::Infinity>() < 1e-10) break;
  }
  return b;
}

}  // namespace

FunctionalDataset residualize(const FunctionalDataset& d, ResidualMode mode, const SubjectCovariates& covariates,
                              const std::vector<std::string>& covariate_names) {
  std::vector<SubjectData> subjects = d.subjects();
  const int P = d.num_responses();
  const auto k = static_cast<Eigen::Index>(covariate_names.size() + 1);
  auto row_of = [&](const SubjectData& s) {
    Vec x(k);
    x(0) = 1.0;
    auto it = covariates.find(s.id);
    if (it == covariates.end()) throw DataError("no covariates for subject '" + s.id + "'");
    for (std::size_t c = 0; c < covariate_names.size(); ++c) {
      auto jt = it->second.find(covariate_names[c]);
      if (jt == it->second.end()) throw DataError("missing covariate '" + covariate_names[c] + "' for subject '" + s.id + "'");
      x(static_cast<Eigen::Index>(c) + 1) = jt->second;
    }
    return x;
  };
  for (int p = 0; p < P && mode != ResidualMode::none; ++p) {
    const auto pi = static_cast<std::size_t>(p);
    if (mode == ResidualMode::subject_mean) {
      if (d.kind(p) != ResponseKind::gaussian) continue;
      for (auto& s : subjects) {
        auto& obs = s.by_response[pi];
        if (obs.empty()) continue;
        double mean = 0.0;
        for (const auto& o : obs) mean += o.y;
        mean /= static_cast<double>(obs.size());
        for (auto& o : obs) o.y -= mean;
      }
      continue;
    }
    std::vector<std::pair<Vec, double>> rows;
    for (const auto& s : subjects) {
      if (s.by_response[pi].empty()) continue;
      const Vec x = row_of(s);
      for (const auto& o : s.by_response[pi]) rows.emplace_back(x, o.y);
    }
    if (rows.empty()) continue;
    Vec b;
    if (d.kind(p) == ResponseKind::gaussian) {
      Mat xtx = Mat::Zero(k, k);
      Vec xty = Vec::Zero(k);
      for (const auto& [x, y] : rows) {
        xtx += x * x.transpose();
        xty += x * y;
      }
      b = xtx.ldlt().solve(xty);
    } else {
      b = fit_probit(rows, k);
    }
    for (auto& s : subjects) {
      auto& obs = s.by_response[pi];
      if (obs.empty()) continue;
      const double lin = row_of(s).dot(b);
      const double fitted = d.kind(p) == ResponseKind::gaussian ? lin : normal_cdf(lin);
      for (auto& o : obs) o.y -= fitted;
    }
  }
  return FunctionalDataset(std::vector<ResponseKind>(static_cast<std::size_t>(P), ResponseKind::gaussian),
                           std::move(subjects), d.domain());
}

}  // namespace mixfda
