#include "mixfda/simulator.hpp"

#include <cmath>
#include <exception>

#include "mixfda/log.hpp"

namespace mixfda {

void SimulationConfig::validate() const {
  if (subjects < 1 || locations < 2 || components < 1) throw ConfigError("simulation sizes must be positive");
  if (!(std::abs(rho_a) < 1.0)) throw ConfigError("|rho_a| must be below 1");
  if (!(std::abs(rho) < 1.0)) throw ConfigError("|rho| must be below 1");
  if (!(tau2 >= 0.0) || !(tau2_second >= 0.0)) throw ConfigError("noise variances must be non-negative");
  if (!(sigma_scale >= 0.0)) throw ConfigError("sigma_scale must be non-negative");
  if (!(intercept_var >= 0.0) || !(std::abs(intercept_corr) < 1.0))
    throw ConfigError("intercept variance must be non-negative and |intercept_corr| < 1");
  if (beta1.size() != 3 || beta2.size() != 3) throw ConfigError("simulation mean coefficients must have length 3");
  if (!(upper > lower)) throw ConfigError("simulation domain is empty");
  if (heldout < 0) throw ConfigError("heldout must be non-negative");
}

Mat build_sigma(const SimulationConfig& cfg) {
  cfg.validate();
  const int M = cfg.components;
  Mat A(2, 2);
  A << 1.0, cfg.rho_a, cfg.rho_a, 1.0;
  Mat C(M, M);
  for (int k = 0; k < M; ++k)
    for (int l = 0; l < M; ++l) C(k, l) = std::pow(cfg.rho, std::abs(k - l));
  Mat S(2 * M, 2 * M);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) S.block(a * M, b * M, M, M) = A(a, b) * C;
  return cfg.sigma_scale * S;
}

double sim_mean(const SimulationConfig& cfg, int p, double t) {
  const auto& b = p == 0 ? cfg.beta1 : cfg.beta2;
  return b[0] + b[1] * t + b[2] * t * t;
}

Vec sim_deviation_row(const SimulationConfig& cfg, int p, double t) {
  Vec row(cfg.components);
  for (int k = 1; k <= cfg.components; ++k) row(k - 1) = sim_basis<double>(k, cfg.components, t, p + 1);
  return row;
}

TruthSpec make_truth(const SimulationConfig& cfg, const GridSpec& grid) {
  TruthSpec truth;
  truth.grid = grid;
  truth.sigma = build_sigma(cfg);
  const int M = cfg.components;
  const Mat s22 = truth.sigma.block(M, M, M, M);
  for (int p = 0; p < 2; ++p) {
    Vec w(grid.size());
    for (Eigen::Index g = 0; g < grid.size(); ++g) {
      const double t = grid.points(g);
      const double mu = sim_mean(cfg, p, t);
      if (p == 1 && cfg.second == ResponseKind::binary) {
        const Vec psi = sim_deviation_row(cfg, 1, t);
        const double v2 = psi.dot(s22 * psi) + cfg.intercept_var + 1.0;
        w(g) = normal_cdf(mu / std::sqrt(v2));
      } else {
        w(g) = mu;
      }
    }
    truth.omega.push_back(std::move(w));
  }
  return truth;
}

namespace {

/// Lower Cholesky-type factor that tolerates a zero (or PSD) matrix.
Mat factor(const Mat& s) {
  if (s.isZero(0.0)) return Mat::Zero(s.rows(), s.cols());
  Eigen::LLT<Mat> llt(s);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Mat> es(s);
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

struct SubjectDraw {
  SubjectData data;
  Vec alpha;
  Vec intercept;
};

SubjectDraw draw_subject(const SimulationConfig& cfg, const Mat& lsig, const Mat& lint, const Vec& t,
                         const std::string& id, Rng& rng) {
  const int M = cfg.components;
  SubjectDraw s;
  s.data.id = id;
  s.data.by_response.resize(2);
  Vec z(2 * M);
  for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = std_normal(rng);
  s.alpha = lsig * z;
  Vec zb(2);
  zb << std_normal(rng), std_normal(rng);
  s.intercept = lint * zb;
  for (int p = 0; p < 2; ++p) {
    const bool binary = p == 1 && cfg.second == ResponseKind::binary;
    const double noise_sd = std::sqrt(p == 0 ? cfg.tau2 : (binary ? 1.0 : cfg.tau2_second));
    for (Eigen::Index l = 0; l < t.size(); ++l) {
      const double zl = sim_mean(cfg, p, t(l)) + sim_deviation_row(cfg, p, t(l)).dot(s.alpha.segment(p * M, M)) +
                        s.intercept(p);
      const double w = zl + noise_sd * std_normal(rng);
      s.data.by_response[static_cast<std::size_t>(p)].push_back({t(l), binary ? (w > 0.0 ? 1.0 : 0.0) : w});
    }
  }
  return s;
}

std::vector<ResponseKind> sim_kinds(const SimulationConfig& cfg) { return {ResponseKind::gaussian, cfg.second}; }

Mat intercept_factor(const SimulationConfig& cfg) {
  Mat b(2, 2);
  b << 1.0, cfg.intercept_corr, cfg.intercept_corr, 1.0;
  return factor(cfg.intercept_var * b);
}

}  // namespace

SimulatedData generate_dataset(const SimulationConfig& cfg, Rng& rng, const GridSpec& grid) {
  cfg.validate();
  SimulatedData out;
  out.truth = make_truth(cfg, grid);
  const Mat lsig = factor(out.truth.sigma);
  const Mat lint = intercept_factor(cfg);
  const Vec t = cfg.locations_grid();
  std::vector<SubjectData> subjects;
  for (int i = 0; i < cfg.subjects; ++i) {
    auto s = draw_subject(cfg, lsig, lint, t, "s" + std::to_string(i + 1), rng);
    subjects.push_back(std::move(s.data));
    out.alpha.push_back(std::move(s.alpha));
    out.intercepts.push_back(std::move(s.intercept));
  }
  out.data = FunctionalDataset(sim_kinds(cfg), std::move(subjects), {cfg.lower, cfg.upper});
  return out;
}

HeldoutSet generate_heldout(const SimulationConfig& cfg, Rng& rng) {
  cfg.validate();
  HeldoutSet out;
  const Mat lsig = factor(build_sigma(cfg));
  const Mat lint = intercept_factor(cfg);
  const Vec t = cfg.locations_grid();
  for (int i = 0; i < cfg.heldout; ++i) {
    auto s = draw_subject(cfg, lsig, lint, t, "h" + std::to_string(i + 1), rng);
    const int target = i < cfg.heldout / 2 ? 0 : 1;
    HeldoutQuery q;
    q.target_response = target;
    std::vector<double> actual;
    for (const auto& o : s.data.by_response[static_cast<std::size_t>(target)]) {
      q.t.push_back(o.t);
      actual.push_back(o.y);
    }
    s.data.by_response[static_cast<std::size_t>(target)].clear();
    q.observed = std::move(s.data);
    out.queries.push_back(std::move(q));
    out.actual.push_back(std::move(actual));
  }
  return out;
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::bfpca: return "BFPCA";
    case Variant::bbsp: return "BBSP";
    case Variant::ufpca: return "UFPCA";
    case Variant::ubsp: return "UBSP";
  }
  return "unknown";
}

Variant parse_variant(const std::string& s) {
  for (auto v : {Variant::bfpca, Variant::bbsp, Variant::ufpca, Variant::ubsp}) {
    std::string name = to_string(v);
    std::string lower = name;
    for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (s == name || s == lower) return v;
  }
  throw ConfigError("unknown study variant '" + s + "'");
}

void StudyConfig::validate() const {
  sim.validate();
  if (reps < 1) throw ConfigError("reps must be positive");
  if (variants.empty()) throw ConfigError("no study variants");
  if (sim.heldout < 2) throw ConfigError("studies need at least two held-out subjects");
  chain.validate();
  prior.validate();
  truncation.validate();
}

ModelSpec variant_model(Variant v, const StudyConfig& cfg, int responses) {
  ModelSpec m;
  for (int p = 0; p < responses; ++p) {
    MeanSpec ms;
    ms.smooth = BasisSpec::polynomial(2, cfg.sim.lower, cfg.sim.upper);
    m.mean.push_back(ms);
  }
  m.prior = cfg.prior;
  m.truncation = cfg.truncation;
  m.cov = cfg.cov;
  if (v == Variant::bfpca || v == Variant::ufpca) {
    m.mode = RandomEffectsMode::fpca;
    m.multivariate = true;
  } else {
    m.mode = RandomEffectsMode::predetermined;
    m.basis.assign(static_cast<std::size_t>(responses), BasisSpec::bspline(4, 6, cfg.sim.lower, cfg.sim.upper));
  }
  return m;
}

std::vector<ResponseMetrics> evaluate_variant(Variant v, const StudyConfig& cfg, const SimulatedData& sim,
                                              const HeldoutSet& heldout, std::uint64_t chain_seed) {
  const int P = sim.data.num_responses();
  const GridSpec& grid = sim.truth.grid;
  ChainConfig chain = cfg.chain;
  chain.seed = chain_seed;
  PredictionConfig pred = cfg.prediction;
  pred.seed = chain_seed ^ 0x5DEECE66DULL;
  std::vector<ResponseMetrics> out(static_cast<std::size_t>(P));
  const bool bivariate = v == Variant::bfpca || v == Variant::bbsp;

  auto evaluate = [&](const FittedModel& fit, const std::vector<int>& responses,
                      const std::vector<HeldoutQuery>& queries, const std::vector<std::size_t>& query_index) {
    const PosteriorSummary s = summarize(fit.draws, fit.designs, grid, fit.scaling);
    const PredictionResult pr = predict_heldout(fit.draws, fit.designs, queries, fit.scaling, pred);
    for (std::size_t j = 0; j < responses.size(); ++j) {
      const int p = responses[j];
      auto& m = out[static_cast<std::size_t>(p)];
      const auto& c = s.curves[j];
      m.mise = compute_mise({c.mean}, {sim.truth.omega[static_cast<std::size_t>(p)]}, grid);
      const auto cov = compute_coverage_and_length({c.mean}, {c.variance}, {sim.truth.omega[static_cast<std::size_t>(p)]});
      m.coverage_percent = cov.coverage_percent;
      m.ci_length = cov.mean_length;
    }
    std::vector<std::vector<double>> yhat(static_cast<std::size_t>(P)), yobs(static_cast<std::size_t>(P));
    std::size_t k = 0;
    for (std::size_t qi = 0; qi < queries.size(); ++qi) {
      const auto& actual = heldout.actual[query_index[qi]];
      const int p = responses[static_cast<std::size_t>(queries[qi].target_response)];
      for (double a : actual) {
        yhat[static_cast<std::size_t>(p)].push_back(pr.points[k++].value);
        yobs[static_cast<std::size_t>(p)].push_back(a);
      }
    }
    for (int p : responses)
      out[static_cast<std::size_t>(p)].mspe =
          compute_mspe(yhat[static_cast<std::size_t>(p)], yobs[static_cast<std::size_t>(p)]);
  };

  if (bivariate) {
    const ModelSpec spec = variant_model(v, cfg, P);
    const FittedModel fit = fit_model(sim.data, {}, spec, chain);
    std::vector<std::size_t> idx(heldout.queries.size());
    for (std::size_t q = 0; q < idx.size(); ++q) idx[q] = q;
    std::vector<int> all(static_cast<std::size_t>(P));
    for (int p = 0; p < P; ++p) all[static_cast<std::size_t>(p)] = p;
    evaluate(fit, all, heldout.queries, idx);
    return out;
  }
  pred.require_observed = false;
  for (int p = 0; p < P; ++p) {
    const ModelSpec spec = variant_model(v, cfg, 1);
    const FunctionalDataset dp = sim.data.select_responses({p});
    const FittedModel fit = fit_model(dp, {}, spec, chain);
    std::vector<HeldoutQuery> queries;
    std::vector<std::size_t> idx;
    for (std::size_t q = 0; q < heldout.queries.size(); ++q) {
      const auto& hq = heldout.queries[q];
      if (hq.target_response != p) continue;
      HeldoutQuery u;
      u.observed.id = hq.observed.id;
      u.observed.by_response = {hq.observed.by_response[static_cast<std::size_t>(p)]};
      u.target_response = 0;
      u.t = hq.t;
      queries.push_back(std::move(u));
      idx.push_back(q);
    }
    evaluate(fit, {p}, queries, idx);
  }
  return out;
}

StudyReport run_study(const StudyConfig& cfg) {
  cfg.validate();
  StudyReport report;
  report.config = cfg;
  const GridSpec grid(cfg.sim.lower, cfg.sim.upper, cfg.cov.grid_points);
  const auto nv = cfg.variants.size();
  const auto nr = static_cast<std::size_t>(cfg.reps);
  std::vector<std::vector<std::vector<ResponseMetrics>>> metrics(nr, std::vector<std::vector<ResponseMetrics>>(nv));
  std::vector<std::vector<std::string>> errors(nr, std::vector<std::string>(nv));
  std::vector<std::vector<std::uint64_t>> seeds(nr, std::vector<std::uint64_t>(nv));

#pragma omp parallel for schedule(dynamic) collapse(2)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(nr); ++r) {
    for (std::ptrdiff_t vi = 0; vi < static_cast<std::ptrdiff_t>(nv); ++vi) {
      const auto ru = static_cast<std::size_t>(r);
      const auto vu = static_cast<std::size_t>(vi);
      const std::uint64_t chain_seed = substream(cfg.seed, {ru, 2, static_cast<std::uint64_t>(cfg.variants[vu])})();
      seeds[ru][vu] = chain_seed;
      try {
        Rng data_rng = substream(cfg.seed, {ru, 0});
        Rng held_rng = substream(cfg.seed, {ru, 1});
        const SimulatedData sim = generate_dataset(cfg.sim, data_rng, grid);
        const HeldoutSet held = generate_heldout(cfg.sim, held_rng);
        metrics[ru][vu] = evaluate_variant(cfg.variants[vu], cfg, sim, held, chain_seed);
      } catch (const std::exception& e) {
        errors[ru][vu] = e.what();
      }
    }
  }

  for (std::size_t vi = 0; vi < nv; ++vi) {
    VariantResult vr;
    vr.variant = cfg.variants[vi];
    vr.mean.assign(2, ResponseMetrics{});
    for (std::size_t r = 0; r < nr; ++r) {
      if (!errors[r][vi].empty()) {
        log::warn("replication " + std::to_string(r) + " variant " + to_string(vr.variant) + " (seed " +
                  std::to_string(seeds[r][vi]) + ") skipped: " + errors[r][vi]);
        vr.failures.push_back({static_cast<int>(r), seeds[r][vi], errors[r][vi]});
        continue;
      }
      vr.per_rep.push_back(metrics[r][vi]);
      vr.reps.push_back(static_cast<int>(r));
    }
    if (!vr.per_rep.empty()) {
      const double n = static_cast<double>(vr.per_rep.size());
      for (const auto& rep : vr.per_rep) {
        for (std::size_t p = 0; p < rep.size(); ++p) {
          vr.mean[p].mise += rep[p].mise / n;
          vr.mean[p].coverage_percent += rep[p].coverage_percent / n;
          vr.mean[p].ci_length += rep[p].ci_length / n;
          vr.mean[p].mspe += rep[p].mspe / n;
        }
      }
    }
    report.results.push_back(std::move(vr));
  }
  return report;
}

}  // namespace mixfda
