#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mixfda/io.hpp"
#include "mixfda/log.hpp"

using namespace mixfda;
namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  int threads = 0;
  bool verbose = false;
  bool quiet = false;
};

struct Input {
  FunctionalDataset data;
  SubjectCovariates covariates;
  std::optional<SimulatedData> sim;
  std::optional<HeldoutSet> heldout;
};

Input load_input(const RunConfig& cfg) {
  Input in;
  if (cfg.simulation) {
    const GridSpec grid(cfg.simulation->lower, cfg.simulation->upper, cfg.model.cov.grid_points);
    Rng data_rng = substream(cfg.seed, {0, 0});
    Rng held_rng = substream(cfg.seed, {0, 1});
    in.sim = generate_dataset(*cfg.simulation, data_rng, grid);
    in.data = in.sim->data;
    in.heldout = generate_heldout(*cfg.simulation, held_rng);
    return in;
  }
  in.data = load_dataset(*cfg.data_path, cfg.kinds, cfg.domain);
  if (cfg.covariates_path) in.covariates = load_covariates(*cfg.covariates_path);
  if (cfg.heldout_path && cfg.targets_path) {
    const FunctionalDataset obs = load_dataset(*cfg.heldout_path, cfg.kinds, cfg.domain);
    const auto targets = load_targets(*cfg.targets_path);
    HeldoutSet h;
    std::map<std::pair<std::string, int>, std::size_t> index;
    for (const auto& tp : targets) {
      if (tp.response_id < 1 || tp.response_id > static_cast<int>(cfg.kinds.size()))
        throw SchemaError("target response_id " + std::to_string(tp.response_id) + " is not in the schema");
      auto key = std::make_pair(tp.subject_id, tp.response_id - 1);
      auto it = index.find(key);
      if (it == index.end()) {
        HeldoutQuery q;
        q.target_response = tp.response_id - 1;
        q.observed.id = tp.subject_id;
        q.observed.by_response.assign(cfg.kinds.size(), {});
        for (const auto& s : obs.subjects())
          if (s.id == tp.subject_id) q.observed = s;
        q.observed.by_response[static_cast<std::size_t>(q.target_response)].clear();
        auto ci = in.covariates.find(tp.subject_id);
        if (ci != in.covariates.end()) q.covariates = ci->second;
        it = index.emplace(key, h.queries.size()).first;
        h.queries.push_back(std::move(q));
        h.actual.emplace_back();
      }
      h.queries[it->second].t.push_back(tp.t);
      if (tp.y) h.actual[it->second].push_back(*tp.y);
    }
    in.heldout = std::move(h);
  }
  return in;
}

std::string out_path(const Options& o, const std::string& name) { return (fs::path(o.out) / name).string(); }

void write_manifest(const Options& o, const RunConfig& cfg, const std::string& cmd) {
  write_json(out_path(o, "manifest.json"), make_manifest(cfg, cmd));
}

int cmd_simulate(const Options& o, const RunConfig& cfg) {
  if (!cfg.simulation) throw ConfigError("simulate needs a simulation block");
  const Input in = load_input(cfg);
  write_dataset_csv(out_path(o, "data.csv"), in.data);
  {
    std::ofstream t(out_path(o, "truth.csv"), std::ios::binary);
    t << "response_id,t,omega\n";
    const auto& tr = in.sim->truth;
    for (std::size_t p = 0; p < tr.omega.size(); ++p)
      for (Eigen::Index g = 0; g < tr.grid.size(); ++g)
        t << p + 1 << ',' << format_double(tr.grid.points(g)) << ',' << format_double(tr.omega[p](g)) << '\n';
  }
  std::vector<SubjectData> observed;
  std::ofstream tg(out_path(o, "heldout_targets.csv"), std::ios::binary);
  tg << "subject_id,response_id,t,y\n";
  for (std::size_t q = 0; q < in.heldout->queries.size(); ++q) {
    const auto& hq = in.heldout->queries[q];
    observed.push_back(hq.observed);
    for (std::size_t k = 0; k < hq.t.size(); ++k)
      tg << hq.observed.id << ',' << hq.target_response + 1 << ',' << format_double(hq.t[k]) << ','
         << format_double(in.heldout->actual[q][k]) << '\n';
  }
  write_dataset_csv(out_path(o, "heldout_observed.csv"), in.data.with_subjects(std::move(observed)));
  write_manifest(o, cfg, "simulate");
  return 0;
}

int cmd_cov(const Options& o, const RunConfig& cfg) {
  const Input in = load_input(cfg);
  const auto [prepared, scaling] = prepare_data(in.data, cfg.model);
  const auto est = estimate_covariance(prepared, in.covariates, cfg.model);
  for (int p = 0; p < est.P; ++p)
    for (int q = 0; q < est.P; ++q)
      write_surface_csv(out_path(o, "cov_" + std::to_string(p + 1) + "_" + std::to_string(q + 1) + ".csv"),
                        est.grid.points, est.block(p, q));
  write_manifest(o, cfg, "cov");
  return 0;
}

int cmd_fpca(const Options& o, const RunConfig& cfg) {
  const Input in = load_input(cfg);
  const auto [prepared, scaling] = prepare_data(in.data, cfg.model);
  const FpcaFit fit = fit_fpca(prepared, in.covariates, cfg.model);
  nlohmann::json j;
  j["components"] = fit.components;
  j["P1"] = cfg.model.truncation.P1;
  for (std::size_t k = 0; k < fit.eigen.size(); ++k) {
    const std::string suffix = fit.eigen.size() == 1 ? "" : "_" + std::to_string(k + 1);
    write_eigenvalues_csv(out_path(o, "eigenvalues" + suffix + ".csv"), fit.eigen[k].values);
    write_eigenfunctions_csv(out_path(o, "eigenfunctions" + suffix + ".csv"), fit.eigen[k]);
    j["positive_eigenvalues"].push_back(fit.eigen[k].count());
  }
  write_json(out_path(o, "fpca.json"), j);
  write_manifest(o, cfg, "fpca");
  return 0;
}

GridSpec summary_grid(const RunConfig& cfg, const FunctionalDataset& d) {
  const auto [lo, hi] = d.domain();
  return GridSpec(lo, hi, cfg.model.cov.grid_points);
}

int cmd_fit(const Options& o, const RunConfig& cfg) {
  const Input in = load_input(cfg);
  const FittedModel fit = fit_model(in.data, in.covariates, cfg.model, cfg.chain, true);
  write_draws_csv(out_path(o, "draws.csv"), fit.draws);
  write_summary_csv(out_path(o, "summary.csv"),
                    summarize(fit.draws, fit.designs, summary_grid(cfg, in.data), fit.scaling));
  write_json(out_path(o, "dic.json"), dic_json(*fit.dic));
  write_manifest(o, cfg, "fit");
  return 0;
}

int cmd_predict(const Options& o, const RunConfig& cfg) {
  const Input in = load_input(cfg);
  if (!in.heldout) throw ConfigError("predict needs prediction.heldout and prediction.targets (or a simulation)");
  DesignSet designs;
  ScalingInfo scaling;
  PosteriorDraws draws;
  if (cfg.draws_path) {
    auto [prepared, sc] = prepare_data(in.data, cfg.model);
    scaling = std::move(sc);
    designs = build_model(prepared, in.covariates, cfg.model).first;
    draws = read_draws_csv(*cfg.draws_path, designs.fixed_dim(), designs.random_dim(), designs.num_responses());
  } else {
    FittedModel fit = fit_model(in.data, in.covariates, cfg.model, cfg.chain);
    designs = std::move(fit.designs);
    scaling = std::move(fit.scaling);
    draws = std::move(fit.draws);
  }
  const PredictionResult r = predict_heldout(draws, designs, in.heldout->queries, scaling, cfg.prediction);
  write_predictions_csv(out_path(o, "predictions.csv"), r);
  write_manifest(o, cfg, "predict");
  return 0;
}

int cmd_metrics(const Options& o, const RunConfig& cfg) {
  const Input in = load_input(cfg);
  const FittedModel fit = fit_model(in.data, in.covariates, cfg.model, cfg.chain, true);
  nlohmann::json j;
  j["dic"] = dic_json(*fit.dic);
  const int P = in.data.num_responses();
  if (in.sim) {
    const auto s = summarize(fit.draws, fit.designs, in.sim->truth.grid, fit.scaling);
    for (int p = 0; p < P; ++p) {
      const auto& c = s.curves[static_cast<std::size_t>(p)];
      const Vec& truth = in.sim->truth.omega[static_cast<std::size_t>(p)];
      const auto cov = compute_coverage_and_length({c.mean}, {c.variance}, {truth});
      j["responses"].push_back({{"response", p + 1},
                                {"mise", compute_mise({c.mean}, {truth}, in.sim->truth.grid)},
                                {"coverage_percent", cov.coverage_percent},
                                {"ci_length", cov.mean_length}});
    }
  }
  if (in.heldout) {
    const PredictionResult r = predict_heldout(fit.draws, fit.designs, in.heldout->queries, fit.scaling, cfg.prediction);
    std::vector<std::vector<double>> yhat(static_cast<std::size_t>(P)), yobs(static_cast<std::size_t>(P));
    std::size_t k = 0;
    bool complete = true;
    for (std::size_t q = 0; q < in.heldout->queries.size(); ++q) {
      const auto& hq = in.heldout->queries[q];
      const auto& actual = in.heldout->actual[q];
      if (actual.size() != hq.t.size()) complete = false;
      for (std::size_t l = 0; l < hq.t.size(); ++l, ++k) {
        if (l >= actual.size()) continue;
        yhat[static_cast<std::size_t>(hq.target_response)].push_back(r.points[k].value);
        yobs[static_cast<std::size_t>(hq.target_response)].push_back(actual[l]);
      }
    }
    if (!complete) throw DataError("held-out targets need observed y values for MSPE");
    for (int p = 0; p < P; ++p)
      if (!yobs[static_cast<std::size_t>(p)].empty())
        j["mspe"].push_back({{"response", p + 1},
                             {"kind", to_string(in.data.kind(p))},
                             {"value", compute_mspe(yhat[static_cast<std::size_t>(p)], yobs[static_cast<std::size_t>(p)])}});
  }
  write_json(out_path(o, "metrics.json"), j);
  write_manifest(o, cfg, "metrics");
  return 0;
}

int cmd_study(const Options& o, const RunConfig& cfg) {
  const StudyReport r = run_study(cfg.study());
  write_json(out_path(o, "study.json"), study_json(r));
  write_study_csv(out_path(o, "study.csv"), r);
  write_manifest(o, cfg, "study");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian multivariate functional regression for mixed-type sparse functional data"};
  app.require_subcommand(1);
  Options o;
  const std::map<std::string, int (*)(const Options&, const RunConfig&)> commands{
      {"simulate", cmd_simulate}, {"cov", cmd_cov},         {"fpca", cmd_fpca},  {"fit", cmd_fit},
      {"predict", cmd_predict},   {"metrics", cmd_metrics}, {"study", cmd_study}};
  const std::map<std::string, std::string> help{
      {"simulate", "generate a dataset, truth, and held-out set from the simulation design"},
      {"cov", "estimate the latent covariance blocks"},
      {"fpca", "multivariate FPCA of the latent covariance"},
      {"fit", "run the Gibbs sampler and summarize"},
      {"predict", "predict left-out responses of held-out subjects"},
      {"metrics", "fit and report MISE, coverage, MSPE and DIC"},
      {"study", "Monte Carlo comparison of model variants"}};
  for (const auto& [name, fn] : commands) {
    auto* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("--config", o.config, "JSON run configuration")->required();
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seed", o.seed, "overrides the config seed");
    sub->add_option("--threads", o.threads, "worker threads (default: all cores)");
    sub->add_flag("--verbose", o.verbose, "log progress to stderr");
    sub->add_flag("--quiet", o.quiet, "suppress warnings");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  if (o.quiet) log::level() = log::Level::quiet;
  if (o.verbose) log::level() = log::Level::info;
#ifdef _OPENMP
  if (o.threads > 0) omp_set_num_threads(o.threads);
#endif
  const std::string name = app.get_subcommands().front()->get_name();
  try {
    const RunConfig cfg = load_config(o.config, o.seed);
    std::error_code ec;
    fs::create_directories(o.out, ec);
    if (ec) throw InputError("cannot create output directory '" + o.out + "'");
    return commands.at(name)(o, cfg);
  } catch (const InputError& e) {
    std::cerr << "mixfda " << name << ": " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "mixfda " << name << ": numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "mixfda " << name << ": " << e.what() << '\n';
    return 3;
  }
}
