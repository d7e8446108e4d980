#include "mixfda/config.hpp"

#include <filesystem>
#include <fstream>

namespace mixfda {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("bad value for '" + std::string(key) + "' in " + where);
  }
}

std::string resolve(const std::string& base, const std::string& p) {
  std::filesystem::path path(p);
  if (!path.is_absolute() && !base.empty()) path = std::filesystem::path(base) / path;
  return std::filesystem::absolute(path).lexically_normal().string();
}

MeanSpec parse_mean(const json& j, double lo, double hi) {
  check_keys(j, "mean", {"basis", "covariates", "location_covariates"});
  MeanSpec m;
  m.smooth = j.contains("basis") ? parse_basis(j.at("basis"), lo, hi) : BasisSpec::bspline(4, 6, lo, hi);
  m.covariates = get_or<std::vector<std::string>>(j, "covariates", {}, "mean");
  if (j.contains("location_covariates")) {
    for (const auto& lc : j.at("location_covariates")) {
      check_keys(lc, "location_covariates", {"name", "lower", "upper"});
      m.location_covariates.push_back(
          {lc.at("name").get<std::string>(), lc.at("lower").get<double>(), lc.at("upper").get<double>()});
    }
  }
  return m;
}

SimulationConfig parse_simulation(const json& j) {
  check_keys(j, "simulation",
             {"subjects", "locations", "components", "rho_a", "rho", "tau2", "beta1", "beta2", "lower", "upper",
              "heldout", "second", "tau2_second", "sigma_scale", "intercept_var", "intercept_corr"});
  SimulationConfig s;
  const std::string w = "simulation";
  s.subjects = get_or(j, "subjects", s.subjects, w);
  s.locations = get_or(j, "locations", s.locations, w);
  s.components = get_or(j, "components", s.components, w);
  s.rho_a = get_or(j, "rho_a", s.rho_a, w);
  s.rho = get_or(j, "rho", s.rho, w);
  s.tau2 = get_or(j, "tau2", s.tau2, w);
  s.beta1 = get_or(j, "beta1", s.beta1, w);
  s.beta2 = get_or(j, "beta2", s.beta2, w);
  s.lower = get_or(j, "lower", s.lower, w);
  s.upper = get_or(j, "upper", s.upper, w);
  s.heldout = get_or(j, "heldout", s.heldout, w);
  s.second = parse_response_kind(get_or<std::string>(j, "second", "binary", w));
  s.tau2_second = get_or(j, "tau2_second", s.tau2_second, w);
  s.sigma_scale = get_or(j, "sigma_scale", s.sigma_scale, w);
  s.intercept_var = get_or(j, "intercept_var", s.intercept_var, w);
  s.intercept_corr = get_or(j, "intercept_corr", s.intercept_corr, w);
  s.validate();
  return s;
}

ResidualMode parse_residual(const std::string& s) {
  if (s == "none") return ResidualMode::none;
  if (s == "subject_mean") return ResidualMode::subject_mean;
  if (s == "covariates") return ResidualMode::covariates;
  throw ConfigError("unknown residualize mode '" + s + "'");
}

}  // namespace

BasisSpec parse_basis(const json& j, double lo, double hi) {
  check_keys(j, "basis", {"family", "order", "breaks", "harmonics", "degree", "count", "segments"});
  BasisSpec s;
  s.family = parse_basis_family(get_or<std::string>(j, "family", "bspline", "basis"));
  s.lower = lo;
  s.upper = hi;
  s.order = get_or(j, "order", s.order, "basis");
  s.breaks = get_or(j, "breaks", s.breaks, "basis");
  s.harmonics = get_or(j, "harmonics", s.harmonics, "basis");
  s.degree = get_or(j, "degree", s.degree, "basis");
  s.count = get_or(j, "count", s.count, "basis");
  if (j.contains("segments")) {
    for (const auto& seg : j.at("segments")) {
      check_keys(seg, "segments", {"upper", "center"});
      s.segments.push_back({seg.at("upper").get<double>(), seg.at("center").get<double>()});
    }
  }
  if (s.family == BasisFamily::bspline && (s.order < 1 || s.order > BSplineBasis<double>::max_order || s.breaks < 0))
    throw ConfigError("bspline needs 1 <= order <= 8 and breaks >= 0");
  if (s.harmonics < 0 || s.degree < 0 || s.count < 1) throw ConfigError("basis sizes must be non-negative");
  return s;
}

StudyConfig RunConfig::study() const {
  StudyConfig s;
  if (!simulation) throw ConfigError("study needs a simulation block");
  s.sim = *simulation;
  s.reps = reps;
  s.variants = variants;
  s.chain = chain;
  s.prediction = prediction;
  s.prior = model.prior;
  s.truncation = model.truncation;
  s.cov = model.cov;
  s.seed = seed;
  return s;
}

RunConfig parse_config(const json& j, const std::string& base_dir) {
  check_keys(j, "config",
             {"spec_version", "seed", "data", "simulation", "responses", "model", "prior", "chain", "smoother", "grid",
              "prediction", "study"});
  if (get_or<int>(j, "spec_version", 0, "config") != 1) throw ConfigError("spec_version must be 1");
  RunConfig rc;
  rc.source = j;
  rc.seed = get_or<std::uint64_t>(j, "seed", 1, "config");
  const bool has_data = j.contains("data");
  const bool has_sim = j.contains("simulation");
  if (has_data == has_sim) throw ConfigError("exactly one of 'data' and 'simulation' is required");

  double lo = 0.0, hi = 1.0;
  if (has_data) {
    const json& d = j.at("data");
    check_keys(d, "data", {"path", "covariates", "domain"});
    if (!d.contains("path")) throw ConfigError("data.path is required");
    rc.data_path = resolve(base_dir, d.at("path").get<std::string>());
    rc.source["data"]["path"] = *rc.data_path;
    if (d.contains("covariates")) {
      rc.covariates_path = resolve(base_dir, d.at("covariates").get<std::string>());
      rc.source["data"]["covariates"] = *rc.covariates_path;
    }
    if (d.contains("domain")) {
      const auto dom = d.at("domain").get<std::vector<double>>();
      if (dom.size() != 2 || !(dom[1] > dom[0])) throw ConfigError("data.domain must be [lower, upper]");
      rc.domain = std::make_pair(dom[0], dom[1]);
      lo = dom[0];
      hi = dom[1];
    } else {
      throw ConfigError("data.domain is required");
    }
    if (!j.contains("responses")) throw ConfigError("responses are required with data");
    int expect = 1;
    for (const auto& r : j.at("responses")) {
      check_keys(r, "responses", {"id", "kind"});
      if (r.at("id").get<int>() != expect++) throw ConfigError("response ids must be 1, 2, ... in order");
      rc.kinds.push_back(parse_response_kind(r.at("kind").get<std::string>()));
    }
    if (rc.kinds.empty()) throw ConfigError("at least one response is required");
  } else {
    rc.simulation = parse_simulation(j.at("simulation"));
    lo = rc.simulation->lower;
    hi = rc.simulation->upper;
    rc.kinds = {ResponseKind::gaussian, rc.simulation->second};
    if (j.contains("responses")) throw ConfigError("responses are fixed by the simulation design");
  }
  const int P = static_cast<int>(rc.kinds.size());

  const json model = j.value("model", json::object());
  check_keys(model, "model",
             {"mean", "random_effects", "subject_intercept", "sigma_prior", "residualize", "residual_covariates",
              "scale"});
  if (model.contains("mean") && model.at("mean").is_array()) {
    for (const auto& m : model.at("mean")) rc.model.mean.push_back(parse_mean(m, lo, hi));
    if (static_cast<int>(rc.model.mean.size()) != P) throw ConfigError("model.mean needs one entry per response");
  } else {
    MeanSpec m = model.contains("mean") ? parse_mean(model.at("mean"), lo, hi)
                 : has_sim             ? MeanSpec{{}, {}, BasisSpec::polynomial(2, lo, hi)}
                                       : MeanSpec{{}, {}, BasisSpec::bspline(4, 6, lo, hi)};
    rc.model.mean.assign(static_cast<std::size_t>(P), m);
  }
  const json re = model.value("random_effects", json::object());
  check_keys(re, "random_effects", {"mode", "P1", "P2", "multivariate", "basis"});
  const std::string mode = get_or<std::string>(re, "mode", "fpca", "random_effects");
  if (mode == "fpca") {
    rc.model.mode = RandomEffectsMode::fpca;
    if (re.contains("basis")) throw ConfigError("fpca random effects do not take per-response basis settings");
    rc.model.truncation.P1 = get_or(re, "P1", 0.99, "random_effects");
    if (re.contains("P2") && !re.at("P2").is_null()) rc.model.truncation.P2 = re.at("P2").get<double>();
    rc.model.multivariate = get_or(re, "multivariate", true, "random_effects");
  } else if (mode == "predetermined") {
    rc.model.mode = RandomEffectsMode::predetermined;
    if (re.contains("P1") || re.contains("P2")) throw ConfigError("P1/P2 apply to fpca random effects only");
    if (!re.contains("basis")) throw ConfigError("predetermined random effects need a basis");
    const json& b = re.at("basis");
    if (b.is_array()) {
      for (const auto& e : b) rc.model.basis.push_back(parse_basis(e, lo, hi));
      if (static_cast<int>(rc.model.basis.size()) != P) throw ConfigError("random_effects.basis needs one per response");
    } else {
      rc.model.basis.assign(static_cast<std::size_t>(P), parse_basis(b, lo, hi));
    }
  } else {
    throw ConfigError("random_effects.mode must be fpca or predetermined");
  }
  rc.model.subject_intercept = get_or(model, "subject_intercept", false, "model");
  rc.model.prior.sigma_mode = parse_sigma_mode(get_or<std::string>(model, "sigma_prior", "full", "model"));
  rc.model.residual = parse_residual(get_or<std::string>(model, "residualize", "none", "model"));
  rc.model.residual_covariates = get_or<std::vector<std::string>>(model, "residual_covariates", {}, "model");
  rc.model.scale = get_or(model, "scale", true, "model");
  if (rc.model.prior.sigma_mode == SigmaMode::block && !rc.model.subject_intercept)
    throw ConfigError("block sigma prior needs subject_intercept");

  const json prior = j.value("prior", json::object());
  check_keys(prior, "prior", {"sigma_beta2", "q1", "q2", "l", "h"});
  rc.model.prior.sigma_beta2 = get_or(prior, "sigma_beta2", 100.0, "prior");
  rc.model.prior.q1 = get_or(prior, "q1", 0.1, "prior");
  rc.model.prior.q2 = get_or(prior, "q2", 0.1, "prior");
  rc.model.prior.l = get_or(prior, "l", 0.1, "prior");
  rc.model.prior.h = get_or(prior, "h", 0.1, "prior");

  const json chain = j.value("chain", json::object());
  check_keys(chain, "chain", {"n_iter", "burn_in", "thin", "store_alpha"});
  rc.chain.n_iter = get_or(chain, "n_iter", 20000, "chain");
  rc.chain.burn_in = get_or(chain, "burn_in", 5000, "chain");
  rc.chain.thin = get_or(chain, "thin", 1, "chain");
  rc.chain.store_alpha = get_or(chain, "store_alpha", false, "chain");
  rc.chain.seed = rc.seed;

  const json sm = j.value("smoother", json::object());
  check_keys(sm, "smoother", {"basis_size", "order", "penalty_order", "lambda", "clamp"});
  rc.model.cov.smoother.basis_size = get_or(sm, "basis_size", 10, "smoother");
  rc.model.cov.smoother.order = get_or(sm, "order", 4, "smoother");
  rc.model.cov.smoother.penalty_order = get_or(sm, "penalty_order", 2, "smoother");
  if (sm.contains("lambda") && !sm.at("lambda").is_null()) {
    const json& lam = sm.at("lambda");
    if (lam.is_string() && lam.get<std::string>() == "gcv") {
      rc.model.cov.smoother.lambda.reset();
    } else if (lam.is_number()) {
      rc.model.cov.smoother.lambda = lam.get<double>();
    } else {
      throw ConfigError("smoother.lambda must be \"gcv\" or a positive number");
    }
  }
  rc.model.cov.clamp = get_or(sm, "clamp", 0.025, "smoother");
  const json grid = j.value("grid", json::object());
  check_keys(grid, "grid", {"points"});
  rc.model.cov.grid_points = get_or(grid, "points", 101, "grid");

  const json pred = j.value("prediction", json::object());
  check_keys(pred, "prediction", {"heldout", "targets", "draws", "refinement_sweeps", "max_draws"});
  auto path_key = [&](const char* key, std::optional<std::string>& dst) {
    if (!pred.contains(key)) return;
    dst = resolve(base_dir, pred.at(key).get<std::string>());
    rc.source["prediction"][key] = *dst;
  };
  path_key("heldout", rc.heldout_path);
  path_key("targets", rc.targets_path);
  path_key("draws", rc.draws_path);
  rc.prediction.refinement_sweeps = get_or(pred, "refinement_sweeps", 20, "prediction");
  rc.prediction.max_draws = get_or(pred, "max_draws", 0, "prediction");
  rc.prediction.seed = rc.seed;

  const json st = j.value("study", json::object());
  check_keys(st, "study", {"reps", "variants"});
  rc.reps = get_or(st, "reps", 100, "study");
  if (st.contains("variants")) {
    rc.variants.clear();
    for (const auto& v : st.at("variants")) rc.variants.push_back(parse_variant(v.get<std::string>()));
  }

  rc.model.validate(P);
  rc.chain.validate();
  if (rc.prediction.refinement_sweeps < 1) throw ConfigError("prediction.refinement_sweeps must be positive");
  return rc;
}

RunConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  // A run manifest carries the config it was produced from.
  if (j.contains("config") && j.contains("config_hash")) j = j.at("config");
  if (seed_override) j["seed"] = *seed_override;
  const std::string base = std::filesystem::path(path).parent_path().string();
  return parse_config(j, base);
}

}  // namespace mixfda
