#include "mixfda/io.hpp"

#include <cstdio>
#include <fstream>
#include <map>

#include "mixfda/csv.hpp"

namespace mixfda {

using nlohmann::json;

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  return out;
}

}  // namespace

void write_draws_csv(const std::string& path, const PosteriorDraws& draws) {
  auto out = open_out(path);
  if (draws.size() == 0) throw ConfigError("no draws to write");
  const auto J = draws.beta.front().size();
  const auto m = draws.sigma.front().rows();
  const auto P = draws.tau2.front().size();
  out << "iteration";
  for (Eigen::Index j = 0; j < J; ++j) out << ",beta[" << j + 1 << "]";
  for (Eigen::Index k = 0; k < m; ++k)
    for (Eigen::Index l = 0; l < m; ++l) out << ",\"Sigma[" << k + 1 << "," << l + 1 << "]\"";
  for (Eigen::Index p = 0; p < P; ++p) out << ",tau2[" << p + 1 << "]";
  out << '\n';
  for (std::size_t d = 0; d < draws.size(); ++d) {
    out << draws.iteration[d];
    for (Eigen::Index j = 0; j < J; ++j) out << ',' << format_double(draws.beta[d](j));
    for (Eigen::Index k = 0; k < m; ++k)
      for (Eigen::Index l = 0; l < m; ++l) out << ',' << format_double(draws.sigma[d](k, l));
    for (Eigen::Index p = 0; p < P; ++p) out << ',' << format_double(draws.tau2[d](p));
    out << '\n';
  }
}

PosteriorDraws read_draws_csv(const std::string& path, int fixed_dim, int random_dim, int responses) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open draws file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing header", 1);
  PosteriorDraws d;
  std::size_t lineno = 1;
  const std::size_t width = 1 + static_cast<std::size_t>(fixed_dim) +
                            static_cast<std::size_t>(random_dim) * static_cast<std::size_t>(random_dim) +
                            static_cast<std::size_t>(responses);
  while (std::getline(in, line)) {
    ++lineno;
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != width)
      throw SchemaError("draws file line " + std::to_string(lineno) + " has " + std::to_string(f.size()) +
                        " fields, the model needs " + std::to_string(width));
    std::size_t c = 0;
    d.iteration.push_back(static_cast<int>(csv::parse_double(f[c++], lineno, "iteration")));
    Vec b(fixed_dim);
    for (int j = 0; j < fixed_dim; ++j) b(j) = csv::parse_double(f[c++], lineno, "beta");
    Mat s(random_dim, random_dim);
    for (int k = 0; k < random_dim; ++k)
      for (int l = 0; l < random_dim; ++l) s(k, l) = csv::parse_double(f[c++], lineno, "Sigma");
    Vec t(responses);
    for (int p = 0; p < responses; ++p) t(p) = csv::parse_double(f[c++], lineno, "tau2");
    d.beta.push_back(std::move(b));
    d.sigma.push_back(std::move(s));
    d.tau2.push_back(std::move(t));
  }
  if (d.size() == 0) throw DataError("draws file '" + path + "' has no rows");
  return d;
}

void write_dataset_csv(const std::string& path, const FunctionalDataset& d) {
  auto out = open_out(path);
  out << "subject_id,response_id,t,y\n";
  for (const auto& r : d.records())
    out << r.subject_id << ',' << r.response_id << ',' << format_double(r.t) << ',' << format_double(r.y) << '\n';
}

void write_surface_csv(const std::string& path, const Vec& grid, const Mat& values) {
  auto out = open_out(path);
  out << "t";
  for (Eigen::Index g = 0; g < grid.size(); ++g) out << ',' << format_double(grid(g));
  out << '\n';
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    out << format_double(grid(r));
    for (Eigen::Index c = 0; c < values.cols(); ++c) out << ',' << format_double(values(r, c));
    out << '\n';
  }
}

void write_eigenvalues_csv(const std::string& path, const Vec& values) {
  auto out = open_out(path);
  out << "k,eigenvalue,proportion,cumulative\n";
  const double total = values.sum();
  double cum = 0.0;
  for (Eigen::Index k = 0; k < values.size(); ++k) {
    cum += values(k);
    out << k + 1 << ',' << format_double(values(k)) << ',' << format_double(values(k) / total) << ','
        << format_double(cum / total) << '\n';
  }
}

void write_eigenfunctions_csv(const std::string& path, const EigenSystem<double>& es) {
  auto out = open_out(path);
  out << "response_id,t";
  for (int k = 0; k < es.count(); ++k) out << ",theta[" << k + 1 << "]";
  out << '\n';
  const Eigen::Index G = es.grid_size();
  for (int p = 0; p < es.P; ++p) {
    for (Eigen::Index g = 0; g < G; ++g) {
      out << p + 1 << ',' << format_double(es.grid(g));
      for (int k = 0; k < es.count(); ++k) out << ',' << format_double(es.functions(p * G + g, k));
      out << '\n';
    }
  }
}

void write_summary_csv(const std::string& path, const PosteriorSummary& s) {
  auto out = open_out(path);
  out << "response_id,t,mean,variance,median,lower,upper\n";
  for (std::size_t p = 0; p < s.curves.size(); ++p) {
    const auto& c = s.curves[p];
    for (Eigen::Index g = 0; g < s.grid.size(); ++g)
      out << p + 1 << ',' << format_double(s.grid.points(g)) << ',' << format_double(c.mean(g)) << ','
          << format_double(c.variance(g)) << ',' << format_double(c.median(g)) << ',' << format_double(c.lower(g))
          << ',' << format_double(c.upper(g)) << '\n';
  }
}

void write_predictions_csv(const std::string& path, const PredictionResult& r) {
  auto out = open_out(path);
  out << "subject_id,response_id,t,prediction,lower,upper\n";
  for (const auto& p : r.points)
    out << p.subject << ',' << p.response + 1 << ',' << format_double(p.t) << ',' << format_double(p.value) << ','
        << format_double(p.lower) << ',' << format_double(p.upper) << '\n';
}

void write_study_csv(const std::string& path, const StudyReport& r) {
  auto out = open_out(path);
  out << "model,response,mise,mise_hundredths,coverage_percent,ci_length,ci_length_hundredths,mspe,mspe_hundredths,"
         "replications,failures\n";
  for (const auto& v : r.results) {
    for (std::size_t p = 0; p < v.mean.size(); ++p) {
      const auto& m = v.mean[p];
      out << to_string(v.variant) << ',' << p + 1 << ',' << format_double(m.mise) << ','
          << format_double(100.0 * m.mise) << ',' << format_double(m.coverage_percent) << ','
          << format_double(m.ci_length) << ',' << format_double(100.0 * m.ci_length) << ','
          << format_double(m.mspe) << ',' << format_double(100.0 * m.mspe) << ',' << v.per_rep.size() << ','
          << v.failures.size() << '\n';
    }
  }
}

json study_json(const StudyReport& r) {
  json j;
  j["reps"] = r.config.reps;
  j["subjects"] = r.config.sim.subjects;
  j["rho_a"] = r.config.sim.rho_a;
  j["seed"] = r.config.seed;
  json variants = json::array();
  for (const auto& v : r.results) {
    json jv;
    jv["model"] = to_string(v.variant);
    json means = json::array();
    for (std::size_t p = 0; p < v.mean.size(); ++p)
      means.push_back({{"response", p + 1},
                       {"mise", v.mean[p].mise},
                       {"coverage_percent", v.mean[p].coverage_percent},
                       {"ci_length", v.mean[p].ci_length},
                       {"mspe", v.mean[p].mspe}});
    jv["mean"] = means;
    json reps = json::array();
    for (std::size_t k = 0; k < v.per_rep.size(); ++k) {
      json jr;
      jr["rep"] = v.reps[k];
      for (std::size_t p = 0; p < v.per_rep[k].size(); ++p)
        jr["responses"].push_back({{"response", p + 1},
                                   {"mise", v.per_rep[k][p].mise},
                                   {"coverage_percent", v.per_rep[k][p].coverage_percent},
                                   {"ci_length", v.per_rep[k][p].ci_length},
                                   {"mspe", v.per_rep[k][p].mspe}});
      reps.push_back(jr);
    }
    jv["replications"] = reps;
    json fails = json::array();
    for (const auto& f : v.failures) fails.push_back({{"rep", f.rep}, {"seed", f.seed}, {"message", f.message}});
    jv["failures"] = fails;
    variants.push_back(jv);
  }
  j["models"] = variants;
  return j;
}

json dic_json(const DicReport& r) { return {{"Dbar", r.Dbar}, {"D_at_mean", r.D_at_mean}, {"pD", r.pD}, {"DIC", r.DIC}}; }

json make_manifest(const RunConfig& cfg, const std::string& command) {
  json m;
  m["command"] = command;
  m["version"] = MIXFDA_VERSION;
  m["spec_version"] = 1;
  m["seed"] = cfg.seed;
  m["config_hash"] = hex64(fnv1a64(cfg.source.dump()));
  m["n_iter"] = cfg.chain.n_iter;
  m["burn_in"] = cfg.chain.burn_in;
  m["thin"] = cfg.chain.thin;
  m["stored_draws"] = cfg.chain.stored_count();
  m["config"] = cfg.source;
  return m;
}

void write_json(const std::string& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

std::vector<TargetPoint> load_targets(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open targets file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing header", 1);
  csv::strip_bom(line);
  const auto header = csv::split(line);
  const bool with_y = header == std::vector<std::string>{"subject_id", "response_id", "t", "y"};
  if (!with_y && header != std::vector<std::string>{"subject_id", "response_id", "t"})
    throw ParseError("header must be 'subject_id,response_id,t[,y]'", 1);
  std::vector<TargetPoint> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (csv::trim(line).empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != header.size()) throw ParseError("field count does not match header", lineno);
    TargetPoint tp;
    tp.subject_id = f[0];
    tp.response_id = static_cast<int>(csv::parse_double(f[1], lineno, "response_id"));
    tp.t = csv::parse_double(f[2], lineno, "t");
    if (with_y) tp.y = csv::parse_double(f[3], lineno, "y");
    out.push_back(std::move(tp));
  }
  return out;
}

}  // namespace mixfda
