#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mixfda/config.hpp"

namespace mixfda {

/// Shortest round-trip-safe text for a double (17 significant digits).
std::string format_double(double x);

std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t x);

/// Columns: iteration, beta[1..J], "Sigma[k,l]" (quoted, row-major, 1-based), tau2[1..P].
void write_draws_csv(const std::string& path, const PosteriorDraws& draws);
PosteriorDraws read_draws_csv(const std::string& path, int fixed_dim, int random_dim, int responses);

/// subject_id,response_id,t,y
void write_dataset_csv(const std::string& path, const FunctionalDataset& d);

/// Header row `t,<grid...>`, then one row per grid point.
void write_surface_csv(const std::string& path, const Vec& grid, const Mat& values);

/// k,eigenvalue,proportion,cumulative
void write_eigenvalues_csv(const std::string& path, const Vec& values);
/// response_id,t,theta[1..n]
void write_eigenfunctions_csv(const std::string& path, const EigenSystem<double>& es);

/// response_id,t,mean,variance,median,lower,upper
void write_summary_csv(const std::string& path, const PosteriorSummary& s);

/// subject_id,response_id,t,prediction,lower,upper
void write_predictions_csv(const std::string& path, const PredictionResult& r);

/// Study table: model,response,mise,mise_hundredths,coverage_percent,
/// ci_length,ci_length_hundredths,mspe,mspe_hundredths,replications,failures
void write_study_csv(const std::string& path, const StudyReport& r);
nlohmann::json study_json(const StudyReport& r);

nlohmann::json dic_json(const DicReport& r);

/// Seed, config hash, version and iteration counts of a run.
nlohmann::json make_manifest(const RunConfig& cfg, const std::string& command);

void write_json(const std::string& path, const nlohmann::json& j);

struct TargetPoint {
  std::string subject_id;
  int response_id = 1;
  double t = 0.0;
  std::optional<double> y;
};

/// subject_id,response_id,t[,y]
std::vector<TargetPoint> load_targets(const std::string& path);

}  // namespace mixfda
