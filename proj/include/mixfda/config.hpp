#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mixfda/simulator.hpp"

namespace mixfda {

/// Parsed run configuration (JSON, "spec_version": 1).
struct RunConfig {
  nlohmann::json source;  // as given, after overrides; hashed into manifests

  std::optional<std::string> data_path;
  std::optional<std::string> covariates_path;
  std::optional<std::pair<double, double>> domain;
  std::optional<SimulationConfig> simulation;
  std::vector<ResponseKind> kinds;

  ModelSpec model;
  ChainConfig chain;
  std::uint64_t seed = 1;

  PredictionConfig prediction;
  std::optional<std::string> heldout_path;  // observed data of new subjects
  std::optional<std::string> targets_path;  // subject_id,response_id,t[,y]
  std::optional<std::string> draws_path;    // reuse stored draws instead of refitting

  int reps = 100;
  std::vector<Variant> variants{Variant::bfpca, Variant::bbsp, Variant::ufpca, Variant::ubsp};

  StudyConfig study() const;
};

/// Validates and converts. `base_dir` resolves relative file paths.
RunConfig parse_config(const nlohmann::json& j, const std::string& base_dir = "");
RunConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override = std::nullopt);

BasisSpec parse_basis(const nlohmann::json& j, double lower, double upper);

}  // namespace mixfda
