#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mixfda/types.hpp"

namespace mixfda {

enum class ResponseKind { gaussian, binary };

std::string to_string(ResponseKind k);
ResponseKind parse_response_kind(const std::string& s);

/// Identity for Gaussian, I(η > 0) for binary.
double observation_link(ResponseKind k, double eta);
/// Mean-scale link: identity for Gaussian, Φ for binary.
double mean_link(ResponseKind k, double eta);

struct ObservationRecord {
  std::string subject_id;
  int response_id = 1;  // 1-based
  double t = 0.0;
  double y = 0.0;
};

struct Observation {
  double t;
  double y;
};

/// One subject's observations, split by response and sorted by location.
struct SubjectData {
  std::string id;
  std::vector<std::vector<Observation>> by_response;

  std::size_t count(int p) const { return by_response[static_cast<std::size_t>(p)].size(); }
  std::size_t total() const;
};

/// Sparse multivariate functional observations of mixed type. Immutable
/// once constructed; subjects keep their order of first appearance.
class FunctionalDataset {
 public:
  FunctionalDataset() = default;
  FunctionalDataset(std::vector<ResponseKind> kinds, const std::vector<ObservationRecord>& records,
                    std::optional<std::pair<double, double>> domain = std::nullopt);
  FunctionalDataset(std::vector<ResponseKind> kinds, std::vector<SubjectData> subjects,
                    std::pair<double, double> domain);

  int num_responses() const { return static_cast<int>(kinds_.size()); }
  const std::vector<ResponseKind>& kinds() const { return kinds_; }
  ResponseKind kind(int p) const { return kinds_[static_cast<std::size_t>(p)]; }
  const std::vector<SubjectData>& subjects() const { return subjects_; }
  std::size_t num_subjects() const { return subjects_.size(); }
  std::pair<double, double> domain() const { return domain_; }

  /// n = Σ_i L_i.
  std::size_t total_observations() const;
  std::size_t observations_of(int p) const;

  std::vector<ObservationRecord> records() const;

  /// Keeps only the listed responses (0-based, in the given order).
  FunctionalDataset select_responses(const std::vector<int>& responses) const;
  /// Same schema and domain with a replacement subject list.
  FunctionalDataset with_subjects(std::vector<SubjectData> subjects) const;

 private:
  void validate_values() const;

  std::vector<ResponseKind> kinds_;
  std::vector<SubjectData> subjects_;
  std::pair<double, double> domain_{0.0, 1.0};
};

FunctionalDataset load_dataset(const std::string& path, const std::vector<ResponseKind>& kinds,
                               std::optional<std::pair<double, double>> domain = std::nullopt);

/// Per-response divisor applied to Gaussian values (1 for binary responses).
struct ScalingInfo {
  std::vector<double> scale;

  double of(int p) const { return scale[static_cast<std::size_t>(p)]; }
};

/// Divides each Gaussian response by its pooled sample standard deviation
/// (denominator count − 1), ignoring location and subject.
std::pair<FunctionalDataset, ScalingInfo> scale_continuous(const FunctionalDataset& d);
FunctionalDataset unscale(const FunctionalDataset& d, const ScalingInfo& info);
ScalingInfo identity_scaling(const FunctionalDataset& d);

/// Subject-level covariates, keyed by subject id then covariate name.
using SubjectCovariates = std::map<std::string, std::map<std::string, double>>;

/// CSV with header `subject_id,<name>,<name>,...`.
SubjectCovariates load_covariates(const std::string& path);

}  // namespace mixfda
