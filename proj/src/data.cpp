#include "mixfda/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include "mixfda/csv.hpp"
#include "mixfda/distributions.hpp"

namespace mixfda {

std::string to_string(ResponseKind k) { return k == ResponseKind::gaussian ? "gaussian" : "binary"; }

ResponseKind parse_response_kind(const std::string& s) {
  if (s == "gaussian" || s == "continuous") return ResponseKind::gaussian;
  if (s == "binary") return ResponseKind::binary;
  throw SchemaError("unknown response kind '" + s + "'");
}

double observation_link(ResponseKind k, double eta) {
  return k == ResponseKind::gaussian ? eta : (eta > 0.0 ? 1.0 : 0.0);
}

double mean_link(ResponseKind k, double eta) {
  return k == ResponseKind::gaussian ? eta : normal_cdf(eta);
}

std::size_t SubjectData::total() const {
  std::size_t n = 0;
  for (const auto& r : by_response) n += r.size();
  return n;
}

FunctionalDataset::FunctionalDataset(std::vector<ResponseKind> kinds,
                                     const std::vector<ObservationRecord>& records,
                                     std::optional<std::pair<double, double>> domain)
    : kinds_(std::move(kinds)) {
  const int P = num_responses();
  if (P == 0) throw SchemaError("at least one response kind must be declared");
  std::unordered_map<std::string, std::size_t> index;
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& r : records) {
    if (r.response_id < 1 || r.response_id > P)
      throw SchemaError("unknown response_id " + std::to_string(r.response_id));
    auto [it, inserted] = index.try_emplace(r.subject_id, subjects_.size());
    if (inserted) {
      subjects_.push_back(SubjectData{r.subject_id, std::vector<std::vector<Observation>>(static_cast<std::size_t>(P))});
    }
    subjects_[it->second].by_response[static_cast<std::size_t>(r.response_id - 1)].push_back({r.t, r.y});
    lo = std::min(lo, r.t);
    hi = std::max(hi, r.t);
  }
  for (auto& s : subjects_) {
    for (auto& obs : s.by_response) {
      std::stable_sort(obs.begin(), obs.end(), [](const Observation& a, const Observation& b) { return a.t < b.t; });
      for (std::size_t l = 1; l < obs.size(); ++l) {
        if (obs[l].t == obs[l - 1].t)
          throw DataError("duplicate observation for subject '" + s.id + "' at t=" + std::to_string(obs[l].t));
      }
    }
  }
  if (domain) {
    domain_ = *domain;
  } else if (!records.empty()) {
    domain_ = {lo, hi};
  }
  if (!(domain_.second >= domain_.first)) throw ConfigError("domain upper bound below lower bound");
  for (const auto& r : records) {
    if (r.t < domain_.first || r.t > domain_.second)
      throw DomainError("location t=" + std::to_string(r.t) + " outside the declared domain");
  }
  validate_values();
}

FunctionalDataset::FunctionalDataset(std::vector<ResponseKind> kinds, std::vector<SubjectData> subjects,
                                     std::pair<double, double> domain)
    : kinds_(std::move(kinds)), subjects_(std::move(subjects)), domain_(domain) {
  for (auto& s : subjects_) {
    if (s.by_response.size() != kinds_.size()) throw SchemaError("subject '" + s.id + "' response count mismatch");
    for (auto& obs : s.by_response) {
      std::stable_sort(obs.begin(), obs.end(), [](const Observation& a, const Observation& b) { return a.t < b.t; });
      for (std::size_t l = 1; l < obs.size(); ++l)
        if (obs[l].t == obs[l - 1].t)
          throw DataError("duplicate observation for subject '" + s.id + "' at t=" + std::to_string(obs[l].t));
      if (!obs.empty() && (obs.front().t < domain_.first || obs.back().t > domain_.second))
        throw DomainError("subject '" + s.id + "' has locations outside the declared domain");
    }
  }
  validate_values();
}

void FunctionalDataset::validate_values() const {
  for (const auto& s : subjects_) {
    for (std::size_t p = 0; p < kinds_.size(); ++p) {
      for (const auto& o : s.by_response[p]) {
        if (!std::isfinite(o.y) || !std::isfinite(o.t))
          throw DomainError("non-finite value for subject '" + s.id + "'");
        if (kinds_[p] == ResponseKind::binary && o.y != 0.0 && o.y != 1.0)
          throw DomainError("binary response " + std::to_string(p + 1) + " has value " + std::to_string(o.y) +
                            " for subject '" + s.id + "'");
      }
    }
  }
}

std::size_t FunctionalDataset::total_observations() const {
  std::size_t n = 0;
  for (const auto& s : subjects_) n += s.total();
  return n;
}

std::size_t FunctionalDataset::observations_of(int p) const {
  std::size_t n = 0;
  for (const auto& s : subjects_) n += s.count(p);
  return n;
}

std::vector<ObservationRecord> FunctionalDataset::records() const {
  std::vector<ObservationRecord> out;
  out.reserve(total_observations());
  for (const auto& s : subjects_) {
    for (std::size_t p = 0; p < s.by_response.size(); ++p) {
      for (const auto& o : s.by_response[p]) out.push_back({s.id, static_cast<int>(p) + 1, o.t, o.y});
    }
  }
  return out;
}

FunctionalDataset FunctionalDataset::select_responses(const std::vector<int>& responses) const {
  std::vector<ResponseKind> kinds;
  for (int p : responses) kinds.push_back(kind(p));
  std::vector<SubjectData> subjects;
  subjects.reserve(subjects_.size());
  for (const auto& s : subjects_) {
    SubjectData out{s.id, {}};
    for (int p : responses) out.by_response.push_back(s.by_response[static_cast<std::size_t>(p)]);
    subjects.push_back(std::move(out));
  }
  return FunctionalDataset(std::move(kinds), std::move(subjects), domain_);
}

FunctionalDataset FunctionalDataset::with_subjects(std::vector<SubjectData> subjects) const {
  return FunctionalDataset(kinds_, std::move(subjects), domain_);
}

using csv::parse_double;
using csv::split;
using csv::trim;

FunctionalDataset load_dataset(const std::string& path, const std::vector<ResponseKind>& kinds,
                               std::optional<std::pair<double, double>> domain) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open dataset file '" + path + "'");
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError("missing header", 1);
  ++lineno;
  csv::strip_bom(line);
  const auto header = split(line);
  if (header != std::vector<std::string>{"subject_id", "response_id", "t", "y"})
    throw ParseError("header must be 'subject_id,response_id,t,y'", 1);
  std::vector<ObservationRecord> records;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split(line);
    if (f.size() != 4) throw ParseError("expected 4 fields, found " + std::to_string(f.size()), lineno);
    if (f[0].empty()) throw ParseError("empty subject_id", lineno);
    ObservationRecord r;
    r.subject_id = f[0];
    const double id = parse_double(f[1], lineno, "response_id");
    if (id != std::floor(id)) throw ParseError("response_id must be an integer", lineno);
    r.response_id = static_cast<int>(id);
    r.t = parse_double(f[2], lineno, "t");
    r.y = parse_double(f[3], lineno, "y");
    if (r.response_id < 1 || r.response_id > static_cast<int>(kinds.size()))
      throw SchemaError("line " + std::to_string(lineno) + ": unknown response_id " + f[1]);
    if (kinds[static_cast<std::size_t>(r.response_id - 1)] == ResponseKind::binary && r.y != 0.0 && r.y != 1.0)
      throw DomainError("line " + std::to_string(lineno) + ": binary value " + f[3] + " not in {0,1}");
    records.push_back(std::move(r));
  }
  return FunctionalDataset(kinds, records, domain);
}

std::pair<FunctionalDataset, ScalingInfo> scale_continuous(const FunctionalDataset& d) {
  ScalingInfo info;
  info.scale.assign(static_cast<std::size_t>(d.num_responses()), 1.0);
  for (int p = 0; p < d.num_responses(); ++p) {
    if (d.kind(p) != ResponseKind::gaussian) continue;
    double n = 0.0, mean = 0.0, m2 = 0.0;
    for (const auto& s : d.subjects()) {
      for (const auto& o : s.by_response[static_cast<std::size_t>(p)]) {
        n += 1.0;
        const double delta = o.y - mean;
        mean += delta / n;
        m2 += delta * (o.y - mean);
      }
    }
    if (n < 2.0) throw DataError("response " + std::to_string(p + 1) + " needs at least 2 observations to scale");
    const double sd = std::sqrt(m2 / (n - 1.0));
    if (!(sd > 0.0)) throw DegenerateError("response " + std::to_string(p + 1) + " has zero variance");
    info.scale[static_cast<std::size_t>(p)] = sd;
  }
  std::vector<SubjectData> subjects = d.subjects();
  for (auto& s : subjects) {
    for (std::size_t p = 0; p < s.by_response.size(); ++p) {
      for (auto& o : s.by_response[p]) o.y /= info.scale[p];
    }
  }
  return {d.with_subjects(std::move(subjects)), info};
}

FunctionalDataset unscale(const FunctionalDataset& d, const ScalingInfo& info) {
  std::vector<SubjectData> subjects = d.subjects();
  for (auto& s : subjects) {
    for (std::size_t p = 0; p < s.by_response.size(); ++p) {
      for (auto& o : s.by_response[p]) o.y *= info.scale[p];
    }
  }
  return d.with_subjects(std::move(subjects));
}

ScalingInfo identity_scaling(const FunctionalDataset& d) {
  return ScalingInfo{std::vector<double>(static_cast<std::size_t>(d.num_responses()), 1.0)};
}

SubjectCovariates load_covariates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open covariate file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing header", 1);
  const auto header = split(line);
  if (header.empty() || header[0] != "subject_id") throw ParseError("first column must be subject_id", 1);
  SubjectCovariates out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split(line);
    if (f.size() != header.size()) throw ParseError("field count does not match header", lineno);
    auto& row = out[f[0]];
    for (std::size_t k = 1; k < f.size(); ++k) row[header[k]] = parse_double(f[k], lineno, header[k].c_str());
  }
  return out;
}

}  // namespace mixfda
