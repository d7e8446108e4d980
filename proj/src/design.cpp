#include "mixfda/design.hpp"

#include <map>

namespace mixfda {

std::string to_string(BasisFamily f) {
  switch (f) {
    case BasisFamily::bspline: return "bspline";
    case BasisFamily::fourier: return "fourier";
    case BasisFamily::polynomial: return "polynomial";
    case BasisFamily::constant: return "constant";
    case BasisFamily::sim_sine: return "sim_sine";
    case BasisFamily::sim_cosine: return "sim_cosine";
    case BasisFamily::segment_polynomial: return "segment_polynomial";
  }
  return "unknown";
}

BasisFamily parse_basis_family(const std::string& s) {
  for (auto f : {BasisFamily::bspline, BasisFamily::fourier, BasisFamily::polynomial, BasisFamily::constant,
                 BasisFamily::sim_sine, BasisFamily::sim_cosine, BasisFamily::segment_polynomial}) {
    if (to_string(f) == s) return f;
  }
  throw ConfigError("unknown basis family '" + s + "'");
}

RandomEffectsBasis RandomEffectsBasis::predetermined(const std::vector<BasisSpec>& specs) {
  std::vector<Block> blocks;
  int offset = 0;
  for (const auto& spec : specs) {
    const int w = spec.dimension();
    blocks.push_back(Block{offset, w, [spec](double t) { return eval_basis<double>(spec, t); }});
    offset += w;
  }
  return RandomEffectsBasis(offset, std::move(blocks));
}

RandomEffectsBasis RandomEffectsBasis::shared(int m, std::vector<Evaluator> evaluators) {
  std::vector<Block> blocks;
  for (auto& e : evaluators) blocks.push_back(Block{0, m, std::move(e)});
  return RandomEffectsBasis(m, std::move(blocks));
}

RandomEffectsBasis RandomEffectsBasis::separate(std::vector<int> widths, std::vector<Evaluator> evaluators) {
  if (widths.size() != evaluators.size()) throw DimensionError("widths and evaluators differ in length");
  std::vector<Block> blocks;
  int offset = 0;
  for (std::size_t p = 0; p < widths.size(); ++p) {
    blocks.push_back(Block{offset, widths[p], std::move(evaluators[p])});
    offset += widths[p];
  }
  return RandomEffectsBasis(offset, std::move(blocks));
}

RandomEffectsBasis RandomEffectsBasis::with_subject_intercept() const {
  const int P = num_responses();
  std::vector<Block> blocks = blocks_;
  for (auto& b : blocks) b.offset += P;
  return RandomEffectsBasis(columns_ + P, std::move(blocks), intercepts_ + P);
}

Vec RandomEffectsBasis::row(int p, double t) const {
  Vec out = Vec::Zero(columns_);
  if (intercepts_ > 0) out(p) = 1.0;
  const Block& b = blocks_[static_cast<std::size_t>(p)];
  if (b.width > 0) {
    const Vec v = b.eval(t);
    if (v.size() != b.width) throw DimensionError("random-effect evaluator returned the wrong width");
    out.segment(b.offset, b.width) = v;
  }
  return out;
}

Vec DesignSet::fixed_row(int p, double t, const std::map<std::string, double>& covariates) const {
  Vec out = Vec::Zero(fixed_dim());
  const MeanSpec& spec = mean[static_cast<std::size_t>(p)];
  Eigen::Index c = beta_offset[static_cast<std::size_t>(p)];
  for (const auto& name : spec.covariates) {
    auto it = covariates.find(name);
    if (it == covariates.end()) throw DataError("missing covariate '" + name + "'");
    out(c++) = it->second;
  }
  for (const auto& lc : spec.location_covariates) out(c++) = lc(t);
  const int nb = spec.smooth.dimension();
  out.segment(c, nb) = eval_basis<double>(spec.smooth, t);
  return out;
}

SubjectDesign build_subject_design(const SubjectData& s, const DesignSet& layout,
                                   const std::map<std::string, double>& covariates) {
  const int P = layout.num_responses();
  SubjectDesign sd;
  sd.id = s.id;
  const auto L = static_cast<Eigen::Index>(s.total());
  sd.U.resize(L, layout.fixed_dim());
  sd.Psi.resize(L, layout.random_dim());
  sd.y.resize(L);
  sd.response.reserve(static_cast<std::size_t>(L));
  sd.t.reserve(static_cast<std::size_t>(L));
  sd.response_start.push_back(0);
  Eigen::Index row = 0;
  for (int p = 0; p < P; ++p) {
    for (const auto& o : s.by_response[static_cast<std::size_t>(p)]) {
      sd.U.row(row) = layout.fixed_row(p, o.t, covariates).transpose();
      sd.Psi.row(row) = layout.random_effects.row(p, o.t).transpose();
      sd.y(row) = o.y;
      sd.response.push_back(p);
      sd.t.push_back(o.t);
      ++row;
    }
    sd.response_start.push_back(row);
  }
  return sd;
}

DesignSet build_designs(const FunctionalDataset& d, const std::vector<MeanSpec>& mean,
                        const SubjectCovariates& covariates, const RandomEffectsBasis& random_effects) {
  const int P = d.num_responses();
  if (static_cast<int>(mean.size()) != P) throw DimensionError("one mean spec per response is required");
  if (random_effects.num_responses() != P) throw DimensionError("random-effect basis response count mismatch");
  DesignSet out;
  out.kinds = d.kinds();
  out.mean = mean;
  out.random_effects = random_effects;
  out.beta_offset.push_back(0);
  bool needs_covariates = false;
  for (const auto& m : mean) {
    out.beta_offset.push_back(out.beta_offset.back() + m.dimension());
    needs_covariates = needs_covariates || !m.covariates.empty();
  }
  static const std::map<std::string, double> none;
  out.subjects.reserve(d.num_subjects());
  for (const auto& s : d.subjects()) {
    const std::map<std::string, double>* cov = &none;
    if (needs_covariates) {
      auto it = covariates.find(s.id);
      if (it == covariates.end()) throw DataError("no covariates for subject '" + s.id + "'");
      cov = &it->second;
    }
    out.subjects.push_back(build_subject_design(s, out, *cov));
  }
  return out;
}

InducedCovariance::InducedCovariance(RandomEffectsBasis basis, Mat sigma)
    : basis_(std::move(basis)), sigma_(std::move(sigma)) {
  if (sigma_.rows() != basis_.columns() || sigma_.cols() != basis_.columns())
    throw DimensionError("Σ is " + std::to_string(sigma_.rows()) + "x" + std::to_string(sigma_.cols()) +
                         " but the basis has " + std::to_string(basis_.columns()) + " columns");
}

double InducedCovariance::operator()(int p, double t, int q, double s) const {
  return basis_.row(p, t).dot(sigma_ * basis_.row(q, s));
}

Mat InducedCovariance::block(int p, int q, const GridSpec& grid) const {
  const Eigen::Index G = grid.size();
  Mat rp(G, basis_.columns()), rq(G, basis_.columns());
  for (Eigen::Index g = 0; g < G; ++g) {
    rp.row(g) = basis_.row(p, grid.points(g)).transpose();
    rq.row(g) = basis_.row(q, grid.points(g)).transpose();
  }
  return rp * sigma_ * rq.transpose();
}

}  // namespace mixfda
