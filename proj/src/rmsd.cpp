#include "difcal/rmsd.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "difcal/model.hpp"

namespace difcal {

namespace {

constexpr double kMassFloor = 1e-12;

void fill_model_curves(const ParamSet& fitted, int item, int group,
                       CurveSlice& slice) {
  const int Q = slice.grid.size();
  slice.model1.resize(Q);
  slice.model0.resize(Q);
  for (int q = 0; q < Q; ++q) {
    const double prob = irf_prob(fitted.a[item], fitted.d[item],
                                 fitted.gamma(item, group),
                                 slice.grid.nodes[q]);
    slice.model1[q] = prob;
    slice.model0[q] = 1.0 - prob;
  }
}

void curves_from_counts(const Vector& num1, const Vector& den,
                        CurveSlice& slice) {
  const int Q = static_cast<int>(den.size());
  slice.observed1 = Vector::Zero(Q);
  slice.observed0 = Vector::Zero(Q);
  slice.valid.assign(Q, false);
  for (int q = 0; q < Q; ++q) {
    if (den[q] < kMassFloor) continue;
    slice.valid[q] = true;
    slice.observed1[q] = num1[q] / den[q];
    slice.observed0[q] = (den[q] - num1[q]) / den[q];
  }
}

}  // namespace

CurveSlice pseudo_observed(const PosteriorTable& posterior,
                           const ResponseDataset& data,
                           const ParamSet& fitted, int item, int group,
                           bool weighted) {
  if (item < 0 || item >= data.item_count || group < 0 ||
      group >= data.group_count)
    throw std::invalid_argument("pseudo_observed: cell out of range");
  if (posterior.mass.rows() != data.num_persons())
    throw std::invalid_argument("pseudo_observed: posterior does not match");
  const int Q = posterior.grid.size();
  Vector num1 = Vector::Zero(Q);
  Vector den = Vector::Zero(Q);
  for (int i = 0; i < data.num_persons(); ++i) {
    const PersonRecord& person = data.persons[i];
    if (person.group != group) continue;
    for (const auto& [resp_item, value] : person.responses) {
      if (resp_item != item) continue;
      const double w = weighted ? person.weight : 1.0;
      const double* mass =
          posterior.mass.data() + static_cast<std::ptrdiff_t>(i) * Q;
      for (int q = 0; q < Q; ++q) den[q] += w * mass[q];
      if (value)
        for (int q = 0; q < Q; ++q) num1[q] += w * mass[q];
      break;
    }
  }
  CurveSlice slice;
  slice.grid = posterior.grid;
  curves_from_counts(num1, den, slice);
  fill_model_curves(fitted, item, group, slice);
  return slice;
}

std::optional<double> rmsd_stat(const CurveSlice& curve, double mu_k,
                                double sigma_k) {
  if (sigma_k <= 0.0 || !std::isfinite(mu_k) || !std::isfinite(sigma_k))
    throw std::invalid_argument("rmsd_stat: invalid group distribution");
  const int Q = curve.grid.size();
  double mass = 0.0;
  double sq0 = 0.0, sq1 = 0.0;
  for (int q = 0; q < Q; ++q) {
    if (!curve.valid[q]) continue;
    const double z = (curve.grid.nodes[q] - mu_k) / sigma_k;
    const double phi = std::exp(-0.5 * z * z) /
                       (sigma_k * std::sqrt(2.0 * M_PI)) *
                       curve.grid.spacing;
    mass += phi;
    const double d0 = curve.observed0[q] - curve.model0[q];
    const double d1 = curve.observed1[q] - curve.model1[q];
    sq0 += d0 * d0 * phi;
    sq1 += d1 * d1 * phi;
  }
  if (mass <= 0.0) return std::nullopt;
  return 0.5 * (std::sqrt(sq0 / mass) + std::sqrt(sq1 / mass));
}

RmsdTable rmsd_table(const PosteriorTable& posterior,
                     const ResponseDataset& data, const ParamSet& fitted,
                     double threshold, bool weighted) {
  if (threshold <= 0.0)
    throw std::invalid_argument("rmsd_table: threshold must be positive");
  fitted.validate();
  if (fitted.items() != data.item_count ||
      fitted.groups() != data.group_count)
    throw std::invalid_argument("rmsd_table: params do not match dataset");
  if (posterior.mass.rows() != data.num_persons())
    throw std::invalid_argument("rmsd_table: posterior does not match");

  const int J = data.item_count;
  const int p = data.group_count;
  const int Q = posterior.grid.size();

  // One pass over persons accumulating, per cell, the posterior mass of
  // respondents and of correct respondents at each node.
  std::vector<RowMatrix> num1(p, RowMatrix::Zero(J, Q));
  std::vector<RowMatrix> den(p, RowMatrix::Zero(J, Q));
  for (int i = 0; i < data.num_persons(); ++i) {
    const PersonRecord& person = data.persons[i];
    const int k = person.group;
    const double w = weighted ? person.weight : 1.0;
    const double* mass =
        posterior.mass.data() + static_cast<std::ptrdiff_t>(i) * Q;
    for (const auto& [item, value] : person.responses) {
      double* dptr = den[k].data() + static_cast<std::ptrdiff_t>(item) * Q;
      for (int q = 0; q < Q; ++q) dptr[q] += w * mass[q];
      if (!value) continue;
      double* nptr = num1[k].data() + static_cast<std::ptrdiff_t>(item) * Q;
      for (int q = 0; q < Q; ++q) nptr[q] += w * mass[q];
    }
  }

  RmsdTable table;
  table.threshold = threshold;
  table.values =
      Matrix::Constant(J, p, std::numeric_limits<double>::quiet_NaN());
  CurveSlice slice;
  slice.grid = posterior.grid;
  for (int j = 0; j < J; ++j) {
    for (int k = 0; k < p; ++k) {
      curves_from_counts(num1[k].row(j).transpose(), den[k].row(j).transpose(),
                         slice);
      fill_model_curves(fitted, j, k, slice);
      const auto value = rmsd_stat(slice, fitted.mu[k], fitted.sigma[k]);
      if (!value) continue;
      table.values(j, k) = *value;
      if (*value >= threshold) table.flags.insert({j, k});
    }
  }
  return table;
}

RmsdPipelineResult rmsd_pipeline(const ResponseDataset& data, double threshold,
                                 const FitConfig& config, int max_rounds,
                                 bool weighted) {
  if (threshold <= 0.0)
    throw std::invalid_argument("rmsd_pipeline: threshold must be positive");
  if (max_rounds < 1)
    throw std::invalid_argument("rmsd_pipeline: need at least one round");

  RmsdPipelineResult result;
  result.baseline = fit(data, ConstraintProfile::baseline(), config);

  PosteriorTable posterior =
      e_step(result.baseline.params, data, config.grid);
  result.table = rmsd_table(posterior, data, result.baseline.params,
                            threshold, weighted);

  std::set<Cell> flags = result.table.flags;
  FitConfig relaxed_config = config;
  relaxed_config.start = result.baseline.params;
  result.relaxed =
      fit(data, ConstraintProfile::relaxed(flags), relaxed_config);

  for (int round = 1; round < max_rounds; ++round) {
    posterior = e_step(result.relaxed.params, data, config.grid);
    RmsdTable next = rmsd_table(posterior, data, result.relaxed.params,
                                threshold, weighted);
    std::set<Cell> extended = flags;
    extended.insert(next.flags.begin(), next.flags.end());
    next.flags = extended;
    result.table = std::move(next);
    if (extended == flags) break;
    flags = std::move(extended);
    relaxed_config.start = result.relaxed.params;
    result.relaxed =
        fit(data, ConstraintProfile::relaxed(flags), relaxed_config);
  }
  return result;
}

}  // namespace difcal
