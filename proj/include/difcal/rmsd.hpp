#pragma once

#include <optional>
#include <set>

#include "difcal/em.hpp"
#include "difcal/types.hpp"

namespace difcal {

/// Pseudo-observed and model-implied response curves for one (item, group)
/// cell, per response category, over the quadrature nodes. Nodes whose
/// posterior denominator mass falls below 1e-12 are marked invalid and
/// excluded from any aggregation.
struct CurveSlice {
  Vector observed1, observed0;
  Vector model1, model0;
  std::vector<bool> valid;
  QuadGrid grid;

  bool fully_masked() const {
    for (bool v : valid)
      if (v) return false;
    return true;
  }
};

/// Posterior-weighted empirical response curve for one cell, next to the
/// curve implied by the fitted parameters. Persons enter with indicator
/// weight one unless `weighted` folds in the sampling weights.
CurveSlice pseudo_observed(const PosteriorTable& posterior,
                           const ResponseDataset& data,
                           const ParamSet& fitted, int item, int group,
                           bool weighted = false);

/// Root-mean-square deviation between the observed and model curves,
/// averaged over the two response categories, with the group-normal
/// density renormalized over the valid nodes. Empty valid set -> nullopt.
std::optional<double> rmsd_stat(const CurveSlice& curve, double mu_k,
                                double sigma_k);

struct RmsdTable {
  Matrix values;  // J x p, NaN where the statistic is undefined
  double threshold = 0.0;
  std::set<Cell> flags;  // cells with value >= threshold

  bool missing(int item, int group) const {
    return !std::isfinite(values(item, group));
  }
};

/// Statistics for every (item, group) cell under one fitted model.
/// Cells with an undefined statistic are never flagged.
RmsdTable rmsd_table(const PosteriorTable& posterior,
                     const ResponseDataset& data, const ParamSet& fitted,
                     double threshold, bool weighted = false);

struct RmsdPipelineResult {
  FitResult baseline;
  RmsdTable table;
  FitResult relaxed;
};

/// The full competitor pipeline: fit the invariance baseline, flag cells
/// whose statistic reaches the threshold, refit with those cells freed.
/// With max_rounds > 1 the table is recomputed under the relaxed fit and
/// newly flagged cells extend the set until clean or the cap is reached.
RmsdPipelineResult rmsd_pipeline(const ResponseDataset& data, double threshold,
                                 const FitConfig& config, int max_rounds = 1,
                                 bool weighted = false);

}  // namespace difcal
