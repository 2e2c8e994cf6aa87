#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "difcal/types.hpp"

namespace difcal {

/// Which parameters stay fixed during an EM fit.
///
/// Step1    : a(0) = 1, all mu = 0, all d = 0; gamma and sigma free.
/// Baseline : a(0) = 1, sum(mu) = 0; all gamma fixed at 0.
/// Relaxed  : a(0) = 1, sum(mu) = 0; gamma free exactly on `flags`.
struct ConstraintProfile {
  enum class Kind { Step1, Baseline, Relaxed };

  Kind kind = Kind::Baseline;
  std::set<Cell> flags;  // Relaxed only

  static ConstraintProfile step1() { return {Kind::Step1, {}}; }
  static ConstraintProfile baseline() { return {Kind::Baseline, {}}; }
  static ConstraintProfile relaxed(std::set<Cell> flags) {
    return {Kind::Relaxed, std::move(flags)};
  }

  bool gamma_free(int item, int group) const {
    switch (kind) {
      case Kind::Step1:
        return true;
      case Kind::Baseline:
        return false;
      case Kind::Relaxed:
        return flags.count({item, group}) > 0;
    }
    return false;
  }
  bool mu_fixed_at_zero() const { return kind == Kind::Step1; }
  bool d_fixed_at_zero() const { return kind == Kind::Step1; }
};

struct FitConfig {
  QuadGrid grid;
  double tol = 1e-7;       // relative log-likelihood change
  int max_iter = 1000;
  std::optional<ParamSet> start;
  int min_group_responses = 10;  // below this a free gamma cell is frozen at 0
  int threads = 1;
};

FitConfig default_fit_config();

struct FitResult {
  ParamSet params;
  std::vector<double> loglik_trace;  // marginal log-likelihood per EM cycle
  int iterations = 0;
  bool converged = false;
  ConstraintProfile profile;
  std::set<Cell> frozen_cells;       // gamma cells pinned at 0 for lack of data
  std::vector<std::string> notes;    // Newton step-halving exhaustion etc.

  double final_loglik() const {
    return loglik_trace.empty() ? 0.0 : loglik_trace.back();
  }
};

/// Normalized posterior mass of each person's latent trait over the grid.
PosteriorTable e_step(const ParamSet& params, const ResponseDataset& data,
                      const QuadGrid& grid);

/// One EM maximization step: damped Newton updates for each item's free
/// slope/intercept parameters against quadrature-weighted pseudo-counts,
/// closed-form group mean/SD updates, then the profile's recentering.
ParamSet m_step(const PosteriorTable& posterior, const ResponseDataset& data,
                const ParamSet& params, const ConstraintProfile& profile,
                const std::set<Cell>& frozen_cells = {});

/// EM-based weighted marginal maximum likelihood under `profile`.
/// Non-convergence within max_iter yields converged = false, not an error.
FitResult fit(const ResponseDataset& data, const ConstraintProfile& profile,
              const FitConfig& config);

}  // namespace difcal
