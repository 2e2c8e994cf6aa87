#pragma once

#include "difcal/types.hpp"

namespace difcal {

/// Probability floor; response probabilities are clamped into
/// [kProbFloor, 1 - kProbFloor] before any logarithm is taken.
inline constexpr double kProbFloor = 1e-12;

/// 2PL response probability with a group-specific intercept offset:
/// logistic(a * theta + d + gamma), evaluated in a branch that is stable
/// for large |logit| and clamped into [kProbFloor, 1 - kProbFloor].
/// Throws std::invalid_argument on non-finite input.
double irf_prob(double a, double d, double gamma, double theta);

/// log(logistic(x)), stable for any finite x; not clamped.
double log_sigmoid(double x);

struct LogLikStats {
  int persons_without_responses = 0;
};

/// Weighted marginal log-likelihood of the dataset under `params`, with the
/// latent-trait integral evaluated on `grid` (group-normal density times
/// node spacing). Persons with no observed items contribute exactly zero
/// and are counted in `stats` when given. The person sum uses a fixed
/// pairwise reduction so parallel and serial runs agree.
double log_likelihood(const ParamSet& params, const ResponseDataset& data,
                      const QuadGrid& grid, LogLikStats* stats = nullptr,
                      int threads = 1);

/// Likelihood-preserving reparameterization: mu += c, d += h,
/// gamma(j,k) -= a(j) * c(k) + h(j). Requires sum(c) == 0 within 1e-10.
ParamSet apply_equivalence(const ParamSet& params, const Vector& c,
                           const Vector& h);

/// Shifts all group means by -mean(mu) and folds the shift into the
/// intercepts (d += a * mean(mu)); gamma is unchanged and the marginal
/// likelihood is preserved. Leaves sum(mu) == 0.
ParamSet recenter_means(const ParamSet& params);

/// Deterministic pairwise (tree) sum of a contiguous range.
double pairwise_sum(const double* values, int n);

}  // namespace difcal
