#pragma once

#include <optional>
#include <vector>

#include "difcal/em.hpp"
#include "difcal/types.hpp"

namespace difcal {

/// Group shifts c (sum zero) and item shifts h minimizing
/// sum |gamma(j,k) - a(j) c(k) - h(j)|, with the attained objective.
struct AlignmentSolution {
  Vector c;
  Vector h;
  double objective = 0.0;
};

struct LadResult {
  AlignmentSolution solution;
  Matrix gamma_hat;  // gamma - a c' - h 1'
};

/// Exact least-absolute-deviations alignment, solved as a linear program
/// (residuals split into nonnegative parts, one equality row for sum(c)=0)
/// with Bland pivoting, so the optimum is global and the returned vertex is
/// deterministic. Throws std::invalid_argument when every slope is zero,
/// which leaves the group shifts unidentified.
LadResult lad_align(const Matrix& gamma_tilde, const Vector& a_tilde);

/// Assembles the final parameter estimate from a Step-1 fit: group shifts
/// become the means, item shifts become the intercepts, and the DIF matrix
/// becomes the alignment residual. The marginal likelihood is unchanged.
/// Throws std::invalid_argument when the fit was not run under Step1.
ParamSet finalize(const FitResult& step1);

struct Condition1Report {
  bool holds = false;
  /// Improving or equally-good nonzero shifts when the condition fails.
  std::optional<AlignmentSolution> witness;
  /// The zero solution attains the optimum but is not its unique
  /// minimizer; strictness fails on a tie.
  bool tie = false;
};

/// Checks whether gamma already has the smallest absolute-value sum in its
/// equivalence class, i.e. whether the alignment optimum is (c, h) = (0, 0).
Condition1Report check_condition1(const Matrix& gamma, const Vector& a);

struct Prop1Report {
  std::vector<bool> col_ok;  // p entries
  std::vector<bool> row_ok;  // J entries
  bool all() const;
};

/// Slope-weighted column and unweighted row sign-balance checks; each flag
/// is the strict inequality |sum over negatives - sum over positives| <
/// sum over zeros. Entries within 1e-10 of zero count as zero. Throws
/// std::invalid_argument when any slope is zero.
Prop1Report check_prop1(const Matrix& gamma, const Vector& a);

}  // namespace difcal
