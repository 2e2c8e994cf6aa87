#pragma once

#include <optional>
#include <set>

#include "difcal/types.hpp"

namespace difcal {

/// Pairwise sign-concordance of two group-mean vectors,
/// 2/(p(p-1)) * sum over pairs of sign(diff_hat) * sign(diff_true);
/// tied pairs contribute zero.
double kendall(const Vector& mu_hat, const Vector& mu_true);

/// Mean squared error per parameter family.
struct MseBlock {
  double mu = 0.0;
  double sigma = 0.0;
  double gamma = 0.0;
  double a = 0.0;
  double d = 0.0;
};

MseBlock mse_report(const ParamSet& fitted, const ParamSet& truth);

/// Accuracy of a flag set against the true DIF matrix. Cells within 1e-10
/// of zero count as truly invariant. A rate whose denominator is empty is
/// reported as missing.
struct SelectionBlock {
  int zero_classified = 0;           // cells not flagged
  std::optional<double> fpr;         // flagged share of truly zero cells
  std::optional<double> fnr;         // unflagged share of truly nonzero cells
};

SelectionBlock selection_report(const std::set<Cell>& flags,
                                const Matrix& truth_gamma);

struct EvalReport {
  double kendall = 0.0;
  MseBlock mse;
  std::optional<SelectionBlock> selection;
};

}  // namespace difcal
