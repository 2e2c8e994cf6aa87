#include "difcal/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace difcal {

namespace {

int sign_of(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace

double kendall(const Vector& mu_hat, const Vector& mu_true) {
  const int p = static_cast<int>(mu_hat.size());
  if (p < 2 || mu_true.size() != p)
    throw std::invalid_argument("kendall: need two equal-length vectors");
  long sum = 0;
  for (int l = 0; l < p; ++l)
    for (int m = l + 1; m < p; ++m)
      sum += sign_of(mu_hat[l] - mu_hat[m]) * sign_of(mu_true[l] - mu_true[m]);
  return 2.0 * static_cast<double>(sum) / (static_cast<double>(p) * (p - 1));
}

MseBlock mse_report(const ParamSet& fitted, const ParamSet& truth) {
  if (fitted.items() != truth.items() || fitted.groups() != truth.groups())
    throw std::invalid_argument("mse_report: dimension mismatch");
  MseBlock block;
  block.mu = (fitted.mu - truth.mu).squaredNorm() / truth.groups();
  block.sigma = (fitted.sigma - truth.sigma).squaredNorm() / truth.groups();
  block.a = (fitted.a - truth.a).squaredNorm() / truth.items();
  block.d = (fitted.d - truth.d).squaredNorm() / truth.items();
  block.gamma = (fitted.gamma - truth.gamma).squaredNorm() /
                (static_cast<double>(truth.items()) * truth.groups());
  return block;
}

SelectionBlock selection_report(const std::set<Cell>& flags,
                                const Matrix& truth_gamma) {
  const int J = static_cast<int>(truth_gamma.rows());
  const int p = static_cast<int>(truth_gamma.cols());
  for (const auto& [item, group] : flags) {
    if (item < 0 || item >= J || group < 0 || group >= p)
      throw std::invalid_argument("selection_report: flag out of range");
  }
  constexpr double kZeroTol = 1e-10;
  int zeros = 0, nonzeros = 0, flagged_zeros = 0, missed_nonzeros = 0;
  for (int j = 0; j < J; ++j) {
    for (int k = 0; k < p; ++k) {
      const bool is_zero = std::abs(truth_gamma(j, k)) <= kZeroTol;
      const bool flagged = flags.count({j, k}) > 0;
      if (is_zero) {
        ++zeros;
        if (flagged) ++flagged_zeros;
      } else {
        ++nonzeros;
        if (!flagged) ++missed_nonzeros;
      }
    }
  }
  SelectionBlock block;
  block.zero_classified = J * p - static_cast<int>(flags.size());
  if (zeros > 0) block.fpr = static_cast<double>(flagged_zeros) / zeros;
  if (nonzeros > 0) block.fnr = static_cast<double>(missed_nonzeros) / nonzeros;
  return block;
}

}  // namespace difcal
