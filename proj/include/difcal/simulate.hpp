#pragma once

#include <cstdint>
#include <string>

#include "difcal/types.hpp"

namespace difcal {

/// A generating model for synthetic response data. The DIF matrix always
/// satisfies the row/column sparsity checks and therefore the alignment
/// identification condition.
struct SimTruth {
  ParamSet params;
  std::string setting;  // S1, S2, S3, S4 or custom
  std::uint64_t seed = 0;
};

/// Independent substream seed for replication `index` of a campaign seed.
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index);

/// The printed 15 x 10 DIF fixtures. The first carries fourteen printed
/// rows plus an all-zero fifteenth row so that both fixtures share J = 15.
Matrix fixture_s1_gamma();
Matrix fixture_s2_gamma();

/// Draws a generating model for one of the simulation settings. Blockwise
/// settings (S1, S3) place nonzeros in two item-block x group-block corners
/// with per-cell dropout; dispersed settings (S2, S4, custom) scatter a
/// density-matched count uniformly. At J = 15, p = 10 the S1/S2 DIF
/// matrices are the printed fixtures. Slopes are Unif[1,2] with the first
/// fixed at one, intercepts Unif[-1,1], means Unif[-0.3,0.3] centered to
/// sum zero, variances Unif[0.4,1.2], nonzero DIF entries Unif[1,3].
/// Draws are rejected until the sparsity checks pass (at most 1000 tries).
SimTruth gen_truth(const std::string& setting, int items, int groups,
                   std::uint64_t seed);

/// Balanced complete unit-weight dataset: N/p persons per group in
/// contiguous blocks, latent traits from the group normals, responses from
/// the item response function for every item. Requires p | N.
ResponseDataset gen_dataset(const SimTruth& truth, long sample_size,
                            std::uint64_t seed);

}  // namespace difcal
