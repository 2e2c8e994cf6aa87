#pragma once

#include "difcal/types.hpp"

namespace difcal {

/// Euclidean distances between the DIF profiles (columns) of gamma_hat.
Matrix gamma_distances(const Matrix& gamma_hat);

struct Embedding {
  Matrix coords;       // p x dim, centered columns
  Vector eigenvalues;  // retained spectrum, descending
  /// Number of retained eigenvalues that are strictly positive; columns
  /// beyond it are zero-padded.
  int positive_count = 0;

  bool deficient() const {
    return positive_count < static_cast<int>(eigenvalues.size());
  }
};

/// Classical (Torgerson) scaling: double-center the squared distances,
/// take the top eigenpairs, scale eigenvectors by the square roots of the
/// clamped-nonnegative eigenvalues. The entry of largest magnitude in each
/// coordinate column is made positive, so the embedding is deterministic.
Embedding classical_mds(const Matrix& dist, int dim = 2);

}  // namespace difcal
