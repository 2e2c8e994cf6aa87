#include "difcal/mds.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace difcal {

Matrix gamma_distances(const Matrix& gamma_hat) {
  if (!gamma_hat.allFinite())
    throw std::invalid_argument("gamma_distances: non-finite entries");
  const int p = static_cast<int>(gamma_hat.cols());
  Matrix dist = Matrix::Zero(p, p);
  for (int i = 0; i < p; ++i) {
    for (int k = i + 1; k < p; ++k) {
      const double d = (gamma_hat.col(i) - gamma_hat.col(k)).norm();
      dist(i, k) = d;
      dist(k, i) = d;
    }
  }
  return dist;
}

Embedding classical_mds(const Matrix& dist, int dim) {
  const int p = static_cast<int>(dist.rows());
  if (p < 1 || dist.cols() != p)
    throw std::invalid_argument("classical_mds: distance matrix not square");
  if (dim < 1) throw std::invalid_argument("classical_mds: dim must be >= 1");
  if (!dist.allFinite() || (dist.array() < -1e-12).any())
    throw std::invalid_argument("classical_mds: invalid distances");
  if ((dist - dist.transpose()).lpNorm<Eigen::Infinity>() > 1e-10 ||
      dist.diagonal().lpNorm<Eigen::Infinity>() > 1e-10)
    throw std::invalid_argument(
        "classical_mds: matrix must be symmetric with zero diagonal");

  const Matrix centerer =
      Matrix::Identity(p, p) - Matrix::Constant(p, p, 1.0 / p);
  const Matrix b =
      -0.5 * centerer * dist.cwiseProduct(dist) * centerer;

  Eigen::SelfAdjointEigenSolver<Matrix> solver(b);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("classical_mds: eigendecomposition failed");

  Embedding emb;
  emb.coords = Matrix::Zero(p, dim);
  emb.eigenvalues = Vector::Zero(dim);
  for (int m = 0; m < dim; ++m) {
    const int src = p - 1 - m;  // solver returns ascending order
    if (src < 0) break;
    const double lambda = solver.eigenvalues()[src];
    emb.eigenvalues[m] = lambda;
    if (lambda <= 0.0) continue;  // clamped to a zero column
    ++emb.positive_count;
    Vector column = solver.eigenvectors().col(src) * std::sqrt(lambda);
    int arg = 0;
    for (int i = 1; i < p; ++i)
      if (std::abs(column[i]) > std::abs(column[arg])) arg = i;
    if (column[arg] < 0.0) column = -column;
    emb.coords.col(m) = column;
  }
  return emb;
}

}  // namespace difcal
