#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace difcal {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Cell = std::pair<int, int>;  // (item, group), zero-based

/// One respondent: group membership, sampling weight, and the observed
/// (item, 0/1 response) pairs. Items not listed were never administered.
struct PersonRecord {
  int group = 0;
  double weight = 1.0;
  std::vector<std::pair<int, int>> responses;
};

/// Sparse weighted binary response data for J items and p groups.
struct ResponseDataset {
  std::vector<PersonRecord> persons;
  int item_count = 0;
  int group_count = 0;

  // Label tables for file round-trips; empty means "use default labels".
  std::vector<std::string> item_labels;
  std::vector<std::string> group_labels;
  std::vector<std::string> person_ids;

  int num_persons() const { return static_cast<int>(persons.size()); }

  /// Throws std::invalid_argument on inconsistent indices, duplicate
  /// (person, item) pairs, non-positive or non-finite weights, items with
  /// no observed response anywhere, or groups with no members.
  void validate() const;

  std::string item_label(int j) const;
  std::string group_label(int k) const;
};

/// Full parameter vector: slopes, intercepts, group means/SDs, DIF matrix.
struct ParamSet {
  Vector a;      // J
  Vector d;      // J
  Vector mu;     // p
  Vector sigma;  // p, strictly positive
  Matrix gamma;  // J x p

  int items() const { return static_cast<int>(a.size()); }
  int groups() const { return static_cast<int>(mu.size()); }

  static ParamSet zeros(int items, int groups);

  /// Throws std::invalid_argument on non-finite entries, non-positive
  /// sigma, or inconsistent dimensions.
  void validate() const;
};

/// Uniformly spaced latent-trait evaluation points.
struct QuadGrid {
  Vector nodes;
  double spacing = 0.0;

  int size() const { return static_cast<int>(nodes.size()); }
};

/// Q equally spaced nodes on [lo, hi]. Requires q >= 2 and lo < hi.
QuadGrid make_grid(int q, double lo, double hi);

/// "g01".."g10" style label tables, zero-padded to a common width.
std::vector<std::string> default_labels(const char* prefix, int count);

/// Per-person normalized posterior mass of the latent trait over a grid.
/// Each row sums to one.
struct PosteriorTable {
  RowMatrix mass;  // N x Q
  QuadGrid grid;
};

}  // namespace difcal
