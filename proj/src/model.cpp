#include "difcal/model.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include "difcal/parallel.hpp"

namespace difcal {

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;  // log(2*pi)/2

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

int default_workers() {
  if (const char* env = std::getenv("DIFCAL_WORKERS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

void ResponseDataset::validate() const {
  require(item_count >= 1, "dataset: item_count must be positive");
  require(group_count >= 1, "dataset: group_count must be positive");
  std::vector<char> item_seen(item_count, 0);
  std::vector<char> group_seen(group_count, 0);
  std::vector<char> mark(item_count, 0);
  for (const auto& person : persons) {
    require(person.group >= 0 && person.group < group_count,
            "dataset: group index out of range");
    require(std::isfinite(person.weight) && person.weight > 0.0,
            "dataset: weights must be finite and positive");
    group_seen[person.group] = 1;
    for (const auto& [item, value] : person.responses) {
      require(item >= 0 && item < item_count,
              "dataset: item index out of range");
      require(value == 0 || value == 1, "dataset: responses must be 0 or 1");
      require(!mark[item], "dataset: duplicate (person, item) response");
      mark[item] = 1;
      item_seen[item] = 1;
    }
    for (const auto& [item, value] : person.responses) mark[item] = 0;
  }
  for (int j = 0; j < item_count; ++j)
    require(item_seen[j], "dataset: item has no observed response");
  for (int k = 0; k < group_count; ++k)
    require(group_seen[k], "dataset: empty group");
}

std::string ResponseDataset::item_label(int j) const {
  if (j < static_cast<int>(item_labels.size())) return item_labels[j];
  return "i" + std::to_string(j + 1);
}

std::string ResponseDataset::group_label(int k) const {
  if (k < static_cast<int>(group_labels.size())) return group_labels[k];
  return "g" + std::to_string(k + 1);
}

ParamSet ParamSet::zeros(int items, int groups) {
  ParamSet ps;
  ps.a = Vector::Ones(items);
  ps.d = Vector::Zero(items);
  ps.mu = Vector::Zero(groups);
  ps.sigma = Vector::Ones(groups);
  ps.gamma = Matrix::Zero(items, groups);
  return ps;
}

void ParamSet::validate() const {
  const int J = items();
  const int p = groups();
  require(J >= 1 && p >= 1, "params: empty parameter set");
  require(d.size() == J, "params: a and d must have equal length");
  require(sigma.size() == p, "params: mu and sigma must have equal length");
  require(gamma.rows() == J && gamma.cols() == p,
          "params: gamma dimensions inconsistent with a and mu");
  require(a.allFinite() && d.allFinite() && mu.allFinite() &&
              sigma.allFinite() && gamma.allFinite(),
          "params: entries must be finite");
  require((sigma.array() > 0.0).all(), "params: sigma must be positive");
}

QuadGrid make_grid(int q, double lo, double hi) {
  require(q >= 2, "make_grid: need at least two nodes");
  require(std::isfinite(lo) && std::isfinite(hi) && lo < hi,
          "make_grid: need finite lo < hi");
  QuadGrid grid;
  grid.spacing = (hi - lo) / (q - 1);
  grid.nodes = Vector::LinSpaced(q, lo, hi);
  return grid;
}

double irf_prob(double a, double d, double gamma, double theta) {
  require(std::isfinite(a) && std::isfinite(d) && std::isfinite(gamma) &&
              std::isfinite(theta),
          "irf_prob: non-finite input");
  const double x = a * theta + d + gamma;
  double prob;
  if (x >= 0.0) {
    prob = 1.0 / (1.0 + std::exp(-x));
  } else {
    const double e = std::exp(x);
    prob = e / (1.0 + e);
  }
  if (prob < kProbFloor) return kProbFloor;
  if (prob > 1.0 - kProbFloor) return 1.0 - kProbFloor;
  return prob;
}

double log_sigmoid(double x) {
  // -softplus(-x), evaluated on the side that avoids overflow.
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

double pairwise_sum(const double* values, int n) {
  if (n <= 8) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += values[i];
    return s;
  }
  const int half = n / 2;
  return pairwise_sum(values, half) + pairwise_sum(values + half, n - half);
}

ParamSet apply_equivalence(const ParamSet& params, const Vector& c,
                           const Vector& h) {
  params.validate();
  require(c.size() == params.groups(), "apply_equivalence: c has wrong size");
  require(h.size() == params.items(), "apply_equivalence: h has wrong size");
  require(c.allFinite() && h.allFinite(),
          "apply_equivalence: non-finite shift");
  require(std::abs(c.sum()) <= 1e-10,
          "apply_equivalence: c must sum to zero");
  ParamSet out = params;
  out.mu += c;
  out.d += h;
  out.gamma -= params.a * c.transpose();
  out.gamma.colwise() -= h;
  return out;
}

ParamSet recenter_means(const ParamSet& params) {
  const double shift = params.mu.mean();
  ParamSet out = params;
  out.mu.array() -= shift;
  out.d += shift * params.a;
  return out;
}

namespace detail {

// log of the clamped Bernoulli success/failure probabilities for logit x.
void clamped_log_probs(double x, double& lp1, double& lp0) {
  static const double kLogFloor = std::log(kProbFloor);
  lp1 = log_sigmoid(x);
  lp0 = lp1 - x;  // log(1 - p) = log p - x
  if (lp1 < kLogFloor) lp1 = kLogFloor;
  if (lp0 < kLogFloor) lp0 = kLogFloor;
}

}  // namespace detail

double log_likelihood(const ParamSet& params, const ResponseDataset& data,
                      const QuadGrid& grid, LogLikStats* stats, int threads) {
  params.validate();
  require(params.items() == data.item_count &&
              params.groups() == data.group_count,
          "log_likelihood: params do not match dataset dimensions");
  const int N = data.num_persons();
  const int Q = grid.size();
  const int J = data.item_count;
  const int p = data.group_count;
  if (N == 0) {
    if (stats) stats->persons_without_responses = 0;
    return 0.0;
  }

  // Per (group, node) log prior mass and per (item, group, node) log
  // response probabilities, shared by all persons.
  Matrix log_prior(p, Q);
  const double log_spacing = std::log(grid.spacing);
  for (int k = 0; k < p; ++k) {
    const double s = params.sigma[k];
    for (int q = 0; q < Q; ++q) {
      const double z = (grid.nodes[q] - params.mu[k]) / s;
      log_prior(k, q) =
          -0.5 * z * z - std::log(s) - kHalfLog2Pi + log_spacing;
    }
  }
  std::vector<RowMatrix> lp1(p, RowMatrix(J, Q)), lp0(p, RowMatrix(J, Q));
  for (int k = 0; k < p; ++k) {
    for (int j = 0; j < J; ++j) {
      const double a = params.a[j];
      const double b = params.d[j] + params.gamma(j, k);
      for (int q = 0; q < Q; ++q) {
        detail::clamped_log_probs(a * grid.nodes[q] + b, lp1[k](j, q),
                                  lp0[k](j, q));
      }
    }
  }

  std::vector<double> person_ll(N, 0.0);
  std::atomic<int> empty_count{0};
  const int block = 1024;
  const int blocks = (N + block - 1) / block;
  parallel_blocks(blocks, threads, [&](int b) {
    Vector acc(Q);
    int local_empty = 0;
    const int lo = b * block;
    const int hi = std::min(N, lo + block);
    for (int i = lo; i < hi; ++i) {
      const PersonRecord& person = data.persons[i];
      if (person.responses.empty()) {
        ++local_empty;
        person_ll[i] = 0.0;
        continue;
      }
      const int k = person.group;
      for (int q = 0; q < Q; ++q) acc[q] = log_prior(k, q);
      for (const auto& [item, value] : person.responses) {
        const Matrix& table = value ? lp1[k] : lp0[k];
        for (int q = 0; q < Q; ++q) acc[q] += table(item, q);
      }
      const double m = acc.maxCoeff();
      double sum = 0.0;
      for (int q = 0; q < Q; ++q) sum += std::exp(acc[q] - m);
      person_ll[i] = person.weight * (m + std::log(sum));
    }
    if (local_empty) empty_count += local_empty;
  });
  if (stats) stats->persons_without_responses = empty_count.load();
  return pairwise_sum(person_ll.data(), N);
}

}  // namespace difcal
