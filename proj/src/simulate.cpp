#include "difcal/simulate.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "difcal/lad.hpp"
#include "difcal/model.hpp"

namespace difcal {

namespace {

// Distribution mappers are pinned here rather than taken from <random> so
// that generated data are identical across standard library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }
  double normal() {
    double u1 = uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
  bool bernoulli(double prob) { return uniform01() < prob; }
  std::uint64_t next_index(std::uint64_t bound) { return engine_() % bound; }

 private:
  std::mt19937_64 engine_;
};

// Fraction of cells that carry DIF in the printed fixtures; generated
// patterns are density-matched to it.
constexpr double kBlockKeepProb = 0.72;      // 54 of 75 candidate cells (S1)
constexpr double kScatterDensity = 58.0 / 150.0;  // S2

Matrix blockwise_gamma(int J, int p, Rng& rng) {
  Matrix gamma = Matrix::Zero(J, p);
  const int jh = J / 2;
  const int ph = p / 2;
  for (int j = 0; j < J; ++j) {
    const int col_lo = j < jh ? ph : 0;
    const int col_hi = j < jh ? p : ph;
    for (int k = col_lo; k < col_hi; ++k) {
      if (rng.uniform01() < kBlockKeepProb)
        gamma(j, k) = rng.uniform(1.0, 3.0);
    }
  }
  return gamma;
}

Matrix scattered_gamma(int J, int p, Rng& rng) {
  Matrix gamma = Matrix::Zero(J, p);
  const int cells = J * p;
  int count = static_cast<int>(std::lround(kScatterDensity * cells));
  count = std::min(count, cells);
  std::vector<int> order(cells);
  for (int i = 0; i < cells; ++i) order[i] = i;
  for (int i = cells - 1; i > 0; --i) {
    const int r = static_cast<int>(rng.next_index(i + 1));
    std::swap(order[i], order[r]);
  }
  for (int i = 0; i < count; ++i)
    gamma(order[i] / p, order[i] % p) = rng.uniform(1.0, 3.0);
  return gamma;
}

bool blockwise_setting(const std::string& setting) {
  return setting == "S1" || setting == "S3";
}

}  // namespace

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 over seed + index * golden-ratio increment
  std::uint64_t z = seed + (index + 1) * 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Matrix fixture_s1_gamma() {
  Matrix g(15, 10);
  g << 0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 1.66, 1.25, 2.26, 2.07,  //
      0.00, 0.00, 0.00, 0.00, 0.00, 2.62, 2.20, 1.59, 0.00, 2.11,   //
      0.00, 0.00, 0.00, 0.00, 0.00, 1.77, 0.00, 2.16, 2.01, 2.74,   //
      1.42, 0.00, 0.00, 0.00, 0.00, 2.57, 2.14, 0.00, 0.00, 0.00,   //
      0.00, 2.66, 1.03, 2.82, 1.91, 0.00, 0.00, 0.00, 0.00, 0.00,   //
      0.00, 1.22, 1.26, 2.12, 1.52, 0.00, 0.00, 0.00, 0.00, 0.00,   //
      0.00, 2.41, 1.19, 2.51, 1.67, 0.00, 0.00, 0.00, 0.00, 0.00,   //
      0.00, 2.79, 1.47, 1.76, 2.78, 0.00, 0.00, 0.00, 0.00, 0.00,   //
      0.00, 1.56, 2.58, 1.75, 1.40, 0.00, 0.00, 0.00, 0.00, 0.00,   //
      0.00, 1.46, 2.20, 1.34, 2.16, 0.00, 0.00, 0.00, 0.00, 0.00,   //
      1.56, 0.00, 0.00, 0.00, 0.00, 1.35, 1.84, 0.00, 0.00, 0.00,   //
      0.00, 0.00, 0.00, 0.00, 0.00, 1.54, 0.00, 2.99, 1.45, 1.12,   //
      0.00, 0.00, 0.00, 0.00, 0.00, 1.10, 1.46, 2.69, 0.00, 2.61,   //
      0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 1.43, 2.82, 1.56, 1.21,   //
      0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.00;
  return g;
}

Matrix fixture_s2_gamma() {
  Matrix g(15, 10);
  g << 0.00, 2.40, 2.91, 0.00, 0.00, 0.00, 2.62, 0.00, 2.06, 0.00,  //
      0.00, 0.00, 1.40, 0.00, 0.00, 0.00, 2.12, 0.00, 0.00, 1.53,   //
      0.00, 0.00, 1.87, 0.00, 1.28, 0.00, 0.00, 1.96, 0.00, 1.45,   //
      0.00, 1.06, 0.00, 0.00, 1.55, 0.00, 0.00, 0.00, 0.00, 1.12,   //
      0.00, 0.00, 2.86, 0.00, 0.00, 2.10, 2.07, 2.65, 0.00, 0.00,   //
      0.00, 0.00, 0.00, 1.76, 0.00, 0.00, 0.00, 1.51, 2.87, 1.51,   //
      0.00, 0.00, 2.65, 0.00, 2.86, 1.31, 0.00, 2.78, 0.00, 0.00,   //
      2.40, 1.89, 0.00, 2.84, 0.00, 0.00, 0.00, 1.08, 0.00, 0.00,   //
      1.10, 0.00, 0.00, 0.00, 0.00, 2.57, 2.94, 0.00, 0.00, 1.94,   //
      0.00, 1.79, 1.47, 2.63, 0.00, 0.00, 0.00, 0.00, 1.65, 0.00,   //
      0.00, 1.55, 0.00, 0.00, 2.04, 1.80, 0.00, 0.00, 2.69, 0.00,   //
      2.55, 0.00, 0.00, 0.00, 0.00, 1.59, 0.00, 0.00, 1.79, 1.91,   //
      0.00, 0.00, 0.00, 1.56, 2.74, 2.96, 0.00, 2.61, 0.00, 0.00,   //
      1.04, 0.00, 0.00, 2.69, 1.76, 0.00, 0.00, 0.00, 0.00, 1.01,   //
      0.00, 0.00, 0.00, 1.84, 1.50, 0.00, 1.82, 2.80, 0.00, 0.00;
  return g;
}

SimTruth gen_truth(const std::string& setting, int items, int groups,
                   std::uint64_t seed) {
  if (items < 2 || groups < 2)
    throw std::invalid_argument("gen_truth: need at least two items/groups");
  if (setting != "S1" && setting != "S2" && setting != "S3" &&
      setting != "S4" && setting != "custom")
    throw std::invalid_argument("gen_truth: unknown setting " + setting);

  const bool use_fixture = (setting == "S1" || setting == "S2") &&
                           items == 15 && groups == 10;
  constexpr int kMaxTries = 1000;
  for (int attempt = 0; attempt < kMaxTries; ++attempt) {
    Rng rng(substream_seed(seed, attempt));
    ParamSet ps;
    ps.a = Vector::Ones(items);
    for (int j = 1; j < items; ++j) ps.a[j] = rng.uniform(1.0, 2.0);
    ps.d = Vector::Zero(items);
    for (int j = 0; j < items; ++j) ps.d[j] = rng.uniform(-1.0, 1.0);
    ps.mu = Vector::Zero(groups);
    for (int k = 0; k < groups; ++k) ps.mu[k] = rng.uniform(-0.3, 0.3);
    ps.mu.array() -= ps.mu.mean();
    ps.sigma = Vector::Ones(groups);
    for (int k = 0; k < groups; ++k)
      ps.sigma[k] = std::sqrt(rng.uniform(0.4, 1.2));
    if (use_fixture)
      ps.gamma = setting == "S1" ? fixture_s1_gamma() : fixture_s2_gamma();
    else if (blockwise_setting(setting))
      ps.gamma = blockwise_gamma(items, groups, rng);
    else
      ps.gamma = scattered_gamma(items, groups, rng);

    if (!check_prop1(ps.gamma, ps.a).all()) continue;
    SimTruth truth;
    truth.params = std::move(ps);
    truth.setting = setting;
    truth.seed = seed;
    return truth;
  }
  throw std::runtime_error(
      "gen_truth: no draw satisfied the sparsity checks after 1000 tries; "
      "lower the nonzero density");
}

ResponseDataset gen_dataset(const SimTruth& truth, long sample_size,
                            std::uint64_t seed) {
  truth.params.validate();
  const int J = truth.params.items();
  const int p = truth.params.groups();
  if (sample_size <= 0 || sample_size % p != 0)
    throw std::invalid_argument(
        "gen_dataset: sample size must be a positive multiple of the group "
        "count");

  const long per_group = sample_size / p;
  Rng rng(seed);
  ResponseDataset data;
  data.item_count = J;
  data.group_count = p;
  data.item_labels = default_labels("i", J);
  data.group_labels = default_labels("g", p);
  data.person_ids = default_labels("p", static_cast<int>(sample_size));
  data.persons.reserve(sample_size);
  for (int k = 0; k < p; ++k) {
    for (long i = 0; i < per_group; ++i) {
      PersonRecord person;
      person.group = k;
      person.weight = 1.0;
      const double theta =
          truth.params.mu[k] + truth.params.sigma[k] * rng.normal();
      person.responses.reserve(J);
      for (int j = 0; j < J; ++j) {
        const double prob = irf_prob(truth.params.a[j], truth.params.d[j],
                                     truth.params.gamma(j, k), theta);
        person.responses.emplace_back(j, rng.bernoulli(prob) ? 1 : 0);
      }
      data.persons.push_back(std::move(person));
    }
  }
  return data;
}

}  // namespace difcal
