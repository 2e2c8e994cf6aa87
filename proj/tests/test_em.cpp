#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "difcal/em.hpp"
#include "difcal/model.hpp"
#include "test_util.hpp"

using namespace difcal;

namespace {

// Expected complete-data log-likelihood of `params` under a fixed posterior,
// written out directly for the ascent checks.
double expected_complete_loglik(const PosteriorTable& posterior,
                                const ResponseDataset& data,
                                const ParamSet& params) {
  const int Q = posterior.grid.size();
  double total = 0.0;
  for (int i = 0; i < data.num_persons(); ++i) {
    const PersonRecord& person = data.persons[i];
    const int k = person.group;
    for (int q = 0; q < Q; ++q) {
      const double mass = person.weight * posterior.mass(i, q);
      const double theta = posterior.grid.nodes[q];
      const double z = (theta - params.mu[k]) / params.sigma[k];
      total += mass * (-0.5 * z * z - std::log(params.sigma[k]));
      for (const auto& [item, value] : person.responses) {
        const double prob = irf_prob(params.a[item], params.d[item],
                                     params.gamma(item, k), theta);
        total += mass * (value ? std::log(prob) : std::log(1.0 - prob));
      }
    }
  }
  return total;
}

ResponseDataset tiny_two_group(std::mt19937_64& rng, int persons = 60) {
  const ParamSet truth = testutil::random_params(4, 2, rng, 0.6);
  return testutil::random_dataset(truth, persons, rng);
}

}  // namespace

TEST_CASE("step1 profile pins means, intercepts, and the first slope") {
  std::mt19937_64 rng(31);
  const ResponseDataset data = tiny_two_group(rng);
  FitConfig config = default_fit_config();
  config.max_iter = 50;
  const FitResult result = fit(data, ConstraintProfile::step1(), config);
  CHECK(result.params.mu.lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(result.params.d.lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(result.params.a[0] == 1.0);
}

TEST_CASE("baseline profile keeps gamma at zero and centers the means") {
  std::mt19937_64 rng(32);
  const ResponseDataset data = tiny_two_group(rng);
  FitConfig config = default_fit_config();
  config.max_iter = 50;
  const FitResult result = fit(data, ConstraintProfile::baseline(), config);
  CHECK(result.params.gamma.lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(result.params.a[0] == 1.0);
  CHECK(std::abs(result.params.mu.sum()) < 1e-12);
}

TEST_CASE("relaxed profile frees exactly the flagged cells") {
  std::mt19937_64 rng(33);
  const ResponseDataset data = tiny_two_group(rng, 200);
  FitConfig config = default_fit_config();
  config.max_iter = 60;
  config.min_group_responses = 1;
  const std::set<Cell> flags = {{1, 0}, {3, 1}};
  const FitResult result =
      fit(data, ConstraintProfile::relaxed(flags), config);
  for (int j = 0; j < 4; ++j)
    for (int k = 0; k < 2; ++k)
      if (!flags.count({j, k})) CHECK(result.params.gamma(j, k) == 0.0);
  CHECK(std::abs(result.params.mu.sum()) < 1e-12);
}

TEST_CASE("baseline-truth parameters are recovered at moderate sample size") {
  std::mt19937_64 rng(4243);
  ParamSet truth = testutil::random_params(5, 2, rng, 0.0);
  truth.a[0] = 1.0;
  truth.mu.array() -= truth.mu.mean();
  const ResponseDataset data = testutil::random_dataset(truth, 5000, rng,
                                                        /*unit_weights=*/true);
  const FitResult result =
      fit(data, ConstraintProfile::baseline(), default_fit_config());
  CHECK(result.converged);
  CHECK((result.params.mu - truth.mu).lpNorm<Eigen::Infinity>() < 0.1);
  CHECK((result.params.a - truth.a).lpNorm<Eigen::Infinity>() < 0.1);
  CHECK((result.params.d - truth.d).lpNorm<Eigen::Infinity>() < 0.1);
}

TEST_CASE("posterior of a person without responses is the discretized prior") {
  ResponseDataset data;
  data.item_count = 1;
  data.group_count = 1;
  PersonRecord answered;
  answered.group = 0;
  answered.responses = {{0, 1}};
  PersonRecord blank;
  blank.group = 0;
  data.persons = {answered, blank};
  ParamSet params = ParamSet::zeros(1, 1);
  params.mu[0] = 0.4;
  params.sigma[0] = 1.3;
  const QuadGrid grid = make_grid(61, -6.0, 6.0);
  const PosteriorTable posterior = e_step(params, data, grid);

  Vector prior(grid.size());
  for (int q = 0; q < grid.size(); ++q) {
    const double z = (grid.nodes[q] - params.mu[0]) / params.sigma[0];
    prior[q] = std::exp(-0.5 * z * z);
  }
  prior /= prior.sum();
  CHECK((posterior.mass.row(1).transpose() - prior)
            .lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("a balanced right/wrong pair gives a posterior symmetric in theta") {
  ResponseDataset data;
  data.item_count = 2;
  data.group_count = 1;
  PersonRecord person;
  person.group = 0;
  person.responses = {{0, 1}, {1, 0}};
  data.persons = {person};
  const ParamSet params = ParamSet::zeros(2, 1);
  const QuadGrid grid = make_grid(61, -6.0, 6.0);
  const PosteriorTable posterior = e_step(params, data, grid);
  const int Q = grid.size();
  for (int q = 0; q < Q / 2; ++q)
    CHECK(posterior.mass(0, q) ==
          doctest::Approx(posterior.mass(0, Q - 1 - q)).epsilon(1e-10));
}

TEST_CASE("posterior rows are normalized") {
  std::mt19937_64 rng(35);
  const ParamSet params = testutil::random_params(5, 3, rng);
  const ResponseDataset data = testutil::random_dataset(params, 80, rng);
  const PosteriorTable posterior =
      e_step(params, data, make_grid(41, -5.0, 5.0));
  for (int i = 0; i < data.num_persons(); ++i)
    CHECK(posterior.mass.row(i).sum() == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("m_step does not decrease the expected complete-data objective") {
  std::mt19937_64 rng(36);
  for (int trial = 0; trial < 20; ++trial) {
    const ParamSet truth = testutil::random_params(4, 2, rng);
    const ResponseDataset data = testutil::random_dataset(truth, 50, rng);
    const ParamSet start = testutil::random_params(4, 2, rng, 0.5);
    const QuadGrid grid = make_grid(41, -5.0, 5.0);
    const PosteriorTable posterior = e_step(start, data, grid);
    for (const auto& profile :
         {ConstraintProfile::step1(), ConstraintProfile::baseline()}) {
      ParamSet pinned = start;
      if (profile.mu_fixed_at_zero()) pinned.mu.setZero();
      if (profile.d_fixed_at_zero()) pinned.d.setZero();
      if (profile.kind == ConstraintProfile::Kind::Baseline)
        pinned.gamma.setZero();
      pinned.a[0] = 1.0;
      const ParamSet updated = m_step(posterior, data, pinned, profile);
      if (profile.kind == ConstraintProfile::Kind::Step1) {
        // No recentering happens under Step1, so ascent is exact.
        CHECK(expected_complete_loglik(posterior, data, updated) >=
              expected_complete_loglik(posterior, data, pinned) - 1e-9);
      } else {
        CHECK(updated.gamma.lpNorm<Eigen::Infinity>() == 0.0);
      }
    }
  }
}

TEST_CASE("one-item intercept update solves the logit equation") {
  // All posterior mass at a single node theta*: the free intercept (the
  // gamma cell under Step1, where nothing is recentered afterwards) must
  // satisfy mean(Y) = logistic(a theta* + gamma).
  ResponseDataset data;
  data.item_count = 1;
  data.group_count = 1;
  for (int i = 0; i < 10; ++i) {
    PersonRecord person;
    person.group = 0;
    person.responses = {{0, i < 7 ? 1 : 0}};
    data.persons.push_back(person);
  }
  PosteriorTable posterior;
  posterior.grid = make_grid(3, 0.0, 0.4);
  posterior.mass = RowMatrix::Zero(10, 3);
  posterior.mass.col(1).setOnes();  // theta* = 0.2
  const ParamSet params = ParamSet::zeros(1, 1);
  ParamSet updated = params;
  for (int pass = 0; pass < 8; ++pass)
    updated = m_step(posterior, data, updated, ConstraintProfile::step1());
  const double expected = std::log(0.7 / 0.3) - 0.2;
  CHECK(updated.gamma(0, 0) == doctest::Approx(expected).epsilon(1e-6));
  CHECK(updated.mu[0] == 0.0);
  CHECK(updated.d[0] == 0.0);
}

TEST_CASE("EM trace is monotone and convergence is flagged") {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 8; ++trial) {
    const ResponseDataset data = tiny_two_group(rng, 80);
    FitConfig config = default_fit_config();
    config.min_group_responses = 1;
    for (const auto& profile :
         {ConstraintProfile::step1(), ConstraintProfile::baseline(),
          ConstraintProfile::relaxed({{0, 0}, {2, 1}})}) {
      const FitResult result = fit(data, profile, config);
      for (std::size_t t = 1; t < result.loglik_trace.size(); ++t)
        CHECK(result.loglik_trace[t] >= result.loglik_trace[t - 1] - 1e-8);
      if (result.converged) {
        const auto& trace = result.loglik_trace;
        const double rel = std::abs(trace.back() - trace[trace.size() - 2]) /
                           (std::abs(trace[trace.size() - 2]) + 1.0);
        CHECK(rel < config.tol);
      }
    }
  }
}

TEST_CASE("fits are identical across thread counts") {
  std::mt19937_64 rng(38);
  const ResponseDataset data = tiny_two_group(rng, 5000);
  FitConfig config = default_fit_config();
  config.max_iter = 40;
  FitConfig threaded = config;
  threaded.threads = 4;
  const FitResult serial = fit(data, ConstraintProfile::baseline(), config);
  const FitResult parallel =
      fit(data, ConstraintProfile::baseline(), threaded);
  CHECK((serial.params.a - parallel.params.a).norm() == 0.0);
  CHECK((serial.params.d - parallel.params.d).norm() == 0.0);
  CHECK((serial.params.mu - parallel.params.mu).norm() == 0.0);
  CHECK((serial.params.sigma - parallel.params.sigma).norm() == 0.0);
  CHECK(serial.final_loglik() == parallel.final_loglik());
}

TEST_CASE("empty groups are rejected") {
  ResponseDataset data;
  data.item_count = 1;
  data.group_count = 2;  // group 1 never appears
  PersonRecord person;
  person.group = 0;
  person.responses = {{0, 1}};
  data.persons = {person};
  CHECK_THROWS_AS(fit(data, ConstraintProfile::baseline(),
                      default_fit_config()),
                  std::invalid_argument);
}

TEST_CASE("sparse cells are frozen at zero during step-1 fits") {
  std::mt19937_64 rng(39);
  const ParamSet truth = testutil::random_params(3, 2, rng, 0.5);
  ResponseDataset data = testutil::random_dataset(truth, 120, rng);
  // Strip item 2 from group 1 except for three persons.
  int kept = 0;
  for (auto& person : data.persons) {
    if (person.group != 1) continue;
    if (kept++ < 3) continue;
    std::erase_if(person.responses,
                  [](const std::pair<int, int>& r) { return r.first == 2; });
  }
  FitConfig config = default_fit_config();
  config.max_iter = 30;
  const FitResult result = fit(data, ConstraintProfile::step1(), config);
  CHECK(result.frozen_cells.count({2, 1}) == 1);
  CHECK(result.params.gamma(2, 1) == 0.0);
}
