#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "difcal/model.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace difcal;

TEST_CASE("irf_prob matches the logistic form") {
  CHECK(irf_prob(1.0, 0.0, 0.0, 0.0) == doctest::Approx(0.5).epsilon(1e-15));
  // logistic(2 * 0.3 + 1 + 0.5) evaluated by arbitrary-precision arithmetic
  CHECK(irf_prob(2.0, 1.0, 0.5, 0.3) ==
        doctest::Approx(0.8909031788043871).epsilon(1e-14));
}

TEST_CASE("irf_prob clamps extreme logits") {
  CHECK(irf_prob(1.0, -50.0, 0.0, 0.0) == 1e-12);
  CHECK(irf_prob(1.0, 50.0, 0.0, 0.0) == 1.0 - 1e-12);
}

TEST_CASE("irf_prob rejects non-finite input") {
  CHECK_THROWS_AS(irf_prob(std::nan(""), 0.0, 0.0, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(irf_prob(1.0, 0.0, 0.0, INFINITY), std::invalid_argument);
}

TEST_CASE("irf_prob is monotone in theta with the sign of a") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = u(rng) + (u(rng) > 0 ? 0.1 : -0.1);
    const double d = u(rng), g = u(rng);
    const double t1 = u(rng);
    const double t2 = t1 + 0.25;
    const double p1 = irf_prob(a, d, g, t1);
    const double p2 = irf_prob(a, d, g, t2);
    if (a > 0)
      CHECK(p2 > p1);
    else
      CHECK(p2 < p1);
  }
}

TEST_CASE("irf_prob complement symmetry") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = u(rng), d = u(rng), g = u(rng), t = u(rng);
    const double sum = irf_prob(a, d, g, t) + irf_prob(-a, -d, -g, t);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("make_grid spaces nodes uniformly") {
  const QuadGrid g3 = make_grid(3, -1.0, 1.0);
  CHECK(g3.spacing == doctest::Approx(1.0));
  CHECK(g3.nodes[0] == doctest::Approx(-1.0));
  CHECK(g3.nodes[1] == doctest::Approx(0.0));
  CHECK(g3.nodes[2] == doctest::Approx(1.0));
  CHECK(make_grid(61, -6.0, 6.0).spacing == doctest::Approx(0.2));
  CHECK_THROWS_AS(make_grid(1, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(make_grid(5, 1.0, 1.0), std::invalid_argument);
}

namespace {

ResponseDataset single_person_single_item() {
  ResponseDataset data;
  data.item_count = 1;
  data.group_count = 1;
  PersonRecord person;
  person.group = 0;
  person.weight = 1.0;
  person.responses = {{0, 1}};
  data.persons.push_back(person);
  return data;
}

}  // namespace

TEST_CASE("log_likelihood of a symmetric single response is log(1/2)") {
  // logistic(theta) * phi(theta) integrates to exactly one half.
  const ResponseDataset data = single_person_single_item();
  const ParamSet params = ParamSet::zeros(1, 1);
  const double ll = log_likelihood(params, data, make_grid(201, -8.0, 8.0));
  CHECK(ll == doctest::Approx(-0.6931471805599453).epsilon(1e-9));
}

TEST_CASE("log_likelihood of an empty dataset is zero") {
  ResponseDataset data;
  data.item_count = 2;
  data.group_count = 1;
  const ParamSet params = ParamSet::zeros(2, 1);
  CHECK(log_likelihood(params, data, make_grid(61, -6.0, 6.0)) == 0.0);
}

TEST_CASE("persons without responses contribute zero and are counted") {
  ResponseDataset data = single_person_single_item();
  PersonRecord empty;
  empty.group = 0;
  empty.weight = 3.0;
  data.persons.push_back(empty);
  const ParamSet params = ParamSet::zeros(1, 1);
  const QuadGrid grid = make_grid(201, -8.0, 8.0);
  LogLikStats stats;
  const double with_empty = log_likelihood(params, data, grid, &stats);
  CHECK(stats.persons_without_responses == 1);
  const double without =
      log_likelihood(params, single_person_single_item(), grid);
  CHECK(with_empty == doctest::Approx(without).epsilon(1e-15));
}

TEST_CASE("log_likelihood matches a dense trapezoid oracle") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 10; ++trial) {
    const ParamSet params = testutil::random_params(3, 2, rng);
    const ResponseDataset data = testutil::random_dataset(params, 50, rng);
    const double module =
        log_likelihood(params, data, make_grid(401, -8.0, 8.0));
    const double reference =
        oracle::trapezoid_loglik(params, data, 20001, -8.0, 8.0);
    CHECK(std::abs(module - reference) < 1e-6);
  }
}

TEST_CASE("log_likelihood is thread-count independent") {
  std::mt19937_64 rng(5);
  const ParamSet params = testutil::random_params(4, 2, rng);
  const ResponseDataset data = testutil::random_dataset(params, 500, rng);
  const QuadGrid grid = make_grid(61, -6.0, 6.0);
  const double serial = log_likelihood(params, data, grid, nullptr, 1);
  const double threaded = log_likelihood(params, data, grid, nullptr, 4);
  CHECK(serial == threaded);  // identical block reduction order
}

TEST_CASE("apply_equivalence identity and sign conventions") {
  std::mt19937_64 rng(3);
  const ParamSet params = testutil::random_params(3, 2, rng);
  SUBCASE("zero shifts change nothing") {
    const ParamSet same =
        apply_equivalence(params, Vector::Zero(2), Vector::Zero(3));
    CHECK((same.mu - params.mu).norm() == 0.0);
    CHECK((same.d - params.d).norm() == 0.0);
    CHECK((same.gamma - params.gamma).norm() == 0.0);
  }
  SUBCASE("unit-slope two-group shift moves gamma by -a c") {
    ParamSet base = params;
    base.a = Vector::Ones(3);
    Vector c(2);
    c << 1.0, -1.0;
    const ParamSet moved = apply_equivalence(base, c, Vector::Zero(3));
    CHECK(moved.mu[0] == doctest::Approx(base.mu[0] + 1.0));
    CHECK(moved.mu[1] == doctest::Approx(base.mu[1] - 1.0));
    for (int j = 0; j < 3; ++j) {
      CHECK(moved.gamma(j, 0) == doctest::Approx(base.gamma(j, 0) - 1.0));
      CHECK(moved.gamma(j, 1) == doctest::Approx(base.gamma(j, 1) + 1.0));
    }
  }
  SUBCASE("nonzero-sum shifts are rejected") {
    Vector c(2);
    c << 0.5, 0.0;
    CHECK_THROWS_AS(apply_equivalence(params, c, Vector::Zero(3)),
                    std::invalid_argument);
  }
}

TEST_CASE("equivalence transform preserves the marginal likelihood") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-0.8, 0.8);
  const QuadGrid grid = make_grid(481, -12.0, 12.0);
  for (int trial = 0; trial < 10; ++trial) {
    const ParamSet params = testutil::random_params(3, 2, rng);
    const ResponseDataset data = testutil::random_dataset(params, 30, rng);
    Vector c(2);
    c << u(rng), 0.0;
    c[1] = -c[0];
    Vector h(3);
    for (int j = 0; j < 3; ++j) h[j] = u(rng);
    const ParamSet moved = apply_equivalence(params, c, h);
    const double before = log_likelihood(params, data, grid);
    const double after = log_likelihood(moved, data, grid);
    CHECK(std::abs(before - after) < 1e-9);
  }
}

TEST_CASE("recenter_means zeroes the mean sum and preserves likelihood") {
  std::mt19937_64 rng(23);
  const ParamSet params = testutil::random_params(4, 3, rng);
  const ResponseDataset data = testutil::random_dataset(params, 40, rng);
  const ParamSet centered = recenter_means(params);
  CHECK(std::abs(centered.mu.sum()) < 1e-12);
  const QuadGrid grid = make_grid(481, -12.0, 12.0);
  CHECK(std::abs(log_likelihood(params, data, grid) -
                 log_likelihood(centered, data, grid)) < 1e-10);
}

TEST_CASE("dataset validation catches the documented failure modes") {
  ResponseDataset data = single_person_single_item();
  CHECK_NOTHROW(data.validate());
  SUBCASE("bad group index") {
    data.persons[0].group = 1;
    CHECK_THROWS_AS(data.validate(), std::invalid_argument);
  }
  SUBCASE("bad weight") {
    data.persons[0].weight = 0.0;
    CHECK_THROWS_AS(data.validate(), std::invalid_argument);
  }
  SUBCASE("duplicate response") {
    data.persons[0].responses.push_back({0, 0});
    CHECK_THROWS_AS(data.validate(), std::invalid_argument);
  }
  SUBCASE("item never observed") {
    data.item_count = 2;
    CHECK_THROWS_AS(data.validate(), std::invalid_argument);
  }
}
