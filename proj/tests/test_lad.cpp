#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "difcal/em.hpp"
#include "difcal/lad.hpp"
#include "difcal/model.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace difcal;

namespace {

double alignment_objective(const Matrix& gamma, const Vector& a,
                           const Vector& c, const Vector& h) {
  return (gamma - a * c.transpose() -
          h * Eigen::RowVectorXd::Ones(gamma.cols()))
      .array()
      .abs()
      .sum();
}

}  // namespace

TEST_CASE("a matrix with zero row and column medians is already aligned") {
  Matrix gamma(3, 3);
  gamma << 2, 0, 0,  //
      0, 3, 0,       //
      0, 0, 1;
  const Vector a = Vector::Ones(3);
  const LadResult res = lad_align(gamma, a);
  CHECK(res.solution.c.lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK(res.solution.h.lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK((res.gamma_hat - gamma).lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK(res.solution.objective == doctest::Approx(6.0));
}

TEST_CASE("an exactly representable matrix aligns to zero") {
  Vector a(3);
  a << 1.0, 1.5, 2.0;
  Vector c_true(3);
  c_true << 0.7, -0.2, -0.5;
  Vector h_true(3);
  h_true << 0.3, -1.1, 0.4;
  const Matrix gamma =
      a * c_true.transpose() + h_true * Eigen::RowVectorXd::Ones(3);
  const LadResult res = lad_align(gamma, a);
  CHECK(res.solution.objective < 1e-10);
  CHECK(res.gamma_hat.lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK((res.solution.c - c_true).lpNorm<Eigen::Infinity>() < 1e-9);
  CHECK((res.solution.h - h_true).lpNorm<Eigen::Infinity>() < 1e-9);
}

TEST_CASE("objective matches an exhaustive grid oracle on 2x2 problems") {
  std::mt19937_64 rng(414);
  std::uniform_real_distribution<double> ug(-1.0, 1.0);
  std::uniform_real_distribution<double> ua(0.9, 1.1);
  for (int trial = 0; trial < 25; ++trial) {
    Matrix gamma(2, 2);
    gamma << ug(rng), ug(rng), ug(rng), ug(rng);
    Vector a(2);
    a << ua(rng), ua(rng);
    const LadResult res = lad_align(gamma, a);
    const double grid = oracle::lad_grid_objective(gamma, a, 3.0, 1e-3);
    CHECK(res.solution.objective <= grid + 1e-9);
    CHECK(std::abs(res.solution.objective - grid) < 2e-3);
  }
}

TEST_CASE("global optimality certificate against random feasible shifts") {
  std::mt19937_64 rng(88);
  std::uniform_real_distribution<double> ug(-2.0, 2.0);
  std::uniform_real_distribution<double> ua(0.5, 2.0);
  const int J = 6, p = 4;
  Matrix gamma(J, p);
  Vector a(J);
  for (int j = 0; j < J; ++j) {
    a[j] = ua(rng);
    for (int k = 0; k < p; ++k) gamma(j, k) = ug(rng);
  }
  const LadResult res = lad_align(gamma, a);
  CHECK(res.solution.objective <=
        alignment_objective(gamma, a, Vector::Zero(p), Vector::Zero(J)) +
            1e-9);
  for (int draw = 0; draw < 1000; ++draw) {
    Vector c(p), h(J);
    for (int k = 0; k < p; ++k) c[k] = ug(rng);
    c.array() -= c.mean();
    for (int j = 0; j < J; ++j) h[j] = ug(rng);
    CHECK(res.solution.objective <=
          alignment_objective(gamma, a, c, h) + 1e-9);
  }
}

TEST_CASE("alignment is a projection: realigning the output is a no-op") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> ug(-2.0, 2.0);
  std::uniform_real_distribution<double> ua(0.5, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int J = 3 + static_cast<int>(rng() % 5);
    const int p = 2 + static_cast<int>(rng() % 4);
    Matrix gamma(J, p);
    Vector a(J);
    for (int j = 0; j < J; ++j) {
      a[j] = ua(rng);
      for (int k = 0; k < p; ++k) gamma(j, k) = ug(rng);
    }
    const LadResult first = lad_align(gamma, a);
    const LadResult second = lad_align(first.gamma_hat, a);
    CHECK(second.solution.c.lpNorm<Eigen::Infinity>() < 1e-8);
    CHECK(second.solution.h.lpNorm<Eigen::Infinity>() < 1e-8);
  }
}

TEST_CASE("solution satisfies the sum-zero constraint and is deterministic") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ug(-2.0, 2.0);
  Matrix gamma(5, 3);
  for (int j = 0; j < 5; ++j)
    for (int k = 0; k < 3; ++k) gamma(j, k) = ug(rng);
  Vector a(5);
  a << 1.0, 1.2, 0.8, 1.7, 1.1;
  const LadResult first = lad_align(gamma, a);
  const LadResult second = lad_align(gamma, a);
  CHECK(std::abs(first.solution.c.sum()) < 1e-12);
  CHECK((first.solution.c - second.solution.c).norm() == 0.0);
  CHECK((first.solution.h - second.solution.h).norm() == 0.0);
}

TEST_CASE("all-zero slopes are rejected") {
  CHECK_THROWS_AS(lad_align(Matrix::Ones(2, 2), Vector::Zero(2)),
                  std::invalid_argument);
}

TEST_CASE("finalize keeps an already-aligned step-1 estimate") {
  FitResult step1;
  step1.profile = ConstraintProfile::step1();
  step1.params = ParamSet::zeros(3, 3);
  Matrix gamma(3, 3);
  gamma << 2, 0, 0,  //
      0, 3, 0,       //
      0, 0, 1;
  step1.params.gamma = gamma;
  const ParamSet out = finalize(step1);
  CHECK(out.mu.lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK(out.d.lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK((out.gamma - gamma).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("finalize rejects fits from other profiles") {
  FitResult baseline;
  baseline.profile = ConstraintProfile::baseline();
  baseline.params = ParamSet::zeros(2, 2);
  CHECK_THROWS_AS(finalize(baseline), std::invalid_argument);
}

TEST_CASE("finalize preserves the step-1 log-likelihood") {
  // Both sides are evaluated on one grid dense enough for the fitted group
  // SDs; the transform is exact, so any difference beyond quadrature
  // roundoff would come from the alignment itself.
  std::mt19937_64 rng(2542);
  const QuadGrid wide = make_grid(1601, -12.0, 12.0);
  for (int trial = 0; trial < 3; ++trial) {
    ParamSet truth = testutil::random_params(4, 2, rng, 0.8);
    truth.a[0] = 1.0;
    const ResponseDataset data = testutil::random_dataset(truth, 300, rng);
    const FitResult step1 =
        fit(data, ConstraintProfile::step1(), default_fit_config());
    const ParamSet final_params = finalize(step1);
    const double before = log_likelihood(step1.params, data, wide);
    const double after = log_likelihood(final_params, data, wide);
    CHECK(std::abs(after - before) < 1e-9);
  }
}

TEST_CASE("condition check accepts the zero matrix") {
  const auto report = check_condition1(Matrix::Zero(4, 3), Vector::Ones(4));
  CHECK(report.holds);
  CHECK_FALSE(report.witness.has_value());
}

TEST_CASE("condition check rejects a dense constant column") {
  Matrix gamma = Matrix::Zero(4, 3);
  gamma.col(1).setConstant(2.0);
  const auto report = check_condition1(gamma, Vector::Ones(4));
  CHECK_FALSE(report.holds);
  REQUIRE(report.witness.has_value());
  CHECK(report.witness->objective < gamma.array().abs().sum() + 1e-9);
  // Shifting the dense column strictly reduces the total.
  CHECK(report.witness->objective < 8.0 - 1e-6);
}

TEST_CASE("row sparsity check matches hand counts") {
  Matrix row(1, 3);
  Vector a = Vector::Ones(1);
  row << 1, 0, 0;
  CHECK(check_prop1(row, a).row_ok[0]);
  row << 1, 1, 0;
  CHECK_FALSE(check_prop1(row, a).row_ok[0]);
}

TEST_CASE("sparsity checks pass on the zero matrix and reject zero slopes") {
  CHECK(check_prop1(Matrix::Zero(3, 4), Vector::Ones(3)).all());
  Vector a = Vector::Ones(3);
  a[1] = 0.0;
  CHECK_THROWS_AS(check_prop1(Matrix::Zero(3, 4), a), std::invalid_argument);
}

TEST_CASE("row/column sparsity implies the alignment condition") {
  // Nonzero entries are drawn positive on [1, 3], the regime the sparsity
  // checks are stated for; mixed-sign patterns can defeat them.
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> ug(1.0, 3.0);
  std::uniform_real_distribution<double> ua(0.5, 2.0);
  int alignment_checked = 0;
  for (int trial = 0; trial < 120; ++trial) {
    const int J = 3 + static_cast<int>(rng() % 6);
    const int p = 2 + static_cast<int>(rng() % 5);
    Matrix gamma = Matrix::Zero(J, p);
    Vector a(J);
    for (int j = 0; j < J; ++j) {
      a[j] = ua(rng);
      for (int k = 0; k < p; ++k)
        if (u01(rng) < 0.25) gamma(j, k) = ug(rng);
    }
    if (!check_prop1(gamma, a).all()) continue;
    ++alignment_checked;
    CHECK(check_condition1(gamma, a).holds);
  }
  CHECK(alignment_checked > 10);
}
