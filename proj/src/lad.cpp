#include "difcal/lad.hpp"

#include <cmath>
#include <stdexcept>

#include "difcal/model.hpp"

namespace difcal {

namespace {

constexpr double kReducedCostTol = 1e-9;
constexpr double kPivotTol = 1e-11;

// Dense primal simplex tableau for the alignment program
//
//   min sum(u) + sum(v)
//   s.t. a_j (cp_k - cm_k) + (hp_j - hm_j) + u_jk - v_jk = gamma_jk
//        sum_k (cp_k - cm_k) = 0,   all variables >= 0.
//
// Columns: [cp(p) | cm(p) | hp(J) | hm(J) | u(Jp) | v(Jp)], residual rows
// in (j,k) row-major order, the sum-zero row last. Rows with negative
// right-hand side are negated so that u or v provides a feasible basis;
// cp_0 is pivoted into the sum-zero row, which has zero right-hand side,
// so feasibility is preserved. Bland's entering/leaving rule makes the
// solve deterministic and cycle-free.
class AlignmentSimplex {
 public:
  AlignmentSimplex(const Matrix& gamma, const Vector& a)
      : J_(static_cast<int>(gamma.rows())),
        p_(static_cast<int>(gamma.cols())),
        cols_(2 * p_ + 2 * J_ + 2 * J_ * p_),
        rows_(J_ * p_ + 1),
        tab_(Matrix::Zero(rows_ + 1, cols_ + 1)),
        basis_(rows_, -1) {
    const int u0 = 2 * p_ + 2 * J_;
    const int v0 = u0 + J_ * p_;
    for (int j = 0; j < J_; ++j) {
      for (int k = 0; k < p_; ++k) {
        const int r = j * p_ + k;
        const double sgn = gamma(j, k) >= 0.0 ? 1.0 : -1.0;
        tab_(r, k) = sgn * a[j];            // cp_k
        tab_(r, p_ + k) = -sgn * a[j];      // cm_k
        tab_(r, 2 * p_ + j) = sgn;          // hp_j
        tab_(r, 2 * p_ + J_ + j) = -sgn;    // hm_j
        tab_(r, u0 + r) = sgn;
        tab_(r, v0 + r) = -sgn;
        tab_(r, cols_) = sgn * gamma(j, k);
        basis_[r] = gamma(j, k) >= 0.0 ? u0 + r : v0 + r;
      }
    }
    const int zr = rows_ - 1;
    for (int k = 0; k < p_; ++k) {
      tab_(zr, k) = 1.0;
      tab_(zr, p_ + k) = -1.0;
    }
    pivot(zr, 0);  // cp_0 enters on the zero right-hand side row
    basis_[zr] = 0;

    // Reduced-cost row: unit costs on u and v, canonicalized against the
    // starting basis.
    for (int col = u0; col < cols_; ++col) tab_(rows_, col) = 1.0;
    for (int r = 0; r < rows_; ++r) {
      if (basis_[r] >= u0) tab_.row(rows_) -= tab_.row(r);
    }
  }

  void solve() {
    const long cap = 1000L * (rows_ + cols_ + 1000);
    for (long iter = 0; iter < cap; ++iter) {
      int enter = -1;
      for (int col = 0; col < cols_; ++col) {
        if (tab_(rows_, col) < -kReducedCostTol) {
          enter = col;
          break;
        }
      }
      if (enter < 0) return;
      int leave = -1;
      double best = 0.0;
      for (int r = 0; r < rows_; ++r) {
        const double coef = tab_(r, enter);
        if (coef <= kPivotTol) continue;
        const double ratio = std::max(tab_(r, cols_), 0.0) / coef;
        if (leave < 0 || ratio < best - 1e-15 ||
            (std::abs(ratio - best) <= 1e-15 && basis_[r] < basis_[leave])) {
          leave = r;
          best = ratio;
        }
      }
      if (leave < 0)
        throw std::runtime_error("lad_align: unbounded pivot direction");
      pivot(leave, enter);
      basis_[leave] = enter;
    }
    throw std::runtime_error("lad_align: pivot cap exceeded");
  }

  Vector extract(int offset_plus, int offset_minus, int count) const {
    Vector out = Vector::Zero(count);
    for (int r = 0; r < rows_; ++r) {
      const int b = basis_[r];
      const double val = tab_(r, cols_);
      if (b >= offset_plus && b < offset_plus + count)
        out[b - offset_plus] += val;
      else if (b >= offset_minus && b < offset_minus + count)
        out[b - offset_minus] -= val;
    }
    return out;
  }

  Vector group_shifts() const { return extract(0, p_, p_); }
  Vector item_shifts() const { return extract(2 * p_, 2 * p_ + J_, J_); }

 private:
  void pivot(int pr, int pc) {
    tab_.row(pr) /= tab_(pr, pc);
    for (int r = 0; r <= rows_; ++r) {
      if (r == pr) continue;
      const double f = tab_(r, pc);
      if (f != 0.0) tab_.row(r) -= f * tab_.row(pr);
    }
  }

  int J_, p_, cols_, rows_;
  Matrix tab_;
  std::vector<int> basis_;
};

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

LadResult lad_align(const Matrix& gamma_tilde, const Vector& a_tilde) {
  const int J = static_cast<int>(gamma_tilde.rows());
  const int p = static_cast<int>(gamma_tilde.cols());
  require(J >= 1 && p >= 1, "lad_align: empty problem");
  require(a_tilde.size() == J, "lad_align: slope vector has wrong length");
  require(gamma_tilde.allFinite() && a_tilde.allFinite(),
          "lad_align: non-finite input");
  require(!(a_tilde.array() == 0.0).all(),
          "lad_align: all slopes are zero, group shifts are unidentifiable");

  AlignmentSimplex simplex(gamma_tilde, a_tilde);
  simplex.solve();
  Vector c = simplex.group_shifts();
  Vector h = simplex.item_shifts();

  // Move any numerical drift in sum(c) into h; the residuals are invariant
  // under (c - t, h + t a).
  const double t = c.mean();
  c.array() -= t;
  h += t * a_tilde;

  LadResult result;
  result.gamma_hat =
      gamma_tilde - a_tilde * c.transpose() -
      h * Eigen::RowVectorXd::Ones(p);
  result.solution.c = std::move(c);
  result.solution.h = std::move(h);
  result.solution.objective = result.gamma_hat.array().abs().sum();
  return result;
}

ParamSet finalize(const FitResult& step1) {
  require(step1.profile.kind == ConstraintProfile::Kind::Step1,
          "finalize: fit was not produced under the Step1 profile");
  LadResult aligned = lad_align(step1.params.gamma, step1.params.a);
  ParamSet out = step1.params;
  out.mu = aligned.solution.c;
  out.d = aligned.solution.h;
  out.gamma = std::move(aligned.gamma_hat);
  return out;
}

Condition1Report check_condition1(const Matrix& gamma, const Vector& a) {
  LadResult res = lad_align(gamma, a);
  const double total = gamma.array().abs().sum();
  const bool objective_matches =
      std::abs(res.solution.objective - total) <= 1e-9;
  const bool at_zero =
      res.solution.c.lpNorm<Eigen::Infinity>() <= 1e-8 &&
      res.solution.h.lpNorm<Eigen::Infinity>() <= 1e-8;
  Condition1Report report;
  report.holds = objective_matches && at_zero;
  if (!report.holds) {
    report.witness = res.solution;
    report.tie = objective_matches;
  }
  return report;
}

bool Prop1Report::all() const {
  for (bool ok : col_ok)
    if (!ok) return false;
  for (bool ok : row_ok)
    if (!ok) return false;
  return true;
}

Prop1Report check_prop1(const Matrix& gamma, const Vector& a) {
  const int J = static_cast<int>(gamma.rows());
  const int p = static_cast<int>(gamma.cols());
  require(a.size() == J, "check_prop1: slope vector has wrong length");
  require(gamma.allFinite() && a.allFinite(), "check_prop1: non-finite input");
  require((a.array() != 0.0).all(), "check_prop1: zero slope");

  constexpr double kZeroTol = 1e-10;
  Prop1Report report;
  report.col_ok.resize(p);
  report.row_ok.resize(J);
  for (int k = 0; k < p; ++k) {
    double neg = 0.0, pos = 0.0, zero = 0.0;
    for (int j = 0; j < J; ++j) {
      const double g = gamma(j, k);
      const double w = std::abs(a[j]);
      if (std::abs(g) <= kZeroTol)
        zero += w;
      else if (g > 0.0)
        pos += w;
      else
        neg += w;
    }
    report.col_ok[k] = std::abs(neg - pos) < zero;
  }
  for (int j = 0; j < J; ++j) {
    int neg = 0, pos = 0, zero = 0;
    for (int k = 0; k < p; ++k) {
      const double g = gamma(j, k);
      if (std::abs(g) <= kZeroTol)
        ++zero;
      else if (g > 0.0)
        ++pos;
      else
        ++neg;
    }
    report.row_ok[j] = std::abs(neg - pos) < zero;
  }
  return report;
}

}  // namespace difcal
