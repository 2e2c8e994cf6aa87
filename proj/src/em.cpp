#include "difcal/em.hpp"

#include <cmath>
#include <stdexcept>

#include "difcal/model.hpp"
#include "difcal/parallel.hpp"

namespace difcal {

namespace detail {
void clamped_log_probs(double x, double& lp1, double& lp0);
}

namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;
constexpr double kSigmaFloor = 1e-6;
constexpr int kNewtonInner = 3;
constexpr int kMaxHalvings = 20;
constexpr int kPersonBlock = 2048;

struct LogProbTables {
  // One J x Q table per group, for response 1 and response 0.
  std::vector<RowMatrix> lp1, lp0;
  Matrix log_prior;  // p x Q, without the spacing term
};

LogProbTables build_tables(const ParamSet& params, const QuadGrid& grid) {
  const int J = params.items();
  const int p = params.groups();
  const int Q = grid.size();
  LogProbTables t;
  t.lp1.assign(p, RowMatrix(J, Q));
  t.lp0.assign(p, RowMatrix(J, Q));
  t.log_prior.resize(p, Q);
  for (int k = 0; k < p; ++k) {
    const double s = params.sigma[k];
    for (int q = 0; q < Q; ++q) {
      const double z = (grid.nodes[q] - params.mu[k]) / s;
      t.log_prior(k, q) = -0.5 * z * z - std::log(s) - kHalfLog2Pi;
    }
    for (int j = 0; j < J; ++j) {
      const double a = params.a[j];
      const double b = params.d[j] + params.gamma(j, k);
      for (int q = 0; q < Q; ++q) {
        detail::clamped_log_probs(a * grid.nodes[q] + b, t.lp1[k](j, q),
                                  t.lp0[k](j, q));
      }
    }
  }
  return t;
}

struct EStepFull {
  RowMatrix mass;  // N x Q, rows normalized
  double loglik = 0.0;
};

EStepFull e_step_full(const ParamSet& params, const ResponseDataset& data,
                      const QuadGrid& grid, int threads) {
  const int N = data.num_persons();
  const int Q = grid.size();
  const LogProbTables tables = build_tables(params, grid);
  const double log_spacing = std::log(grid.spacing);

  EStepFull out;
  out.mass.resize(N, Q);
  std::vector<double> person_ll(N, 0.0);
  const int blocks = (N + kPersonBlock - 1) / kPersonBlock;
  parallel_blocks(blocks, threads, [&](int b) {
    const int lo = b * kPersonBlock;
    const int hi = std::min(N, lo + kPersonBlock);
    for (int i = lo; i < hi; ++i) {
      const PersonRecord& person = data.persons[i];
      const int k = person.group;
      double* row = out.mass.data() + static_cast<std::ptrdiff_t>(i) * Q;
      for (int q = 0; q < Q; ++q) row[q] = tables.log_prior(k, q);
      for (const auto& [item, value] : person.responses) {
        const double* lp = value ? tables.lp1[k].data() : tables.lp0[k].data();
        lp += static_cast<std::ptrdiff_t>(item) * Q;
        for (int q = 0; q < Q; ++q) row[q] += lp[q];
      }
      double m = row[0];
      for (int q = 1; q < Q; ++q) m = std::max(m, row[q]);
      double sum = 0.0;
      for (int q = 0; q < Q; ++q) {
        row[q] = std::exp(row[q] - m);
        sum += row[q];
      }
      const double inv = 1.0 / sum;
      for (int q = 0; q < Q; ++q) row[q] *= inv;
      person_ll[i] = person.responses.empty()
                         ? 0.0
                         : person.weight * (m + std::log(sum) + log_spacing);
    }
  });
  out.loglik = pairwise_sum(person_ll.data(), N);
  return out;
}

// Quadrature-weighted pseudo-counts and posterior moments for one M-step.
// Exposure counts are split into a part shared by all items (persons who
// answered everything) and an item-specific remainder, so complete data
// costs O(N*Q*ones) instead of O(N*Q*J).
struct PseudoCounts {
  std::vector<RowMatrix> r;        // per group: J x Q success pseudo-counts
  std::vector<RowMatrix> n_extra;  // per group: exposure from incomplete rows
  Matrix n_complete;               // p x Q exposure from complete rows
  Vector sw;                       // total weight per group
  Vector m1, m2;                   // weighted posterior moments per group

  double exposure(int j, int k, int q) const {
    return n_complete(k, q) + n_extra[k](j, q);
  }
};

PseudoCounts accumulate(const PosteriorTable& posterior,
                        const ResponseDataset& data, int threads) {
  const int N = data.num_persons();
  const int Q = posterior.grid.size();
  const int J = data.item_count;
  const int p = data.group_count;
  const Vector& nodes = posterior.grid.nodes;

  struct BlockPartial {
    std::vector<RowMatrix> r, n_extra;
    Matrix n_complete;
    Vector sw, m1, m2;
  };
  const int blocks = (N + kPersonBlock - 1) / kPersonBlock;
  std::vector<BlockPartial> partial(blocks);
  parallel_blocks(blocks, threads, [&](int b) {
    BlockPartial& acc = partial[b];
    acc.r.assign(p, RowMatrix::Zero(J, Q));
    acc.n_extra.assign(p, RowMatrix::Zero(J, Q));
    acc.n_complete = Matrix::Zero(p, Q);
    acc.sw = Vector::Zero(p);
    acc.m1 = Vector::Zero(p);
    acc.m2 = Vector::Zero(p);
    const int lo = b * kPersonBlock;
    const int hi = std::min(N, lo + kPersonBlock);
    Vector wm(Q);
    for (int i = lo; i < hi; ++i) {
      const PersonRecord& person = data.persons[i];
      const int k = person.group;
      const double w = person.weight;
      const double* mass =
          posterior.mass.data() + static_cast<std::ptrdiff_t>(i) * Q;
      double e1 = 0.0, e2 = 0.0;
      for (int q = 0; q < Q; ++q) {
        wm[q] = w * mass[q];
        e1 += mass[q] * nodes[q];
        e2 += mass[q] * nodes[q] * nodes[q];
      }
      acc.sw[k] += w;
      acc.m1[k] += w * e1;
      acc.m2[k] += w * e2;
      const bool complete = static_cast<int>(person.responses.size()) == J;
      if (complete) {
        acc.n_complete.row(k) += wm.transpose();
      }
      for (const auto& [item, value] : person.responses) {
        if (!complete) {
          double* ndst =
              acc.n_extra[k].data() + static_cast<std::ptrdiff_t>(item) * Q;
          for (int q = 0; q < Q; ++q) ndst[q] += wm[q];
        }
        if (!value) continue;
        double* dst = acc.r[k].data() + static_cast<std::ptrdiff_t>(item) * Q;
        for (int q = 0; q < Q; ++q) dst[q] += wm[q];
      }
    }
  });

  PseudoCounts total;
  total.r.assign(p, RowMatrix::Zero(J, Q));
  total.n_extra.assign(p, RowMatrix::Zero(J, Q));
  total.n_complete = Matrix::Zero(p, Q);
  total.sw = Vector::Zero(p);
  total.m1 = Vector::Zero(p);
  total.m2 = Vector::Zero(p);
  for (int b = 0; b < blocks; ++b) {  // fixed order, thread-count independent
    for (int k = 0; k < p; ++k) {
      total.r[k] += partial[b].r[k];
      total.n_extra[k] += partial[b].n_extra[k];
    }
    total.n_complete += partial[b].n_complete;
    total.sw += partial[b].sw;
    total.m1 += partial[b].m1;
    total.m2 += partial[b].m2;
  }
  return total;
}

// Expected complete-data log-likelihood contribution of one item given the
// candidate slope and per-group intercepts d + gamma_k.
double item_objective(const PseudoCounts& counts, const Vector& nodes,
                      int item, double a, double d, const Vector& gamma_row) {
  const int p = static_cast<int>(gamma_row.size());
  const int Q = static_cast<int>(nodes.size());
  double f = 0.0;
  for (int k = 0; k < p; ++k) {
    const double off = d + gamma_row[k];
    for (int q = 0; q < Q; ++q) {
      const double n = counts.exposure(item, k, q);
      if (n == 0.0) continue;
      const double r = counts.r[k](item, q);
      double lp1, lp0;
      detail::clamped_log_probs(a * nodes[q] + off, lp1, lp0);
      f += r * lp1 + (n - r) * lp0;
    }
  }
  return f;
}

struct ItemFreeSet {
  bool a = false;
  bool d = false;
  std::vector<int> gamma_groups;
  int dim() const {
    return (a ? 1 : 0) + (d ? 1 : 0) + static_cast<int>(gamma_groups.size());
  }
};

// Damped Newton ascent of one item's expected complete-data log-likelihood.
// Returns false when step halving was exhausted without improvement, in
// which case the previous values are kept.
bool update_item(const PseudoCounts& counts, const Vector& nodes, int item,
                 const ItemFreeSet& free, ParamSet& params) {
  const int p = params.groups();
  const int Q = static_cast<int>(nodes.size());
  const int dim = free.dim();
  if (dim == 0) return true;

  const int ia = free.a ? 0 : -1;
  const int id = free.d ? (free.a ? 1 : 0) : -1;
  const int ig0 = (free.a ? 1 : 0) + (free.d ? 1 : 0);
  std::vector<int> gamma_index(p, -1);
  for (int gi = 0; gi < static_cast<int>(free.gamma_groups.size()); ++gi)
    gamma_index[free.gamma_groups[gi]] = ig0 + gi;

  double a = params.a[item];
  double d = params.d[item];
  Vector gamma_row = params.gamma.row(item).transpose();
  double f = item_objective(counts, nodes, item, a, d, gamma_row);
  bool ok = true;

  for (int inner = 0; inner < kNewtonInner; ++inner) {
    Vector grad = Vector::Zero(dim);
    Matrix hess = Matrix::Zero(dim, dim);
    for (int k = 0; k < p; ++k) {
      const int ig = gamma_index[k];
      const double off = d + gamma_row[k];
      for (int q = 0; q < Q; ++q) {
        const double n = counts.exposure(item, k, q);
        if (n == 0.0) continue;
        const double r = counts.r[k](item, q);
        const double x = a * nodes[q] + off;
        const double prob = 1.0 / (1.0 + std::exp(-x));
        const double resid = r - n * prob;
        const double w = n * prob * (1.0 - prob);
        const double th = nodes[q];
        if (ia >= 0) {
          grad[ia] += resid * th;
          hess(ia, ia) += w * th * th;
        }
        if (id >= 0) {
          grad[id] += resid;
          hess(id, id) += w;
          if (ia >= 0) hess(ia, id) += w * th;
        }
        if (ig >= 0) {
          grad[ig] += resid;
          hess(ig, ig) += w;
          if (ia >= 0) hess(ia, ig) += w * th;
          if (id >= 0) hess(id, ig) += w;
        }
      }
    }
    hess = Matrix(hess.selfadjointView<Eigen::Upper>());
    hess.diagonal().array() += 1e-10;
    Vector step = hess.ldlt().solve(grad);
    if (!step.allFinite()) {
      ok = false;
      break;
    }
    if (step.lpNorm<Eigen::Infinity>() < 1e-10) break;

    double scale = 1.0;
    bool improved = false;
    bool progressed = false;
    for (int h = 0; h <= kMaxHalvings; ++h, scale *= 0.5) {
      double a_new = a, d_new = d;
      Vector g_new = gamma_row;
      if (ia >= 0) a_new += scale * step[ia];
      if (id >= 0) d_new += scale * step[id];
      for (int gi = 0; gi < static_cast<int>(free.gamma_groups.size()); ++gi)
        g_new[free.gamma_groups[gi]] += scale * step[ig0 + gi];
      const double f_new =
          item_objective(counts, nodes, item, a_new, d_new, g_new);
      if (f_new >= f) {
        progressed = f_new > f;
        a = a_new;
        d = d_new;
        gamma_row = g_new;
        f = f_new;
        improved = true;
        break;
      }
    }
    if (!improved) {
      ok = false;
      break;
    }
    if (!progressed) break;
  }

  if (free.a) params.a[item] = a;
  if (free.d) params.d[item] = d;
  for (int k : free.gamma_groups) params.gamma(item, k) = gamma_row[k];
  return ok;
}

ItemFreeSet free_set_for_item(int item, int groups,
                              const ConstraintProfile& profile,
                              const std::set<Cell>& frozen_cells) {
  ItemFreeSet free;
  free.a = item != 0;  // a(0) == 1 in every profile
  free.d = !profile.d_fixed_at_zero();
  for (int k = 0; k < groups; ++k) {
    if (profile.gamma_free(item, k) && !frozen_cells.count({item, k}))
      free.gamma_groups.push_back(k);
  }
  return free;
}

void enforce_fixed(ParamSet& params, const ConstraintProfile& profile,
                   const std::set<Cell>& frozen_cells) {
  params.a[0] = 1.0;
  if (profile.mu_fixed_at_zero()) params.mu.setZero();
  if (profile.d_fixed_at_zero()) params.d.setZero();
  for (int j = 0; j < params.items(); ++j)
    for (int k = 0; k < params.groups(); ++k)
      if (!profile.gamma_free(j, k) || frozen_cells.count({j, k}))
        params.gamma(j, k) = 0.0;
}

// One full maximization pass: item Newton updates, closed-form group
// updates, recentering for profiles that constrain sum(mu) to zero.
ParamSet maximize(const PseudoCounts& counts, const ResponseDataset& data,
                  const ParamSet& params, const ConstraintProfile& profile,
                  const std::set<Cell>& frozen_cells, const Vector& nodes,
                  std::vector<int>* halted_items) {
  ParamSet next = params;
  for (int j = 0; j < data.item_count; ++j) {
    const ItemFreeSet free =
        free_set_for_item(j, data.group_count, profile, frozen_cells);
    if (!update_item(counts, nodes, j, free, next) && halted_items)
      halted_items->push_back(j);
  }
  for (int k = 0; k < data.group_count; ++k) {
    if (counts.sw[k] <= 0.0) continue;
    const double m1 = counts.m1[k] / counts.sw[k];
    const double m2 = counts.m2[k] / counts.sw[k];
    const double mu = profile.mu_fixed_at_zero() ? 0.0 : m1;
    if (!profile.mu_fixed_at_zero()) next.mu[k] = mu;
    next.sigma[k] = std::sqrt(
        std::max(m2 - 2.0 * mu * m1 + mu * mu, kSigmaFloor * kSigmaFloor));
  }
  if (!profile.mu_fixed_at_zero()) next = recenter_means(next);
  enforce_fixed(next, profile, frozen_cells);
  return next;
}

ParamSet initial_params(const ResponseDataset& data,
                        const ConstraintProfile& profile,
                        const std::set<Cell>& frozen_cells) {
  ParamSet params = ParamSet::zeros(data.item_count, data.group_count);
  if (!profile.d_fixed_at_zero()) {
    // Logit of each item's weighted proportion correct, clamped to +/-3.
    Vector ones = Vector::Zero(data.item_count);
    Vector tot = Vector::Zero(data.item_count);
    for (const auto& person : data.persons) {
      for (const auto& [item, value] : person.responses) {
        tot[item] += person.weight;
        if (value) ones[item] += person.weight;
      }
    }
    for (int j = 0; j < data.item_count; ++j) {
      if (tot[j] <= 0.0) continue;
      const double prop =
          std::min(1.0 - 1e-6, std::max(1e-6, ones[j] / tot[j]));
      params.d[j] =
          std::min(3.0, std::max(-3.0, std::log(prop / (1.0 - prop))));
    }
  }
  enforce_fixed(params, profile, frozen_cells);
  return params;
}

std::set<Cell> find_frozen_cells(const ResponseDataset& data,
                                 const ConstraintProfile& profile,
                                 int min_group_responses) {
  std::set<Cell> frozen;
  if (min_group_responses <= 0) return frozen;
  Eigen::MatrixXi count =
      Eigen::MatrixXi::Zero(data.item_count, data.group_count);
  for (const auto& person : data.persons)
    for (const auto& [item, value] : person.responses)
      count(item, person.group) += 1;
  for (int j = 0; j < data.item_count; ++j)
    for (int k = 0; k < data.group_count; ++k)
      if (profile.gamma_free(j, k) && count(j, k) < min_group_responses)
        frozen.insert({j, k});
  return frozen;
}

}  // namespace

FitConfig default_fit_config() {
  FitConfig config;
  config.grid = make_grid(61, -6.0, 6.0);
  return config;
}

PosteriorTable e_step(const ParamSet& params, const ResponseDataset& data,
                      const QuadGrid& grid) {
  params.validate();
  if (params.items() != data.item_count || params.groups() != data.group_count)
    throw std::invalid_argument("e_step: params do not match dataset");
  EStepFull full = e_step_full(params, data, grid, 1);
  PosteriorTable table;
  table.mass = std::move(full.mass);
  table.grid = grid;
  return table;
}

ParamSet m_step(const PosteriorTable& posterior, const ResponseDataset& data,
                const ParamSet& params, const ConstraintProfile& profile,
                const std::set<Cell>& frozen_cells) {
  PseudoCounts counts = accumulate(posterior, data, 1);
  return maximize(counts, data, params, profile, frozen_cells,
                  posterior.grid.nodes, nullptr);
}

FitResult fit(const ResponseDataset& data, const ConstraintProfile& profile,
              const FitConfig& config) {
  data.validate();
  if (config.start) {
    config.start->validate();
    if (config.start->items() != data.item_count ||
        config.start->groups() != data.group_count)
      throw std::invalid_argument("fit: start params do not match dataset");
  }

  FitResult result;
  result.profile = profile;
  result.frozen_cells =
      find_frozen_cells(data, profile, config.min_group_responses);

  ParamSet params = config.start
                        ? *config.start
                        : initial_params(data, profile, result.frozen_cells);
  enforce_fixed(params, profile, result.frozen_cells);

  PosteriorTable table;
  table.grid = config.grid;
  std::vector<int> halted_items;
  for (int cycle = 0;; ++cycle) {
    EStepFull estep = e_step_full(params, data, config.grid, config.threads);
    result.loglik_trace.push_back(estep.loglik);
    if (cycle > 0) {
      const double prev = result.loglik_trace[cycle - 1];
      const double rel = std::abs(estep.loglik - prev) / (std::abs(prev) + 1.0);
      if (rel < config.tol) {
        result.converged = true;
        break;
      }
    }
    if (cycle == config.max_iter) break;

    table.mass = std::move(estep.mass);
    const PseudoCounts counts = accumulate(table, data, config.threads);
    params = maximize(counts, data, params, profile, result.frozen_cells,
                      config.grid.nodes, &halted_items);
    result.iterations = cycle + 1;
  }
  result.params = std::move(params);
  for (int j : halted_items)
    result.notes.push_back("newton step halving exhausted for item " +
                           std::to_string(j + 1));
  return result;
}

}  // namespace difcal
