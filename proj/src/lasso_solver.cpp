#include "interlasso/lasso_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "interlasso/feature_tree.hpp"

namespace interlasso {

double soft_threshold(double z, double lambda) {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

GapReport gap_from_residual(std::span<const double> y, std::span<const double> residual,
                            double l1_norm, double lambda, double max_abs_correlation) {
  GapReport g;
  double rr = 0.0;
  for (double r : residual) rr += r * r;
  g.primal = 0.5 * rr + lambda * l1_norm;
  g.max_correlation = max_abs_correlation / lambda;
  const double scale = g.max_correlation > 1.0 ? 1.0 / g.max_correlation : 1.0;
  double yy = 0.0;
  double dist = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    yy += y[i] * y[i];
    const double t = scale * residual[i] - y[i];
    dist += t * t;
  }
  g.dual = 0.5 * yy - 0.5 * dist;
  g.gap = g.primal - g.dual;
  g.relative = g.primal > 0.0 ? g.gap / g.primal : 0.0;
  return g;
}

namespace {

struct Column {
  const SparseVector* entries;
  Itemset representative;
  double norm_sq;
  double beta;
};

bool entries_less(const SparseVector& l, const SparseVector& r) {
  return std::lexicographical_compare(l.begin(), l.end(), r.begin(), r.end(), [](const Entry& a, const Entry& b) {
    return a.index != b.index ? a.index < b.index : a.value < b.value;
  });
}

double dot(const SparseVector& x, std::span<const double> v) {
  double s = 0.0;
  for (const Entry& e : x) s += v[e.index] * e.value;
  return s;
}

/// Minimizer of the objective on the support with signs fixed: solves
/// X_S^T X_S beta_S = X_S^T y - lambda sign(beta_S). Columns that are
/// (numerically) dependent on earlier ones keep their current value and the
/// rest are solved for, so the system is always well posed.
std::vector<double> solve_on_support(const std::vector<Column>& columns, const std::vector<std::size_t>& support,
                                     std::span<const double> y, double lambda, const std::vector<double>& beta) {
  const std::size_t m = support.size();
  std::vector<double> gram(m * m), chol(m * m), rhs(m), dense(y.size(), 0.0);
  for (std::size_t a = 0; a < m; ++a) {
    const SparseVector& xa = *columns[support[a]].entries;
    for (const Entry& e : xa) dense[e.index] = e.value;
    rhs[a] = dot(xa, y) - std::copysign(lambda, beta[support[a]]);
    for (std::size_t b = 0; b <= a; ++b)
      gram[a * m + b] = gram[b * m + a] = dot(*columns[support[b]].entries, dense);
    for (const Entry& e : xa) dense[e.index] = 0.0;
  }
  std::vector<bool> dependent(m, false);
  for (std::size_t j = 0; j < m; ++j) {
    double diag = gram[j * m + j];
    for (std::size_t k = 0; k < j; ++k)
      if (!dependent[k]) diag -= chol[j * m + k] * chol[j * m + k];
    if (!(diag > 1e-12 * columns[support[j]].norm_sq)) {
      dependent[j] = true;
      continue;
    }
    chol[j * m + j] = std::sqrt(diag);
    for (std::size_t i = j + 1; i < m; ++i) {
      double v = gram[i * m + j];
      for (std::size_t k = 0; k < j; ++k)
        if (!dependent[k]) v -= chol[i * m + k] * chol[j * m + k];
      chol[i * m + j] = v / chol[j * m + j];
    }
  }
  std::vector<double> x(m);
  for (std::size_t a = 0; a < m; ++a) {
    if (dependent[a]) {
      x[a] = beta[support[a]];
      continue;
    }
    x[a] = rhs[a];
    for (std::size_t d = 0; d < m; ++d)
      if (dependent[d]) x[a] -= gram[a * m + d] * beta[support[d]];
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (dependent[i]) continue;
    for (std::size_t k = 0; k < i; ++k)
      if (!dependent[k]) x[i] -= chol[i * m + k] * x[k];
    x[i] /= chol[i * m + i];
  }
  for (std::size_t i = m; i-- > 0;) {
    if (dependent[i]) continue;
    for (std::size_t k = i + 1; k < m; ++k)
      if (!dependent[k]) x[i] -= chol[k * m + i] * x[k];
    x[i] /= chol[i * m + i];
  }
  return x;
}

}  // namespace

SolveResult cd_solve(std::span<const SparseFeature> features, std::span<const double> y, double lambda,
                     const SparseSolution& warm_start, const SolverOptions& options,
                     const Certifier& certifier) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be > 0");
  for (const auto& f : features)
    if (f.entries.empty())
      throw std::invalid_argument("zero feature " + f.itemset.to_string() + " passed to the solver");

  // Group identical columns; each group is represented by its smallest itemset.
  std::vector<std::size_t> by_column(features.size());
  std::iota(by_column.begin(), by_column.end(), 0);
  std::sort(by_column.begin(), by_column.end(), [&](std::size_t l, std::size_t r) {
    if (features[l].entries != features[r].entries)
      return entries_less(features[l].entries, features[r].entries);
    return features[l].itemset < features[r].itemset;
  });
  std::vector<Column> columns;
  for (std::size_t g = 0; g < by_column.size();) {
    const SparseFeature& head = features[by_column[g]];
    Column col{&head.entries, head.itemset, 0.0, 0.0};
    for (const Entry& e : head.entries) col.norm_sq += e.value * e.value;
    for (; g < by_column.size() && features[by_column[g]].entries == head.entries; ++g) {
      auto it = warm_start.coefficients.find(features[by_column[g]].itemset);
      if (it != warm_start.coefficients.end()) col.beta += it->second;
    }
    columns.push_back(std::move(col));
  }
  std::sort(columns.begin(), columns.end(),
            [](const Column& l, const Column& r) { return l.representative < r.representative; });

  std::vector<double> residual(y.begin(), y.end());
  for (const Column& col : columns)
    if (col.beta != 0.0)
      for (const Entry& e : *col.entries) residual[e.index] -= e.value * col.beta;

  SolveResult result;
  const std::size_t cap = std::max(options.max_sweeps_factor * columns.size(), options.min_sweeps_cap);
  const auto in_features = [&](const Itemset& item) {
    return std::any_of(features.begin(), features.end(),
                       [&](const SparseFeature& f) { return f.itemset == item; });
  };

  struct Kkt {
    double worst = 0.0;        // largest reduced KKT violation
    double reduced_max = 0.0;  // largest |x_j^T rho| over the reduced set
    double l1 = 0.0;
  };
  const auto kkt_of = [&](std::span<const double> rho, const auto& beta_of) {
    Kkt k;
    for (std::size_t j = 0; j < columns.size(); ++j) {
      const double beta = beta_of(j);
      const double g = dot(*columns[j].entries, rho);
      k.reduced_max = std::max(k.reduced_max, std::abs(g));
      k.worst = std::max(k.worst, beta != 0.0 ? std::abs(g - std::copysign(lambda, beta))
                                              : std::max(0.0, std::abs(g) - lambda));
      k.l1 += std::abs(beta);
    }
    return k;
  };
  const auto current_beta = [&](std::size_t j) { return columns[j].beta; };

  // Exact solve on the current support with its signs held fixed. A move goes
  // from the iterate towards the face minimizer and stops at the first zero
  // crossing, dropping that coordinate, so the objective cannot increase. The
  // result is kept if the KKT residual or the objective drops. This cuts the slow linear
  // tail of the sweeps on ill-conditioned or rank-deficient supports.
  const auto polish = [&](const Kkt& before) {
    std::vector<double> beta(columns.size());
    std::vector<std::size_t> support;
    for (std::size_t j = 0; j < columns.size(); ++j) {
      beta[j] = columns[j].beta;
      if (beta[j] != 0.0) support.push_back(j);
    }
    if (support.size() > options.polish_limit) return before;
    while (!support.empty()) {
      const std::vector<double> target = solve_on_support(columns, support, y, lambda, beta);
      double step = 1.0;
      std::size_t blocking = support.size();
      for (std::size_t a = 0; a < support.size(); ++a) {
        const double cur = beta[support[a]];
        const double dir = target[a] - cur;
        if (dir * cur < 0.0 && -cur / dir <= step) {
          step = -cur / dir;
          blocking = a;
        }
      }
      std::vector<std::size_t> kept;
      for (std::size_t a = 0; a < support.size(); ++a) {
        const std::size_t j = support[a];
        const double moved = beta[j] + step * (target[a] - beta[j]);
        beta[j] = a == blocking || moved * beta[j] <= 0.0 ? 0.0 : moved;
        if (beta[j] != 0.0) kept.push_back(j);
      }
      if (blocking == support.size()) break;  // reached the face minimizer
      support = std::move(kept);
    }
    std::vector<double> rho(y.begin(), y.end());
    for (std::size_t j = 0; j < columns.size(); ++j)
      if (beta[j] != 0.0)
        for (const Entry& e : *columns[j].entries) rho[e.index] -= e.value * beta[j];
    const Kkt after = kkt_of(rho, [&](std::size_t j) { return beta[j]; });
    const auto objective = [&](std::span<const double> r, double l1) {
      double rr = 0.0;
      for (double v : r) rr += v * v;
      return 0.5 * rr + lambda * l1;
    };
    if (!(after.worst < before.worst) && !(objective(rho, after.l1) < objective(residual, before.l1)))
      return before;
    for (std::size_t j = 0; j < columns.size(); ++j) columns[j].beta = beta[j];
    residual = std::move(rho);
    ++result.polishes;
    return after;
  };

  enum class Check { kContinue, kDone, kInsufficient };
  const auto check = [&](double kkt_limit) {
    Kkt k = kkt_of(residual, current_beta);
    if (k.worst > lambda * options.polish_below) k = polish(k);
    const double reduced_max = k.reduced_max;
    const double l1 = k.l1;
    if (k.worst > lambda * kkt_limit) return Check::kContinue;

    Certificate cert;
    if (certifier) {
      cert = certifier(residual, reduced_max);
      ++result.certifications;
      result.certification_nodes += cert.nodes;
    }
    const double max_abs = std::max(cert.max_abs, reduced_max);
    const GapReport gap = gap_from_residual(y, residual, l1, lambda, max_abs);
    result.max_violation = gap.max_correlation;
    result.solution.gap = gap.relative;
    if (gap.relative <= options.tol) return Check::kDone;
    if (cert.argmax && cert.max_abs > lambda * (1.0 + options.kkt_tol) && !in_features(*cert.argmax)) {
      result.violator = cert.argmax;
      return Check::kInsufficient;
    }
    return Check::kContinue;
  };

  const auto finish = [&](SolveStatus status) {
    result.status = status;
    result.solution.lambda = lambda;
    for (const Column& col : columns)
      if (col.beta != 0.0) result.solution.coefficients.emplace(col.representative, col.beta);
    return result;
  };

  for (;;) {
    const Check state = check(options.kkt_tol);
    if (state == Check::kDone) return finish(SolveStatus::kConverged);
    if (state == Check::kInsufficient) return finish(SolveStatus::kInsufficientSet);

    bool check_now = false;
    while (!check_now) {
      if (result.sweeps >= cap) {
        // Rank-deficient supports can stall the tail; settle for the looser limit.
        const Check last = check(options.kkt_fallback);
        if (last == Check::kDone) return finish(SolveStatus::kConverged);
        if (last == Check::kInsufficient) return finish(SolveStatus::kInsufficientSet);
        finish(SolveStatus::kConverged);
        throw NonConvergenceError(
            fmt::format("coordinate descent did not converge within {} sweeps (lambda={:.17g}, gap={:.3e})",
                        cap, lambda, result.solution.gap),
            result.solution);
      }
      double max_change = 0.0;
      for (Column& col : columns) {
        const double z = dot(*col.entries, residual) + col.norm_sq * col.beta;
        const double updated = soft_threshold(z, lambda) / col.norm_sq;
        const double delta = updated - col.beta;
        if (delta != 0.0) {
          for (const Entry& e : *col.entries) residual[e.index] -= e.value * delta;
          col.beta = updated;
          max_change = std::max(max_change, std::abs(delta));
        }
      }
      ++result.sweeps;
      check_now = result.sweeps % options.gap_every == 0 || max_change < options.tol * 1e-2;
    }
  }
}

std::vector<double> residual_of(const SparseSolution& solution, const CovariateMatrix& z,
                                std::span<const double> y) {
  std::vector<double> residual(y.begin(), y.end());
  for (const auto& [itemset, coef] : solution.coefficients) {
    const SparseFeature f = feature_vector(itemset, z);
    for (const Entry& e : f.entries) residual[e.index] -= e.value * coef;
  }
  return residual;
}

GapReport duality_gap(const SparseSolution& solution, const CovariateMatrix& z,
                      std::span<const double> y, int order, unsigned threads) {
  const std::vector<double> residual = residual_of(solution, z, y);
  const MaxInnerResult m = tree_max_abs_inner(z, residual, order, {}, {.threads = threads});
  return gap_from_residual(y, residual, solution.l1_norm(), solution.lambda, m.value);
}

}  // namespace interlasso
