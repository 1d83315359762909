#include "interlasso/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include <fmt/format.h>

#include "interlasso/feature_tree.hpp"
#include "interlasso/lasso_solver.hpp"
#include "interlasso/min_norm.hpp"

namespace interlasso {

ExpandedDesign enumerate_all(const CovariateMatrix& z, int order, std::uint64_t cap) {
  if (order < 1) throw std::invalid_argument("order must be >= 1");
  const std::size_t n = z.n();
  const std::size_t d = z.d();
  std::uint64_t total = 0;
  for (int k = 1; k <= order && static_cast<std::size_t>(k) <= d; ++k) {
    std::uint64_t c = 1;
    for (int i = 1; i <= k; ++i) c = c * (d - static_cast<std::size_t>(k) + static_cast<std::size_t>(i)) / static_cast<std::uint64_t>(i);
    total += c;
    if (total > cap)
      throw std::length_error(fmt::format("expanded design exceeds the oracle cap of {} columns", cap));
  }

  std::vector<std::vector<double>> dense(d, std::vector<double>(n, 0.0));
  for (std::size_t k = 0; k < d; ++k)
    for (const Entry& e : z.column(k)) dense[k][e.index] = e.value;

  ExpandedDesign design;
  design.n = n;
  for (int size = 1; size <= order && static_cast<std::size_t>(size) <= d; ++size) {
    std::vector<std::uint32_t> combo(static_cast<std::size_t>(size));
    std::iota(combo.begin(), combo.end(), 0u);
    for (;;) {
      std::vector<double> column(n, 1.0);
      for (std::uint32_t k : combo)
        for (std::size_t i = 0; i < n; ++i) column[i] *= dense[k][i];
      design.itemsets.emplace_back(combo);
      design.columns.push_back(std::move(column));
      // Next combination in lexicographic order.
      int pos = size - 1;
      while (pos >= 0 && combo[static_cast<std::size_t>(pos)] == d - static_cast<std::size_t>(size - pos)) --pos;
      if (pos < 0) break;
      ++combo[static_cast<std::size_t>(pos)];
      for (std::size_t q = static_cast<std::size_t>(pos) + 1; q < combo.size(); ++q) combo[q] = combo[q - 1] + 1;
    }
  }

  std::vector<std::size_t> perm(design.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::sort(perm.begin(), perm.end(),
            [&](std::size_t l, std::size_t r) { return design.itemsets[l] < design.itemsets[r]; });
  ExpandedDesign sorted;
  sorted.n = n;
  for (std::size_t p : perm) {
    sorted.itemsets.push_back(std::move(design.itemsets[p]));
    sorted.columns.push_back(std::move(design.columns[p]));
  }
  return sorted;
}

DenseMax dense_max_abs_inner(const ExpandedDesign& design, std::span<const double> v) {
  DenseMax best;
  for (std::size_t j = 0; j < design.size(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < design.n; ++i) s += design.columns[j][i] * v[i];
    if (std::abs(s) > best.value) {
      best.value = std::abs(s);
      best.itemset = design.itemsets[j];
    }
  }
  return best;
}

namespace {

/// Dense reference solver state: distinct nonzero columns of the design.
class DenseLasso {
 public:
  DenseLasso(const ExpandedDesign& design, std::span<const double> y)
      : design_(design), y_(y.begin(), y.end()), residual_(y.begin(), y.end()) {
    for (std::size_t j = 0; j < design.size(); ++j) {
      const auto& col = design.columns[j];
      double nsq = 0.0;
      for (double x : col) nsq += x * x;
      if (nsq == 0.0) continue;
      // Columns are scanned in lexicographic order, so the first copy represents duplicates.
      const bool seen = std::any_of(unique_.begin(), unique_.end(),
                                    [&](std::size_t u) { return design.columns[u] == col; });
      if (seen) continue;
      unique_.push_back(j);
      norm_sq_.push_back(nsq);
    }
    beta_.assign(unique_.size(), 0.0);
  }

  double correlation(std::size_t u) const {
    const auto& col = design_.columns[unique_[u]];
    double s = 0.0;
    for (std::size_t i = 0; i < col.size(); ++i) s += col[i] * residual_[i];
    return s;
  }

  void solve(double lambda, double gap_tol, std::size_t max_sweeps) {
    for (std::size_t sweep = 0;; ++sweep) {
      if (sweep % 5 == 0 && converged(lambda, gap_tol)) return;
      if (sweep >= max_sweeps)
        throw std::runtime_error(fmt::format("oracle solver did not converge at lambda={:.17g}", lambda));
      for (std::size_t u = 0; u < unique_.size(); ++u) {
        const double old = beta_[u];
        const double updated = soft_threshold(correlation(u) + norm_sq_[u] * old, lambda) / norm_sq_[u];
        if (updated == old) continue;
        const auto& col = design_.columns[unique_[u]];
        for (std::size_t i = 0; i < col.size(); ++i) residual_[i] -= col[i] * (updated - old);
        beta_[u] = updated;
      }
    }
  }

  SparseSolution solution(double lambda) const {
    SparseSolution s;
    s.lambda = lambda;
    s.gap = last_gap_;
    for (std::size_t u = 0; u < unique_.size(); ++u)
      if (beta_[u] != 0.0) s.coefficients.emplace(design_.itemsets[unique_[u]], beta_[u]);
    return s;
  }

 private:
  double kkt_residual(double lambda, std::span<const double> beta, std::span<const double> residual) const {
    double worst = 0.0;
    for (std::size_t u = 0; u < unique_.size(); ++u) {
      const auto& col = design_.columns[unique_[u]];
      double g = 0.0;
      for (std::size_t i = 0; i < col.size(); ++i) g += col[i] * residual[i];
      worst = std::max(worst, beta[u] != 0.0 ? std::abs(g - std::copysign(lambda, beta[u]))
                                              : std::max(0.0, std::abs(g) - lambda));
    }
    return worst;
  }

  // Normal equations on the support with fixed signs, by Gaussian elimination
  // with partial pivoting. Kept only if signs hold and the KKT residual drops.
  void refine(double lambda) {
    std::vector<std::size_t> s;
    for (std::size_t u = 0; u < unique_.size(); ++u)
      if (beta_[u] != 0.0) s.push_back(u);
    const std::size_t m = s.size();
    if (m == 0 || m > y_.size()) return;
    std::vector<std::vector<double>> a(m, std::vector<double>(m + 1, 0.0));
    for (std::size_t p = 0; p < m; ++p) {
      const auto& xp = design_.columns[unique_[s[p]]];
      for (std::size_t q = 0; q < m; ++q) {
        const auto& xq = design_.columns[unique_[s[q]]];
        for (std::size_t i = 0; i < y_.size(); ++i) a[p][q] += xp[i] * xq[i];
      }
      for (std::size_t i = 0; i < y_.size(); ++i) a[p][m] += xp[i] * y_[i];
      a[p][m] -= std::copysign(lambda, beta_[s[p]]);
    }
    for (std::size_t c = 0; c < m; ++c) {
      std::size_t piv = c;
      for (std::size_t r = c + 1; r < m; ++r)
        if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
      if (std::abs(a[piv][c]) < 1e-11) return;
      std::swap(a[piv], a[c]);
      for (std::size_t r = 0; r < m; ++r) {
        if (r == c) continue;
        const double f = a[r][c] / a[c][c];
        for (std::size_t k = c; k <= m; ++k) a[r][k] -= f * a[c][k];
      }
    }
    std::vector<double> beta = beta_;
    for (std::size_t p = 0; p < m; ++p) {
      const double v = a[p][m] / a[p][p];
      if (!(v * beta_[s[p]] > 0.0)) return;
      beta[s[p]] = v;
    }
    std::vector<double> residual = y_;
    for (std::size_t p = 0; p < m; ++p) {
      const auto& col = design_.columns[unique_[s[p]]];
      for (std::size_t i = 0; i < col.size(); ++i) residual[i] -= col[i] * beta[s[p]];
    }
    if (kkt_residual(lambda, beta, residual) < kkt_residual(lambda, beta_, residual_)) {
      beta_ = std::move(beta);
      residual_ = std::move(residual);
    }
  }

  bool converged(double lambda, double gap_tol) {
    if (kkt_residual(lambda, beta_, residual_) > 1e-13 * lambda) refine(lambda);
    double max_abs = 0.0;
    double kkt = 0.0;
    double l1 = 0.0;
    for (std::size_t u = 0; u < unique_.size(); ++u) {
      const double g = correlation(u);
      max_abs = std::max(max_abs, std::abs(g));
      kkt = std::max(kkt, beta_[u] != 0.0 ? std::abs(g - std::copysign(lambda, beta_[u]))
                                          : std::max(0.0, std::abs(g) - lambda));
      l1 += std::abs(beta_[u]);
    }
    double rr = 0.0, yy = 0.0, dist = 0.0;
    const double scale = max_abs > lambda ? lambda / max_abs : 1.0;
    for (std::size_t i = 0; i < y_.size(); ++i) {
      rr += residual_[i] * residual_[i];
      yy += y_[i] * y_[i];
      dist += (scale * residual_[i] - y_[i]) * (scale * residual_[i] - y_[i]);
    }
    const double primal = 0.5 * rr + lambda * l1;
    const double gap = primal - (0.5 * yy - 0.5 * dist);
    last_gap_ = primal > 0.0 ? gap / primal : 0.0;
    return last_gap_ <= gap_tol && kkt <= 1e-13 * lambda;
  }

  const ExpandedDesign& design_;
  std::vector<double> y_;
  std::vector<double> residual_;
  std::vector<std::size_t> unique_;
  std::vector<double> norm_sq_;
  std::vector<double> beta_;
  double last_gap_ = 0.0;
};

}  // namespace

namespace {

SparseVector to_sparse(const std::vector<double>& column) {
  SparseVector out;
  for (std::size_t i = 0; i < column.size(); ++i)
    if (column[i] != 0.0) out.push_back({static_cast<std::uint32_t>(i), column[i]});
  return out;
}

}  // namespace

PathResult oracle_path(const CovariateMatrix& z, std::span<const double> y, const ProblemConfig& config,
                       std::uint64_t cap) {
  config.validate();
  const ExpandedDesign design = enumerate_all(z, config.order, cap);
  const DenseMax top = dense_max_abs_inner(design, y);
  if (!top.itemset) throw DataError("lambda_max undefined: every feature is orthogonal to the response");

  PathResult path;
  path.lambda_max = top.value;
  path.lambda_max_itemset = *top.itemset;
  const auto lambdas = lambda_schedule(top.value, config.lambda_decay, config.lambda_min_ratio);
  DenseLasso lasso(design, y);
  std::vector<SparseFeature> candidates;
  candidates.reserve(design.size());
  for (std::size_t j = 0; j < design.size(); ++j) candidates.push_back({design.itemsets[j], to_sparse(design.columns[j])});
  for (std::size_t t = 0; t < lambdas.size(); ++t) {
    PathStep step;
    step.lambda = lambdas[t];
    if (t > 0) lasso.solve(step.lambda, config.tol / 10.0, 200000);
    step.solution = t > 0 ? min_norm_solution(lasso.solution(step.lambda), candidates, y)
                          : SparseSolution{{}, step.lambda, 0.0};
    step.metrics.total_features = design.size();
    step.metrics.active_count_by_order = active_by_order(step.solution, config.order);
    path.steps.push_back(std::move(step));
  }
  return path;
}

SafetyReport validate_safety(const PathResult& screened, const PathResult& oracle, double active_threshold) {
  SafetyReport report;
  const std::size_t steps = std::min(screened.steps.size(), oracle.steps.size());
  for (std::size_t t = 1; t < steps; ++t) {
    const auto& kept = screened.steps[t].superset;
    for (const auto& [itemset, coef] : oracle.steps[t].solution.coefficients) {
      if (std::abs(coef) <= active_threshold) continue;
      if (!std::binary_search(kept.begin(), kept.end(), itemset))
        report.violations.push_back({t, oracle.steps[t].lambda, itemset, coef});
    }
  }
  return report;
}

DominationReport validate_bound_domination(const ScreeningContext& ctx, const CovariateMatrix& z, int order,
                                           const ScreeningOptions& options, double slack, std::uint64_t cap) {
  const ExpandedDesign design = enumerate_all(z, order, cap);
  std::vector<SparseVector> sparse;
  std::vector<BoundPair> leaf;
  sparse.reserve(design.size());
  for (const auto& col : design.columns) {
    sparse.push_back(to_sparse(col));
    leaf.push_back(feature_screen_bounds(ctx, sparse.back(), options));
  }
  DominationReport report;
  const bool binary = z.is_binary();
  for (std::size_t j = 0; j < design.size(); ++j) {
    if (sparse[j].empty()) continue;
    const BoundPair node = node_prune_bounds(ctx, sparse[j], binary, options);
    ++report.node_checks;
    // Descendants follow their ancestor contiguously in lexicographic order.
    for (std::size_t q = j + 1; q < design.size() && design.itemsets[j].is_ancestor_of(design.itemsets[q]); ++q) {
      ++report.pair_checks;
      if (node.plus < leaf[q].plus - slack || node.minus < leaf[q].minus - slack)
        report.violations.push_back(
            {design.itemsets[j], design.itemsets[q], node.plus, node.minus, leaf[q].plus, leaf[q].minus});
    }
  }
  return report;
}

PathComparison compare_paths(const PathResult& a, const PathResult& b, double active_threshold) {
  PathComparison cmp;
  if (a.steps.size() != b.steps.size()) {
    cmp.lambdas_match = false;
    return cmp;
  }
  for (std::size_t t = 0; t < a.steps.size(); ++t) {
    const auto& sa = a.steps[t];
    const auto& sb = b.steps[t];
    const bool lambda_ok = std::abs(sa.lambda - sb.lambda) <= 1e-12 * std::max(1.0, std::abs(sa.lambda));
    std::set<Itemset> keys;
    for (const auto& [k, v] : sa.solution.coefficients) keys.insert(k);
    for (const auto& [k, v] : sb.solution.coefficients) keys.insert(k);
    bool active_ok = true;
    for (const Itemset& k : keys) {
      const auto ia = sa.solution.coefficients.find(k);
      const auto ib = sb.solution.coefficients.find(k);
      const double va = ia == sa.solution.coefficients.end() ? 0.0 : ia->second;
      const double vb = ib == sb.solution.coefficients.end() ? 0.0 : ib->second;
      cmp.max_coefficient_diff = std::max(cmp.max_coefficient_diff, std::abs(va - vb));
      if ((std::abs(va) > active_threshold) != (std::abs(vb) > active_threshold)) active_ok = false;
    }
    if ((!lambda_ok || !active_ok) && cmp.lambdas_match && cmp.active_sets_match) cmp.first_mismatch_step = t;
    cmp.lambdas_match = cmp.lambdas_match && lambda_ok;
    cmp.active_sets_match = cmp.active_sets_match && active_ok;
  }
  return cmp;
}

namespace {

nlohmann::ordered_json itemset_json(const Itemset& s) {
  auto arr = nlohmann::ordered_json::array();
  for (auto k : s) arr.push_back(k + 1);
  return arr;
}

}  // namespace

nlohmann::ordered_json to_json(const SafetyReport& report) {
  nlohmann::ordered_json j;
  j["kind"] = "safety";
  j["passed"] = report.passed();
  auto list = nlohmann::ordered_json::array();
  for (const auto& v : report.violations)
    list.push_back({{"step", v.step}, {"lambda", v.lambda}, {"itemset", itemset_json(v.itemset)},
                    {"oracle_coef", v.oracle_coefficient}});
  j["violations"] = std::move(list);
  return j;
}

nlohmann::ordered_json to_json(const DominationReport& report) {
  nlohmann::ordered_json j;
  j["kind"] = "bound_domination";
  j["passed"] = report.passed();
  j["node_checks"] = report.node_checks;
  j["pair_checks"] = report.pair_checks;
  auto list = nlohmann::ordered_json::array();
  for (const auto& v : report.violations)
    list.push_back({{"node", itemset_json(v.node)},
                    {"descendant", itemset_json(v.descendant)},
                    {"node_plus", v.node_plus},
                    {"node_minus", v.node_minus},
                    {"leaf_plus", v.leaf_plus},
                    {"leaf_minus", v.leaf_minus}});
  j["violations"] = std::move(list);
  return j;
}

}  // namespace interlasso
