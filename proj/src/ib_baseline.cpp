#include "interlasso/ib_baseline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "interlasso/feature_tree.hpp"
#include "interlasso/min_norm.hpp"

namespace interlasso {

std::vector<Itemset> WorkingSet::itemsets() const {
  std::vector<Itemset> out;
  out.reserve(features.size());
  for (const auto& f : features) out.push_back(f.itemset);
  return out;
}

bool WorkingSet::contains(const Itemset& itemset) const {
  return std::any_of(features.begin(), features.end(),
                     [&](const SparseFeature& f) { return f.itemset == itemset; });
}

void WorkingSet::add(SparseFeature feature) {
  if (contains(feature.itemset))
    throw std::invalid_argument("itemset " + feature.itemset.to_string() + " already in working set");
  add_history.push_back(feature.itemset);
  features.push_back(std::move(feature));
}

IbResult ib_solve(const CovariateMatrix& z, std::span<const double> y, double lambda, WorkingSet warm_set,
                  const SparseSolution& warm_solution, int order, const IbOptions& options) {
  IbResult out;
  out.working_set = std::move(warm_set);
  SolverOptions solver;
  solver.tol = options.tol;
  solver.max_sweeps_factor = options.max_sweeps_factor;
  SparseSolution warm = warm_solution;

  for (;;) {
    SolveResult solved = cd_solve(out.working_set.features, y, lambda, warm, solver);
    ++out.metrics.lasso_solves;
    out.metrics.sweeps += solved.sweeps;

    std::vector<double> residual(y.begin(), y.end());
    double reduced_max = 0.0;
    for (const auto& f : out.working_set.features) {
      auto it = solved.solution.coefficients.find(f.itemset);
      if (it == solved.solution.coefficients.end()) continue;
      for (const Entry& e : f.entries) residual[e.index] -= e.value * it->second;
    }
    for (const auto& f : out.working_set.features) reduced_max = std::max(reduced_max, std::abs(f.dot(residual)));

    const MaxInnerResult search =
        tree_max_abs_inner(z, residual, order, out.working_set.itemsets(), {.threads = options.threads});
    ++out.metrics.tree_searches;
    out.metrics.search_nodes += search.counts.visited;

    if (!search.itemset || search.value <= lambda * (1.0 + solver.kkt_tol)) {
      const GapReport gap = gap_from_residual(y, residual, solved.solution.l1_norm(), lambda,
                                              std::max(reduced_max, search.value));
      out.solution = std::move(solved.solution);
      out.solution.gap = gap.relative;
      return out;
    }
    out.working_set.add(feature_vector(*search.itemset, z));
    ++out.metrics.features_added;
    warm = std::move(solved.solution);
  }
}

PathResult ib_run_path(const ProblemConfig& config, const CovariateMatrix& z, std::span<const double> y) {
  using Clock = std::chrono::steady_clock;
  config.validate();
  if (y.size() != z.n()) throw DataError("response length does not match instance count");
  const auto started = Clock::now();

  PathResult path;
  const LambdaMax lm = compute_lambda_max(z, y, config.order, config.threads);
  path.lambda_max = lm.value;
  path.lambda_max_itemset = lm.itemset;
  const std::vector<double> lambdas = lambda_schedule(lm.value, config.lambda_decay, config.lambda_min_ratio);
  const std::uint64_t total = feature_count(z.d(), config.order);

  PathStep first;
  first.lambda = lm.value;
  first.solution.lambda = lm.value;
  first.metrics.total_features = total;
  first.metrics.active_count_by_order.assign(static_cast<std::size_t>(config.order), 0);
  first.metrics.tree_searches = 1;
  first.metrics.search_nodes = lm.nodes;
  first.metrics.traversed_nodes = lm.nodes;
  first.metrics.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - started).count();
  path.steps.push_back(std::move(first));

  const IbOptions options{config.tol, config.max_sweeps_factor, config.threads};
  WorkingSet working;
  for (std::size_t t = 1; t < lambdas.size(); ++t) {
    const auto step_start = Clock::now();
    PathStep step;
    step.lambda = lambdas[t];
    IbResult result;
    try {
      result = ib_solve(z, y, step.lambda, std::move(working), path.steps.back().solution, config.order, options);
    } catch (const NonConvergenceError& e) {
      throw PathError(fmt::format("step {}: {}", t, e.what()), t, path);
    }
    working = std::move(result.working_set);
    StepMetrics& m = step.metrics;
    m.total_features = total;
    m.traversed_nodes = result.metrics.search_nodes;
    m.search_nodes = result.metrics.search_nodes;
    m.tree_searches = result.metrics.tree_searches;
    m.lasso_solves = result.metrics.lasso_solves;
    m.solver_sweeps = result.metrics.sweeps;
    m.superset_size = working.features.size();
    // Tied features outside the working set are found by one more search.
    if (!result.solution.empty()) {
      const std::vector<double> r = residual_of(result.solution, z, y);
      CollectResult tied =
          tree_collect_above(z, r, config.order, step.lambda * (1.0 - kTieTolerance), config.threads);
      ++m.tree_searches;
      m.search_nodes += tied.counts.visited;
      m.traversed_nodes += tied.counts.visited;
      for (const auto& f : working.features) tied.features.push_back(f);
      result.solution = min_norm_solution(result.solution, tied.features, y);
    }
    step.solution = std::move(result.solution);
    m.gap = step.solution.gap;
    m.active_count_by_order = active_by_order(step.solution, config.order);
    if (config.keep_supersets) step.superset = working.itemsets();
    m.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - step_start).count();
    path.steps.push_back(std::move(step));
  }
  return path;
}

}  // namespace interlasso
