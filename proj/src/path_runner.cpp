#include "interlasso/path_runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <fmt/format.h>

#include "interlasso/feature_tree.hpp"
#include "interlasso/min_norm.hpp"

namespace interlasso {

std::vector<double> lambda_schedule(double lambda_max, double decay, double min_ratio) {
  std::vector<double> out{lambda_max};
  double lambda = lambda_max;
  for (int t = 1;; ++t) {
    lambda *= 1.0 - decay / std::sqrt(static_cast<double>(t));
    if (lambda / lambda_max < min_ratio) break;
    out.push_back(lambda);
  }
  return out;
}

LambdaMax compute_lambda_max(const CovariateMatrix& z, std::span<const double> y, int order,
                             unsigned threads) {
  const MaxInnerResult m = tree_max_abs_inner(z, y, order, {}, {.threads = threads});
  if (!m.itemset) throw DataError("lambda_max undefined: every feature is orthogonal to the response");
  return {m.value, *m.itemset, m.counts.visited};
}

Certifier tree_certifier(const CovariateMatrix& z, int order, unsigned threads) {
  return [&z, order, threads](std::span<const double> residual, double hint) {
    const MaxInnerResult m =
        tree_max_abs_inner(z, residual, order, {}, {.threads = threads, .hint = hint});
    return Certificate{m.value, m.itemset, m.counts.visited};
  };
}

std::vector<std::uint64_t> active_by_order(const SparseSolution& solution, int order) {
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(order), 0);
  for (const auto& [itemset, coef] : solution.coefficients) ++counts[itemset.size() - 1];
  return counts;
}

PathResult run_path(const ProblemConfig& config, const CovariateMatrix& z, std::span<const double> y,
                    BoundMutation mutation) {
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
  first.metrics.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - started).count();
  path.steps.push_back(std::move(first));

  const Certifier certifier = tree_certifier(z, config.order, config.threads);
  SolverOptions solver;
  solver.tol = config.tol;
  solver.max_sweeps_factor = config.max_sweeps_factor;
  ScreeningOptions screening;
  screening.binary_refinement = config.binary_refinement;
  screening.refinement_threshold = config.refinement_threshold;
  screening.mutation = mutation;
  screening.threads = config.threads;

  ActiveSuperset everything;
  if (config.screen_mode == ScreenMode::kNone) everything = enumerate_features(z, config.order, config.threads);

  for (std::size_t t = 1; t < lambdas.size(); ++t) {
    const auto step_start = Clock::now();
    const PathStep& prev = path.steps.back();
    PathStep step;
    step.lambda = lambdas[t];
    StepMetrics& m = step.metrics;
    m.total_features = total;

    ActiveSuperset superset;
    if (config.screen_mode == ScreenMode::kSfp) {
      const ScreeningContext ctx =
          build_context(prev.solution, prev.lambda, step.lambda, z, y, config.center_variant);
      superset = sfp_traverse(ctx, z, config.order, screening);
    } else {
      superset = everything;
    }
    m.traversed_nodes = superset.stats.traversed_nodes;
    m.pruned_subtrees = superset.stats.pruned_subtrees;
    m.pruned_equiv = superset.stats.pruned_equiv;

    SparseSolution warm = prev.solution;
    SolveResult solved;
    for (;;) {
      try {
        solved = cd_solve(superset.features, y, step.lambda, warm, solver, certifier);
      } catch (const NonConvergenceError& e) {
        throw PathError(fmt::format("step {}: {}", t, e.what()), t, path);
      }
      m.solver_sweeps += solved.sweeps;
      m.tree_searches += solved.certifications;
      m.search_nodes += solved.certification_nodes;
      ++m.lasso_solves;
      if (solved.status == SolveStatus::kConverged) break;
      // The screening rule let an optimality violator through: keep going with
      // the violator added, and record the incident.
      ++m.screening_incidents;
      superset.features.push_back(feature_vector(*solved.violator, z));
      std::sort(superset.features.begin(), superset.features.end(),
                [](const SparseFeature& l, const SparseFeature& r) { return l.itemset < r.itemset; });
      warm = solved.solution;
    }
    m.superset_size = superset.features.size();
    // The superset is safe, so it holds every tied feature.
    step.solution = min_norm_solution(solved.solution, superset.features, y);
    m.gap = step.solution.gap;
    m.active_count_by_order = active_by_order(step.solution, config.order);
    if (config.keep_supersets) {
      step.superset.reserve(superset.features.size());
      for (const auto& f : superset.features) step.superset.push_back(f.itemset);
    }
    m.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - step_start).count();
    path.steps.push_back(std::move(step));
  }
  return path;
}

}  // namespace interlasso
