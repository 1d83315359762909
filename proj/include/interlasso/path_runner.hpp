#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "interlasso/core_data.hpp"
#include "interlasso/itemset.hpp"
#include "interlasso/lasso_solver.hpp"
#include "interlasso/screening.hpp"
#include "interlasso/solution.hpp"

namespace interlasso {

/// Per-step work and sparsity figures.
///
/// Pruning rate convention: `pruned_equiv` counts the itemsets that the
/// screening traversal never evaluated (members of subtrees cut by the node
/// rule plus subtrees under zero features). The rate is pruned_equiv / D,
/// with D the number of itemsets of size <= order; traversed + pruned = D.
struct StepMetrics {
  std::uint64_t traversed_nodes = 0;
  std::uint64_t pruned_subtrees = 0;
  std::uint64_t pruned_equiv = 0;
  std::uint64_t total_features = 0;
  std::uint64_t superset_size = 0;
  std::vector<std::uint64_t> active_count_by_order;  // index k-1 holds order k
  std::uint64_t solver_sweeps = 0;
  double gap = 0.0;
  double wall_ms = 0.0;
  /// Tree searches run to certify optimality, and the nodes they visited.
  std::uint64_t tree_searches = 0;
  std::uint64_t search_nodes = 0;
  /// Reduced LASSO solves in the step (IB re-solves once per added feature).
  std::uint64_t lasso_solves = 0;
  /// Features found violating optimality outside the screened superset.
  std::uint64_t screening_incidents = 0;

  double pruning_rate() const {
    return total_features ? static_cast<double>(pruned_equiv) / static_cast<double>(total_features) : 0.0;
  }
  std::uint64_t active_total() const {
    std::uint64_t s = 0;
    for (auto c : active_count_by_order) s += c;
    return s;
  }
};

struct PathStep {
  double lambda = 0.0;
  SparseSolution solution;
  StepMetrics metrics;
  /// Surviving itemsets (only when ProblemConfig::keep_supersets).
  std::vector<Itemset> superset;
};

struct PathResult {
  double lambda_max = 0.0;
  Itemset lambda_max_itemset;
  std::vector<PathStep> steps;
};

/// Thrown when a step fails to converge; the path up to the failure is kept.
class PathError : public std::runtime_error {
 public:
  PathError(const std::string& what, std::size_t step, PathResult partial)
      : std::runtime_error(what), step_(step), partial_(std::move(partial)) {}
  std::size_t step() const { return step_; }
  const PathResult& partial() const { return partial_; }

 private:
  std::size_t step_;
  PathResult partial_;
};

/// lambda_0 = lambda_max, lambda_t = (1 - decay/sqrt(t)) lambda_{t-1}, stopping
/// before the first value with lambda_t / lambda_max < min_ratio.
std::vector<double> lambda_schedule(double lambda_max, double decay, double min_ratio);

struct LambdaMax {
  double value = 0.0;
  Itemset itemset;
  std::uint64_t nodes = 0;
};

/// max_j |x_j^T y| by pruned tree search. Throws DataError when every feature
/// has zero correlation with y.
LambdaMax compute_lambda_max(const CovariateMatrix& z, std::span<const double> y, int order,
                             unsigned threads = 1);

/// Certifier over the full itemset space.
Certifier tree_certifier(const CovariateMatrix& z, int order, unsigned threads);

/// Regularization path with safe feature pruning and warm starts.
/// `mutation` exists for validator self-tests only.
PathResult run_path(const ProblemConfig& config, const CovariateMatrix& z, std::span<const double> y,
                    BoundMutation mutation = BoundMutation::kNone);

/// Counts active features by interaction order (vector of size `order`).
std::vector<std::uint64_t> active_by_order(const SparseSolution& solution, int order);

}  // namespace interlasso
