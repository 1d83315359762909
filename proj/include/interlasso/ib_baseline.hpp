#pragma once

#include <cstdint>
#include <vector>

#include "interlasso/core_data.hpp"
#include "interlasso/itemset.hpp"
#include "interlasso/lasso_solver.hpp"
#include "interlasso/path_runner.hpp"
#include "interlasso/solution.hpp"

namespace interlasso {

/// Itemset-boosting working set: features enter one at a time, most violating first.
struct WorkingSet {
  std::vector<SparseFeature> features;  // insertion order
  std::vector<Itemset> add_history;

  std::vector<Itemset> itemsets() const;
  bool contains(const Itemset& itemset) const;
  /// Throws std::invalid_argument on a duplicate.
  void add(SparseFeature feature);
};

struct IbMetrics {
  std::uint64_t lasso_solves = 0;
  std::uint64_t tree_searches = 0;
  std::uint64_t search_nodes = 0;
  std::uint64_t features_added = 0;
  std::uint64_t sweeps = 0;
};

struct IbResult {
  WorkingSet working_set;
  SparseSolution solution;
  IbMetrics metrics;
};

struct IbOptions {
  double tol = 1e-6;
  std::size_t max_sweeps_factor = 100;
  unsigned threads = 1;
};

/// Solves the LASSO at `lambda` by alternating a reduced solve on the working
/// set with a tree search for the most violating outside feature, until no
/// outside feature has |x_j^T rho| / lambda above 1 + the solver KKT tolerance.
IbResult ib_solve(const CovariateMatrix& z, std::span<const double> y, double lambda, WorkingSet warm_set,
                  const SparseSolution& warm_solution, int order, const IbOptions& options = {});

/// Same lambda schedule as run_path; the working set and solution carry over
/// between steps.
PathResult ib_run_path(const ProblemConfig& config, const CovariateMatrix& z, std::span<const double> y);

}  // namespace interlasso
