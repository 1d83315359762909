#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "interlasso/core_data.hpp"
#include "interlasso/itemset.hpp"
#include "interlasso/path_runner.hpp"
#include "interlasso/screening.hpp"

namespace interlasso {

/// Brute-force ground truth for desk-scale instances. Everything here works
/// on the explicitly expanded design and shares no solver code with the
/// tree-based engine.

inline constexpr std::uint64_t kDefaultEnumerationCap = 200000;

/// Explicit n x D design, columns in lexicographic itemset order.
struct ExpandedDesign {
  std::size_t n = 0;
  std::vector<Itemset> itemsets;
  std::vector<std::vector<double>> columns;

  std::size_t size() const { return itemsets.size(); }
};

/// Throws std::length_error when D exceeds `cap`.
ExpandedDesign enumerate_all(const CovariateMatrix& z, int order, std::uint64_t cap = kDefaultEnumerationCap);

struct DenseMax {
  std::optional<Itemset> itemset;
  double value = 0.0;
};

/// max_j |x_j^T v| by scanning every column; ties go to the first column.
DenseMax dense_max_abs_inner(const ExpandedDesign& design, std::span<const double> v);

/// Reference path: same schedule as run_path, every step solved by dense
/// coordinate descent over all D columns to relative gap tol/10.
PathResult oracle_path(const CovariateMatrix& z, std::span<const double> y, const ProblemConfig& config,
                       std::uint64_t cap = kDefaultEnumerationCap);

struct SafetyViolation {
  std::size_t step = 0;
  double lambda = 0.0;
  Itemset itemset;
  double oracle_coefficient = 0.0;
};

struct SafetyReport {
  std::vector<SafetyViolation> violations;
  bool passed() const { return violations.empty(); }
};

/// Oracle-active itemsets (|coef| > active_threshold) missing from the
/// screened path's supersets. The screened path must keep its supersets.
SafetyReport validate_safety(const PathResult& screened, const PathResult& oracle,
                             double active_threshold = 1e-8);

struct DominationViolation {
  Itemset node;
  Itemset descendant;
  double node_plus = 0.0, node_minus = 0.0;
  double leaf_plus = 0.0, leaf_minus = 0.0;
};

struct DominationReport {
  std::size_t node_checks = 0;
  std::size_t pair_checks = 0;
  std::vector<DominationViolation> violations;
  bool passed() const { return violations.empty(); }
};

/// Exhaustive check that each nonzero node's U+/U- bounds dominate u+/u- of
/// every descendant, up to `slack`.
DominationReport validate_bound_domination(const ScreeningContext& ctx, const CovariateMatrix& z, int order,
                                           const ScreeningOptions& options = {}, double slack = 1e-12,
                                           std::uint64_t cap = kDefaultEnumerationCap);

struct PathComparison {
  double max_coefficient_diff = 0.0;
  std::size_t first_mismatch_step = 0;
  bool lambdas_match = true;
  bool active_sets_match = true;
  bool passed(double tol) const { return lambdas_match && active_sets_match && max_coefficient_diff <= tol; }
};

/// Compares two paths step by step: lambdas, active sets under `active_threshold`,
/// and the max-abs coefficient difference.
PathComparison compare_paths(const PathResult& a, const PathResult& b, double active_threshold = 1e-8);

nlohmann::ordered_json to_json(const SafetyReport& report);
nlohmann::ordered_json to_json(const DominationReport& report);

}  // namespace interlasso
