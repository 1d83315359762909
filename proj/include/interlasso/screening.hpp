#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "interlasso/core_data.hpp"
#include "interlasso/feature_tree.hpp"
#include "interlasso/solution.hpp"

namespace interlasso {

/// Slack inside the strict "< 1" screening tests; errs toward keeping features.
inline constexpr double kScreeningGuard = 1e-9;

/// Vectors shared by every node test for one (lambda_prev, lambda_next) pair.
///   a = X beta*(lambda_prev) / lambda_prev
///   b = (1/lambda_next - 1/lambda_prev) y + a
///   c = (1/lambda_next + 1/lambda_prev) y - s a   (s per CenterVariant)
///   d = c - (a^T b / |a|^2) a
/// The dual optimum at lambda_prev is y/lambda_prev - a. When a = 0 the
/// projection quantities (d, b_perp_norm) are left empty and unused.
struct ScreeningContext {
  double lambda_prev = 0.0;
  double lambda_next = 0.0;
  std::vector<double> a, b, c, d;
  double norm_a = 0.0;
  double norm_b = 0.0;
  double a_dot_b = 0.0;
  double b_perp_norm = 0.0;
  bool at_lambda_max = false;
  CenterVariant variant = CenterVariant::kDualCentered;
};

/// Test-only perturbations used to check that the validators catch unsafe rules.
enum class BoundMutation { kNone, kDropNormTerm };

struct ScreeningOptions {
  bool binary_refinement = false;
  RefinementThreshold refinement_threshold = RefinementThreshold::kNormalized;
  BoundMutation mutation = BoundMutation::kNone;
  unsigned threads = 1;
};

/// Throws std::invalid_argument when lambda_next >= lambda_prev or lambdas are not positive.
ScreeningContext build_context(const SparseSolution& prev, double lambda_prev, double lambda_next,
                               const CovariateMatrix& z, std::span<const double> y,
                               CenterVariant variant = CenterVariant::kDualCentered);

struct BoundPair {
  double plus = 0.0;
  double minus = 0.0;
  double max() const { return plus > minus ? plus : minus; }
};

/// Node-level rule: max(U+, U-) < 1 certifies every descendant of the node
/// as inactive. `binary_data` enables the binary case selection when the
/// options ask for it. Throws std::invalid_argument on a zero feature.
BoundPair node_prune_bounds(const ScreeningContext& ctx, std::span<const Entry> feature,
                            bool binary_data = false, const ScreeningOptions& options = {});

/// Per-feature rule: max(u+, u-) < 1 certifies the feature itself as inactive.
BoundPair feature_screen_bounds(const ScreeningContext& ctx, std::span<const Entry> feature,
                                const ScreeningOptions& options = {});

struct ScreeningStats {
  std::uint64_t traversed_nodes = 0;
  std::uint64_t pruned_subtrees = 0;
  std::uint64_t zero_subtrees = 0;
  std::uint64_t pruned_equiv = 0;
  std::uint64_t leaf_screened = 0;
};

/// A(lambda_t): surviving features in lexicographic order with their columns.
struct ActiveSuperset {
  std::vector<SparseFeature> features;
  ScreeningStats stats;
};

/// Depth-first traversal applying the node rule to cut descendants and the
/// per-feature rule to each visited node.
ActiveSuperset sfp_traverse(const ScreeningContext& ctx, const CovariateMatrix& z, int order,
                            const ScreeningOptions& options = {});

/// Every nonzero feature, enumerated through the tree (no screening).
ActiveSuperset enumerate_features(const CovariateMatrix& z, int order, unsigned threads = 1);

}  // namespace interlasso
