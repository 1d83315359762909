#pragma once

#include <span>
#include <vector>

#include "interlasso/itemset.hpp"
#include "interlasso/solution.hpp"

namespace interlasso {

/// Relative tolerance on |x_j^T r| / lambda for counting a feature as tied
/// with the active ones.
inline constexpr double kTieTolerance = 1e-9;

/// Binary designs often have collinear or identical feature columns, so the
/// LASSO minimizer is not unique. Every minimizer shares the fit X beta and is
/// supported on the tied set E = {j : |x_j^T r| = lambda} with
/// sign(beta_j) = sign(x_j^T r). This returns the minimizer of least Euclidean
/// norm, which is unique; identical columns share their weight equally.
///
/// `candidates` must contain every support feature of `solution` and every
/// feature with |x_j^T r| >= lambda (1 - tie_tol); anything else is ignored.
/// Throws std::invalid_argument when a support feature is missing.
SparseSolution min_norm_solution(const SparseSolution& solution, std::span<const SparseFeature> candidates,
                                 std::span<const double> y, double tie_tol = kTieTolerance);

/// Lawson-Hanson non-negative least squares: argmin |A w - f| subject to w >= 0,
/// with A given by its columns.
std::vector<double> nnls(const std::vector<std::vector<double>>& columns, std::span<const double> f);

}  // namespace interlasso
