#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "interlasso/core_data.hpp"
#include "interlasso/itemset.hpp"
#include "interlasso/solution.hpp"

namespace interlasso {

/// sign(z) * max(|z| - lambda, 0)
double soft_threshold(double z, double lambda);

/// Largest |x_j^T residual| over some feature space, with the argmax.
struct Certificate {
  double max_abs = 0.0;
  std::optional<Itemset> argmax;
  std::uint64_t nodes = 0;
};

/// Computes a Certificate for `residual`. `hint` is an attained value inside
/// the space (the largest reduced-problem correlation).
using Certifier = std::function<Certificate(std::span<const double> residual, double hint)>;

struct SolverOptions {
  /// Relative duality-gap tolerance: (P - D) / P <= tol.
  double tol = 1e-6;
  /// Reduced-problem KKT tolerance, relative to lambda.
  double kkt_tol = 1e-12;
  /// Looser reduced KKT limit accepted once the sweep cap is reached.
  double kkt_fallback = 1e-9;
  /// Sweep cap is max(max_sweeps_factor * |features|, min_sweeps_cap).
  std::size_t max_sweeps_factor = 100;
  std::size_t min_sweeps_cap = 10000;
  /// Sweeps between gap evaluations.
  std::size_t gap_every = 10;
  /// Largest support for the exact sign-constrained polish step (0 disables it).
  std::size_t polish_limit = 400;
  /// Polish only while the reduced KKT residual exceeds this fraction of lambda.
  double polish_below = 1e-13;
};

enum class SolveStatus {
  kConverged,
  /// The reduced problem is solved but a feature outside it violates optimality.
  kInsufficientSet,
};

struct SolveResult {
  SparseSolution solution;
  SolveStatus status = SolveStatus::kConverged;
  std::optional<Itemset> violator;
  std::size_t sweeps = 0;
  std::size_t certifications = 0;
  std::size_t polishes = 0;
  std::uint64_t certification_nodes = 0;
  double max_violation = 0.0;  // max |x_j^T rho| / lambda from the last certification
};

/// Thrown when the sweep cap is hit; carries the last iterate.
class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(const std::string& what, SparseSolution iterate)
      : std::runtime_error(what), iterate_(std::move(iterate)) {}
  const SparseSolution& iterate() const { return iterate_; }

 private:
  SparseSolution iterate_;
};

struct GapReport {
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;       // primal - dual
  double relative = 0.0;  // gap / primal (0 when primal is 0)
  double max_correlation = 0.0;  // max |x_j^T rho| / lambda
};

/// Duality gap for a residual and l1 norm, given max |x_j^T rho| over the
/// feature space. The dual point is theta = rho/lambda scaled into the feasible set.
GapReport gap_from_residual(std::span<const double> y, std::span<const double> residual,
                            double l1_norm, double lambda, double max_abs_correlation);

/// Cyclic coordinate descent on min 1/2 |y - X_A beta|^2 + lambda |beta|_1 over
/// the given features, swept in lexicographic itemset order. Identical columns
/// are merged and their weight assigned to the lexicographically smallest one.
/// Without a certifier the gap is certified over the given features only.
/// Throws std::invalid_argument on zero features, NonConvergenceError on the cap.
SolveResult cd_solve(std::span<const SparseFeature> features, std::span<const double> y, double lambda,
                     const SparseSolution& warm_start, const SolverOptions& options = {},
                     const Certifier& certifier = {});

/// Residual y - X beta for a solution, building each column from Z.
std::vector<double> residual_of(const SparseSolution& solution, const CovariateMatrix& z,
                                std::span<const double> y);

/// P(beta) - D(theta) with the maximum correlation taken over every itemset
/// of size <= order (tree search).
GapReport duality_gap(const SparseSolution& solution, const CovariateMatrix& z,
                      std::span<const double> y, int order, unsigned threads = 1);

}  // namespace interlasso
