#pragma once

#include <map>

#include "interlasso/itemset.hpp"

namespace interlasso {

/// Sparse LASSO coefficients at one lambda. Only nonzero coefficients are stored.
struct SparseSolution {
  std::map<Itemset, double> coefficients;
  double lambda = 0.0;
  /// Certified relative duality gap.
  double gap = 0.0;

  bool empty() const { return coefficients.empty(); }
  double l1_norm() const {
    double s = 0.0;
    for (const auto& [item, coef] : coefficients) s += coef < 0 ? -coef : coef;
    return s;
  }
};

}  // namespace interlasso
