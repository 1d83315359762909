#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "interlasso/core_data.hpp"
#include "interlasso/oracle.hpp"

namespace interlasso {

/// A random desk-scale instance for the validation battery: binary Z with the
/// given sparsity and a response built from two random interaction features
/// plus Gaussian noise.
struct RandomInstance {
  Dataset data;
  double sparsity = 0.0;
  std::uint64_t seed = 0;
};

/// Deterministic in `seed`; redraws until some feature correlates with y.
RandomInstance random_instance(std::uint64_t seed, std::size_t max_n, std::size_t max_d, int order,
                               double sparsity);

struct BatteryOptions {
  std::size_t seeds = 100;
  std::uint64_t first_seed = 1;
  std::size_t max_d = 10;
  std::size_t max_n = 50;
  int order = 3;
  double tol = 1e-6;
  double coefficient_tol = 1e-6;
  CenterVariant center_variant = CenterVariant::kDualCentered;
  bool binary_refinement = false;
  RefinementThreshold refinement_threshold = RefinementThreshold::kNormalized;
  BoundMutation mutation = BoundMutation::kNone;
  unsigned threads = 1;
};

struct InstanceOutcome {
  std::uint64_t seed = 0;
  std::size_t n = 0, d = 0, steps = 0;
  double sparsity = 0.0;
  bool lambda_max_ok = true;
  bool path_equivalent = true;
  double max_coefficient_diff = 0.0;
  bool gaps_ok = true;
  double worst_gap = 0.0;
  std::size_t safety_violations = 0;
  std::size_t domination_violations = 0;
  std::size_t domination_contexts = 0;
  std::size_t screening_incidents = 0;
  std::string error;

  bool passed() const {
    return error.empty() && lambda_max_ok && path_equivalent && gaps_ok && safety_violations == 0 &&
           domination_violations == 0;
  }
};

struct BatteryReport {
  std::vector<InstanceOutcome> instances;
  std::size_t failures() const;
  bool passed() const { return failures() == 0; }
};

/// Runs the randomized battery: lambda_max against brute force, screened path
/// against the oracle path (coefficients, active sets, safety), full-space
/// gaps, and exhaustive bound domination on contexts taken from the path.
BatteryReport run_battery(const BatteryOptions& options);

nlohmann::ordered_json to_json(const BatteryReport& report);

}  // namespace interlasso
