#include <cmath>

#include "doctest.h"
#include "interlasso/lasso_solver.hpp"
#include "interlasso/oracle.hpp"
#include "interlasso/path_runner.hpp"
#include "interlasso/screening.hpp"
#include "interlasso/validation.hpp"

using namespace interlasso;

namespace {

CovariateMatrix small_z() {
  return CovariateMatrix(3, {{{0, 1.0}, {1, 1.0}}, {{0, 1.0}, {2, 1.0}}});
}

const std::vector<double> kY{1.0, -1.0, 2.0};

}  // namespace

TEST_CASE("context at lambda_max") {
  const ScreeningContext ctx = build_context(SparseSolution{}, 3.0, 1.5, small_z(), kY);
  CHECK(ctx.at_lambda_max);
  for (double a : ctx.a) CHECK(a == 0.0);
  CHECK(ctx.b[0] == doctest::Approx(1.0 / 3.0));
  CHECK(ctx.b[1] == doctest::Approx(-1.0 / 3.0));
  CHECK(ctx.b[2] == doctest::Approx(2.0 / 3.0));
  CHECK(ctx.c[0] == doctest::Approx(1.0));
  CHECK(ctx.c[1] == doctest::Approx(-1.0));
  CHECK(ctx.c[2] == doctest::Approx(2.0));
  CHECK(ctx.norm_b == doctest::Approx(std::sqrt(6.0) / 3.0));
}

TEST_CASE("context rejects a non-decreasing step") {
  CHECK_THROWS_AS(build_context(SparseSolution{}, 1.0, 1.0, small_z(), kY), std::invalid_argument);
  CHECK_THROWS_AS(build_context(SparseSolution{}, 1.0, 2.0, small_z(), kY), std::invalid_argument);
  CHECK_THROWS_AS(build_context(SparseSolution{}, 1.0, 0.0, small_z(), kY), std::invalid_argument);
}

TEST_CASE("node and feature bounds on the worked example") {
  const CovariateMatrix z = small_z();
  const ScreeningContext ctx = build_context(SparseSolution{}, 3.0, 1.5, z, kY);
  const double p1 = 0.5 * (2.0 * std::sqrt(3.0) / 3.0 + 3.0);
  const double m1 = 0.5 * (2.0 * std::sqrt(3.0) / 3.0);
  const BoundPair node = node_prune_bounds(ctx, z.column(1));
  CHECK(node.plus == doctest::Approx(p1).epsilon(1e-12));
  CHECK(node.plus == doctest::Approx(2.077).epsilon(1e-3));
  CHECK(node.minus == doctest::Approx(m1).epsilon(1e-12));
  CHECK(node.max() > 1.0);
  const BoundPair leaf = feature_screen_bounds(ctx, z.column(1));
  CHECK(leaf.plus == doctest::Approx(p1).epsilon(1e-12));
  // u- = (-x^T c + |x||b|) / 2 with x^T c = 3; the node bound M1 only sees the negative part of c.
  CHECK(leaf.minus == doctest::Approx(0.5 * (-3.0 + 2.0 * std::sqrt(3.0) / 3.0)).epsilon(1e-12));
  CHECK(leaf.minus <= node.minus);

  CHECK(feature_screen_bounds(ctx, {}).max() == 0.0);
  CHECK_THROWS_AS(node_prune_bounds(ctx, {}), std::invalid_argument);
}

TEST_CASE("node with non-positive centre on its support is prunable") {
  // x = e_2 only sees c_2 = -1 and |x||b| = sqrt(6)/3 < 2
  const CovariateMatrix z(3, {{{1, 1.0}}});
  const ScreeningContext ctx = build_context(SparseSolution{}, 3.0, 1.5, z, kY);
  const BoundPair node = node_prune_bounds(ctx, z.column(0));
  CHECK(node.plus < 1.0);
}

TEST_CASE("context from a solved step: a equals X beta / lambda_prev by explicit expansion") {
  const RandomInstance inst = random_instance(11, 30, 7, 3, 0.5);
  const auto& z = inst.data.z;
  const auto y = inst.data.y.values();
  ProblemConfig config;
  const PathResult path = run_path(config, z, y);
  REQUIRE(path.steps.size() > 20);
  const auto& prev = path.steps[20];
  const ScreeningContext ctx = build_context(prev.solution, prev.lambda, path.steps[21].lambda, z, y);
  CHECK_FALSE(ctx.at_lambda_max);
  const ExpandedDesign design = enumerate_all(z, 3);
  std::vector<double> xb(z.n(), 0.0);
  for (std::size_t j = 0; j < design.size(); ++j) {
    auto it = prev.solution.coefficients.find(design.itemsets[j]);
    if (it == prev.solution.coefficients.end()) continue;
    for (std::size_t i = 0; i < z.n(); ++i) xb[i] += design.columns[j][i] * it->second;
  }
  for (std::size_t i = 0; i < z.n(); ++i) CHECK(ctx.a[i] == doctest::Approx(xb[i] / prev.lambda).epsilon(1e-12));
}

TEST_CASE("bound domination on lambda_max contexts and path contexts") {
  std::size_t contexts = 0;
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const RandomInstance inst = random_instance(seed, 40, 9, 3, seed % 3 == 0 ? 0.8 : 0.5);
    const auto& z = inst.data.z;
    const auto y = inst.data.y.values();
    const LambdaMax top = compute_lambda_max(z, y, 3);
    const ScreeningContext zero_ctx = build_context(SparseSolution{}, top.value, 0.7 * top.value, z, y);
    CHECK(validate_bound_domination(zero_ctx, z, 3).passed());
    ++contexts;

    ProblemConfig config;
    const PathResult path = run_path(config, z, y);
    for (std::size_t t : {std::size_t{5}, path.steps.size() / 2, path.steps.size() - 1}) {
      const auto& prev = path.steps[t - 1];
      const ScreeningContext ctx = build_context(prev.solution, prev.lambda, path.steps[t].lambda, z, y);
      const DominationReport report = validate_bound_domination(ctx, z, 3);
      CHECK(report.passed());
      CHECK(report.pair_checks > 0);
      ++contexts;
      ScreeningOptions refined;
      refined.binary_refinement = true;
      CHECK(validate_bound_domination(ctx, z, 3, refined).passed());
    }
  }
  CHECK(contexts >= 20);
}

TEST_CASE("screened features are inactive at the oracle dual optimum") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const RandomInstance inst = random_instance(seed, 40, 8, 3, 0.5);
    const auto& z = inst.data.z;
    const auto y = inst.data.y.values();
    ProblemConfig config;
    const PathResult oracle = oracle_path(z, y, config);
    const ExpandedDesign design = enumerate_all(z, 3);
    for (std::size_t t = 1; t < oracle.steps.size(); t += 37) {
      const auto& prev = oracle.steps[t - 1];
      const auto& next = oracle.steps[t];
      const ScreeningContext ctx = build_context(prev.solution, prev.lambda, next.lambda, z, y);
      const std::vector<double> theta = [&] {
        std::vector<double> r = residual_of(next.solution, z, y);
        for (double& v : r) v /= next.lambda;
        return r;
      }();
      for (std::size_t j = 0; j < design.size(); ++j) {
        const SparseFeature f = feature_vector(design.itemsets[j], z);
        if (f.is_zero()) continue;
        if (feature_screen_bounds(ctx, f.entries).max() < 1.0) {
          double inner = 0.0;
          for (const Entry& e : f.entries) inner += e.value * theta[e.index];
          CHECK(std::abs(inner) < 1.0 + 1e-7);
          CHECK(next.solution.coefficients.count(design.itemsets[j]) == 0);
        }
      }
    }
  }
}

TEST_CASE("sfp superset contains the oracle active set; accounting holds") {
  const RandomInstance inst = random_instance(3, 40, 8, 3, 0.5);
  const auto& z = inst.data.z;
  const auto y = inst.data.y.values();
  ProblemConfig config;
  const PathResult oracle = oracle_path(z, y, config);
  for (std::size_t t = 1; t < oracle.steps.size(); t += 25) {
    const auto& prev = oracle.steps[t - 1];
    const ScreeningContext ctx = build_context(prev.solution, prev.lambda, oracle.steps[t].lambda, z, y);
    const ActiveSuperset s1 = sfp_traverse(ctx, z, 3);
    ScreeningOptions four;
    four.threads = 4;
    const ActiveSuperset s4 = sfp_traverse(ctx, z, 3, four);
    REQUIRE(s1.features.size() == s4.features.size());
    for (std::size_t k = 0; k < s1.features.size(); ++k) CHECK(s1.features[k].itemset == s4.features[k].itemset);
    CHECK(s1.stats.traversed_nodes == s4.stats.traversed_nodes);
    CHECK(s1.stats.traversed_nodes + s1.stats.pruned_equiv == feature_count(z.d(), 3));
    for (const auto& [itemset, coef] : oracle.steps[t].solution.coefficients) {
      const bool found = std::any_of(s1.features.begin(), s1.features.end(),
                                     [&](const SparseFeature& f) { return f.itemset == itemset; });
      CHECK(found);
    }
  }
  const ActiveSuperset all = enumerate_features(z, 3);
  CHECK(all.stats.pruned_equiv + all.stats.traversed_nodes == feature_count(z.d(), 3));
}

TEST_CASE("the ratio-scaled centre is rejected by the exhaustive checks") {
  // The printed centre variant scales a by lambda_prev / lambda_next. The
  // battery finds oracle-active features that it screens out.
  BatteryOptions options;
  options.seeds = 12;
  options.center_variant = CenterVariant::kRatioScaled;
  const BatteryReport report = run_battery(options);
  std::size_t unsafe = 0;
  for (const auto& o : report.instances) unsafe += o.safety_violations;
  CHECK(unsafe > 0);
}
