#include <cmath>

#include "doctest.h"
#include "interlasso/min_norm.hpp"
#include "interlasso/oracle.hpp"
#include "interlasso/path_runner.hpp"
#include "interlasso/validation.hpp"

using namespace interlasso;

namespace {

CovariateMatrix small_z() {
  return CovariateMatrix(3, {{{0, 1.0}, {1, 1.0}}, {{0, 1.0}, {2, 1.0}}});
}

}  // namespace

TEST_CASE("lambda schedule") {
  const std::vector<double> s = lambda_schedule(3.0, 0.1, 0.01);
  REQUIRE(s.size() > 3);
  CHECK(s[0] == 3.0);
  CHECK(s[1] == doctest::Approx(2.7).epsilon(1e-15));
  CHECK(s[2] == doctest::Approx(2.7 * (1.0 - 0.1 / std::sqrt(2.0))).epsilon(1e-15));
  CHECK(s[2] == doctest::Approx(2.50908).epsilon(1e-5));
  for (std::size_t t = 1; t < s.size(); ++t) CHECK(s[t] < s[t - 1]);
  CHECK(s.back() >= 0.03);
  CHECK(s.back() * (1.0 - 0.1 / std::sqrt(static_cast<double>(s.size()))) < 0.03);
  CHECK(lambda_schedule(3.0, 0.1, 0.999).size() == 1);
}

TEST_CASE("lambda_max on the small example") {
  const std::vector<double> y{1.0, -1.0, 2.0};
  const LambdaMax lm = compute_lambda_max(small_z(), y, 2);
  CHECK(lm.value == 3.0);
  CHECK(lm.itemset == Itemset(std::vector<std::uint32_t>{1}));
  CHECK_THROWS_AS(compute_lambda_max(small_z(), std::vector<double>(3, 0.0), 2), DataError);
}

TEST_CASE("path equivalence: sfp vs none vs oracle") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const RandomInstance inst = random_instance(seed, 40, 8, 3, seed % 2 ? 0.5 : 0.8);
    const auto& z = inst.data.z;
    const auto y = inst.data.y.values();
    ProblemConfig sfp;
    sfp.keep_supersets = true;
    ProblemConfig none = sfp;
    none.screen_mode = ScreenMode::kNone;
    const PathResult a = run_path(sfp, z, y);
    const PathResult b = run_path(none, z, y);
    const PathResult o = oracle_path(z, y, sfp);
    CHECK(compare_paths(a, b).passed(1e-6));
    CHECK(compare_paths(a, o).passed(1e-6));
    CHECK(validate_safety(a, o).passed());
    CHECK(validate_safety(b, o).passed());
    CHECK(a.steps.front().solution.empty());
    CHECK(a.steps.front().lambda == a.lambda_max);
    for (const auto& step : a.steps) {
      CHECK(step.metrics.gap <= 1e-6);
      CHECK(step.metrics.pruning_rate() >= 0.0);
      CHECK(step.metrics.pruning_rate() <= 1.0);
      // Step 0 is solved in closed form and runs no screening pass.
      if (step.lambda < a.lambda_max)
        CHECK(step.metrics.traversed_nodes + step.metrics.pruned_equiv == feature_count(z.d(), 3));
      else
        CHECK(step.metrics.traversed_nodes == 0);
      CHECK(step.metrics.active_count_by_order.size() == 3);
      CHECK(step.metrics.active_total() == step.solution.coefficients.size());
      CHECK(step.metrics.superset_size >= step.solution.coefficients.size());
    }
  }
}

TEST_CASE("warm-started path equals cold solves at every step") {
  for (std::uint64_t seed = 21; seed <= 24; ++seed) {
    const RandomInstance inst = random_instance(seed, 40, 8, 3, 0.5);
    const auto& z = inst.data.z;
    const auto y = inst.data.y.values();
    ProblemConfig config;
    const PathResult path = run_path(config, z, y);
    const auto all = enumerate_features(z, 3).features;
    const Certifier cert = tree_certifier(z, 3, 1);
    for (std::size_t t = 1; t < path.steps.size(); t += 7) {
      const SolveResult cold = cd_solve(all, y, path.steps[t].lambda, {}, {}, cert);
      const SparseSolution canonical = min_norm_solution(cold.solution, all, y);
      const auto& warm = path.steps[t].solution.coefficients;
      CHECK(warm.size() == canonical.coefficients.size());
      for (const auto& [k, v] : canonical.coefficients) {
        const double w = warm.count(k) ? warm.at(k) : 0.0;
        CHECK(std::abs(w - v) <= 1e-6);
      }
    }
  }
}

TEST_CASE("response equal to the first column activates {1} first") {
  Rng rng(3);
  std::vector<SparseVector> cols(5);
  for (std::uint32_t i = 0; i < 30; ++i)
    for (std::size_t k = 0; k < 5; ++k)
      if (rng.uniform() < 0.4) cols[k].push_back({i, 1.0});
  const CovariateMatrix z(30, cols);
  std::vector<double> y(30, 0.0);
  for (const Entry& e : z.column(0)) y[e.index] = 1.0;
  ProblemConfig config;
  const PathResult path = run_path(config, z, y);
  const PathResult oracle = oracle_path(z, y, config);
  CHECK(compare_paths(path, oracle).passed(1e-6));
  for (const auto& step : path.steps) {
    if (step.solution.empty()) continue;
    CHECK(step.solution.coefficients.begin()->first == Itemset(std::vector<std::uint32_t>{0}));
    CHECK(step.solution.coefficients.size() == 1);
    break;
  }
}

TEST_CASE("min_ratio close to one gives the lambda_max step only") {
  const RandomInstance inst = random_instance(1, 30, 6, 2, 0.5);
  ProblemConfig config;
  config.order = 2;
  config.lambda_min_ratio = 0.999;
  const PathResult path = run_path(config, inst.data.z, inst.data.y.values());
  REQUIRE(path.steps.size() == 1);
  CHECK(path.steps[0].solution.empty());
}

TEST_CASE("threads do not change the path") {
  const RandomInstance inst = random_instance(17, 50, 10, 3, 0.8);
  ProblemConfig one;
  ProblemConfig four;
  four.threads = 4;
  const PathResult a = run_path(one, inst.data.z, inst.data.y.values());
  const PathResult b = run_path(four, inst.data.z, inst.data.y.values());
  REQUIRE(a.steps.size() == b.steps.size());
  for (std::size_t t = 0; t < a.steps.size(); ++t) {
    CHECK(a.steps[t].solution.coefficients == b.steps[t].solution.coefficients);
    CHECK(a.steps[t].metrics.traversed_nodes == b.steps[t].metrics.traversed_nodes);
    CHECK(a.steps[t].metrics.solver_sweeps == b.steps[t].metrics.solver_sweeps);
  }
}

TEST_CASE("non-convergence propagates with the step index") {
  const RandomInstance inst = random_instance(4, 40, 8, 3, 0.5);
  ProblemConfig config;
  // An unreachable tolerance exhausts the sweep cap at the first solved step.
  config.max_sweeps_factor = 1;
  config.tol = 1e-300;
  try {
    run_path(config, inst.data.z, inst.data.y.values());
    FAIL("expected PathError");
  } catch (const PathError& e) {
    CHECK(e.step() >= 1);
    CHECK(e.partial().steps.size() == e.step());
  }
}

TEST_CASE("active_by_order") {
  SparseSolution s;
  s.coefficients[Itemset(std::vector<std::uint32_t>{0})] = 1.0;
  s.coefficients[Itemset(std::vector<std::uint32_t>{0, 2})] = -1.0;
  s.coefficients[Itemset(std::vector<std::uint32_t>{1, 2})] = 2.0;
  CHECK(active_by_order(s, 3) == std::vector<std::uint64_t>{1, 2, 0});
}
