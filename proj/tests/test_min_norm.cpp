#include <cmath>

#include "doctest.h"
#include "interlasso/lasso_solver.hpp"
#include "interlasso/min_norm.hpp"
#include "interlasso/path_runner.hpp"
#include "interlasso/screening.hpp"
#include "interlasso/validation.hpp"

using namespace interlasso;

namespace {

SparseFeature feature(std::uint32_t k, SparseVector entries) {
  return {Itemset(std::vector<std::uint32_t>{k}), std::move(entries)};
}

double norm_sq(const SparseSolution& s) {
  double t = 0.0;
  for (const auto& [k, v] : s.coefficients) t += v * v;
  return t;
}

std::vector<double> fit(const SparseSolution& s, std::span<const SparseFeature> features, std::size_t n) {
  std::vector<double> f(n, 0.0);
  for (const auto& x : features) {
    auto it = s.coefficients.find(x.itemset);
    if (it == s.coefficients.end()) continue;
    for (const Entry& e : x.entries) f[e.index] += it->second * e.value;
  }
  return f;
}

}  // namespace

TEST_CASE("nnls") {
  // min |A w - f|, w >= 0, with A = I and f = (1, -2): w = (1, 0).
  const std::vector<std::vector<double>> eye{{1.0, 0.0}, {0.0, 1.0}};
  const std::vector<double> f{1.0, -2.0};
  const auto w = nnls(eye, f);
  CHECK(w[0] == doctest::Approx(1.0));
  CHECK(w[1] == 0.0);
  // Two identical columns: any split is optimal, the total is fixed.
  const std::vector<std::vector<double>> twin{{1.0, 1.0}, {1.0, 1.0}};
  const auto t = nnls(twin, std::vector<double>{2.0, 2.0});
  CHECK(t[0] + t[1] == doctest::Approx(2.0));
  CHECK(t[0] >= 0.0);
  CHECK(t[1] >= 0.0);
}

TEST_CASE("identical columns share their weight") {
  const std::vector<SparseFeature> features{feature(0, {{0, 1.0}, {1, 1.0}}), feature(1, {{0, 1.0}, {1, 1.0}}),
                                            feature(2, {{2, 1.0}})};
  const std::vector<double> y{2.0, 2.0, 0.1};
  SparseSolution s;
  s.lambda = 1.0;
  s.coefficients[features[0].itemset] = 1.5;  // (4 - 1) / 2
  const SparseSolution m = min_norm_solution(s, features, y);
  REQUIRE(m.coefficients.size() == 2);
  CHECK(m.coefficients.at(features[0].itemset) == doctest::Approx(0.75));
  CHECK(m.coefficients.at(features[1].itemset) == doctest::Approx(0.75));
  // Moving the weight to the other copy gives the same answer.
  SparseSolution other = s;
  other.coefficients.clear();
  other.coefficients[features[1].itemset] = 1.5;
  CHECK(min_norm_solution(other, features, y).coefficients == m.coefficients);
}

TEST_CASE("collinear columns: unique case is left alone") {
  // x3 = x1 + x2 fits y = (2, 2) at half the l1 cost of x1 and x2, so the
  // optimum beta3 = 1.5 leaves x1, x2 untied (x^T r = 0.5 < lambda).
  const std::vector<SparseFeature> features{feature(0, {{0, 1.0}}), feature(1, {{1, 1.0}}),
                                            feature(2, {{0, 1.0}, {1, 1.0}})};
  SparseSolution s;
  s.lambda = 1.0;
  s.coefficients[features[2].itemset] = 1.5;
  CHECK(min_norm_solution(s, features, std::vector<double>{2.0, 2.0}).coefficients == s.coefficients);
}

TEST_CASE("collinear columns: every optimum maps to the least-norm one") {
  // x1 + x2 = x3 + x4 = (1, 1, 1). With y = (2, 1, 2) and lambda = 1 the
  // residual (1, 0, 1) ties all four, and {x1, x2} or {x3, x4} at 1 are both
  // optimal; the least-norm optimum puts 1/2 on each.
  const std::vector<SparseFeature> features{feature(0, {{0, 1.0}, {1, 1.0}}), feature(1, {{2, 1.0}}),
                                            feature(2, {{0, 1.0}}), feature(3, {{1, 1.0}, {2, 1.0}})};
  const std::vector<double> y{2.0, 1.0, 2.0};
  SparseSolution a, b;
  a.lambda = b.lambda = 1.0;
  a.coefficients[features[0].itemset] = a.coefficients[features[1].itemset] = 1.0;
  b.coefficients[features[2].itemset] = b.coefficients[features[3].itemset] = 1.0;
  for (const SparseSolution& s : {a, b}) {
    const SparseSolution m = min_norm_solution(s, features, y);
    REQUIRE(m.coefficients.size() == 4);
    for (const auto& [k, v] : m.coefficients) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
  }
  // The solver reaches one of the optima; the selection does not care which.
  const SolveResult r = cd_solve(features, y, 1.0, {});
  const SparseSolution m = min_norm_solution(r.solution, features, y);
  REQUIRE(m.coefficients.size() == 4);
  for (const auto& [k, v] : m.coefficients) CHECK(v == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("min-norm selection keeps the fit and the l1 norm, and lowers the norm") {
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    const RandomInstance inst = random_instance(seed, 40, 8, 3, 0.5);
    const auto& z = inst.data.z;
    const auto y = inst.data.y.values();
    const auto features = enumerate_features(z, 3).features;
    const LambdaMax top = compute_lambda_max(z, y, 3);
    for (double ratio : {0.5, 0.2, 0.05}) {
      const SolveResult r = cd_solve(features, y, ratio * top.value, {}, {}, tree_certifier(z, 3, 1));
      const SparseSolution m = min_norm_solution(r.solution, features, y);
      const auto before = fit(r.solution, features, z.n());
      const auto after = fit(m, features, z.n());
      for (std::size_t i = 0; i < z.n(); ++i) CHECK(std::abs(before[i] - after[i]) <= 1e-9);
      CHECK(std::abs(m.l1_norm() - r.solution.l1_norm()) <= 1e-9 * std::max(1.0, r.solution.l1_norm()));
      CHECK(norm_sq(m) <= norm_sq(r.solution) + 1e-12);
      // Idempotent, and independent of which optimum it starts from.
      const SparseSolution again = min_norm_solution(m, features, y);
      for (const auto& [k, v] : again.coefficients) {
        REQUIRE(m.coefficients.count(k));
        CHECK(std::abs(m.coefficients.at(k) - v) <= 1e-9);
      }
      const SolveResult warm = cd_solve(features, y, ratio * top.value, m, {}, tree_certifier(z, 3, 1));
      const SparseSolution m2 = min_norm_solution(warm.solution, features, y);
      CHECK(m2.coefficients.size() == m.coefficients.size());
      for (const auto& [k, v] : m2.coefficients) {
        const double w = m.coefficients.count(k) ? m.coefficients.at(k) : 0.0;
        CHECK(std::abs(w - v) <= 1e-7);
      }
    }
  }
}

TEST_CASE("min-norm selection needs the support among the candidates") {
  SparseSolution s;
  s.lambda = 1.0;
  s.coefficients[Itemset{4}] = 1.0;
  const std::vector<SparseFeature> none;
  CHECK_THROWS_AS(min_norm_solution(s, none, std::vector<double>{1.0}), std::invalid_argument);
  CHECK(min_norm_solution(SparseSolution{}, none, std::vector<double>{1.0}).empty());
}
