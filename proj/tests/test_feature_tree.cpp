#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "interlasso/feature_tree.hpp"
#include "interlasso/oracle.hpp"
#include "interlasso/validation.hpp"

using namespace interlasso;

namespace {

Itemset items(std::initializer_list<std::uint32_t> one_based) {
  std::vector<std::uint32_t> v;
  for (auto k : one_based) v.push_back(k - 1);
  return Itemset(v);
}

// z1 = [1,1,0], z2 = [1,0,1]
CovariateMatrix small_z() {
  return CovariateMatrix(3, {{{0, 1.0}, {1, 1.0}}, {{0, 1.0}, {2, 1.0}}});
}

}  // namespace

TEST_CASE("children are lexicographic extensions") {
  CHECK(children(items({2}), 4, 3) == std::vector<Itemset>{items({2, 3}), items({2, 4})});
  CHECK(children(items({4}), 4, 3).empty());
  CHECK(children(items({1, 3}), 4, 3) == std::vector<Itemset>{items({1, 3, 4})});
  CHECK(children(items({1, 2, 3}), 4, 3).empty());  // already at the order
}

TEST_CASE("itemset printing and ancestry") {
  CHECK(items({1, 3}).to_string() == "{1,3}");
  CHECK(items({1}).is_ancestor_of(items({1, 3})));
  CHECK_FALSE(items({3}).is_ancestor_of(items({1, 3})));
  CHECK(items({1, 2}) < items({1, 3}));
  CHECK(items({1}) < items({1, 2}));
  CHECK(items({1, 2, 9}) < items({2}));
}

TEST_CASE("feature vectors are elementwise products") {
  const CovariateMatrix z = small_z();
  const SparseFeature f12 = feature_vector(items({1, 2}), z);
  CHECK(f12.entries == SparseVector{{0, 1.0}});
  CHECK(feature_vector(items({2}), z).entries == SparseVector{{0, 1.0}, {2, 1.0}});
  const CovariateMatrix nb(2, {{{0, 0.5}, {1, 1.0}}, {{0, 0.5}}});
  CHECK(feature_vector(items({1, 2}), nb).entries == SparseVector{{0, 0.25}});
  CHECK(extend(feature_vector(items({1}), z), 1, z).entries == f12.entries);
  CHECK(multiply_columns(nb.column(0), nb.column(1)) == SparseVector{{0, 0.25}});
  CHECK(multiply_columns(z.column(0), SparseVector{}).empty());
}

TEST_CASE("weighted bounds") {
  const CovariateMatrix z = small_z();
  const std::vector<double> v{1.0, -1.0, 2.0};
  WeightedBounds b1 = weighted_bounds(z.column(0), v);
  CHECK(b1.pos_sum == 1.0);
  CHECK(b1.neg_sum == 1.0);
  WeightedBounds b2 = weighted_bounds(z.column(1), v);
  CHECK(b2.pos_sum == 3.0);
  CHECK(b2.neg_sum == 0.0);
  const std::vector<double> zero(3, 0.0);
  CHECK(weighted_bounds(z.column(1), zero).bound() == 0.0);
}

TEST_CASE("feature counts") {
  CHECK(feature_count(2, 2) == 3);
  CHECK(feature_count(10, 3) == 175);
  CHECK(feature_count(4, 3) == 14);
  CHECK(feature_count(1000, 3) == 1000 + 499500 + 166167000);
  CHECK(binomial(5, 7) == 0);
}

TEST_CASE("tree_max_abs_inner on the small example") {
  const CovariateMatrix z = small_z();
  const std::vector<double> v{1.0, -1.0, 2.0};
  const MaxInnerResult top = tree_max_abs_inner(z, v, 2);
  REQUIRE(top.itemset);
  CHECK(*top.itemset == items({2}));
  CHECK(top.value == 3.0);

  const MaxInnerResult excl = tree_max_abs_inner(z, v, 2, {items({2})});
  REQUIRE(excl.itemset);
  CHECK(*excl.itemset == items({1, 2}));
  CHECK(excl.value == 1.0);

  const MaxInnerResult none = tree_max_abs_inner(z, std::vector<double>(3, 0.0), 2);
  CHECK_FALSE(none.itemset);
  CHECK(none.value == 0.0);
}

TEST_CASE("tree_max_abs_inner matches brute force and is thread independent") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const RandomInstance inst = random_instance(seed, 30, 9, 3, seed % 2 ? 0.5 : 0.8);
    const auto& z = inst.data.z;
    Rng rng(seed * 31);
    std::vector<double> v(z.n());
    for (auto& x : v) x = rng.normal();
    const ExpandedDesign design = enumerate_all(z, 3);
    const DenseMax brute = dense_max_abs_inner(design, v);
    const MaxInnerResult tree1 = tree_max_abs_inner(z, v, 3);
    const MaxInnerResult tree4 = tree_max_abs_inner(z, v, 3, {}, {.threads = 4});
    REQUIRE(brute.itemset);
    REQUIRE(tree1.itemset);
    CHECK(tree1.value == doctest::Approx(brute.value).epsilon(1e-12));
    CHECK(*tree1.itemset == *brute.itemset);
    CHECK(*tree4.itemset == *tree1.itemset);
    CHECK(tree4.value == tree1.value);
    CHECK(tree4.counts.visited == tree1.counts.visited);

    // Excluding the winner yields the runner-up of the brute force.
    ExpandedDesign rest = design;
    for (std::size_t j = 0; j < rest.size(); ++j)
      if (rest.itemsets[j] == *brute.itemset) std::fill(rest.columns[j].begin(), rest.columns[j].end(), 0.0);
    const DenseMax second = dense_max_abs_inner(rest, v);
    const MaxInnerResult tree_second = tree_max_abs_inner(z, v, 3, {*brute.itemset});
    CHECK(tree_second.value == doctest::Approx(second.value).epsilon(1e-12));
  }
}

TEST_CASE("tree_collect_above matches brute force") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const RandomInstance inst = random_instance(seed, 30, 9, 3, seed % 2 ? 0.5 : 0.8);
    const auto& z = inst.data.z;
    Rng rng(seed * 17);
    std::vector<double> v(z.n());
    for (auto& x : v) x = rng.normal();
    const ExpandedDesign design = enumerate_all(z, 3);
    const double threshold = 0.5 * dense_max_abs_inner(design, v).value;
    std::vector<Itemset> expected;
    for (std::size_t j = 0; j < design.size(); ++j) {
      double dot = 0.0;
      for (std::size_t i = 0; i < design.n; ++i) dot += design.columns[j][i] * v[i];
      if (std::abs(dot) >= threshold) expected.push_back(design.itemsets[j]);
    }
    std::sort(expected.begin(), expected.end());
    const CollectResult got = tree_collect_above(z, v, 3, threshold);
    REQUIRE(got.features.size() == expected.size());
    for (std::size_t j = 0; j < expected.size(); ++j) {
      CHECK(got.features[j].itemset == expected[j]);
      CHECK(got.features[j].entries == feature_vector(expected[j], z).entries);
    }
    CHECK_THROWS_AS(tree_collect_above(z, v, 3, 0.0), std::invalid_argument);
  }
}

TEST_CASE("traversal accounting: visited + pruned_equiv = D") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const RandomInstance inst = random_instance(seed, 25, 10, 3, 0.8);
    const auto& z = inst.data.z;
    for (int order = 1; order <= 4; ++order) {
      TreeWalker walker(z, order);
      TraversalCounts all;
      std::uint64_t calls = 0;
      std::vector<Itemset> seen;
      for (std::uint32_t root = 0; root < z.d(); ++root)
        all += walker.walk(root, [&](const NodeView& node) {
          ++calls;
          seen.push_back(node.itemset());
          CHECK(!node.entries.empty());
          CHECK(node.items.size() <= static_cast<std::size_t>(order));
          // prune below nodes of odd support size to exercise the counter
          return node.entries.size() % 2 ? Visit::kPrune : Visit::kDescend;
        });
      CHECK(all.visited == calls);
      CHECK(all.visited + all.pruned_equiv == feature_count(z.d(), order));
      CHECK(std::is_sorted(seen.begin(), seen.end()));
    }
  }
}

TEST_CASE("walk visits exactly the nonzero itemsets in lexicographic order") {
  const RandomInstance inst = random_instance(5, 30, 8, 3, 0.5);
  const auto& z = inst.data.z;
  const ExpandedDesign design = enumerate_all(z, 3);
  std::vector<Itemset> expected;
  for (std::size_t j = 0; j < design.size(); ++j)
    if (std::any_of(design.columns[j].begin(), design.columns[j].end(), [](double x) { return x != 0.0; }))
      expected.push_back(design.itemsets[j]);
  TreeWalker walker(z, 3);
  std::vector<Itemset> seen;
  for (std::uint32_t root = 0; root < z.d(); ++root)
    walker.walk(root, [&](const NodeView& node) {
      seen.push_back(node.itemset());
      const SparseFeature direct = feature_vector(node.itemset(), z);
      CHECK(std::equal(direct.entries.begin(), direct.entries.end(), node.entries.begin(), node.entries.end()));
      return Visit::kDescend;
    });
  CHECK(seen == expected);
}

TEST_CASE("anti-monotonicity of the weighted bound") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const RandomInstance inst = random_instance(seed, 30, 8, 3, 0.5);
    const auto& z = inst.data.z;
    Rng rng(seed);
    std::vector<double> v(z.n());
    for (auto& x : v) x = rng.normal();
    const ExpandedDesign design = enumerate_all(z, 3);
    for (std::size_t j = 0; j < design.size(); ++j) {
      const SparseFeature f = feature_vector(design.itemsets[j], z);
      const double bound = weighted_bounds(f.entries, v).bound();
      for (std::size_t k = j + 1; k < design.size() && design.itemsets[j].is_ancestor_of(design.itemsets[k]); ++k) {
        const SparseFeature g = feature_vector(design.itemsets[k], z);
        double inner = 0.0;
        for (const Entry& e : g.entries) inner += e.value * v[e.index];
        CHECK(std::abs(inner) <= bound + 1e-12);
        // descendants are elementwise dominated
        for (const Entry& e : g.entries) {
          auto it = std::find_if(f.entries.begin(), f.entries.end(), [&](const Entry& x) { return x.index == e.index; });
          REQUIRE(it != f.entries.end());
          CHECK(e.value <= it->value);
        }
      }
    }
  }
}
