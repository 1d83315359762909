#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <optional>
#include <span>
#include <thread>
#include <utility>
#include <type_traits>
#include <vector>

#include "interlasso/core_data.hpp"
#include "interlasso/itemset.hpp"

namespace interlasso {

/// Binomial coefficient, saturating at UINT64_MAX.
std::uint64_t binomial(std::uint64_t n, std::uint64_t k);

/// D: the number of itemsets of size 1..order over d covariates (saturating).
std::uint64_t feature_count(std::size_t d, int order);

/// Lexicographic children of `itemset`: itemset + {k} for every k > max.
/// Returns nothing when the itemset already has `order` members.
std::vector<Itemset> children(const Itemset& itemset, std::size_t d, int order);

/// Intersects a parent feature with column k of z (k must exceed every member).
SparseFeature extend(const SparseFeature& parent, std::uint32_t k, const CovariateMatrix& z);

/// x_j built incrementally from the first member's column.
SparseFeature feature_vector(const Itemset& itemset, const CovariateMatrix& z);

struct WeightedBounds {
  double pos_sum = 0.0;  // sum over v_i > 0 of v_i x_i
  double neg_sum = 0.0;  // -sum over v_i < 0 of v_i x_i
  double bound() const { return std::max(pos_sum, neg_sum); }
};

/// Anti-monotone bound: |x_j'^T v| <= bound() for every descendant j' of j.
WeightedBounds weighted_bounds(std::span<const Entry> feature, std::span<const double> v);

/// Work accounting of a traversal. `visited + pruned_equiv` equals the number
/// of itemsets below the walked roots (roots included).
struct TraversalCounts {
  std::uint64_t visited = 0;          // nonzero nodes handed to the visitor
  std::uint64_t pruned_subtrees = 0;  // nodes whose descendants the visitor cut
  std::uint64_t zero_subtrees = 0;    // nodes skipped because x_j = 0
  std::uint64_t pruned_equiv = 0;     // itemsets never evaluated

  TraversalCounts& operator+=(const TraversalCounts& o) {
    visited += o.visited;
    pruned_subtrees += o.pruned_subtrees;
    zero_subtrees += o.zero_subtrees;
    pruned_equiv += o.pruned_equiv;
    return *this;
  }
};

struct NodeView {
  std::span<const std::uint32_t> items;  // current itemset, 0-based
  std::span<const Entry> entries;        // nonzero support of x_j

  Itemset itemset() const { return Itemset(std::vector<std::uint32_t>(items.begin(), items.end())); }
};

enum class Visit { kDescend, kPrune };

/// Inner products of a leaf feature (an itemset of maximal size) accumulated
/// during the parent's scatter: norm_sq = |x|^2, dot[m] = w_m^T x.
struct LeafSums {
  double norm_sq = 0.0;
  double dot[2] = {0.0, 0.0};
};

/// Up to two weight vectors for LeafSums::dot (unused slots may be empty).
struct LeafWeights {
  std::span<const double> w0;
  std::span<const double> w1;
};

/// Depth-first walker over the implicit itemset tree. Children of a node are
/// produced together by scattering the node's support over the rows of Z, so
/// the work per node is proportional to the support of the parent and zero
/// children are never materialized. One walker per thread; not thread-safe.
class TreeWalker {
 public:
  TreeWalker(const CovariateMatrix& z, int order);

  /// Walks the subtree rooted at {root}. `visit(const NodeView&) -> Visit` is
  /// called on every nonzero node in lexicographic order.
  template <class Visitor>
  TraversalCounts walk(std::uint32_t root, Visitor&& visit);

  /// Like walk(), but nodes of maximal size are not materialized: their
  /// LeafSums are accumulated while scattering the parent, and
  /// `leaf(const NodeView& parent, std::uint32_t k, const LeafSums&)` is called
  /// for each nonzero leaf parent + {k} in lexicographic order. Leaves count as
  /// visited nodes. Roots are always handed to `visit`.
  template <class Visitor, class LeafVisitor>
  TraversalCounts walk(std::uint32_t root, Visitor&& visit, const LeafWeights& weights, LeafVisitor&& leaf);

  /// Number of itemsets in the subtree of a node of size `size` whose last
  /// index is `last` (the node included).
  std::uint64_t subtree_size(std::size_t size, std::uint32_t last) const {
    return subtree_size_[size - 1][last];
  }

 private:
  struct NoLeaves {};

  template <class Visitor, class LeafVisitor>
  void expand(std::size_t size, std::span<const Entry> entries, Visitor& visit, LeafVisitor* leaf,
              TraversalCounts& counts);
  template <class LeafVisitor>
  void expand_leaves(std::span<const Entry> entries, LeafVisitor& leaf, TraversalCounts& counts);

  const CovariateMatrix* z_;
  std::size_t order_;
  std::vector<std::uint32_t> path_;
  std::vector<std::vector<SparseVector>> buckets_;         // [size][covariate]
  std::vector<std::vector<std::uint32_t>> touched_;         // [size]
  std::vector<std::vector<std::uint64_t>> subtree_size_;    // [size-1][last]
  LeafWeights weights_;
  std::vector<LeafSums> leaf_sums_;                         // [covariate]
  std::vector<std::uint8_t> leaf_seen_;                     // [covariate]
};

template <class Visitor>
TraversalCounts TreeWalker::walk(std::uint32_t root, Visitor&& visit) {
  return walk(root, visit, LeafWeights{}, static_cast<NoLeaves*>(nullptr));
}

template <class Visitor, class LeafVisitor>
TraversalCounts TreeWalker::walk(std::uint32_t root, Visitor&& visit, const LeafWeights& weights,
                                 LeafVisitor&& leaf) {
  TraversalCounts counts;
  path_.assign(1, root);
  weights_ = weights;
  const auto column = z_->column(root);
  if (column.empty()) {
    ++counts.zero_subtrees;
    counts.pruned_equiv += subtree_size(1, root);
    return counts;
  }
  ++counts.visited;
  if (visit(NodeView{path_, column}) == Visit::kPrune) {
    ++counts.pruned_subtrees;
    counts.pruned_equiv += subtree_size(1, root) - 1;
  } else {
    using Leaf = std::remove_reference_t<LeafVisitor>;
    if constexpr (std::is_pointer_v<Leaf>)
      expand(1, column, visit, static_cast<NoLeaves*>(nullptr), counts);
    else
      expand(1, column, visit, &leaf, counts);
  }
  return counts;
}

template <class Visitor, class LeafVisitor>
void TreeWalker::expand(std::size_t size, std::span<const Entry> entries, Visitor& visit, LeafVisitor* leaf,
                        TraversalCounts& counts) {
  if (size >= order_) return;
  if constexpr (!std::is_same_v<LeafVisitor, NoLeaves>) {
    if (size + 1 == order_) {
      expand_leaves(entries, *leaf, counts);
      return;
    }
  }
  const std::uint32_t last = path_.back();
  auto& buckets = buckets_[size];
  auto& touched = touched_[size];
  for (const Entry& e : entries) {
    const auto row = z_->row(e.index);
    auto it = std::upper_bound(row.begin(), row.end(), last,
                               [](std::uint32_t k, const Entry& r) { return k < r.index; });
    for (; it != row.end(); ++it) {
      auto& bucket = buckets[it->index];
      if (bucket.empty()) touched.push_back(it->index);
      bucket.push_back({e.index, e.value * it->value});
    }
  }
  std::sort(touched.begin(), touched.end());

  std::uint64_t covered = 0;
  for (const std::uint32_t k : touched) {
    path_.push_back(k);
    const SparseVector& child = buckets[k];
    const std::uint64_t below = subtree_size(size + 1, k);
    covered += below;
    ++counts.visited;
    if (visit(NodeView{path_, child}) == Visit::kPrune) {
      ++counts.pruned_subtrees;
      counts.pruned_equiv += below - 1;
    } else {
      expand(size + 1, child, visit, leaf, counts);
    }
    path_.pop_back();
  }
  const std::uint64_t descendants = subtree_size(size, last) - 1;
  counts.zero_subtrees += (z_->d() - 1 - last) - touched.size();
  counts.pruned_equiv += descendants - covered;

  for (const std::uint32_t k : touched) buckets[k].clear();
  touched.clear();
}

template <class LeafVisitor>
void TreeWalker::expand_leaves(std::span<const Entry> entries, LeafVisitor& leaf, TraversalCounts& counts) {
  const std::uint32_t last = path_.back();
  if (leaf_sums_.empty()) {
    leaf_sums_.resize(z_->d());
    leaf_seen_.assign(z_->d(), 0);
  }
  auto& touched = touched_[order_];
  const bool has_w0 = !weights_.w0.empty();
  const bool has_w1 = !weights_.w1.empty();
  const NodeView parent{path_, entries};

  // Few rows: merge the row tails directly, which yields the leaves in order.
  constexpr std::size_t kMergeRows = 4;
  if (entries.size() <= kMergeRows) {
    struct Cursor {
      const Entry* it;
      const Entry* end;
      double value, w0, w1;
    };
    Cursor cursors[kMergeRows];
    std::size_t live = 0;
    for (const Entry& e : entries) {
      const auto row = z_->row(e.index);
      auto it = std::upper_bound(row.begin(), row.end(), last,
                                 [](std::uint32_t k, const Entry& r) { return k < r.index; });
      if (it == row.end()) continue;
      cursors[live++] = {&*it, row.data() + row.size(), e.value, has_w0 ? weights_.w0[e.index] : 0.0,
                         has_w1 ? weights_.w1[e.index] : 0.0};
    }
    std::uint64_t leaves = 0;
    while (live > 0) {
      std::uint32_t k = cursors[0].it->index;
      for (std::size_t c = 1; c < live; ++c) k = std::min(k, cursors[c].it->index);
      LeafSums sums{};
      for (std::size_t c = 0; c < live;) {
        Cursor& cur = cursors[c];
        if (cur.it->index == k) {
          const double x = cur.value * cur.it->value;
          sums.norm_sq += x * x;
          sums.dot[0] += cur.w0 * x;
          sums.dot[1] += cur.w1 * x;
          if (++cur.it == cur.end) {
            // Keep row order among the remaining cursors.
            std::copy(cursors + c + 1, cursors + live, cursors + c);
            --live;
            continue;
          }
        }
        ++c;
      }
      ++leaves;
      ++counts.visited;
      leaf(parent, k, sums);
    }
    const std::uint64_t zero = (z_->d() - 1 - last) - leaves;
    counts.zero_subtrees += zero;
    counts.pruned_equiv += zero;
    return;
  }

  for (const Entry& e : entries) {
    const auto row = z_->row(e.index);
    auto it = std::upper_bound(row.begin(), row.end(), last,
                               [](std::uint32_t k, const Entry& r) { return k < r.index; });
    const double w0 = has_w0 ? weights_.w0[e.index] : 0.0;
    const double w1 = has_w1 ? weights_.w1[e.index] : 0.0;
    for (; it != row.end(); ++it) {
      const double x = e.value * it->value;
      LeafSums& s = leaf_sums_[it->index];
      if (!leaf_seen_[it->index]) {
        leaf_seen_[it->index] = 1;
        touched.push_back(it->index);
      }
      s.norm_sq += x * x;
      s.dot[0] += w0 * x;
      s.dot[1] += w1 * x;
    }
  }
  // Emit in ascending order: a flag scan beats sorting when most leaves are hit.
  const auto emit = [&](std::uint32_t k) {
    ++counts.visited;
    leaf(parent, k, leaf_sums_[k]);
    leaf_sums_[k] = LeafSums{};
    leaf_seen_[k] = 0;
  };
  const std::size_t range = z_->d() - 1 - last;
  if (touched.size() * 8 >= range) {
    for (std::uint32_t k = last + 1; k < z_->d(); ++k)
      if (leaf_seen_[k]) emit(k);
  } else {
    std::sort(touched.begin(), touched.end());
    for (const std::uint32_t k : touched) emit(k);
  }
  const std::uint64_t zero = (z_->d() - 1 - last) - touched.size();
  counts.zero_subtrees += zero;
  counts.pruned_equiv += zero;
  touched.clear();
}

/// Calls fn(worker, root) for every root in [0, roots) on up to `threads`
/// workers. Roots are handed out dynamically, so callers must combine
/// per-worker results order-independently.
template <class Fn>
void for_each_root(std::size_t roots, unsigned threads, Fn&& fn) {
  const unsigned workers =
      static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(threads ? threads : 1, roots)));
  if (workers == 1) {
    for (std::size_t r = 0; r < roots; ++r) fn(0u, static_cast<std::uint32_t>(r));
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t r = next++; r < roots; r = next++) fn(w, static_cast<std::uint32_t>(r));
    });
  }
}

struct MaxInnerResult {
  std::optional<Itemset> itemset;
  double value = 0.0;
  TraversalCounts counts;
};

struct MaxSearchOptions {
  unsigned threads = 1;
  /// A value known to be attained by some non-excluded itemset. Subtrees whose
  /// bound is strictly below it are skipped.
  double hint = 0.0;
};

/// argmax and max of |x_j^T v| over all itemsets of size <= order that are
/// not in `exclude`. Ties go to the lexicographically smallest itemset. When
/// every candidate value is zero the itemset is empty and the value 0.
MaxInnerResult tree_max_abs_inner(const CovariateMatrix& z, std::span<const double> v, int order,
                                  const std::vector<Itemset>& exclude = {},
                                  const MaxSearchOptions& options = {});

/// Elementwise product of two sparse columns (both sorted by row).
SparseVector multiply_columns(std::span<const Entry> a, std::span<const Entry> b);

struct CollectResult {
  std::vector<SparseFeature> features;  // sorted by itemset
  TraversalCounts counts;
};

/// Every itemset of size <= order with |x_j^T v| >= threshold (threshold > 0).
CollectResult tree_collect_above(const CovariateMatrix& z, std::span<const double> v, int order,
                                 double threshold, unsigned threads = 1);

}  // namespace interlasso
