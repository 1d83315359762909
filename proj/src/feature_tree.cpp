#include "interlasso/feature_tree.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace interlasso {

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
  unsigned __int128 acc = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    acc = acc * (n - k + i) / i;
    if (acc > kMax) return kMax;
  }
  return static_cast<std::uint64_t>(acc);
}

namespace {

std::uint64_t add_sat(std::uint64_t a, std::uint64_t b) {
  const std::uint64_t s = a + b;
  return s < a ? std::numeric_limits<std::uint64_t>::max() : s;
}

}  // namespace

std::uint64_t feature_count(std::size_t d, int order) {
  std::uint64_t total = 0;
  for (int k = 1; k <= order; ++k) total = add_sat(total, binomial(d, static_cast<std::uint64_t>(k)));
  return total;
}

std::vector<Itemset> children(const Itemset& itemset, std::size_t d, int order) {
  std::vector<Itemset> out;
  if (itemset.size() >= static_cast<std::size_t>(order)) return out;
  for (std::uint32_t k = itemset.back() + 1; k < d; ++k) out.push_back(itemset.with(k));
  return out;
}

SparseFeature extend(const SparseFeature& parent, std::uint32_t k, const CovariateMatrix& z) {
  return {parent.itemset.with(k), multiply_columns(parent.entries, z.column(k))};
}

SparseFeature feature_vector(const Itemset& itemset, const CovariateMatrix& z) {
  if (itemset.empty() || itemset.back() >= z.d())
    throw std::invalid_argument("itemset " + itemset.to_string() + " is out of range");
  const auto idx = itemset.indices();
  const auto first = z.column(idx[0]);
  SparseFeature f{Itemset{idx[0]}, SparseVector(first.begin(), first.end())};
  for (std::size_t m = 1; m < idx.size(); ++m) f = extend(f, idx[m], z);
  return f;
}

WeightedBounds weighted_bounds(std::span<const Entry> feature, std::span<const double> v) {
  WeightedBounds b;
  for (const Entry& e : feature) {
    const double w = v[e.index] * e.value;
    if (w > 0.0)
      b.pos_sum += w;
    else
      b.neg_sum -= w;
  }
  return b;
}

TreeWalker::TreeWalker(const CovariateMatrix& z, int order)
    : z_(&z), order_(static_cast<std::size_t>(order)) {
  if (order < 1) throw std::invalid_argument("order must be >= 1");
  const std::size_t d = z.d();
  buckets_.resize(order_ + 1);
  touched_.resize(order_ + 1);
  for (std::size_t s = 1; s < order_; ++s) buckets_[s].resize(d);
  subtree_size_.assign(order_, std::vector<std::uint64_t>(d, 0));
  for (std::size_t size = 1; size <= order_; ++size) {
    for (std::size_t last = 0; last < d; ++last) {
      std::uint64_t total = 0;
      for (std::size_t l = 0; l <= order_ - size; ++l) total = add_sat(total, binomial(d - 1 - last, l));
      subtree_size_[size - 1][last] = total;
    }
  }
}

SparseVector multiply_columns(std::span<const Entry> a, std::span<const Entry> b) {
  SparseVector out;
  auto c = b.begin();
  for (const Entry& e : a) {
    while (c != b.end() && c->index < e.index) ++c;
    if (c == b.end()) break;
    if (c->index == e.index) out.push_back({e.index, e.value * c->value});
  }
  return out;
}

namespace {

bool span_less(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

// Covariate values are non-negative, so the positive and negative parts of
// x^T v are x^T v+ and x^T v-.
struct SignParts {
  std::vector<double> pos, neg;
};

SignParts sign_parts(std::span<const double> v) {
  SignParts p{std::vector<double>(v.size()), std::vector<double>(v.size())};
  for (std::size_t i = 0; i < v.size(); ++i) (v[i] > 0.0 ? p.pos[i] : p.neg[i]) = std::abs(v[i]);
  return p;
}

struct RootBest {
  double value = 0.0;
  std::vector<std::uint32_t> items;
};

}  // namespace

MaxInnerResult tree_max_abs_inner(const CovariateMatrix& z, std::span<const double> v, int order,
                                  const std::vector<Itemset>& exclude, const MaxSearchOptions& options) {
  if (v.size() != z.n()) throw std::invalid_argument("vector length does not match instance count");
  std::vector<Itemset> excluded(exclude);
  std::sort(excluded.begin(), excluded.end());
  const auto is_excluded = [&excluded](std::span<const std::uint32_t> items) {
    if (excluded.empty()) return false;
    auto it = std::lower_bound(excluded.begin(), excluded.end(), items,
                               [](const Itemset& a, std::span<const std::uint32_t> b) {
                                 return span_less(a.indices(), b);
                               });
    return it != excluded.end() && std::equal(items.begin(), items.end(), it->begin(), it->end());
  };

  // Singletons give a cheap attained value that lets every root prune early.
  double hint = options.hint;
  for (std::uint32_t k = 0; k < z.d(); ++k) {
    const std::uint32_t item[1] = {k};
    if (is_excluded(item)) continue;
    double dot = 0.0;
    for (const Entry& e : z.column(k)) dot += v[e.index] * e.value;
    hint = std::max(hint, std::abs(dot));
  }

  const unsigned workers = std::max(1u, options.threads);
  std::vector<TreeWalker> walkers;
  walkers.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) walkers.emplace_back(z, order);
  std::vector<RootBest> best(z.d());
  std::vector<TraversalCounts> counts(workers);

  const SignParts parts = sign_parts(v);
  const LeafWeights weights{parts.pos, parts.neg};
  for_each_root(z.d(), workers, [&](unsigned worker, std::uint32_t root) {
    RootBest& local = best[root];
    auto leaf = [&](const NodeView& parent, std::uint32_t k, const LeafSums& sums) {
      const double pos = sums.dot[0], neg = sums.dot[1];
      const double bound = std::max(pos, neg);
      if (bound < hint || bound <= local.value) return;
      const double value = std::abs(pos - neg);
      if (value <= local.value) return;
      std::vector<std::uint32_t> items(parent.items.begin(), parent.items.end());
      items.push_back(k);
      if (is_excluded(items)) return;
      local.value = value;
      local.items = std::move(items);
    };
    auto visit = [&](const NodeView& node) {
      double dot = 0.0;
      double pos = 0.0;
      double neg = 0.0;
      for (const Entry& e : node.entries) {
        const double w = v[e.index] * e.value;
        dot += w;
        if (w > 0.0)
          pos += w;
        else
          neg -= w;
      }
      const double bound = std::max(pos, neg);
      if (bound < hint || bound <= local.value) return Visit::kPrune;
      const double value = std::abs(dot);
      if (value > local.value && !is_excluded(node.items)) {
        local.value = value;
        local.items.assign(node.items.begin(), node.items.end());
      }
      return Visit::kDescend;
    };
    counts[worker] += walkers[worker].walk(root, visit, weights, leaf);
  });

  MaxInnerResult result;
  for (const auto& c : counts) result.counts += c;
  const RootBest* winner = nullptr;
  for (const RootBest& b : best) {
    if (b.items.empty()) continue;
    // Roots are scanned in increasing order, so strict > keeps the smallest itemset on ties.
    if (!winner || b.value > winner->value) winner = &b;
  }
  if (winner && winner->value > 0.0) {
    result.itemset = Itemset(winner->items);
    result.value = winner->value;
  }
  return result;
}

CollectResult tree_collect_above(const CovariateMatrix& z, std::span<const double> v, int order,
                                 double threshold, unsigned threads) {
  if (v.size() != z.n()) throw std::invalid_argument("vector length does not match instance count");
  if (!(threshold > 0.0)) throw std::invalid_argument("collection threshold must be positive");
  const unsigned workers = std::max(1u, threads);
  std::vector<TreeWalker> walkers;
  walkers.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) walkers.emplace_back(z, order);
  std::vector<std::vector<SparseFeature>> found(workers);
  std::vector<TraversalCounts> counts(workers);
  const SignParts parts = sign_parts(v);
  const LeafWeights weights{parts.pos, parts.neg};
  for_each_root(z.d(), workers, [&](unsigned worker, std::uint32_t root) {
    auto visit = [&](const NodeView& node) {
      const WeightedBounds b = weighted_bounds(node.entries, v);
      if (b.bound() < threshold) return Visit::kPrune;
      double dot = 0.0;
      for (const Entry& e : node.entries) dot += v[e.index] * e.value;
      if (std::abs(dot) >= threshold)
        found[worker].push_back({node.itemset(), SparseVector(node.entries.begin(), node.entries.end())});
      return Visit::kDescend;
    };
    auto leaf = [&](const NodeView& parent, std::uint32_t k, const LeafSums& sums) {
      if (std::max(sums.dot[0], sums.dot[1]) < threshold || std::abs(sums.dot[0] - sums.dot[1]) < threshold) return;
      std::vector<std::uint32_t> items(parent.items.begin(), parent.items.end());
      items.push_back(k);
      found[worker].push_back({Itemset(std::move(items)), multiply_columns(parent.entries, z.column(k))});
    };
    counts[worker] += walkers[worker].walk(root, visit, weights, leaf);
  });
  CollectResult out;
  for (unsigned w = 0; w < workers; ++w) {
    out.counts += counts[w];
    for (auto& f : found[w]) out.features.push_back(std::move(f));
  }
  std::sort(out.features.begin(), out.features.end(),
            [](const SparseFeature& l, const SparseFeature& r) { return l.itemset < r.itemset; });
  return out;
}

}  // namespace interlasso
