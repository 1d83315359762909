#include "interlasso/screening.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace interlasso {

ScreeningContext build_context(const SparseSolution& prev, double lambda_prev, double lambda_next,
                               const CovariateMatrix& z, std::span<const double> y,
                               CenterVariant variant) {
  if (!(lambda_next > 0.0) || !(lambda_next < lambda_prev))
    throw std::invalid_argument("screening context requires 0 < lambda_next < lambda_prev");
  if (y.size() != z.n()) throw std::invalid_argument("response length does not match instance count");
  const std::size_t n = z.n();
  ScreeningContext ctx;
  ctx.lambda_prev = lambda_prev;
  ctx.lambda_next = lambda_next;
  ctx.variant = variant;
  ctx.a.assign(n, 0.0);
  for (const auto& [itemset, coef] : prev.coefficients) {
    const SparseFeature f = feature_vector(itemset, z);
    for (const Entry& e : f.entries) ctx.a[e.index] += e.value * coef;
  }
  for (double& v : ctx.a) v /= lambda_prev;

  const double inv_next = 1.0 / lambda_next;
  const double inv_prev = 1.0 / lambda_prev;
  const double a_scale = variant == CenterVariant::kDualCentered ? 1.0 : lambda_prev / lambda_next;
  ctx.b.resize(n);
  ctx.c.resize(n);
  double norm_a_sq = 0.0;
  double norm_b_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ctx.b[i] = (inv_next - inv_prev) * y[i] + ctx.a[i];
    ctx.c[i] = (inv_next + inv_prev) * y[i] - a_scale * ctx.a[i];
    norm_a_sq += ctx.a[i] * ctx.a[i];
    norm_b_sq += ctx.b[i] * ctx.b[i];
    ctx.a_dot_b += ctx.a[i] * ctx.b[i];
  }
  ctx.norm_a = std::sqrt(norm_a_sq);
  ctx.norm_b = std::sqrt(norm_b_sq);
  ctx.at_lambda_max = prev.empty() || norm_a_sq == 0.0;
  if (!ctx.at_lambda_max) {
    const double proj = ctx.a_dot_b / norm_a_sq;
    ctx.d.resize(n);
    for (std::size_t i = 0; i < n; ++i) ctx.d[i] = ctx.c[i] - proj * ctx.a[i];
    ctx.b_perp_norm = std::sqrt(std::max(0.0, norm_b_sq - ctx.a_dot_b * proj));
  } else {
    ctx.a_dot_b = 0.0;
  }
  return ctx;
}

namespace {

struct NodeSums {
  double norm_sq = 0.0;
  double xa = 0.0;
  double xc = 0.0;
  double c_pos = 0.0;  // sum over c_i > 0 of c_i x_i
  double c_neg = 0.0;  // -sum over c_i < 0 of c_i x_i
  double d_pos = 0.0;
  double d_neg = 0.0;
  double a_pos = 0.0;
  double a_neg = 0.0;
};

NodeSums node_sums(const ScreeningContext& ctx, std::span<const Entry> feature) {
  NodeSums s;
  const bool projected = !ctx.at_lambda_max;
  for (const Entry& e : feature) {
    const double x = e.value;
    s.norm_sq += x * x;
    const double cx = ctx.c[e.index] * x;
    s.xc += cx;
    if (cx > 0.0)
      s.c_pos += cx;
    else
      s.c_neg -= cx;
    if (projected) {
      const double ax = ctx.a[e.index] * x;
      s.xa += ax;
      if (ax > 0.0)
        s.a_pos += ax;
      else
        s.a_neg -= ax;
      const double dx = ctx.d[e.index] * x;
      if (dx > 0.0)
        s.d_pos += dx;
      else
        s.d_neg -= dx;
    }
  }
  return s;
}

BoundPair node_bounds_from_sums(const ScreeningContext& ctx, const NodeSums& s, bool binary_data,
                                const ScreeningOptions& options) {
  const double x_norm = std::sqrt(s.norm_sq);
  const double ball = options.mutation == BoundMutation::kDropNormTerm ? 0.0 : x_norm * ctx.norm_b;
  const double p1 = 0.5 * (ball + s.c_pos);
  const double m1 = 0.5 * (ball + s.c_neg);
  if (ctx.at_lambda_max) return {p1, m1};

  const double disk =
      options.mutation == BoundMutation::kDropNormTerm ? 0.0 : x_norm * ctx.b_perp_norm;
  const double p2 = 0.5 * (disk + s.d_pos);
  const double m2 = 0.5 * (disk + s.d_neg);
  BoundPair u{std::max(p1, p2), std::max(m1, m2)};

  if (options.binary_refinement && binary_data && ctx.norm_b > 0.0) {
    const double threshold = options.refinement_threshold == RefinementThreshold::kNormalized
                                 ? ctx.a_dot_b / ctx.norm_b
                                 : ctx.a_dot_b / (ctx.norm_b * ctx.norm_b);
    if (s.a_neg < threshold) {
#ifndef NDEBUG
      // Every nonzero binary descendant then falls in the projected case; so does the node.
      if (options.refinement_threshold == RefinementThreshold::kNormalized)
        assert(!(ctx.a_dot_b / ctx.norm_b <= -s.xa / x_norm));
#endif
      u.plus = p2;
    }
    if (s.a_pos < threshold) {
#ifndef NDEBUG
      if (options.refinement_threshold == RefinementThreshold::kNormalized)
        assert(!(ctx.a_dot_b / ctx.norm_b <= s.xa / x_norm));
#endif
      u.minus = m2;
    }
  }
  return u;
}

// Per-context constants of the feature bounds, so the per-feature work is
// two square roots and no divisions.
struct FeatureTerms {
  bool ball_only = true;
  double norm_b = 0.0;
  double b_perp_norm = 0.0;
  double lhs = 0.0;            // a^T b / |b|
  double inv_norm_a_sq = 0.0;  // 1 / |a|^2
  double shift_per_xa = 0.0;   // a^T b / |a|^2
};

FeatureTerms feature_terms(const ScreeningContext& ctx, const ScreeningOptions& options) {
  FeatureTerms t;
  const bool drop = options.mutation == BoundMutation::kDropNormTerm;
  t.norm_b = drop ? 0.0 : ctx.norm_b;
  t.ball_only = ctx.at_lambda_max || ctx.norm_b == 0.0;
  if (t.ball_only) return t;
  t.b_perp_norm = drop ? 0.0 : ctx.b_perp_norm;
  t.lhs = ctx.a_dot_b / ctx.norm_b;
  t.inv_norm_a_sq = 1.0 / (ctx.norm_a * ctx.norm_a);
  t.shift_per_xa = ctx.a_dot_b * t.inv_norm_a_sq;
  return t;
}

BoundPair feature_bounds_from_sums(const FeatureTerms& t, const NodeSums& s) {
  if (s.norm_sq == 0.0) return {0.0, 0.0};
  const double x_norm = std::sqrt(s.norm_sq);
  const double ball = x_norm * t.norm_b;
  if (t.ball_only) return {0.5 * (s.xc + ball), 0.5 * (-s.xc + ball)};

  const double x_perp = std::sqrt(std::max(0.0, s.norm_sq - s.xa * s.xa * t.inv_norm_a_sq));
  const double disk = x_perp * t.b_perp_norm;
  const double shift = t.shift_per_xa * s.xa;
  // Case tests lhs <= -/+ x^T a / |x|, multiplied through by |x| > 0.
  const double lhs = t.lhs * x_norm;
  BoundPair u;
  u.plus = lhs <= -s.xa ? 0.5 * (s.xc + ball) : 0.5 * (s.xc + disk - shift);
  u.minus = lhs <= s.xa ? 0.5 * (-s.xc + ball) : 0.5 * (-s.xc + disk + shift);
  return u;
}

}  // namespace

BoundPair node_prune_bounds(const ScreeningContext& ctx, std::span<const Entry> feature,
                            bool binary_data, const ScreeningOptions& options) {
  if (feature.empty()) throw std::invalid_argument("node bounds require a nonzero feature");
  return node_bounds_from_sums(ctx, node_sums(ctx, feature), binary_data, options);
}

BoundPair feature_screen_bounds(const ScreeningContext& ctx, std::span<const Entry> feature,
                                const ScreeningOptions& options) {
  return feature_bounds_from_sums(feature_terms(ctx, options), node_sums(ctx, feature));
}

ActiveSuperset sfp_traverse(const ScreeningContext& ctx, const CovariateMatrix& z, int order,
                            const ScreeningOptions& options) {
  const unsigned workers = std::max(1u, options.threads);
  const bool binary = z.is_binary();
  const std::size_t max_size = static_cast<std::size_t>(order);
  constexpr double kThreshold = 1.0 - kScreeningGuard;

  std::vector<TreeWalker> walkers;
  walkers.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) walkers.emplace_back(z, order);
  std::vector<std::vector<SparseFeature>> kept(workers);
  std::vector<TraversalCounts> counts(workers);
  std::vector<std::uint64_t> screened(workers, 0);

  // Leaves only need |x|^2, x^T c and x^T a, which the walker accumulates in
  // the parent's scatter; survivors are materialized afterwards.
  const LeafWeights weights{ctx.c, ctx.at_lambda_max ? std::span<const double>{} : std::span<const double>(ctx.a)};
  const FeatureTerms terms = feature_terms(ctx, options);
  for_each_root(z.d(), workers, [&](unsigned worker, std::uint32_t root) {
    auto visit = [&](const NodeView& node) {
      const NodeSums sums = node_sums(ctx, node.entries);
      if (feature_bounds_from_sums(terms, sums).max() < kThreshold)
        ++screened[worker];
      else
        kept[worker].push_back({node.itemset(), SparseVector(node.entries.begin(), node.entries.end())});
      const bool has_children = node.items.size() < max_size && node.items.back() + 1 < z.d();
      if (has_children && node_bounds_from_sums(ctx, sums, binary, options).max() < kThreshold)
        return Visit::kPrune;
      return Visit::kDescend;
    };
    auto leaf = [&](const NodeView& parent, std::uint32_t k, const LeafSums& leaf_sums) {
      NodeSums sums;
      sums.norm_sq = leaf_sums.norm_sq;
      sums.xc = leaf_sums.dot[0];
      sums.xa = leaf_sums.dot[1];
      if (feature_bounds_from_sums(terms, sums).max() < kThreshold) {
        ++screened[worker];
        return;
      }
      std::vector<std::uint32_t> items(parent.items.begin(), parent.items.end());
      items.push_back(k);
      kept[worker].push_back({Itemset(std::move(items)), multiply_columns(parent.entries, z.column(k))});
    };
    counts[worker] += walkers[worker].walk(root, visit, weights, leaf);
  });

  ActiveSuperset out;
  for (unsigned w = 0; w < workers; ++w) {
    out.stats.traversed_nodes += counts[w].visited;
    out.stats.pruned_subtrees += counts[w].pruned_subtrees;
    out.stats.zero_subtrees += counts[w].zero_subtrees;
    out.stats.pruned_equiv += counts[w].pruned_equiv;
    out.stats.leaf_screened += screened[w];
    for (auto& f : kept[w]) out.features.push_back(std::move(f));
  }
  std::sort(out.features.begin(), out.features.end(),
            [](const SparseFeature& l, const SparseFeature& r) { return l.itemset < r.itemset; });
  return out;
}

ActiveSuperset enumerate_features(const CovariateMatrix& z, int order, unsigned threads) {
  const unsigned workers = std::max(1u, threads);
  std::vector<TreeWalker> walkers;
  walkers.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) walkers.emplace_back(z, order);
  std::vector<std::vector<SparseFeature>> kept(workers);
  std::vector<TraversalCounts> counts(workers);
  for_each_root(z.d(), workers, [&](unsigned worker, std::uint32_t root) {
    counts[worker] += walkers[worker].walk(root, [&](const NodeView& node) {
      kept[worker].push_back({node.itemset(), SparseVector(node.entries.begin(), node.entries.end())});
      return Visit::kDescend;
    });
  });
  ActiveSuperset out;
  for (unsigned w = 0; w < workers; ++w) {
    out.stats.traversed_nodes += counts[w].visited;
    out.stats.zero_subtrees += counts[w].zero_subtrees;
    out.stats.pruned_equiv += counts[w].pruned_equiv;
    for (auto& f : kept[w]) out.features.push_back(std::move(f));
  }
  std::sort(out.features.begin(), out.features.end(),
            [](const SparseFeature& l, const SparseFeature& r) { return l.itemset < r.itemset; });
  return out;
}

}  // namespace interlasso
