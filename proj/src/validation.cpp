#include "interlasso/validation.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "interlasso/feature_tree.hpp"
#include "interlasso/path_runner.hpp"

namespace interlasso {

namespace {

Itemset random_itemset(Rng& rng, std::size_t d, int order) {
  const std::size_t size = 1 + rng.next() % std::min<std::size_t>(static_cast<std::size_t>(order), d);
  std::set<std::uint32_t> picked;
  while (picked.size() < size) picked.insert(static_cast<std::uint32_t>(rng.next() % d));
  return Itemset(std::vector<std::uint32_t>(picked.begin(), picked.end()));
}

}  // namespace

RandomInstance random_instance(std::uint64_t seed, std::size_t max_n, std::size_t max_d, int order,
                               double sparsity) {
  Rng rng(seed);
  for (;;) {
    const std::size_t n = max_n <= 10 ? max_n : 10 + rng.next() % (max_n - 9);
    const std::size_t d = max_d <= 2 ? max_d : 2 + rng.next() % (max_d - 1);
    std::vector<SparseVector> columns(d);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < d; ++k)
        if (rng.uniform() < 1.0 - sparsity) columns[k].push_back({static_cast<std::uint32_t>(i), 1.0});
    CovariateMatrix z(n, std::move(columns));
    const SparseFeature first = feature_vector(random_itemset(rng, d, order), z);
    const SparseFeature second = feature_vector(random_itemset(rng, d, order), z);
    std::vector<double> y(n);
    for (auto& v : y) v = 0.3 * rng.normal();
    for (const Entry& e : first.entries) y[e.index] += 1.0;
    for (const Entry& e : second.entries) y[e.index] -= 0.7;
    if (z.nnz() == 0) continue;
    if (!tree_max_abs_inner(z, y, order).itemset) continue;
    return {Dataset(std::move(z), ResponseVector(std::move(y))), sparsity, seed};
  }
}

std::size_t BatteryReport::failures() const {
  return static_cast<std::size_t>(
      std::count_if(instances.begin(), instances.end(), [](const InstanceOutcome& o) { return !o.passed(); }));
}

BatteryReport run_battery(const BatteryOptions& options) {
  static constexpr double kSparsities[] = {0.5, 0.8, 0.95};
  BatteryReport report;
  for (std::size_t s = 0; s < options.seeds; ++s) {
    const std::uint64_t seed = options.first_seed + s;
    const RandomInstance inst =
        random_instance(seed, options.max_n, options.max_d, options.order, kSparsities[s % 3]);
    const auto& z = inst.data.z;
    const auto y = inst.data.y.values();
    InstanceOutcome out;
    out.seed = seed;
    out.n = z.n();
    out.d = z.d();
    out.sparsity = inst.sparsity;
    try {
      const ExpandedDesign design = enumerate_all(z, options.order);
      const DenseMax brute = dense_max_abs_inner(design, y);
      const LambdaMax tree = compute_lambda_max(z, y, options.order, options.threads);
      out.lambda_max_ok = brute.itemset && *brute.itemset == tree.itemset &&
                          std::abs(brute.value - tree.value) <= 1e-12 * std::max(1.0, brute.value);

      ProblemConfig config;
      config.order = options.order;
      config.tol = options.tol;
      config.center_variant = options.center_variant;
      config.binary_refinement = options.binary_refinement;
      config.refinement_threshold = options.refinement_threshold;
      config.threads = options.threads;
      config.keep_supersets = true;
      const PathResult screened = run_path(config, z, y, options.mutation);
      const PathResult oracle = oracle_path(z, y, config);
      out.steps = screened.steps.size();

      const PathComparison cmp = compare_paths(screened, oracle);
      out.max_coefficient_diff = cmp.max_coefficient_diff;
      out.path_equivalent = cmp.passed(options.coefficient_tol);
      out.safety_violations = validate_safety(screened, oracle).violations.size();
      for (const auto& step : screened.steps) {
        out.worst_gap = std::max(out.worst_gap, step.metrics.gap);
        out.screening_incidents += step.metrics.screening_incidents;
      }
      out.gaps_ok = out.worst_gap <= options.tol;

      const std::size_t last = screened.steps.size() - 1;
      std::set<std::size_t> picks;
      if (last >= 1) picks = {1, std::max<std::size_t>(1, last / 4), std::max<std::size_t>(1, last / 2),
                              std::max<std::size_t>(1, 3 * last / 4), last};
      ScreeningOptions screening;
      screening.binary_refinement = options.binary_refinement;
      screening.refinement_threshold = options.refinement_threshold;
      screening.mutation = options.mutation;
      for (std::size_t t : picks) {
        const auto& prev = screened.steps[t - 1];
        const ScreeningContext ctx =
            build_context(prev.solution, prev.lambda, screened.steps[t].lambda, z, y, options.center_variant);
        out.domination_violations +=
            validate_bound_domination(ctx, z, options.order, screening).violations.size();
        ++out.domination_contexts;
      }
    } catch (const std::exception& e) {
      out.error = e.what();
    }
    report.instances.push_back(std::move(out));
  }
  return report;
}

nlohmann::ordered_json to_json(const BatteryReport& report) {
  nlohmann::ordered_json j;
  j["kind"] = "battery";
  j["instances"] = report.instances.size();
  j["failures"] = report.failures();
  j["passed"] = report.passed();
  auto list = nlohmann::ordered_json::array();
  for (const auto& o : report.instances) {
    nlohmann::ordered_json e;
    e["seed"] = o.seed;
    e["n"] = o.n;
    e["d"] = o.d;
    e["sparsity"] = o.sparsity;
    e["steps"] = o.steps;
    e["passed"] = o.passed();
    e["lambda_max_ok"] = o.lambda_max_ok;
    e["path_equivalent"] = o.path_equivalent;
    e["max_coefficient_diff"] = o.max_coefficient_diff;
    e["worst_gap"] = o.worst_gap;
    e["safety_violations"] = o.safety_violations;
    e["domination_contexts"] = o.domination_contexts;
    e["domination_violations"] = o.domination_violations;
    e["screening_incidents"] = o.screening_incidents;
    if (!o.error.empty()) e["error"] = o.error;
    list.push_back(std::move(e));
  }
  j["results"] = std::move(list);
  return j;
}

}  // namespace interlasso
