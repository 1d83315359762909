#include "interlasso/cli.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "interlasso/core_data.hpp"
#include "interlasso/ib_baseline.hpp"
#include "interlasso/json_format.hpp"
#include "interlasso/path_runner.hpp"
#include "interlasso/validation.hpp"

namespace interlasso {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

using json = nlohmann::ordered_json;

constexpr const char* kPruningRateDefinition =
    "pruned_equiv = itemsets never evaluated by the screening traversal (members of subtrees cut by "
    "the node rule or lying under zero features); pruning_rate = pruned_equiv / D, D = number of "
    "itemsets of size <= order";

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << contents;
}

json itemset_json(const Itemset& s) {
  json arr = json::array();
  for (auto k : s) arr.push_back(k + 1);
  return arr;
}

/// Manifest embedded in every JSON output.
struct RunManifest {
  std::string command;
  json config = json::object();
  std::string fingerprint;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> outputs;
  std::string started_at;
  bool reproducible = false;

  json to_json() const {
    json j;
    j["tool"] = "interlasso";
    j["version"] = INTERLASSO_VERSION;
    j["command"] = command;
    j["config"] = config;
    if (!fingerprint.empty()) j["data_fingerprint"] = fingerprint;
    j["seed"] = seed ? json(*seed) : json(nullptr);
    j["outputs"] = outputs;
    if (!reproducible) {
      j["started_at"] = started_at;
      j["finished_at"] = utc_now();
    }
    return j;
  }
};

struct PathFlags {
  std::string input;
  int order = 3;
  std::optional<double> delta;
  double decay = 0.1;
  double min_ratio = 0.01;
  double tol = 1e-6;
  std::string screen = "sfp";
  std::string out;
  std::string metrics;
  unsigned threads = 0;
  bool standardize = false;
  bool binary_refinement = false;
  bool reproducible = false;
};

void add_path_flags(CLI::App& cmd, PathFlags& f, bool with_screen) {
  cmd.add_option("--input", f.input, "libsvm data file")->required();
  cmd.add_option("--order", f.order, "maximum interaction order r")->check(CLI::PositiveNumber);
  cmd.add_option("--delta", f.delta,
                 "binarize continuous covariates at +/-delta after standardization");
  cmd.add_option("--decay", f.decay, "lambda decay coefficient");
  cmd.add_option("--min-ratio", f.min_ratio, "stop once lambda/lambda_max falls below this");
  cmd.add_option("--tol", f.tol, "relative duality-gap tolerance");
  if (with_screen)
    cmd.add_option("--screen", f.screen, "screening mode")->check(CLI::IsMember({"sfp", "none"}));
  cmd.add_option("--out", f.out, "model JSON output");
  cmd.add_option("--metrics", f.metrics, "per-step metrics CSV output");
  cmd.add_option("--threads", f.threads, "worker threads for tree searches (0 = all cores)");
  cmd.add_flag("--standardize-response", f.standardize, "center and scale y before fitting");
  if (with_screen) cmd.add_flag("--binary-refinement", f.binary_refinement, "binary-covariate case selection");
  cmd.add_flag("--reproducible", f.reproducible, "omit timestamps and wall times from outputs");
}

Dataset load_input(const PathFlags& f, const std::string& bytes) {
  std::istringstream in(bytes);
  Dataset data;
  if (f.delta) {
    const RawLibsvm raw = read_libsvm(in);
    data = Dataset(binarize(raw.to_dense(), *f.delta), ResponseVector(raw.labels));
  } else {
    data = load_libsvm(in);
  }
  if (f.standardize) data.y = standardize_response(data.y.values());
  return data;
}

json config_json(const ProblemConfig& c, const PathFlags& f, bool ib) {
  json j;
  j["engine"] = ib ? "ib" : "sfp-path";
  j["input"] = f.input;
  j["order"] = c.order;
  j["delta"] = c.delta ? json(*c.delta) : json(nullptr);
  j["decay"] = c.lambda_decay;
  j["min_ratio"] = c.lambda_min_ratio;
  j["tol"] = c.tol;
  if (!ib) {
    j["screen"] = c.screen_mode == ScreenMode::kSfp ? "sfp" : "none";
    j["binary_refinement"] = c.binary_refinement;
  }
  j["standardize_response"] = f.standardize;
  return j;
}

json metrics_json(const StepMetrics& m, bool reproducible, bool ib) {
  json j;
  j["traversed_nodes"] = m.traversed_nodes;
  j["pruned_subtrees"] = m.pruned_subtrees;
  j["pruned_equiv"] = m.pruned_equiv;
  j["pruning_rate"] = m.pruning_rate();
  j["superset_size"] = m.superset_size;
  j["active_by_order"] = m.active_count_by_order;
  j["solver_sweeps"] = m.solver_sweeps;
  j["gap"] = m.gap;
  j["tree_searches"] = m.tree_searches;
  j["search_nodes"] = m.search_nodes;
  j["lasso_solves"] = m.lasso_solves;
  if (!ib) j["screening_incidents"] = m.screening_incidents;
  j["wall_ms"] = reproducible ? 0.0 : m.wall_ms;
  return j;
}

std::string model_json(const PathResult& path, const RunManifest& manifest, bool reproducible, bool ib) {
  json j;
  j["manifest"] = manifest.to_json();
  j["pruning_rate_definition"] = kPruningRateDefinition;
  j["lambda_max"] = path.lambda_max;
  j["lambda_max_itemset"] = itemset_json(path.lambda_max_itemset);
  json steps = json::array();
  for (const auto& s : path.steps) {
    json step;
    step["lambda"] = s.lambda;
    json active = json::array();
    for (const auto& [itemset, coef] : s.solution.coefficients)
      active.push_back({{"itemset", itemset_json(itemset)}, {"coef", coef}});
    step["active"] = std::move(active);
    step["metrics"] = metrics_json(s.metrics, reproducible, ib);
    steps.push_back(std::move(step));
  }
  j["steps"] = std::move(steps);
  return dump_json(j) + "\n";
}

std::string metrics_csv(const PathResult& path, int order, bool reproducible, bool ib) {
  const int columns = std::max(order, 3);
  std::string out = "step,lambda,lambda_ratio,traversed_nodes,pruned_equiv,superset_size";
  for (int k = 1; k <= columns; ++k) out += fmt::format(",active_{}", k);
  out += ",solver_sweeps,gap,wall_ms";
  if (ib) out += ",lasso_solves";
  out += "\r\n";
  for (std::size_t t = 0; t < path.steps.size(); ++t) {
    const auto& s = path.steps[t];
    const auto& m = s.metrics;
    out += fmt::format("{},{},{},{},{},{}", t, format_real(s.lambda), format_real(s.lambda / path.lambda_max),
                       m.traversed_nodes, m.pruned_equiv, m.superset_size);
    for (int k = 0; k < columns; ++k)
      out += fmt::format(",{}", static_cast<std::size_t>(k) < m.active_count_by_order.size()
                                    ? m.active_count_by_order[static_cast<std::size_t>(k)]
                                    : 0);
    out += fmt::format(",{},{},{}", m.solver_sweeps, format_real(m.gap),
                       format_real(reproducible ? 0.0 : m.wall_ms));
    if (ib) out += fmt::format(",{}", m.lasso_solves);
    out += "\r\n";
  }
  return out;
}

unsigned resolve_threads(unsigned requested) {
  if (requested) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

int run_path_command(const PathFlags& f, bool ib, std::ostream& out, std::ostream& err) {
  RunManifest manifest;
  manifest.command = ib ? "ib" : "path";
  manifest.started_at = utc_now();
  manifest.reproducible = f.reproducible;

  const std::string bytes = read_file(f.input);
  manifest.fingerprint = fmt::format("fnv1a64:{:016x}", fnv1a64(bytes));
  const Dataset data = load_input(f, bytes);

  ProblemConfig config;
  config.order = f.order;
  config.delta = f.delta;
  config.lambda_decay = f.decay;
  config.lambda_min_ratio = f.min_ratio;
  config.tol = f.tol;
  config.screen_mode = f.screen == "none" ? ScreenMode::kNone : ScreenMode::kSfp;
  config.binary_refinement = f.binary_refinement;
  config.threads = resolve_threads(f.threads);
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  manifest.config = config_json(config, f, ib);
  if (!f.out.empty()) manifest.outputs.push_back(f.out);
  if (!f.metrics.empty()) {
    manifest.outputs.push_back(f.metrics);
    manifest.outputs.push_back(f.metrics + ".manifest.json");
  }

  const PathResult path = ib ? ib_run_path(config, data.z, data.y.values())
                             : run_path(config, data.z, data.y.values());
  if (!f.out.empty()) write_file(f.out, model_json(path, manifest, f.reproducible, ib));
  if (!f.metrics.empty()) {
    // CSV has no room for the manifest; it goes next to the file.
    write_file(f.metrics, metrics_csv(path, config.order, f.reproducible, ib));
    write_file(f.metrics + ".manifest.json", dump_json(manifest.to_json()) + "\n");
  }

  const auto& last = path.steps.back();
  out << fmt::format("{}: n={} d={} order={} lambda_max={} steps={} final_active={} final_gap={:.3e}\n",
                     manifest.command, data.z.n(), data.z.d(), config.order, format_real(path.lambda_max),
                     path.steps.size(), last.solution.coefficients.size(), last.metrics.gap);
  return kExitOk;
}

struct SynthFlags {
  std::size_t n = 1000;
  std::size_t d = 1000;
  double sparsity = 0.95;
  double sigma = 0.1;
  std::uint64_t seed = 0;
  std::string out;
  bool reproducible = false;
};

int run_synth_command(const SynthFlags& f, std::ostream& out) {
  RunManifest manifest;
  manifest.command = "synth";
  manifest.started_at = utc_now();
  manifest.reproducible = f.reproducible;
  manifest.seed = f.seed;
  manifest.config = {{"n", f.n}, {"d", f.d}, {"sparsity", f.sparsity}, {"sigma", f.sigma},
                     {"rng", "xoshiro256** seeded by splitmix64"}};
  const Dataset data = synth_generate(f.n, f.d, f.sparsity, f.sigma, f.seed);
  std::ostringstream ss;
  write_libsvm(ss, data);
  const std::string bytes = ss.str();
  manifest.fingerprint = fmt::format("fnv1a64:{:016x}", fnv1a64(bytes));
  const std::string manifest_path = f.out + ".manifest.json";
  manifest.outputs = {f.out, manifest_path};
  write_file(f.out, bytes);
  write_file(manifest_path, dump_json(manifest.to_json()) + "\n");
  out << fmt::format("synth: wrote {} instances x {} covariates ({} nonzeros) to {}\n", data.z.n(), data.z.d(),
                     data.z.nnz(), f.out);
  return kExitOk;
}

struct ValidateFlags {
  std::size_t seeds = 100;
  std::uint64_t first_seed = 1;
  std::size_t max_d = 10;
  std::size_t max_n = 50;
  int order = 3;
  std::string report;
  std::string center = "dual";
  bool binary_refinement = false;
  std::string threshold = "normalized";
  bool mutate = false;
  unsigned threads = 0;
};

int run_validate_command(const ValidateFlags& f, std::ostream& out, std::ostream& err) {
  if (f.seeds == 0) {
    err << "warning: --seeds 0 runs no instances; nothing was validated\n";
    return kExitOk;
  }
  BatteryOptions options;
  options.seeds = f.seeds;
  options.first_seed = f.first_seed;
  options.max_d = f.max_d;
  options.max_n = f.max_n;
  options.order = f.order;
  options.center_variant = f.center == "ratio" ? CenterVariant::kRatioScaled : CenterVariant::kDualCentered;
  options.binary_refinement = f.binary_refinement;
  options.refinement_threshold =
      f.threshold == "printed" ? RefinementThreshold::kAsPrinted : RefinementThreshold::kNormalized;
  options.mutation = f.mutate ? BoundMutation::kDropNormTerm : BoundMutation::kNone;
  options.threads = resolve_threads(f.threads);
  const BatteryReport report = run_battery(options);
  if (!f.report.empty()) write_file(f.report, dump_json(to_json(report)) + "\n");

  std::size_t safety = 0, domination = 0, contexts = 0, equivalence = 0, lambda_max = 0, gaps = 0, errors = 0;
  for (const auto& o : report.instances) {
    safety += o.safety_violations;
    domination += o.domination_violations;
    contexts += o.domination_contexts;
    equivalence += !o.path_equivalent;
    lambda_max += !o.lambda_max_ok;
    gaps += !o.gaps_ok;
    errors += !o.error.empty();
    if (!o.error.empty()) err << fmt::format("seed {}: {}\n", o.seed, o.error);
  }
  out << fmt::format(
      "validate: {} instances, {} failed | safety violations {} | domination violations {} over {} contexts | "
      "path mismatches {} | lambda_max mismatches {} | gap failures {} | errors {}\n",
      report.instances.size(), report.failures(), safety, domination, contexts, equivalence, lambda_max, gaps,
      errors);
  return report.passed() ? kExitOk : kExitFailure;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse high-order interaction LASSO paths with safe feature pruning", "interlasso"};
  app.require_subcommand(1);
  app.set_version_flag("--version", INTERLASSO_VERSION);

  PathFlags path_flags;
  auto* path_cmd = app.add_subcommand("path", "regularization path with safe feature pruning");
  add_path_flags(*path_cmd, path_flags, true);

  PathFlags ib_flags;
  auto* ib_cmd = app.add_subcommand("ib", "regularization path with the itemset-boosting working-set baseline");
  add_path_flags(*ib_cmd, ib_flags, false);

  SynthFlags synth_flags;
  auto* synth_cmd = app.add_subcommand("synth", "generate a random binary instance (y is pure noise)");
  synth_cmd->add_option("--n", synth_flags.n, "instances");
  synth_cmd->add_option("--d", synth_flags.d, "covariates");
  synth_cmd->add_option("--sparsity", synth_flags.sparsity, "fraction of zeros in Z")->check(CLI::Range(0.0, 1.0));
  synth_cmd->add_option("--sigma", synth_flags.sigma, "noise standard deviation")->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--seed", synth_flags.seed, "random seed");
  synth_cmd->add_option("--out", synth_flags.out, "libsvm output file")->required();
  synth_cmd->add_flag("--reproducible", synth_flags.reproducible, "omit timestamps from the manifest");

  ValidateFlags validate_flags;
  auto* validate_cmd = app.add_subcommand(
      "validate",
      "randomized battery against the brute-force oracle. The oracle expands the full design, so it is "
      "capped at 200000 columns: keep --max-d and --order small");
  validate_cmd->add_option("--seeds", validate_flags.seeds, "number of random instances");
  validate_cmd->add_option("--first-seed", validate_flags.first_seed, "seed of the first instance");
  validate_cmd->add_option("--max-d", validate_flags.max_d, "largest covariate count")->check(CLI::Range(1, 64));
  validate_cmd->add_option("--max-n", validate_flags.max_n, "largest instance count")->check(CLI::PositiveNumber);
  validate_cmd->add_option("--order", validate_flags.order, "maximum interaction order")->check(CLI::PositiveNumber);
  validate_cmd->add_option("--report", validate_flags.report, "JSON report output");
  validate_cmd->add_option("--center-variant", validate_flags.center, "screening centre vector form")
      ->check(CLI::IsMember({"dual", "ratio"}));
  validate_cmd->add_flag("--binary-refinement", validate_flags.binary_refinement, "enable binary case selection");
  validate_cmd->add_option("--refinement-threshold", validate_flags.threshold, "binary case-selection threshold")
      ->check(CLI::IsMember({"normalized", "printed"}));
  validate_cmd->add_option("--threads", validate_flags.threads, "worker threads (0 = all cores)");
  validate_cmd->add_flag("--mutate-bound", validate_flags.mutate, "")->group("");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << INTERLASSO_VERSION << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const CLI::App* failing = &app;
    for (auto* sub : {path_cmd, ib_cmd, synth_cmd, validate_cmd})
      if (sub->parsed()) failing = sub;
    err << failing->help();
    return kExitUsage;
  }

  try {
    if (path_cmd->parsed()) return run_path_command(path_flags, false, out, err);
    if (ib_cmd->parsed()) return run_path_command(ib_flags, true, out, err);
    if (synth_cmd->parsed()) return run_synth_command(synth_flags, out);
    if (validate_cmd->parsed()) return run_validate_command(validate_flags, out, err);
  } catch (const PathError& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace interlasso
