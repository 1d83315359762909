#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "interlasso/cli.hpp"

using namespace interlasso;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch() {
  const fs::path dir = fs::temp_directory_path() / "interlasso_cli_test";
  fs::create_directories(dir);
  return dir;
}

std::map<std::string, double> coefficients(const nlohmann::json& step) {
  std::map<std::string, double> m;
  for (const auto& a : step["active"]) m[a["itemset"].dump()] = a["coef"].get<double>();
  return m;
}

double max_diff(const nlohmann::json& a, const nlohmann::json& b) {
  double worst = 0.0;
  REQUIRE(a["steps"].size() == b["steps"].size());
  for (std::size_t t = 0; t < a["steps"].size(); ++t) {
    auto ca = coefficients(a["steps"][t]);
    auto cb = coefficients(b["steps"][t]);
    for (auto& [k, v] : ca) worst = std::max(worst, std::abs(v - (cb.count(k) ? cb[k] : 0.0)));
    for (auto& [k, v] : cb) worst = std::max(worst, std::abs(v - (ca.count(k) ? ca[k] : 0.0)));
  }
  return worst;
}

}  // namespace

TEST_CASE("usage errors exit 2, help exits 0") {
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"bogus"}).code == kExitUsage);
  const Run missing = run({"path", "--order", "2"});
  CHECK(missing.code == kExitUsage);
  CHECK(missing.err.find("--input") != std::string::npos);
  CHECK(run({"path", "--input", "x", "--screen", "maybe"}).code == kExitUsage);
  CHECK(run({"--help"}).code == kExitOk);
  CHECK(run({"path", "--help"}).code == kExitOk);
  CHECK(run({"path", "--input", (scratch() / "does_not_exist").string()}).code == kExitFailure);
}

TEST_CASE("synth is byte-reproducible") {
  const fs::path dir = scratch();
  const std::vector<std::string> base{"synth", "--n", "50", "--d", "30", "--sparsity", "0.9", "--seed", "4",
                                      "--reproducible", "--out"};
  auto a = base, b = base;
  a.push_back((dir / "a.txt").string());
  b.push_back((dir / "b.txt").string());
  REQUIRE(run(a).code == kExitOk);
  REQUIRE(run(b).code == kExitOk);
  CHECK(slurp(dir / "a.txt") == slurp(dir / "b.txt"));
  const auto manifest = nlohmann::json::parse(slurp(dir / "a.txt.manifest.json"));
  CHECK(manifest["seed"] == 4);
  CHECK_FALSE(manifest.contains("started_at"));

  REQUIRE(run({"synth", "--n", "5", "--d", "3", "--sparsity", "1.0", "--out", (dir / "empty.txt").string()}).code ==
          kExitOk);
  std::istringstream lines(slurp(dir / "empty.txt"));
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    ++count;
    CHECK(line.find(':') == std::string::npos);
    CHECK_FALSE(line.empty());
  }
  CHECK(count == 5);
}

TEST_CASE("path: sfp and none agree, metrics CSV, ib agrees") {
  const fs::path dir = scratch();
  REQUIRE(run({"synth", "--n", "60", "--d", "12", "--sparsity", "0.8", "--seed", "2", "--out",
               (dir / "d.txt").string()})
              .code == kExitOk);
  const std::string input = (dir / "d.txt").string();
  const Run sfp = run({"path", "--input", input, "--order", "3", "--min-ratio", "0.1", "--out",
                       (dir / "sfp.json").string(), "--metrics", (dir / "sfp.csv").string()});
  REQUIRE(sfp.code == kExitOk);
  REQUIRE(run({"path", "--input", input, "--order", "3", "--min-ratio", "0.1", "--screen", "none", "--out",
               (dir / "none.json").string()})
              .code == kExitOk);
  REQUIRE(run({"ib", "--input", input, "--order", "3", "--min-ratio", "0.1", "--out", (dir / "ib.json").string(),
               "--metrics", (dir / "ib.csv").string()})
              .code == kExitOk);
  const auto a = nlohmann::json::parse(slurp(dir / "sfp.json"));
  const auto b = nlohmann::json::parse(slurp(dir / "none.json"));
  const auto c = nlohmann::json::parse(slurp(dir / "ib.json"));
  CHECK(max_diff(a, b) <= 1e-6);
  CHECK(max_diff(a, c) <= 1e-6);
  CHECK(a["manifest"]["data_fingerprint"] == b["manifest"]["data_fingerprint"]);
  CHECK(a["steps"][0]["active"].empty());

  std::istringstream csv(slurp(dir / "sfp.csv"));
  std::string header;
  std::getline(csv, header);
  CHECK(header.rfind("step,lambda,lambda_ratio,traversed_nodes,pruned_equiv,superset_size,active_1,active_2,active_3,"
                     "solver_sweeps,gap,wall_ms",
                     0) == 0);
  double previous = std::numeric_limits<double>::infinity();
  std::string row;
  std::size_t rows = 0;
  while (std::getline(csv, row)) {
    std::istringstream fields(row);
    std::string step, lambda;
    std::getline(fields, step, ',');
    std::getline(fields, lambda, ',');
    CHECK(std::stod(lambda) <= previous);
    previous = std::stod(lambda);
    ++rows;
  }
  CHECK(rows == a["steps"].size());
  std::istringstream ib_csv(slurp(dir / "ib.csv"));
  std::getline(ib_csv, header);
  CHECK(header.find("lasso_solves") != std::string::npos);
}

TEST_CASE("path output is byte-identical across reruns and thread counts") {
  const fs::path dir = scratch();
  REQUIRE(run({"synth", "--n", "80", "--d", "20", "--seed", "9", "--sparsity", "0.8", "--out",
               (dir / "t.txt").string()})
              .code == kExitOk);
  // Same output paths every run: the manifest records them.
  auto path_run = [&](const std::string& threads) {
    REQUIRE(run({"path", "--input", (dir / "t.txt").string(), "--min-ratio", "0.2", "--threads", threads,
                 "--reproducible", "--out", (dir / "t.json").string(), "--metrics", (dir / "t.csv").string()})
                .code == kExitOk);
    return std::pair{slurp(dir / "t.json"), slurp(dir / "t.csv")};
  };
  const auto one = path_run("1");
  const auto again = path_run("1");
  const auto four = path_run("4");
  CHECK(one.first == again.first);
  CHECK(one.second == again.second);
  CHECK(one.first == four.first);
  CHECK(one.second == four.second);
}

TEST_CASE("binarized continuous input") {
  const fs::path dir = scratch();
  {
    std::ofstream f(dir / "cont.txt");
    f << "1.5 1:0.1 2:0.9 3:0.5\n-0.5 1:0.8 2:0.2\n0.3 2:0.4 3:1\n2 1:0.9 3:0.05\n-1 1:0.3 2:0.7 3:0.6\n";
  }
  const Run r = run({"path", "--input", (dir / "cont.txt").string(), "--delta", "0.5", "--order", "2",
                     "--standardize-response", "--min-ratio", "0.3", "--out", (dir / "cont.json").string()});
  CHECK(r.code == kExitOk);
  const auto j = nlohmann::json::parse(slurp(dir / "cont.json"));
  CHECK(j["manifest"]["config"]["delta"] == 0.5);
}

TEST_CASE("validate exit codes") {
  const Run none = run({"validate", "--seeds", "0"});
  CHECK(none.code == kExitOk);
  CHECK(none.err.find("warning") != std::string::npos);
  CHECK(run({"validate", "--seeds", "4", "--max-d", "7"}).code == kExitOk);
  CHECK(run({"validate", "--seeds", "10", "--mutate-bound"}).code == kExitFailure);
  const fs::path report = scratch() / "report.json";
  CHECK(run({"validate", "--seeds", "2", "--report", report.string()}).code == kExitOk);
  CHECK(nlohmann::json::parse(slurp(report))["passed"] == true);
}
