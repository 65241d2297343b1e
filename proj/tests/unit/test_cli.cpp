#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <unistd.h>

#include "doctest.h"
#include "qsdsim/cli.hpp"
#include "qsdsim/error.hpp"

using namespace qsdsim;
using namespace qsdsim::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("qsdsim_cli_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int run_with(RunRequest req, std::string* out_text = nullptr) {
  std::ostringstream out, err;
  const int code = run(req, out, err);
  if (out_text) *out_text = out.str() + err.str();
  return code;
}

}  // namespace

TEST_CASE("list has eleven experiments with anchors and defaults") {
  const auto j = list_json();
  REQUIRE(j.size() == 11);
  std::set<std::string> names;
  for (const auto& e : j) {
    CHECK_FALSE(e.at("anchor").get<std::string>().empty());
    CHECK(e.at("defaults").is_object());
    CHECK(e.at("budget_seconds").get<double>() > 0.0);
    names.insert(e.at("name").get<std::string>());
  }
  CHECK(names.size() == 11);
  CHECK(Json::parse(j.dump()) == j);
}

TEST_CASE("config validation") {
  const auto code_of = [](const Json& c) {
    try {
      validate_config(c);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::invalid_parameter;  // sentinel: accepted
  };
  const auto ok = ErrorCode::invalid_parameter;
  CHECK(code_of({{"experiment", "constants-audit"}, {"seed", 1}}) == ok);
  CHECK(code_of({{"experiment", "constants-audit"}}) == ErrorCode::invalid_config);
  CHECK(code_of({{"experiment", "constants-audit"}, {"seed", -1}}) == ErrorCode::invalid_config);
  CHECK(code_of({{"experiment", "nope"}, {"seed", 1}}) == ErrorCode::invalid_config);
  CHECK(code_of({{"experiment", "constants-audit"}, {"seed", 1}, {"extra", 0}}) == ErrorCode::invalid_config);
  CHECK(code_of({{"experiment", "constants-audit"}, {"seed", 1}, {"params", {{"dbar", "x"}}}}) ==
        ErrorCode::invalid_config);
  CHECK(code_of({{"experiment", "constants-audit"}, {"seed", 1}, {"params", {{"nope", 1}}}}) ==
        ErrorCode::invalid_config);
  CHECK(code_of({{"experiment", "counterexample-rational"}, {"seed", 1}, {"arithmetic", "float"}}) ==
        ErrorCode::invalid_config);
  CHECK(code_of({{"experiment", "constants-audit"}, {"seed", 1}, {"arithmetic", "quad"}}) ==
        ErrorCode::invalid_config);
  CHECK(code_of({{"custom", {{"model", "bernoulli"}, {"estimator", "survival"}}}, {"seed", 1}}) == ok);
  CHECK(code_of({{"custom", {{"model", "bernoulli"}, {"estimator", "magic"}}}, {"seed", 1}}) ==
        ErrorCode::invalid_config);
  CHECK(code_of({{"custom", {{"model", "nope"}, {"estimator", "survival"}}}, {"seed", 1}}) ==
        ErrorCode::invalid_config);
  CHECK(code_of({{"custom", {{"model", "bernoulli"}, {"estimator", "survival"}}},
                 {"experiment", "constants-audit"},
                 {"seed", 1}}) == ErrorCode::invalid_config);

  const auto resolved = validate_config({{"experiment", "constants-audit"}, {"seed", 3}, {"params", {{"dbar", 2}}}});
  CHECK(resolved.at("params").at("dbar") == 2);
  CHECK(resolved.at("params").at("n_exact") == 12);
  CHECK(resolved.at("arithmetic") == "float");
  CHECK(validate_config({{"experiment", "counterexample-abs"}, {"seed", 3}}).at("arithmetic") == "rational");
}

TEST_CASE("exit codes") {
  const auto bad = scratch("bad.json");
  std::ofstream(bad) << "{ not json";
  RunRequest r1;
  r1.config_path = bad.string();
  r1.seed = 1;
  CHECK(run_with(r1) == kInvalidConfig);

  RunRequest r2;
  r2.experiment = "constants-audit";
  CHECK(run_with(r2) == kInvalidConfig);  // no seed

  RunRequest r3;
  r3.experiment = "constants-audit";
  r3.seed = 1;
  std::string text;
  CHECK(run_with(r3, &text) == kOk);
  CHECK(text.find("status: ok") != std::string::npos);

  // A fixed point that cannot converge in two iterations.
  const auto cfg = scratch("nc.json");
  std::ofstream(cfg) << R"({"custom": {"model": "bernoulli-constant", "estimator": "qsd", "N": 500,
                         "max_iter": 2, "tol": 1e-12}, "seed": 2})";
  RunRequest r4;
  r4.config_path = cfg.string();
  CHECK(run_with(r4) == kNotConverged);
  fs::remove(bad);
  fs::remove(cfg);
}

TEST_CASE("run writes the output directory and is reproducible") {
  const auto a = scratch("out_a"), b = scratch("out_b");
  RunRequest req;
  req.experiment = "counterexample-abs";
  req.seed = 1;
  req.out = a.string();
  REQUIRE(run_with(req) == kOk);
  for (const char* f : {"manifest.json", "report.json", "summary.txt", "results/identities.csv", "results/witness.csv"})
    CHECK(fs::exists(a / f));
  CHECK_FALSE(fs::exists(a.string() + ".tmp-" + std::to_string(::getpid())));
  req.out = b.string();
  REQUIRE(run_with(req) == kOk);
  for (const char* f : {"manifest.json", "report.json", "summary.txt", "results/identities.csv", "results/witness.csv"})
    CHECK(slurp(a / f) == slurp(b / f));

  const auto manifest = Json::parse(slurp(a / "manifest.json"));
  CHECK(manifest.at("seed") == 1);
  CHECK(manifest.at("csv_schemas").contains("witness.csv"));
  const auto report = Json::parse(slurp(a / "report.json"));
  CHECK(report.at("status") == "ok");
  for (const auto& c : report.at("checks")) CHECK(c.at("pass").get<bool>());

  // Rerunning into a previous run directory replaces it.
  REQUIRE(run_with(req) == kOk);
  // A directory that is not a run directory is left alone.
  const auto foreign = scratch("foreign");
  fs::create_directories(foreign);
  std::ofstream(foreign / "keep.txt") << "x";
  req.out = foreign.string();
  CHECK(run_with(req) == kFailure);
  CHECK(fs::exists(foreign / "keep.txt"));
  CHECK_FALSE(fs::exists(foreign / "manifest.json"));
  fs::remove_all(a);
  fs::remove_all(b);
  fs::remove_all(foreign);
}

TEST_CASE("num formats round-trip doubles") {
  CHECK(num(0.1) == "0.10000000000000001");
  CHECK(std::stod(num(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK(num(1.0 / 0.0) == "inf");
  CHECK(jnum(-1.0 / 0.0) == "-inf");
}
