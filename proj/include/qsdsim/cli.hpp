#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace qsdsim::cli {

using Json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kFailure = 1, kNotConverged = 2, kInvalidConfig = 3 };

struct ExperimentInfo {
  std::string name;
  /// Short topic tag, e.g. "counter-example / non-Lipschitz penalty".
  std::string anchor;
  std::string description;
  double budget_seconds = 0.0;
  /// Overridable parameters with their defaults.
  Json defaults;
};

const std::vector<ExperimentInfo>& experiments();

Json list_json();
std::string list_text();

/// One CSV artifact. Cells are preformatted strings; numbers go through num().
struct Table {
  std::string file;
  int version = 1;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }
};

/// "%.17g"; "inf", "-inf", "nan" for non-finite values.
std::string num(double v);

/// JSON-safe number: non-finite values become strings.
Json jnum(double v);

/// Everything an experiment produces.
struct Results {
  std::vector<Table> tables;
  /// Entries {estimand, value, stderr, N, seed, model, penalty, params}.
  Json estimates = Json::array();
  /// Entries {name, pass, detail}.
  Json checks = Json::array();
  std::vector<std::string> notes;
  bool converged = true;

  void estimate(const std::string& estimand, double value, double stderr_, std::size_t n, std::uint64_t seed,
                const std::string& model, const std::string& penalty, Json params = Json::object());
  void check(const std::string& name, bool pass, const std::string& detail);
};

struct Context {
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  /// "float" or "rational".
  std::string arithmetic = "float";
  /// Defaults merged with the config's overrides.
  Json params;
};

/// Validates a config document and fills defaults. Throws Error(invalid_config).
Json validate_config(const Json& config);

struct RunRequest {
  std::optional<std::string> experiment;
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::string> out;
  bool json = false;
};

/// Runs one experiment and writes manifest.json, report.json, summary.txt and
/// results/*.csv under the output directory. Returns an ExitCode; on errors
/// nothing is left behind.
int run(const RunRequest& request, std::ostream& out, std::ostream& err);

/// Executes a validated config without touching the disk.
Results execute(const Json& config);

}  // namespace qsdsim::cli
