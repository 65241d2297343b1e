#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>
#include <unistd.h>

#include "cli_internal.hpp"
#include "qsdsim/error.hpp"
#include "qsdsim/kernels.hpp"

namespace qsdsim::cli {

namespace fs = std::filesystem;

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Json jnum(double v) {
  if (std::isfinite(v)) return v;
  return num(v);
}

void Results::estimate(const std::string& estimand, double value, double stderr_, std::size_t n, std::uint64_t seed,
                       const std::string& model, const std::string& penalty, Json params) {
  estimates.push_back({{"estimand", estimand},
                       {"value", jnum(value)},
                       {"stderr", jnum(stderr_)},
                       {"N", n},
                       {"seed", seed},
                       {"model", model},
                       {"penalty", penalty},
                       {"params", std::move(params)}});
}

void Results::check(const std::string& name, bool pass, const std::string& detail) {
  checks.push_back({{"name", name}, {"pass", pass}, {"detail", detail}});
}

Json list_json() {
  Json out = Json::array();
  for (const auto& e : experiments())
    out.push_back({{"name", e.name},
                   {"anchor", e.anchor},
                   {"description", e.description},
                   {"budget_seconds", e.budget_seconds},
                   {"defaults", e.defaults}});
  return out;
}

std::string list_text() {
  std::ostringstream os;
  for (const auto& e : experiments()) os << e.name << "  [" << e.anchor << "]\n    " << e.description << "\n";
  return os.str();
}

namespace {

const std::set<std::string> kTopKeys{"experiment", "custom", "seed", "workers", "arithmetic", "params"};

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::invalid_config, what); }

const ExperimentInfo* info_of(const std::string& name) {
  for (const auto& e : experiments())
    if (e.name == name) return &e;
  return nullptr;
}

bool is_count(const Json& v) { return v.is_number_integer() && v.get<std::int64_t>() >= 0; }

bool same_kind(const Json& def, const Json& v) {
  if (def.is_number_integer()) return is_count(v);
  if (def.is_number()) return v.is_number();
  if (def.is_string()) return v.is_string();
  if (def.is_array()) {
    if (!v.is_array() || v.empty()) return false;
    for (const auto& x : v)
      if (!same_kind(def.at(0), x)) return false;
    return true;
  }
  return def.type() == v.type();
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string status_of(const Results& r) {
  if (!r.converged) return "not_converged";
  for (const auto& c : r.checks)
    if (!c.at("pass").get<bool>()) return "checks_failed";
  return "ok";
}

std::string summary(const Json& config, const Results& r) {
  std::ostringstream os;
  os << "experiment: " << config.value("experiment", std::string("custom")) << "\n";
  os << "seed: " << config.at("seed").get<std::uint64_t>() << "\n";
  os << "status: " << status_of(r) << "\n";
  for (const auto& e : r.estimates) {
    os << "estimate " << e.at("estimand").get<std::string>() << " = " << e.at("value").dump();
    if (e.at("stderr") != 0) os << " +- " << e.at("stderr").dump();
    if (!e.at("params").empty()) os << "  " << e.at("params").dump();
    os << "\n";
  }
  for (const auto& c : r.checks)
    os << (c.at("pass").get<bool>() ? "PASS " : "FAIL ") << c.at("name").get<std::string>() << "  "
       << c.at("detail").get<std::string>() << "\n";
  for (const auto& n : r.notes) os << "note: " << n << "\n";
  return os.str();
}

Json report(const Json& config, const Results& r) {
  return {{"experiment", config.value("experiment", std::string("custom"))},
          {"status", status_of(r)},
          {"converged", r.converged},
          {"estimates", r.estimates},
          {"checks", r.checks},
          {"notes", r.notes}};
}

Json manifest(const Json& config, const Results& r) {
  Json schemas = Json::object();
  for (const auto& t : r.tables) schemas[t.file] = {{"version", t.version}, {"columns", t.columns}};
  return {{"schema_version", 1},
          {"tool", "qsdsim"},
          {"version", kVersion},
          {"experiment", config.value("experiment", std::string("custom"))},
          {"config", config},
          {"config_hash", hex(fnv1a(config.dump()))},
          {"seed", config.at("seed")},
          {"workers", config.at("workers")},
          {"kernel", std::string(kernels::to_string(kernels::active_isa()))},
          {"csv_schemas", schemas}};
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
  if (!f) throw std::runtime_error("cannot write " + p.string());
}

std::string csv(const Table& t) {
  std::ostringstream os;
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
    os << "\n";
  }
  return os.str();
}

// Everything goes to a sibling temp dir first, then one rename.
void write_outputs(const fs::path& out, const Json& config, const Results& r) {
  if (fs::exists(out)) {
    if (!fs::is_directory(out) || (!fs::is_empty(out) && !fs::exists(out / "manifest.json")))
      throw std::runtime_error("output path " + out.string() + " exists and is not a previous run directory");
  }
  const fs::path tmp = out.string() + ".tmp-" + std::to_string(::getpid());
  fs::remove_all(tmp);
  try {
    fs::create_directories(tmp / "results");
    write_file(tmp / "manifest.json", manifest(config, r).dump(2) + "\n");
    write_file(tmp / "report.json", report(config, r).dump(2) + "\n");
    write_file(tmp / "summary.txt", summary(config, r));
    for (const auto& t : r.tables) write_file(tmp / "results" / t.file, csv(t));
    if (fs::exists(out)) fs::remove_all(out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    fs::rename(tmp, out);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    throw;
  }
}

}  // namespace

Json validate_config(const Json& config) {
  if (!config.is_object()) invalid("config must be a JSON object");
  for (const auto& [k, v] : config.items())
    if (!kTopKeys.count(k)) invalid("unknown field '" + k + "'");
  const bool has_exp = config.contains("experiment"), has_custom = config.contains("custom");
  if (has_exp == has_custom) invalid("give exactly one of 'experiment' and 'custom'");
  if (!config.contains("seed")) invalid("seed is required (config field or --seed)");
  if (!is_count(config.at("seed"))) invalid("seed must be a nonnegative integer");
  Json out = config;
  if (!out.contains("workers")) out["workers"] = std::max(1u, std::thread::hardware_concurrency());
  if (!is_count(out.at("workers")) || out.at("workers").get<std::size_t>() == 0)
    invalid("workers must be a positive integer");
  if (has_custom) {
    validate_custom(out.at("custom"));
    if (out.contains("params")) invalid("params only apply to named experiments");
    if (!out.contains("arithmetic")) out["arithmetic"] = "float";
  } else {
    if (!out.at("experiment").is_string()) invalid("experiment must be a string");
    const auto* info = info_of(out.at("experiment").get<std::string>());
    if (!info) invalid("unknown experiment '" + out.at("experiment").get<std::string>() + "'");
    Json params = info->defaults;
    if (out.contains("params")) {
      if (!out.at("params").is_object()) invalid("params must be an object");
      for (const auto& [k, v] : out.at("params").items()) {
        if (!params.contains(k)) invalid("unknown parameter '" + k + "' for " + info->name);
        if (!same_kind(params.at(k), v)) invalid("parameter '" + k + "' has the wrong type");
        params[k] = v;
      }
    }
    out["params"] = params;
    if (!out.contains("arithmetic")) out["arithmetic"] = default_arithmetic(info->name);
    if (info->name == "counterexample-rational" && out.at("arithmetic") != "rational")
      invalid("counterexample-rational needs arithmetic = rational");
  }
  if (!out.at("arithmetic").is_string() || (out.at("arithmetic") != "float" && out.at("arithmetic") != "rational"))
    invalid("arithmetic must be 'float' or 'rational'");
  return out;
}

Results execute(const Json& config) {
  Context ctx;
  ctx.seed = config.at("seed").get<std::uint64_t>();
  ctx.workers = config.at("workers").get<std::size_t>();
  ctx.arithmetic = config.at("arithmetic").get<std::string>();
  if (config.contains("custom")) return run_custom(ctx, config.at("custom"));
  ctx.params = config.at("params");
  return find_runner(config.at("experiment").get<std::string>())(ctx);
}

int run(const RunRequest& req, std::ostream& out, std::ostream& err) {
  Json config = Json::object();
  Json resolved;
  try {
    if (req.config_path) {
      std::ifstream f(*req.config_path);
      if (!f) {
        err << "error: cannot read config " << *req.config_path << "\n";
        return kInvalidConfig;
      }
      try {
        config = Json::parse(f);
      } catch (const Json::parse_error& e) {
        err << "error: invalid JSON in " << *req.config_path << ": " << e.what() << "\n";
        return kInvalidConfig;
      }
    }
    if (req.experiment) {
      if (config.contains("experiment") && config.at("experiment") != *req.experiment)
        invalid("--experiment disagrees with the config file");
      config["experiment"] = *req.experiment;
    }
    if (req.seed) config["seed"] = *req.seed;
    if (req.workers) config["workers"] = *req.workers;
    resolved = validate_config(config);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kInvalidConfig;
  }

  Results r;
  try {
    r = execute(resolved);
    if (req.out) write_outputs(*req.out, resolved, r);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::invalid_config ? kInvalidConfig : kFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  if (req.json)
    out << report(resolved, r).dump(2) << "\n";
  else
    out << summary(resolved, r);
  return r.converged ? kOk : kNotConverged;
}

}  // namespace qsdsim::cli
