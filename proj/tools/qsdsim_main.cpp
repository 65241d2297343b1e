#include <iostream>

#include "CLI11.hpp"
#include "qsdsim/cli.hpp"

int main(int argc, char** argv) {
  namespace qc = qsdsim::cli;
  CLI::App app{"Quasi-stationary distributions of penalized Markov processes"};
  app.set_version_flag("--version", qc::kVersion);
  app.require_subcommand(1);

  qc::RunRequest req;
  std::string experiment, config, out;
  std::uint64_t seed = 0;
  std::size_t workers = 0;
  auto* run = app.add_subcommand("run", "run one experiment or a custom config");
  auto* exp_opt = run->add_option("--experiment", experiment, "experiment name (see `qsdsim list`)");
  auto* cfg_opt = run->add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
  auto* seed_opt = run->add_option("--seed", seed, "master seed (required here or in the config)");
  auto* workers_opt = run->add_option("--workers", workers, "worker threads (default: all cores)")
                          ->check(CLI::PositiveNumber);
  auto* out_opt = run->add_option("--out", out, "output directory");
  run->add_flag("--json", req.json, "print the report as JSON");

  bool list_as_json = false;
  auto* list = app.add_subcommand("list", "list the experiments");
  list->add_flag("--json", list_as_json, "JSON output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : qc::kInvalidConfig;
  }

  if (*list) {
    if (list_as_json)
      std::cout << qc::list_json().dump(2) << "\n";
    else
      std::cout << qc::list_text();
    return qc::kOk;
  }
  if (!*exp_opt && !*cfg_opt) {
    std::cerr << "error: run needs --experiment or --config\n";
    return qc::kInvalidConfig;
  }
  if (*exp_opt) req.experiment = experiment;
  if (*cfg_opt) req.config_path = config;
  if (*seed_opt) req.seed = seed;
  if (*workers_opt) req.workers = workers;
  if (*out_opt) req.out = out;
  return qc::run(req, std::cout, std::cerr);
}
