#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rgpssm/acceptance.hpp"
#include "rgpssm/experiment.hpp"

namespace {

int run_and_report(rgpssm::bench::ExperimentConfig cfg, const std::string& out_dir) {
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  const auto report = rgpssm::bench::run_experiment(cfg);
  std::cout << report.summary_json() << "\n";
  if (!cfg.out_dir.empty())
    std::cout << "wrote " << cfg.out_dir << "/report.json and " << cfg.out_dir
              << "/trace.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recursive Gaussian-process state-space model benchmark runner"};
  app.require_subcommand(1);

  // run <config-file>
  std::string config_path;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment from a key=value config file");
  run_cmd->add_option("config", config_path, "Path to the config file")->required();

  // wingrock
  auto* wr_cmd = app.add_subcommand("wingrock", "Wing-rock dynamics learning task");
  bool wr_no_hypopt = false;
  uint64_t wr_seed = 0;
  std::string wr_out;
  wr_cmd->add_flag("--no-hypopt", wr_no_hypopt, "Disable online hyperparameter adaptation");
  wr_cmd->add_option("--seed", wr_seed, "Simulation seed");
  wr_cmd->add_option("--out", wr_out, "Output directory for report.json / trace.csv");

  // sysid
  auto* si_cmd = app.add_subcommand("sysid", "Latent system identification on a data file");
  std::string si_data, si_name = "dataset", si_out;
  uint64_t si_seed = 0;
  int si_input_col = 0, si_output_col = 1, si_budget = 20;
  si_cmd->add_option("--data", si_data, "Numeric data file (whitespace or comma delimited)")
      ->required();
  si_cmd->add_option("--dataset-name", si_name, "Dataset label for the report")->required();
  si_cmd->add_option("--seed", si_seed, "Seed");
  si_cmd->add_option("--out", si_out, "Output directory");
  si_cmd->add_option("--input-col", si_input_col, "Input column index");
  si_cmd->add_option("--output-col", si_output_col, "Output column index");
  si_cmd->add_option("--budget", si_budget, "Inducing-point budget");

  // verify
  auto* ver_cmd = app.add_subcommand("verify", "Run the full acceptance suite");
  std::string ver_daisy;
  uint64_t ver_seed = 2024;
  ver_cmd->add_option("--daisy-dir", ver_daisy,
                      "Directory with dryer.dat / ballbeam.dat for the benchmark check");
  ver_cmd->add_option("--seed", ver_seed, "Suite seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      return run_and_report(rgpssm::bench::ExperimentConfig::from_file(config_path), "");
    }
    if (wr_cmd->parsed()) {
      auto cfg = rgpssm::bench::ExperimentConfig::defaults_for("wingrock");
      cfg.hypopt = !wr_no_hypopt;
      cfg.seed = wr_seed;
      return run_and_report(cfg, wr_out);
    }
    if (si_cmd->parsed()) {
      auto cfg = rgpssm::bench::ExperimentConfig::defaults_for("sysid");
      cfg.data_file = si_data;
      cfg.dataset_name = si_name;
      cfg.seed = si_seed;
      cfg.input_col = si_input_col;
      cfg.output_col = si_output_col;
      cfg.budget = si_budget;
      return run_and_report(cfg, si_out);
    }
    if (ver_cmd->parsed()) {
      rgpssm::bench::AcceptanceOptions opts;
      opts.daisy_dir = ver_daisy;
      opts.seed = ver_seed;
      const auto results = rgpssm::bench::run_acceptance(opts);
      std::cout << rgpssm::bench::format_results(results);
      return rgpssm::bench::all_passed(results) ? 0 : 2;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
