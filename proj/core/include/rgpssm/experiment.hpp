#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rgpssm/filter.hpp"

namespace rgpssm::bench {

/// Flat key/value experiment configuration with stable defaults. Every run
/// echoes the fully resolved configuration into its report.
struct ExperimentConfig {
  std::string task = "wingrock";  ///< wingrock | lincycle | sysid | gprcheck
  uint64_t seed = 0;
  int budget = 20;
  double eps_tol = 1e-4;
  bool hypopt = true;
  double learning_rate = 0.01;
  double max_log_step = 0.1;
  double init_length_scale = 1.0;
  double init_signal_variance = 1.0;

  // wing rock
  double dt = 0.02;
  double duration_s = 50.0;
  double train_fraction = 0.75;

  // limit cycle
  int train_steps = 500;
  int forecast_steps = 500;

  // system identification
  std::string data_file;
  std::string dataset_name = "dataset";
  int input_col = 0;
  int output_col = 1;
  double sigma_f_var = 1e-4;
  double sigma_g_var = 1e-2;
  double x0_std = 1.0;

  std::string out_dir;  ///< empty: no files written

  static ExperimentConfig defaults_for(const std::string& task);
  static ExperimentConfig from_file(const std::string& path);

  /// Resolved key/value view, as echoed into reports.
  std::map<std::string, std::string> echo() const;
};

struct StepRecord {
  int step = 0;
  double t = 0.0;
  Eigen::VectorXd x_est;
  Eigen::VectorXd var_diag;
  Eigen::VectorXd x_true;      ///< empty when the truth is unknown
  Eigen::VectorXd fn_est;      ///< GP estimate of the unknown component (when tracked)
  Eigen::VectorXd fn_true;
  Eigen::VectorXd innovation;  ///< empty on measurement-less steps
  double gamma0 = 0.0;
  int n_u = 0;
  double loss = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd log_hyper;
};

struct ExperimentSummary {
  std::string task;
  uint64_t seed = 0;
  int train_records = 0;
  int forecast_records = 0;
  double filter_rmse = std::numeric_limits<double>::quiet_NaN();
  double filter_rmse_first_quarter = std::numeric_limits<double>::quiet_NaN();
  double filter_rmse_last_quarter = std::numeric_limits<double>::quiet_NaN();
  double forecast_rmse = std::numeric_limits<double>::quiet_NaN();
  double forecast_rmse_original_units = std::numeric_limits<double>::quiet_NaN();
  double baseline_forecast_rmse = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd final_log_hyper;
  double step_ms_mean = 0.0;
  double step_ms_median = 0.0;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<StepRecord> records;
  std::vector<StepRecord> forecast_records;
  ExperimentSummary summary;

  std::string summary_json() const;  ///< summary + config echo
  void write(const std::string& dir) const;  ///< report.json and trace.csv
};

/// Run a configured experiment: online filtering over the training stream,
/// then the task's prediction evaluation. The limit-cycle and identification
/// tasks roll the model forward over a held-out horizon; the wing-rock task
/// keeps filtering and scores the one-step prediction of the unknown
/// component over the final quarter.
ExperimentReport run_experiment(const ExperimentConfig& config);

/// One StepReport as a JSON line (filter trace streaming format).
std::string step_report_to_json_line(const StepReport& report, int step_index);

}  // namespace rgpssm::bench
