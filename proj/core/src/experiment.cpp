#include "rgpssm/experiment.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rgpssm/dataset.hpp"
#include "rgpssm/oracle.hpp"
#include "rgpssm/systems.hpp"

namespace rgpssm::bench {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

json vec_json(const VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

StepRecord make_record(int idx, double t, const AugmentedBelief& b, const StepReport& rep) {
  StepRecord r;
  r.step = idx;
  r.t = t;
  r.x_est = b.state_mean();
  r.var_diag = b.state_cov().diagonal();
  r.innovation = rep.innovation;
  r.gamma0 = rep.gamma0;
  r.n_u = rep.num_inducing;
  r.loss = rep.hyper_loss_value;
  r.log_hyper = rep.hyperparams;
  return r;
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults_for(const std::string& task) {
  ExperimentConfig c;
  c.task = task;
  if (task == "wingrock") {
    c.init_length_scale = 5.0;
    c.init_signal_variance = 10.0;
    c.hypopt = true;
  } else if (task == "lincycle") {
    c.init_length_scale = 1.0;
    c.init_signal_variance = 4.0;
    c.hypopt = false;
  } else if (task == "sysid") {
    c.init_length_scale = 1.0;
    c.init_signal_variance = 1.0;
    c.hypopt = true;
  } else if (task == "gprcheck") {
    c.init_length_scale = 1.0;
    c.init_signal_variance = 1.0;
    c.hypopt = false;
    c.budget = 64;
  } else {
    throw std::invalid_argument("unknown task: " + task);
  }
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos)
        throw std::runtime_error("config: expected 'key = value' at line " +
                                 std::to_string(line_no));
      continue;
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }

  auto it = kv.find("task");
  ExperimentConfig c = defaults_for(it == kv.end() ? "wingrock" : it->second);
  auto get = [&](const std::string& key, auto& field) {
    auto f = kv.find(key);
    if (f == kv.end()) return;
    std::istringstream ss(f->second);
    ss >> field;
    if (ss.fail()) throw std::runtime_error("config: bad value for " + key);
  };
  auto get_bool = [&](const std::string& key, bool& field) {
    auto f = kv.find(key);
    if (f == kv.end()) return;
    field = (f->second == "1" || f->second == "true" || f->second == "on" ||
             f->second == "yes");
  };
  get("seed", c.seed);
  get("budget", c.budget);
  get("eps_tol", c.eps_tol);
  get_bool("hypopt", c.hypopt);
  get("learning_rate", c.learning_rate);
  get("max_log_step", c.max_log_step);
  get("init_length_scale", c.init_length_scale);
  get("init_signal_variance", c.init_signal_variance);
  get("dt", c.dt);
  get("duration_s", c.duration_s);
  get("train_fraction", c.train_fraction);
  get("train_steps", c.train_steps);
  get("forecast_steps", c.forecast_steps);
  get("data_file", c.data_file);
  get("dataset_name", c.dataset_name);
  get("input_col", c.input_col);
  get("output_col", c.output_col);
  get("sigma_f_var", c.sigma_f_var);
  get("sigma_g_var", c.sigma_g_var);
  get("x0_std", c.x0_std);
  get("out_dir", c.out_dir);
  return c;
}

std::map<std::string, std::string> ExperimentConfig::echo() const {
  auto num = [](double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
  };
  std::map<std::string, std::string> m;
  m["task"] = task;
  m["seed"] = std::to_string(seed);
  m["budget"] = std::to_string(budget);
  m["eps_tol"] = num(eps_tol);
  m["hypopt"] = hypopt ? "true" : "false";
  m["learning_rate"] = num(learning_rate);
  m["max_log_step"] = num(max_log_step);
  m["init_length_scale"] = num(init_length_scale);
  m["init_signal_variance"] = num(init_signal_variance);
  m["dt"] = num(dt);
  m["duration_s"] = num(duration_s);
  m["train_fraction"] = num(train_fraction);
  m["train_steps"] = std::to_string(train_steps);
  m["forecast_steps"] = std::to_string(forecast_steps);
  m["data_file"] = data_file;
  m["dataset_name"] = dataset_name;
  m["input_col"] = std::to_string(input_col);
  m["output_col"] = std::to_string(output_col);
  m["sigma_f_var"] = num(sigma_f_var);
  m["sigma_g_var"] = num(sigma_g_var);
  m["x0_std"] = num(x0_std);
  m["out_dir"] = out_dir;
  return m;
}

namespace {

FilterConfig filter_config(const ExperimentConfig& c) {
  FilterConfig f;
  f.budget = c.budget;
  f.eps_tol = c.eps_tol;
  f.hyperopt = c.hypopt;
  f.learning_rate = c.learning_rate;
  f.max_log_step = c.max_log_step;
  return f;
}

void finish_summary(ExperimentReport& rep) {
  auto stack = [](const std::vector<StepRecord>& recs, bool truth) {
    MatrixXd est, tru;
    int count = 0;
    for (const auto& r : recs)
      if (!truth || r.x_true.size() > 0) ++count;
    if (count == 0) return std::pair<MatrixXd, MatrixXd>{est, tru};
    est.resize(count, recs.front().x_est.size());
    tru.resize(count, recs.front().x_est.size());
    int i = 0;
    for (const auto& r : recs) {
      if (r.x_true.size() == 0) continue;
      est.row(i) = r.x_est.transpose();
      tru.row(i) = r.x_true.transpose();
      ++i;
    }
    return std::pair<MatrixXd, MatrixXd>{est, tru};
  };

  const auto [est, tru] = stack(rep.records, true);
  if (est.rows() > 0) {
    rep.summary.filter_rmse = rmse(est, tru);
    const Eigen::Index q = est.rows() / 4;
    if (q > 0) {
      rep.summary.filter_rmse_first_quarter =
          rmse(MatrixXd(est.topRows(q)), MatrixXd(tru.topRows(q)));
      rep.summary.filter_rmse_last_quarter =
          rmse(MatrixXd(est.bottomRows(q)), MatrixXd(tru.bottomRows(q)));
    }
  }
  const auto [fest, ftru] = stack(rep.forecast_records, true);
  if (fest.rows() > 0) rep.summary.forecast_rmse = rmse(fest, ftru);

  rep.summary.train_records = static_cast<int>(rep.records.size());
  rep.summary.forecast_records = static_cast<int>(rep.forecast_records.size());
  if (!rep.records.empty()) rep.summary.final_log_hyper = rep.records.back().log_hyper;
}

ExperimentReport run_wingrock(const ExperimentConfig& cfg) {
  ExperimentReport rep;
  rep.config = cfg;
  rep.summary.task = cfg.task;
  rep.summary.seed = cfg.seed;

  WingRockParams params;
  params.dt = cfg.dt;
  const WingRockDataset data =
      wingrock_simulate(params, default_wingrock_control(params), cfg.duration_s, cfg.dt, cfg.seed);
  const int n = static_cast<int>(data.t.size());

  ModelSpec model = wingrock_modelspec(params);
  const Hyperparameters h0 =
      Hyperparameters::isotropic(2, 1, cfg.init_length_scale, cfg.init_signal_variance);
  AugmentedBelief belief =
      init_belief(Eigen::Vector2d(0.0, 0.0), 1e-2 * MatrixXd::Identity(2, 2), h0);
  AdamState adam = AdamState::init(h0.size(), cfg.learning_rate);
  const FilterConfig fcfg = filter_config(cfg);

  std::vector<double> step_ms;
  for (int t = 0; t + 1 < n; ++t) {
    const VectorXd control = VectorXd::Constant(1, data.aileron[t]);
    const VectorXd y = VectorXd::Constant(1, data.y[t + 1]);
    const auto tic = std::chrono::steady_clock::now();
    const StepReport sr = step(belief, control, &y, model, fcfg, &adam);
    const auto toc = std::chrono::steady_clock::now();
    step_ms.push_back(std::chrono::duration<double, std::milli>(toc - tic).count());
    StepRecord r = make_record(t + 1, data.t[t + 1], belief, sr);
    r.x_true = data.x_true[t + 1];
    // one-step prediction of the unmodeled dynamics at the filtered state
    const auto post =
        gp_posterior(belief, {model.gp_input(belief.state_mean(), control)});
    r.fn_est = post.mean;
    r.fn_true = VectorXd::Constant(1, data.delta_true[t + 1]);
    rep.records.push_back(std::move(r));
  }

  // prediction quality of the learned component over the final quarter
  const int q = static_cast<int>(rep.records.size()) / 4;
  if (q > 0) {
    VectorXd pred(q), truth(q);
    for (int i = 0; i < q; ++i) {
      const auto& r = rep.records[rep.records.size() - q + i];
      pred(i) = r.fn_est(0);
      truth(i) = r.fn_true(0);
    }
    rep.summary.forecast_rmse = rmse(pred, truth);
    rep.summary.baseline_forecast_rmse =
        rmse(VectorXd::Zero(q).eval(), truth);  // GP prior mean as baseline
  }

  rep.summary.step_ms_mean =
      step_ms.empty() ? 0.0
                      : std::accumulate(step_ms.begin(), step_ms.end(), 0.0) / step_ms.size();
  rep.summary.step_ms_median = median(step_ms);
  finish_summary(rep);
  return rep;
}

ExperimentReport run_lincycle(const ExperimentConfig& cfg) {
  ExperimentReport rep;
  rep.config = cfg;
  rep.summary.task = cfg.task;
  rep.summary.seed = cfg.seed;

  SwitchingLdsConfig sim_cfg;
  const int n = cfg.train_steps + cfg.forecast_steps;
  const SwitchingLdsDataset data = switching_lds_simulate(sim_cfg, n, cfg.seed);

  ModelSpec model = switching_lds_modelspec(data.c, sim_cfg.noise_std);
  const Hyperparameters h0 =
      Hyperparameters::isotropic(2, 2, cfg.init_length_scale, cfg.init_signal_variance);
  AugmentedBelief belief =
      init_belief(VectorXd::Zero(2), 2.0 * MatrixXd::Identity(2, 2), h0);
  AdamState adam = AdamState::init(h0.size(), cfg.learning_rate);
  const FilterConfig fcfg = filter_config(cfg);
  const VectorXd no_control = VectorXd::Zero(0);

  std::vector<double> step_ms;
  for (int t = 0; t + 1 < cfg.train_steps; ++t) {
    const auto tic = std::chrono::steady_clock::now();
    const StepReport sr = step(belief, no_control, &data.y[t + 1], model, fcfg, &adam);
    const auto toc = std::chrono::steady_clock::now();
    step_ms.push_back(std::chrono::duration<double, std::milli>(toc - tic).count());
    StepRecord r = make_record(t + 1, t + 1, belief, sr);
    r.x_true = data.x_true[t + 1];
    rep.records.push_back(std::move(r));
  }

  const auto preds = forecast(belief, {}, cfg.forecast_steps, model);
  const VectorXd hold = belief.state_mean();
  MatrixXd fore_est(preds.size(), 2), fore_tru(preds.size(), 2), fore_hold(preds.size(), 2);
  for (size_t k = 0; k < preds.size(); ++k) {
    const int idx = cfg.train_steps + static_cast<int>(k);
    StepRecord r;
    r.step = idx;
    r.t = idx;
    r.x_est = preds[k].mean;
    r.var_diag = preds[k].cov.diagonal();
    r.x_true = data.x_true[idx];
    r.n_u = belief.num_inducing();
    r.log_hyper = belief.hyper.flat();
    rep.forecast_records.push_back(r);
    fore_est.row(k) = preds[k].mean.transpose();
    fore_tru.row(k) = data.x_true[idx].transpose();
    fore_hold.row(k) = hold.transpose();
  }
  if (preds.size() > 0)
    rep.summary.baseline_forecast_rmse = rmse(fore_hold, fore_tru);

  rep.summary.step_ms_mean =
      step_ms.empty() ? 0.0
                      : std::accumulate(step_ms.begin(), step_ms.end(), 0.0) / step_ms.size();
  rep.summary.step_ms_median = median(step_ms);
  finish_summary(rep);
  return rep;
}

ExperimentReport run_sysid(const ExperimentConfig& cfg) {
  ExperimentReport rep;
  rep.config = cfg;
  rep.summary.task = cfg.task;
  rep.summary.seed = cfg.seed;

  if (cfg.data_file.empty())
    throw std::invalid_argument("sysid: data_file is required");
  const SisoDataset raw = load_daisy(cfg.data_file, {cfg.input_col}, cfg.output_col);
  const int n = static_cast<int>(raw.outputs.size());
  const int half = n / 2;

  // the first half trains, the second half tests; scalers come from training
  const Scaler u_scaler = fit_scaler(raw.inputs.topRows(half));
  const Scaler y_scaler = fit_scaler(MatrixXd(raw.outputs.head(half)));
  const MatrixXd u_std = u_scaler.apply(raw.inputs);
  const VectorXd y_std = y_scaler.apply(MatrixXd(raw.outputs)).col(0);

  const int n_lat = 4;
  ModelSpec model = sysid_modelspec(n_lat, cfg.sigma_f_var, cfg.sigma_g_var);
  const Hyperparameters h0 = Hyperparameters::isotropic(
      n_lat + 1, n_lat, cfg.init_length_scale, cfg.init_signal_variance);
  AugmentedBelief belief = init_belief(
      VectorXd::Zero(n_lat), cfg.x0_std * cfg.x0_std * MatrixXd::Identity(n_lat, n_lat), h0);
  seed_sysid_inducing_point(belief, cfg.seed);
  AdamState adam = AdamState::init(h0.size(), cfg.learning_rate);
  const FilterConfig fcfg = filter_config(cfg);

  std::vector<double> step_ms;
  for (int t = 0; t + 1 < half; ++t) {
    const VectorXd control = u_std.row(t + 1).transpose();
    const VectorXd y = y_std.segment(t + 1, 1);
    const auto tic = std::chrono::steady_clock::now();
    const StepReport sr = step(belief, control, &y, model, fcfg, &adam);
    const auto toc = std::chrono::steady_clock::now();
    step_ms.push_back(std::chrono::duration<double, std::milli>(toc - tic).count());
    StepRecord r = make_record(t + 1, t + 1, belief, sr);
    r.x_true = VectorXd::Constant(1, y_std(t + 1));
    r.x_est = belief.state_mean().head(1);  // compare the measured channel
    r.var_diag = belief.state_cov().diagonal().head(1);
    rep.records.push_back(std::move(r));
  }

  // free-running prediction over the test half with the recorded inputs
  std::vector<VectorXd> controls;
  for (int t = half; t < n; ++t) controls.push_back(u_std.row(t).transpose());
  const auto preds = forecast(belief, controls, static_cast<int>(controls.size()), model);
  VectorXd y_pred(preds.size()), y_true(preds.size());
  for (size_t k = 0; k < preds.size(); ++k) {
    const int idx = half + static_cast<int>(k);
    StepRecord r;
    r.step = idx;
    r.t = idx;
    r.x_est = preds[k].mean.head(1);
    r.var_diag = preds[k].cov.diagonal().head(1);
    r.x_true = VectorXd::Constant(1, y_std(idx));
    r.n_u = belief.num_inducing();
    r.log_hyper = belief.hyper.flat();
    rep.forecast_records.push_back(std::move(r));
    y_pred(k) = preds[k].mean(0);
    y_true(k) = y_std(idx);
  }
  if (preds.size() > 0) {
    rep.summary.baseline_forecast_rmse =
        rmse(VectorXd::Constant(y_true.size(), y_std(half - 1)), y_true);
    rep.summary.forecast_rmse_original_units =
        rmse(y_scaler.invert_col(y_pred, 0), y_scaler.invert_col(y_true, 0));
  }

  rep.summary.step_ms_mean =
      step_ms.empty() ? 0.0
                      : std::accumulate(step_ms.begin(), step_ms.end(), 0.0) / step_ms.size();
  rep.summary.step_ms_median = median(step_ms);
  finish_summary(rep);
  return rep;
}

ExperimentReport run_gprcheck(const ExperimentConfig& cfg) {
  ExperimentReport rep;
  rep.config = cfg;
  rep.summary.task = cfg.task;
  rep.summary.seed = cfg.seed;

  // streaming regression against the exact GP posterior
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  const int n = 30, n_in = 2, n_f = 1;
  const double noise_std = 0.1;

  const Hyperparameters h =
      Hyperparameters::isotropic(n_in, n_f, cfg.init_length_scale, cfg.init_signal_variance);
  const MatrixXd sigma_g = noise_std * noise_std * MatrixXd::Identity(n_f, n_f);
  ModelSpec model = gpr_reduction_modelspec(n_in, n_f, sigma_g);

  InputList inputs;
  VectorXd targets(n * n_f);
  AugmentedBelief belief = init_belief(VectorXd::Zero(n_f), MatrixXd::Identity(n_f, n_f), h);
  FilterConfig fcfg = filter_config(cfg);
  fcfg.hyperopt = false;

  for (int t = 0; t < n; ++t) {
    VectorXd c(n_in);
    for (int i = 0; i < n_in; ++i) c(i) = 2.0 * unit(rng);
    VectorXd y(n_f);
    const double f_true = std::sin(c(0)) + 0.5 * c(1);
    y(0) = f_true + noise_std * unit(rng);
    inputs.push_back(c);
    targets(t) = y(0);
    step(belief, c, &y, model, fcfg, nullptr);
  }

  const auto post = gp_posterior(belief, belief.inducing_inputs);
  const auto ref = oracle::exact_gpr(inputs, targets, sigma_g, h, belief.inducing_inputs);
  rep.summary.filter_rmse = (post.mean - ref.mean).cwiseAbs().maxCoeff();
  rep.summary.forecast_rmse = (post.cov - ref.cov).cwiseAbs().maxCoeff();
  finish_summary(rep);
  rep.summary.train_records = n;
  return rep;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config) {
  ExperimentReport rep;
  if (config.task == "wingrock")
    rep = run_wingrock(config);
  else if (config.task == "lincycle")
    rep = run_lincycle(config);
  else if (config.task == "sysid")
    rep = run_sysid(config);
  else if (config.task == "gprcheck")
    rep = run_gprcheck(config);
  else
    throw std::invalid_argument("run_experiment: unknown task " + config.task);

  if (!config.out_dir.empty()) rep.write(config.out_dir);
  return rep;
}

std::string ExperimentReport::summary_json() const {
  json j;
  j["task"] = summary.task;
  j["seed"] = summary.seed;
  j["train_records"] = summary.train_records;
  j["forecast_records"] = summary.forecast_records;
  j["filter_rmse"] = summary.filter_rmse;
  j["filter_rmse_first_quarter"] = summary.filter_rmse_first_quarter;
  j["filter_rmse_last_quarter"] = summary.filter_rmse_last_quarter;
  j["forecast_rmse"] = summary.forecast_rmse;
  j["forecast_rmse_original_units"] = summary.forecast_rmse_original_units;
  j["baseline_forecast_rmse"] = summary.baseline_forecast_rmse;
  j["final_log_hyper"] = vec_json(summary.final_log_hyper);
  j["step_ms_mean"] = summary.step_ms_mean;
  j["step_ms_median"] = summary.step_ms_median;
  j["config"] = config.echo();
  return j.dump(2);
}

void ExperimentReport::write(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir + "/report.json");
    if (!out) throw std::runtime_error("report: cannot write to " + dir);
    out << summary_json() << "\n";
  }
  std::ofstream out(dir + "/trace.csv");
  if (!out) throw std::runtime_error("report: cannot write to " + dir);
  out.precision(17);

  const auto& all = records;
  const int n_x = all.empty() ? 0 : static_cast<int>(all.front().x_est.size());
  const int n_h = all.empty() ? 0 : static_cast<int>(all.front().log_hyper.size());
  const int n_fn = all.empty() ? 0 : static_cast<int>(all.front().fn_est.size());
  out << "step,t,phase,gamma0,n_u,loss";
  for (int i = 0; i < n_x; ++i) out << ",x_est" << i;
  for (int i = 0; i < n_x; ++i) out << ",var" << i;
  for (int i = 0; i < n_x; ++i) out << ",x_true" << i;
  for (int i = 0; i < n_fn; ++i) out << ",fn_est" << i;
  for (int i = 0; i < n_fn; ++i) out << ",fn_true" << i;
  for (int i = 0; i < n_h; ++i) out << ",log_hyper" << i;
  out << "\n";

  auto emit = [&](const StepRecord& r, const char* phase) {
    out << r.step << "," << r.t << "," << phase << "," << r.gamma0 << "," << r.n_u << ","
        << r.loss;
    for (int i = 0; i < n_x; ++i) out << "," << (i < r.x_est.size() ? r.x_est(i) : 0.0);
    for (int i = 0; i < n_x; ++i) out << "," << (i < r.var_diag.size() ? r.var_diag(i) : 0.0);
    for (int i = 0; i < n_x; ++i) out << "," << (i < r.x_true.size() ? r.x_true(i) : 0.0);
    for (int i = 0; i < n_fn; ++i) out << "," << (i < r.fn_est.size() ? r.fn_est(i) : 0.0);
    for (int i = 0; i < n_fn; ++i) out << "," << (i < r.fn_true.size() ? r.fn_true(i) : 0.0);
    for (int i = 0; i < n_h; ++i) out << "," << (i < r.log_hyper.size() ? r.log_hyper(i) : 0.0);
    out << "\n";
  };
  for (const auto& r : records) emit(r, "filter");
  for (const auto& r : forecast_records) emit(r, "forecast");
}

std::string step_report_to_json_line(const StepReport& report, int step_index) {
  json j;
  j["step"] = step_index;
  j["gamma0"] = report.gamma0;
  j["added"] = report.added;
  j["discarded"] = report.discarded;
  j["innovation"] = vec_json(report.innovation);
  j["loss"] = report.hyper_loss_value;
  j["log_hyper"] = vec_json(report.hyperparams);
  j["n_u"] = report.num_inducing;
  return j.dump();
}

}  // namespace rgpssm::bench
