#include "rgpssm/acceptance.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "rgpssm/dataset.hpp"
#include "rgpssm/experiment.hpp"
#include "rgpssm/filter.hpp"
#include "rgpssm/oracle.hpp"
#include "rgpssm/systems.hpp"

namespace rgpssm::bench {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

using Clock = std::chrono::steady_clock;

struct Rng {
  std::mt19937_64 gen;
  explicit Rng(uint64_t seed) : gen(seed) {}
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(gen);
  }
  double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(gen); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen); }
  VectorXd vector(int n, double sd = 1.0) {
    VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = normal(sd);
    return v;
  }
};

Hyperparameters random_hyper(Rng& rng, int n_in, int n_f) {
  Hyperparameters h;
  h.log_length_scales.resize(n_in);
  h.log_signal_variances.resize(n_f);
  for (int i = 0; i < n_in; ++i) h.log_length_scales(i) = std::log(rng.uniform(0.7, 2.0));
  for (int i = 0; i < n_f; ++i) h.log_signal_variances(i) = std::log(rng.uniform(0.5, 2.0));
  return h;
}

InputList spread_inputs(Rng& rng, int n_u, int n_in, const Hyperparameters& h) {
  // keep pairwise base-kernel correlations moderate, as the novelty gate does
  InputList z;
  int guard = 0;
  while (static_cast<int>(z.size()) < n_u && guard++ < 10000) {
    VectorXd cand = rng.vector(n_in, 1.5);
    bool ok = true;
    for (const auto& zi : z)
      if (k_base(cand, zi, h) > 0.9) ok = false;
    if (ok) z.push_back(cand);
  }
  return z;
}

AugmentedBelief random_belief(Rng& rng, int n_x, int n_f, int n_in, int n_u) {
  const Hyperparameters h = random_hyper(rng, n_in, n_f);
  AugmentedBelief b;
  b.n_x = n_x;
  b.hyper = h;
  b.inducing_inputs = spread_inputs(rng, n_u, n_in, h);
  const int n = n_x + n_f * n_u;
  b.mean = rng.vector(n, 1.0);
  MatrixXd l = MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    l(i, i) = rng.uniform(0.5, 1.5);
    for (int j = 0; j < i; ++j) l(i, j) = rng.normal(0.2);
  }
  b.chol = l;
  return b;
}

oracle::DenseBelief to_dense(const AugmentedBelief& b) {
  oracle::DenseBelief db;
  db.n_x = b.n_x;
  db.hyper = b.hyper;
  db.inducing_inputs = b.inducing_inputs;
  db.mean = b.mean;
  db.cov = b.covariance();
  return db;
}

/// Random stable affine model F = T x + W f, g = C x, z = x.
struct RandomSystem {
  ModelSpec model;
  std::function<VectorXd(const VectorXd&)> true_fn;
};

RandomSystem random_system(Rng& rng, int n_x, int n_f, int n_y) {
  MatrixXd t(n_x, n_x), w(n_x, n_f), c(n_y, n_x);
  for (int i = 0; i < t.size(); ++i) t(i / n_x, i % n_x) = rng.normal(1.0);
  const double radius = t.cwiseAbs().rowwise().sum().maxCoeff();
  t *= 0.85 / std::max(radius, 1e-6);
  for (int i = 0; i < w.size(); ++i) w(i / n_f, i % n_f) = rng.normal(0.3);
  for (int i = 0; i < c.size(); ++i) c(i / n_x, i % n_x) = rng.normal(1.0);

  RandomSystem sys;
  ModelSpec& m = sys.model;
  m.n_x = n_x;
  m.n_y = n_y;
  m.n_f = n_f;
  m.n_in = n_x;
  m.transition = [t, w](const VectorXd& x, const VectorXd& f, const VectorXd&) {
    return (t * x + w * f).eval();
  };
  m.measurement = [c](const VectorXd& x) { return (c * x).eval(); };
  m.gp_input = [](const VectorXd& x, const VectorXd&) { return x; };
  m.transition_jac_x = [t](const VectorXd&, const VectorXd&, const VectorXd&) { return t; };
  m.transition_jac_f = [w](const VectorXd&, const VectorXd&, const VectorXd&) { return w; };
  m.measurement_jac = [c](const VectorXd&) { return c; };
  m.gp_input_jac = [n_x](const VectorXd&, const VectorXd&) {
    return MatrixXd::Identity(n_x, n_x).eval();
  };
  m.sigma_f = 0.01 * MatrixXd::Identity(n_x, n_x);
  m.sigma_g = 0.04 * MatrixXd::Identity(n_y, n_y);
  sys.true_fn = [n_f](const VectorXd& z) {
    VectorXd f(n_f);
    for (int i = 0; i < n_f; ++i) f(i) = std::sin(z(i % z.size()) + 0.3 * i);
    return f;
  };
  return sys;
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(4);
  ss << v;
  return ss.str();
}

// ---- criterion bodies ------------------------------------------------------

CriterionResult c1_oracle_equivalence(uint64_t seed) {
  CriterionResult r{1, "square-root filter matches dense reference"};
  Rng rng(seed);
  double worst = 0.0;
  const int trials = 10, steps_per_trial = 10;
  for (int trial = 0; trial < trials; ++trial) {
    const int n_x = rng.integer(1, 4);
    const int n_f = rng.integer(1, 2);
    const int n_y = rng.integer(1, n_x);
    RandomSystem sys = random_system(rng, n_x, n_f, n_y);
    const Hyperparameters h = random_hyper(rng, n_x, n_f);

    AugmentedBelief b = init_belief(rng.vector(n_x, 0.5),
                                    MatrixXd::Identity(n_x, n_x), h);
    oracle::DenseBelief db = to_dense(b);
    FilterConfig cfg;
    cfg.budget = 10;
    cfg.hyperopt = false;

    VectorXd x_true = rng.vector(n_x, 0.5);
    for (int t = 0; t < steps_per_trial; ++t) {
      x_true = sys.model.transition(x_true, sys.true_fn(x_true), VectorXd());
      VectorXd y = sys.model.measurement(x_true) + 0.2 * rng.vector(n_y);
      const VectorXd* y_ptr = (t % 4 == 3) ? nullptr : &y;  // some steps without data
      step(b, VectorXd(), y_ptr, sys.model, cfg, nullptr);
      oracle::dense_step(db, VectorXd(), y_ptr, sys.model, cfg, nullptr);
      worst = std::max(worst, (b.mean - db.mean).cwiseAbs().maxCoeff());
      worst = std::max(worst, (b.covariance() - db.cov).cwiseAbs().maxCoeff());
    }
  }
  r.passed = worst < 1e-10;
  r.detail = "max moment discrepancy " + fmt(worst) + " over 100 steps (tol 1e-10)";
  return r;
}

CriterionResult c2_add_marginalize(uint64_t seed) {
  CriterionResult r{2, "prediction without adding equals add-then-marginalize"};
  Rng rng(seed);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n_x = rng.integer(1, 4);
    const int n_f = rng.integer(1, 2);
    const int n_u = rng.integer(1, 6);
    AugmentedBelief b = random_belief(rng, n_x, n_f, n_x, n_u);
    RandomSystem sys = random_system(rng, n_x, n_f, 1);

    const LinearizationPoint lin = linearize(b, VectorXd(), sys.model);
    if (lin.gamma0 < 1e-2) continue;  // degenerate augmentations are gated in practice

    AugmentedBelief via_add = b;
    predict_add(via_add, lin, sys.model.sigma_f);
    discard(via_add, via_add.num_inducing() - 1);

    AugmentedBelief via_noadd = b;
    predict_noadd(via_noadd, lin, sys.model.sigma_f);

    worst = std::max(worst, (via_add.mean - via_noadd.mean).cwiseAbs().maxCoeff());
    worst = std::max(
        worst, (via_add.covariance() - via_noadd.covariance()).cwiseAbs().maxCoeff());
  }
  r.passed = worst < 1e-10;
  r.detail = "max discrepancy " + fmt(worst) + " over 200 instances (tol 1e-10)";
  return r;
}

/// Exact accuracy loss of marginalizing block d: KL between the joint and the
/// product of the kernel-prior conditional with the marginalized joint.
double discard_kl_reference(const AugmentedBelief& b, int d) {
  const int n = b.dim();
  const int n_f = b.output_dim();
  const int n_x = b.n_x;
  const int off = b.block_offset(d);

  std::vector<int> rest;  // everything except the dropped block
  for (int i = 0; i < n; ++i)
    if (i < off || i >= off + n_f) rest.push_back(i);

  InputList z_l;
  for (int i = 0; i < b.num_inducing(); ++i)
    if (i != d) z_l.push_back(b.inducing_inputs[i]);
  const InputList z_d{b.inducing_inputs[d]};

  const MatrixXd k_dl = k_matrix(z_d, z_l, b.hyper).full();
  const MatrixXd k_ll = k_matrix(z_l, z_l, b.hyper).full();
  const MatrixXd k_dd = k_matrix(z_d, z_d, b.hyper).full();
  const MatrixXd a_cond = k_dl * k_ll.inverse();
  const MatrixXd gamma_d = k_dd - a_cond * k_dl.transpose();

  const VectorXd mean = b.mean;
  const MatrixXd cov = b.covariance();

  const int nr = static_cast<int>(rest.size());
  VectorXd mean_l(nr);
  MatrixXd cov_ll(nr, nr);
  for (int i = 0; i < nr; ++i) {
    mean_l(i) = mean(rest[i]);
    for (int j = 0; j < nr; ++j) cov_ll(i, j) = cov(rest[i], rest[j]);
  }

  // u_l entries sit after the first n_x positions of `rest`
  const int m_l = nr - n_x;
  const VectorXd mean_ul = mean_l.tail(m_l);
  const MatrixXd cov_rest_ul = cov_ll.rightCols(m_l);
  const MatrixXd s_ll = cov_ll.bottomRightCorner(m_l, m_l);

  VectorXd mean_t = VectorXd::Zero(n);
  MatrixXd cov_t = MatrixXd::Zero(n, n);
  for (int i = 0; i < nr; ++i) {
    mean_t(rest[i]) = mean_l(i);
    for (int j = 0; j < nr; ++j) cov_t(rest[i], rest[j]) = cov_ll(i, j);
  }
  const VectorXd mean_d = a_cond * mean_ul;
  const MatrixXd cross = cov_rest_ul * a_cond.transpose();  // cov(rest, u_d)
  const MatrixXd var_d = a_cond * s_ll * a_cond.transpose() + gamma_d;
  for (int i = 0; i < n_f; ++i) {
    mean_t(off + i) = mean_d(i);
    for (int j = 0; j < nr; ++j) {
      cov_t(rest[j], off + i) = cross(j, i);
      cov_t(off + i, rest[j]) = cross(j, i);
    }
    for (int j = 0; j < n_f; ++j) cov_t(off + i, off + j) = var_d(i, j);
  }
  return oracle::gaussian_kl(mean, cov, mean_t, cov_t);
}

CriterionResult c3_score_optimality(uint64_t seed) {
  CriterionResult r{3, "discard score picks the exact-KL-optimal block"};
  Rng rng(seed);
  int agree = 0;
  const int trials = 50;
  for (int trial = 0; trial < trials; ++trial) {
    const int n_x = rng.integer(1, 3);
    const int n_f = rng.integer(1, 2);
    const int n_u = rng.integer(6, 8);
    const AugmentedBelief b = random_belief(rng, n_x, n_f, 2, n_u);

    const auto scores = score_all(b);
    int argmin_score = 0;
    for (int d = 1; d < n_u; ++d)
      if (scores[d].total() < scores[argmin_score].total()) argmin_score = d;

    int argmin_kl = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int d = 0; d < n_u; ++d) {
      const double kl = discard_kl_reference(b, d);
      if (kl < best) {
        best = kl;
        argmin_kl = d;
      }
    }
    if (argmin_score == argmin_kl) ++agree;
  }
  r.passed = agree == trials;
  r.detail = std::to_string(agree) + "/" + std::to_string(trials) + " argmin agreements";
  return r;
}

CriterionResult c4_gpr_reduction(uint64_t seed) {
  CriterionResult r{4, "filter reduces to exact GP regression"};
  ExperimentConfig cfg = ExperimentConfig::defaults_for("gprcheck");
  cfg.seed = seed;
  const ExperimentReport rep = run_experiment(cfg);
  const double mean_dev = rep.summary.filter_rmse;
  const double cov_dev = rep.summary.forecast_rmse;
  r.passed = mean_dev < 1e-6 && cov_dev < 1e-6;
  r.detail = "max |mean dev| " + fmt(mean_dev) + ", max |cov dev| " + fmt(cov_dev) +
             " vs exact GPR on 30 samples (tol 1e-6)";
  return r;
}

CriterionResult c5_gradients(uint64_t seed) {
  CriterionResult r{5, "analytic gradients match central differences"};
  Rng rng(seed);
  const double fd_step = 1e-6;
  double worst_input = 0.0, worst_theta = 0.0, worst_loss = 0.0;

  for (int trial = 0; trial < 100; ++trial) {
    const int n_in = rng.integer(1, 3);
    const int n_f = rng.integer(1, 2);
    const Hyperparameters h = random_hyper(rng, n_in, n_f);
    const InputList zs = spread_inputs(rng, rng.integer(1, 5), n_in, h);
    const VectorXd z = rng.vector(n_in, 1.5);

    const MatrixXd g = k_input_grad(z, zs, h);
    for (size_t j = 0; j < zs.size(); ++j) {
      const VectorXd fd = oracle::fd_gradient(
          [&](const VectorXd& zz) { return k_base(zz, zs[j], h); }, z, fd_step);
      const double rel = (g.col(static_cast<Eigen::Index>(j)) - fd).norm() /
                         std::max(fd.norm(), 1e-10);
      worst_input = std::max(worst_input, rel);
    }

    const InputList as = spread_inputs(rng, 3, n_in, h);
    const VectorXd theta = h.flat();
    for (int j = 0; j < h.size(); ++j) {
      const MatrixXd dk = k_theta_grad_full(as, zs, h, j);
      auto full_at = [&](double tj) {
        VectorXd th = theta;
        th(j) = tj;
        return k_matrix(as, zs, Hyperparameters::from_flat(th, n_in, n_f)).full();
      };
      const MatrixXd fd =
          (full_at(theta(j) + fd_step) - full_at(theta(j) - fd_step)) / (2.0 * fd_step);
      const double rel = (dk - fd).norm() / std::max(fd.norm(), 1e-10);
      worst_theta = std::max(worst_theta, rel);
    }
  }

  for (int trial = 0; trial < 100; ++trial) {
    const int n_in = rng.integer(1, 2);
    const int n_f = rng.integer(1, 2);
    const int n_u = rng.integer(1, 8);
    const AugmentedBelief b = random_belief(rng, rng.integer(1, 3), n_f, n_in, n_u);
    VectorXd theta = b.hyper.flat() + rng.vector(b.hyper.size(), 0.15);
    const Hyperparameters h_new =
        Hyperparameters::from_flat(theta, n_in, n_f);

    const VectorXd grad = hyper_loss_grad(b, h_new);
    const VectorXd fd = oracle::fd_gradient(
        [&](const VectorXd& th) {
          return hyper_loss(b, Hyperparameters::from_flat(th, n_in, n_f)).value;
        },
        theta, 1e-5);
    const double rel = (grad - fd).norm() / std::max(fd.norm(), 1e-10);
    worst_loss = std::max(worst_loss, rel);
  }

  r.passed = worst_input < 1e-4 && worst_theta < 1e-4 && worst_loss < 1e-4;
  r.detail = "rel err: input " + fmt(worst_input) + ", kernel-theta " + fmt(worst_theta) +
             ", loss " + fmt(worst_loss) + " (tol 1e-4, 100 instances each)";
  return r;
}

CriterionResult c6_hyper_adjustment(uint64_t seed) {
  CriterionResult r{6, "hyperparameter posterior adjustment matches natural-parameter oracle"};
  Rng rng(seed);
  double worst = 0.0;
  bool noop_exact = true;
  for (int trial = 0; trial < 100; ++trial) {
    const int n_in = rng.integer(1, 2);
    const int n_f = rng.integer(1, 2);
    const AugmentedBelief b0 = random_belief(rng, rng.integer(1, 3), n_f, n_in,
                                             rng.integer(1, 6));

    // identity at equal hyperparameters, bit for bit
    AugmentedBelief same = b0;
    apply_hyperparams(same, b0.hyper);
    noop_exact = noop_exact && (same.mean == b0.mean) && (same.chol == b0.chol);

    const Hyperparameters h_new = Hyperparameters::from_flat(
        b0.hyper.flat() + rng.vector(b0.hyper.size(), 0.2), n_in, n_f);
    AugmentedBelief adjusted = b0;
    apply_hyperparams(adjusted, h_new);
    oracle::DenseBelief ref = to_dense(b0);
    oracle::natural_param_hyper_update(ref, h_new);
    worst = std::max(worst, (adjusted.mean - ref.mean).cwiseAbs().maxCoeff());
    worst = std::max(worst, (adjusted.covariance() - ref.cov).cwiseAbs().maxCoeff());
  }
  r.passed = worst < 1e-8 && noop_exact;
  r.detail = "max moment discrepancy " + fmt(worst) + " (tol 1e-8); exact no-op: " +
             (noop_exact ? "yes" : "NO");
  return r;
}

CriterionResult c7_wingrock(uint64_t seed) {
  CriterionResult r{7, "wing rock: hyperparameters converge and adaptation improves forecasts"};

  ExperimentConfig with = ExperimentConfig::defaults_for("wingrock");
  with.seed = seed;
  ExperimentConfig without = with;
  without.hypopt = false;
  const ExperimentReport rep_with = run_experiment(with);
  const ExperimentReport rep_without = run_experiment(without);

  // offline reference fit on true (θ, p, Δ) pairs from the training segment
  WingRockParams params;
  params.dt = with.dt;
  const WingRockDataset data = wingrock_simulate(
      params, default_wingrock_control(params), with.duration_s, with.dt, with.seed);
  const int train_end = static_cast<int>(with.train_fraction * data.t.size());
  InputList inputs;
  std::vector<double> targets;
  for (int t = 0; t < train_end; t += 13) {
    inputs.push_back(data.x_true[t]);
    targets.push_back(data.delta_true[t]);
  }
  const VectorXd target_vec =
      Eigen::Map<const VectorXd>(targets.data(), static_cast<Eigen::Index>(targets.size()));
  const Hyperparameters ref = oracle::offline_gpr_fit(
      inputs, target_vec, 1, Hyperparameters::isotropic(2, 1, 1.0, 1.0), 1e-4);

  const VectorXd theta_ref = ref.flat();
  const VectorXd theta_init =
      Hyperparameters::isotropic(2, 1, with.init_length_scale, with.init_signal_variance).flat();
  const VectorXd theta_final = rep_with.summary.final_log_hyper;
  int closer = 0;
  for (int i = 0; i < 3; ++i)
    if (std::abs(theta_final(i) - theta_ref(i)) < std::abs(theta_init(i) - theta_ref(i)))
      ++closer;

  const double improvement =
      1.0 - rep_with.summary.forecast_rmse / rep_without.summary.forecast_rmse;

  r.passed = closer >= 2 && improvement >= 0.10;
  std::ostringstream ss;
  ss << closer << "/3 hyperparameters moved toward the offline reference (need 2); "
     << "forecast RMSE " << fmt(rep_with.summary.forecast_rmse) << " adapted vs "
     << fmt(rep_without.summary.forecast_rmse) << " fixed, improvement "
     << fmt(100.0 * improvement) << "% (need 10%)";
  r.detail = ss.str();
  return r;
}

CriterionResult c8_limit_cycle(uint64_t seed) {
  CriterionResult r{8, "limit cycle: forecast beats hold-last baseline and filtering improves"};
  ExperimentConfig cfg = ExperimentConfig::defaults_for("lincycle");
  cfg.seed = seed;
  const ExperimentReport rep = run_experiment(cfg);
  const double edge = 1.0 - rep.summary.forecast_rmse / rep.summary.baseline_forecast_rmse;
  const bool improves = rep.summary.filter_rmse_last_quarter <
                        rep.summary.filter_rmse_first_quarter;
  r.passed = edge >= 0.30 && improves;
  std::ostringstream ss;
  ss << "forecast RMSE " << fmt(rep.summary.forecast_rmse) << " vs baseline "
     << fmt(rep.summary.baseline_forecast_rmse) << " (" << fmt(100.0 * edge)
     << "% better, need 30%); filter RMSE " << fmt(rep.summary.filter_rmse_first_quarter)
     << " -> " << fmt(rep.summary.filter_rmse_last_quarter) << " first->last quarter";
  r.detail = ss.str();
  return r;
}

CriterionResult c9_daisy(const std::string& daisy_dir) {
  CriterionResult r{9, "identification benchmarks reach the reproduction targets"};
  if (daisy_dir.empty()) {
    r.skipped = true;
    r.detail = "no benchmark data directory provided (pass --daisy-dir); "
               "reproduction targets not evaluated";
    return r;
  }
  struct Target {
    const char* file;
    const char* name;
    double bound;
  };
  const Target targets[] = {{"dryer.dat", "dryer", 0.16}, {"ballbeam.dat", "ballbeam", 0.07}};
  std::ostringstream ss;
  bool ok = true;
  bool any = false;
  for (const auto& tgt : targets) {
    const std::string path = daisy_dir + "/" + tgt.file;
    if (!std::filesystem::exists(path)) {
      ss << tgt.name << ": file missing; ";
      continue;
    }
    any = true;
    double total = 0.0;
    for (uint64_t s = 0; s < 5; ++s) {
      ExperimentConfig cfg = ExperimentConfig::defaults_for("sysid");
      cfg.data_file = path;
      cfg.dataset_name = tgt.name;
      cfg.seed = s;
      total += run_experiment(cfg).summary.forecast_rmse;
    }
    const double mean_rmse = total / 5.0;
    ss << tgt.name << " mean RMSE " << fmt(mean_rmse) << " (target " << fmt(tgt.bound) << "); ";
    ok = ok && mean_rmse <= tgt.bound;
  }
  if (!any) {
    r.skipped = true;
    r.detail = "benchmark files not found under " + daisy_dir;
    return r;
  }
  r.passed = ok;
  r.detail = ss.str() + "(soft reproduction target)";
  return r;
}

CriterionResult c10_performance(uint64_t seed) {
  CriterionResult r{10, "single step at budget 20 stays under 5 ms"};
  Rng rng(seed);
  const int n_lat = 4;
  ModelSpec model = sysid_modelspec(n_lat);
  const Hyperparameters h = Hyperparameters::isotropic(n_lat + 1, n_lat, 1.0, 1.0);
  AugmentedBelief b = init_belief(VectorXd::Zero(n_lat), MatrixXd::Identity(n_lat, n_lat), h);
  seed_sysid_inducing_point(b, seed);
  AdamState adam = AdamState::init(h.size());
  FilterConfig cfg;
  cfg.budget = 20;

  std::vector<double> ms;
  for (int t = 0; t < 300; ++t) {
    const VectorXd control = VectorXd::Constant(1, std::sin(0.07 * t) + 0.3 * rng.normal());
    const VectorXd y = VectorXd::Constant(1, std::sin(0.05 * t) + 0.1 * rng.normal());
    const auto tic = Clock::now();
    step(b, control, &y, model, cfg, &adam);
    const auto toc = Clock::now();
    if (t >= 50)  // discard the fill-up transient
      ms.push_back(std::chrono::duration<double, std::milli>(toc - tic).count());
  }
  std::sort(ms.begin(), ms.end());
  const double med = ms[ms.size() / 2];
  r.passed = med <= 5.0;
  r.detail = "median step " + fmt(med) + " ms at budget 20, state 4, outputs 4 (limit 5 ms)";
  return r;
}

CriterionResult c11_soak(uint64_t seed) {
  CriterionResult r{11, "5000-step soak keeps the factor positive"};
  Rng rng(seed);
  SwitchingLdsConfig sim;
  const SwitchingLdsDataset data = switching_lds_simulate(sim, 5000, seed);
  ModelSpec model = switching_lds_modelspec(data.c, sim.noise_std);
  const Hyperparameters h = Hyperparameters::isotropic(2, 2, 1.0, 4.0);
  AugmentedBelief b = init_belief(VectorXd::Zero(2), 2.0 * MatrixXd::Identity(2, 2), h);
  AdamState adam = AdamState::init(h.size());
  FilterConfig cfg;
  cfg.budget = 8;
  cfg.hyperopt = true;
  const VectorXd no_control = VectorXd::Zero(0);

  int bad = 0;
  std::string what;
  for (int t = 0; t + 1 < 5000; ++t) {
    const bool has_meas = rng.uniform(0.0, 1.0) < 0.7;
    try {
      step(b, no_control, has_meas ? &data.y[t + 1] : nullptr, model, cfg, &adam);
    } catch (const std::exception& e) {
      ++bad;
      what = e.what();
      break;
    }
    if (!b.factor_valid()) {
      ++bad;
      what = "factor lost positive diagonal at step " + std::to_string(t);
      break;
    }
  }
  r.passed = bad == 0;
  r.detail = bad == 0 ? "factor stayed valid through 4999 mixed steps" : what;
  return r;
}

}  // namespace

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts) {
  std::vector<CriterionResult> out;
  auto timed = [&](CriterionResult (*fn)(uint64_t), uint64_t seed) {
    const auto tic = Clock::now();
    CriterionResult r = fn(seed);
    r.seconds = std::chrono::duration<double>(Clock::now() - tic).count();
    return r;
  };
  out.push_back(timed(c1_oracle_equivalence, opts.seed));
  out.push_back(timed(c2_add_marginalize, opts.seed + 1));
  out.push_back(timed(c3_score_optimality, opts.seed + 2));
  out.push_back(timed(c4_gpr_reduction, opts.seed + 3));
  out.push_back(timed(c5_gradients, opts.seed + 4));
  out.push_back(timed(c6_hyper_adjustment, opts.seed + 5));
  out.push_back(timed(c7_wingrock, opts.seed + 6));
  out.push_back(timed(c8_limit_cycle, opts.seed + 7));
  {
    const auto tic = Clock::now();
    CriterionResult r = c9_daisy(opts.daisy_dir);
    r.seconds = std::chrono::duration<double>(Clock::now() - tic).count();
    out.push_back(r);
  }
  out.push_back(timed(c10_performance, opts.seed + 9));
  out.push_back(timed(c11_soak, opts.seed + 10));

  // runtime limits are part of the contract for the numerical suites
  if (out[0].passed && out[0].seconds >= 10.0) {
    out[0].passed = false;
    out[0].detail += "; runtime " + fmt(out[0].seconds) + " s exceeds 10 s";
  }
  if (out[6].passed && out[6].seconds >= 60.0) {
    out[6].passed = false;
    out[6].detail += "; runtime " + fmt(out[6].seconds) + " s exceeds 60 s";
  }
  return out;
}

bool all_passed(const std::vector<CriterionResult>& results) {
  for (const auto& r : results)
    if (!r.skipped && !r.passed) return false;
  return true;
}

std::string format_results(const std::vector<CriterionResult>& results) {
  std::ostringstream ss;
  for (const auto& r : results) {
    const char* tag = r.skipped ? "SKIP" : (r.passed ? "PASS" : "FAIL");
    ss << tag << "  [" << r.id << "] " << r.name << ": " << r.detail;
    ss.setf(std::ios::fixed);
    ss.precision(2);
    ss << " (" << r.seconds << " s)\n";
    ss.unsetf(std::ios::fixed);
  }
  return ss.str();
}

}  // namespace rgpssm::bench
