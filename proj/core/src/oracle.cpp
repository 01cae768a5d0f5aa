#include "rgpssm/oracle.hpp"

#include <cmath>
#include <limits>

namespace rgpssm::oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd dense_kernel(const InputList& a, const InputList& b, const Hyperparameters& h) {
  return k_matrix(a, b, h).full();
}

MatrixXd dense_kernel_inv(const InputList& z, const Hyperparameters& h) {
  // same base-matrix jitter policy as the filter path, independent inversion
  KernelBlock kb = k_matrix(z, z, h);
  kb.base.diagonal().array() += 1e-10;
  return kb.full().inverse();
}

struct DenseLin {
  VectorXd z;
  VectorXd predicted;
  MatrixXd jac_state;
  MatrixXd jac_fn;
  VectorXd fn_mean;
  MatrixXd k_tu;   // K_tu K_uu⁻¹, n_f × n_f·n_u
  double gamma0 = 1.0;
};

// same process-noise floor as the square-root path
MatrixXd dense_prediction_noise(const DenseBelief& db, const MatrixXd& sigma_f,
                                const MatrixXd& extra) {
  MatrixXd top = sigma_f + extra;
  top = 0.5 * (top + MatrixXd(top.transpose()));
  top.diagonal().array() += kernel_jitter(db.hyper);
  return top;
}

DenseLin dense_linearize(const DenseBelief& db, const VectorXd& control, const ModelSpec& model) {
  DenseLin lin;
  const VectorXd mu = db.mean.head(db.n_x);
  lin.z = model.gp_input(mu, control);
  const int n_f = db.output_dim();
  const int n_u = db.num_inducing();

  MatrixXd dmf_dz = MatrixXd::Zero(n_f, db.hyper.input_dim());
  if (n_u == 0) {
    lin.fn_mean = VectorXd::Zero(n_f);
    lin.k_tu = MatrixXd::Zero(n_f, 0);
    lin.gamma0 = 1.0;
  } else {
    const InputList q{lin.z};
    const MatrixXd k_qu = dense_kernel(q, db.inducing_inputs, db.hyper);
    const MatrixXd k_uu_inv = dense_kernel_inv(db.inducing_inputs, db.hyper);
    lin.k_tu = k_qu * k_uu_inv;
    lin.fn_mean = lin.k_tu * db.mean.tail(db.dim() - db.n_x);

    const MatrixXd base_qu = k_matrix(q, db.inducing_inputs, db.hyper).base;
    MatrixXd base = k_matrix(db.inducing_inputs, db.inducing_inputs, db.hyper).base;
    base.diagonal().array() += 1e-10;
    lin.gamma0 = 1.0 - (base_qu * base.inverse() * base_qu.transpose())(0, 0);
    lin.gamma0 = std::clamp(lin.gamma0, 0.0, 1.0);

    // dm_f/dz assembled from per-coordinate derivatives of the full
    // cross-kernel row (base derivative times the output scale)
    const MatrixXd g = k_input_grad(lin.z, db.inducing_inputs, db.hyper);
    const VectorXd m_u = db.mean.tail(db.dim() - db.n_x);
    const VectorXd s2 = db.hyper.signal_variances();
    for (int i = 0; i < db.hyper.input_dim(); ++i) {
      MatrixXd dk_qu = MatrixXd::Zero(n_f, n_f * n_u);
      for (int j = 0; j < n_u; ++j)
        dk_qu.block(0, j * n_f, n_f, n_f).diagonal() = g(i, j) * s2;
      dmf_dz.col(i) = dk_qu * k_uu_inv * m_u;
    }
  }

  lin.predicted = model.transition(mu, lin.fn_mean, control);
  lin.jac_fn = model.jac_f(mu, lin.fn_mean, control);
  lin.jac_state = model.jac_x(mu, lin.fn_mean, control) +
                  lin.jac_fn * dmf_dz * model.jac_h(mu, control);
  return lin;
}

void dense_predict_add(DenseBelief& db, const DenseLin& lin, const MatrixXd& sigma_f) {
  const int n_f = db.output_dim();
  const int n_x = db.n_x;
  const int n = db.dim();

  // augment with the current function value, prior-consistent
  const InputList q{lin.z};
  const MatrixXd k_qq = dense_kernel(q, q, db.hyper);
  MatrixXd zeta(n, n_f);
  MatrixXd s_tt = k_qq;
  VectorXd f_mean = VectorXd::Zero(n_f);
  if (db.num_inducing() == 0) {
    zeta.setZero();
  } else {
    const int m = n - n_x;
    const MatrixXd k_uu = dense_kernel(db.inducing_inputs, db.inducing_inputs, db.hyper);
    const MatrixXd s_uu = db.cov.bottomRightCorner(m, m);
    zeta.topRows(n_x) = db.cov.topRightCorner(n_x, m) * lin.k_tu.transpose();
    zeta.bottomRows(m) = s_uu * lin.k_tu.transpose();
    s_tt += lin.k_tu * (s_uu - k_uu) * lin.k_tu.transpose();
    f_mean = lin.fn_mean;
  }

  MatrixXd cov_aug(n + n_f, n + n_f);
  cov_aug.topLeftCorner(n, n) = db.cov;
  cov_aug.topRightCorner(n, n_f) = zeta;
  cov_aug.bottomLeftCorner(n_f, n) = zeta.transpose();
  cov_aug.bottomRightCorner(n_f, n_f) = s_tt;
  VectorXd mean_aug(n + n_f);
  mean_aug << db.mean, f_mean;

  const int nn = n + n_f;
  MatrixXd phi = MatrixXd::Identity(nn, nn);
  phi.topLeftCorner(n_x, n_x) = lin.jac_state;
  phi.block(0, n_x, n_x, nn - n_x - n_f).setZero();
  phi.topRightCorner(n_x, n_f) = lin.jac_fn;
  MatrixXd noise = MatrixXd::Zero(nn, nn);
  noise.topLeftCorner(n_x, n_x) =
      dense_prediction_noise(db, sigma_f, MatrixXd::Zero(n_x, n_x));

  db.cov = phi * cov_aug * phi.transpose() + noise;
  db.cov = 0.5 * (db.cov + MatrixXd(db.cov.transpose()));
  mean_aug.head(n_x) = lin.predicted;
  db.mean = mean_aug;
  db.inducing_inputs.push_back(lin.z);
}

void dense_predict_noadd(DenseBelief& db, const DenseLin& lin, const MatrixXd& sigma_f) {
  const int n_x = db.n_x;
  const int n = db.dim();
  const VectorXd s2 = db.hyper.signal_variances();

  MatrixXd phi = MatrixXd::Identity(n, n);
  phi.topLeftCorner(n_x, n_x) = lin.jac_state;
  if (db.num_inducing() > 0) phi.topRightCorner(n_x, n - n_x) = lin.jac_fn * lin.k_tu;

  MatrixXd noise = MatrixXd::Zero(n, n);
  noise.topLeftCorner(n_x, n_x) = dense_prediction_noise(
      db, sigma_f, lin.gamma0 * lin.jac_fn * s2.asDiagonal() * lin.jac_fn.transpose());

  db.cov = phi * db.cov * phi.transpose() + noise;
  db.cov = 0.5 * (db.cov + MatrixXd(db.cov.transpose()));
  db.mean.head(n_x) = lin.predicted;
}

void dense_correct(DenseBelief& db, const VectorXd& y, const ModelSpec& model,
                   VectorXd* innovation) {
  const int n_x = db.n_x;
  const VectorXd mu = db.mean.head(n_x);
  const MatrixXd c = model.jac_g(mu);
  MatrixXd h = MatrixXd::Zero(c.rows(), db.dim());
  h.leftCols(n_x) = c;
  const MatrixXd psi = c * db.cov.topLeftCorner(n_x, n_x) * c.transpose() + model.sigma_g;
  const MatrixXd gain = db.cov * h.transpose() * psi.inverse();
  const VectorXd resid = y - model.measurement(mu);
  db.mean += gain * resid;
  db.cov = db.cov - gain * h * db.cov;
  db.cov = 0.5 * (db.cov + MatrixXd(db.cov.transpose()));
  if (innovation) *innovation = resid;
}

std::vector<double> dense_scores(const DenseBelief& db) {
  const int n_u = db.num_inducing();
  const int n_f = db.output_dim();
  const int n_x = db.n_x;
  const MatrixXd q = dense_kernel_inv(db.inducing_inputs, db.hyper);
  const MatrixXd omega = db.cov.inverse();
  const VectorXd m_u = db.mean.tail(db.dim() - n_x);
  const MatrixXd s_uu = db.cov.bottomRightCorner(db.dim() - n_x, db.dim() - n_x);

  std::vector<double> out(n_u);
  for (int d = 0; d < n_u; ++d) {
    const MatrixXd q_du = q.middleRows(d * n_f, n_f);
    const MatrixXd q_dd = q.block(d * n_f, d * n_f, n_f, n_f);
    const MatrixXd q_dd_inv = q_dd.inverse();
    const VectorXd qm = q_du * m_u;
    const double d1 = qm.dot(q_dd_inv * qm);
    const double d2 = (q_du * s_uu * q_du.transpose() * q_dd_inv).trace();
    const MatrixXd omega_dd = omega.block(n_x + d * n_f, n_x + d * n_f, n_f, n_f);
    const double d3 = std::log(omega_dd.determinant()) - std::log(q_dd.determinant());
    out[d] = d1 + d2 + d3;
  }
  return out;
}

void dense_drop(DenseBelief& db, int d) {
  const int n_f = db.output_dim();
  const int off = db.n_x + d * n_f;
  const int n = db.dim();
  const int tail = n - off - n_f;

  VectorXd mean(n - n_f);
  mean << db.mean.head(off), db.mean.tail(tail);
  MatrixXd cov(n - n_f, n - n_f);
  cov.topLeftCorner(off, off) = db.cov.topLeftCorner(off, off);
  cov.topRightCorner(off, tail) = db.cov.topRightCorner(off, tail);
  cov.bottomLeftCorner(tail, off) = db.cov.bottomLeftCorner(tail, off);
  cov.bottomRightCorner(tail, tail) = db.cov.bottomRightCorner(tail, tail);
  db.mean = mean;
  db.cov = cov;
  db.inducing_inputs.erase(db.inducing_inputs.begin() + d);
}

}  // namespace

DenseBelief dense_init(const VectorXd& x0_mean, const MatrixXd& x0_cov,
                       const Hyperparameters& h) {
  DenseBelief db;
  db.n_x = static_cast<int>(x0_mean.size());
  db.hyper = h;
  db.mean = x0_mean;
  db.cov = x0_cov;
  return db;
}

StepReport dense_step(DenseBelief& db, const VectorXd& control, const VectorXd* y,
                      const ModelSpec& model, const FilterConfig& cfg, AdamState* adam) {
  StepReport report;
  const DenseLin lin = dense_linearize(db, control, model);
  report.gamma0 = lin.gamma0;

  if (lin.gamma0 > cfg.eps_tol && cfg.budget > 0) {
    dense_predict_add(db, lin, model.sigma_f);
    report.added = true;
  } else {
    dense_predict_noadd(db, lin, model.sigma_f);
  }

  while (db.num_inducing() > cfg.budget) {
    const std::vector<double> scores = dense_scores(db);
    int worst = 0;
    for (size_t d = 1; d < scores.size(); ++d)
      if (scores[d] < scores[worst]) worst = static_cast<int>(d);
    dense_drop(db, worst);
    report.discarded.push_back(worst);
  }

  if (y != nullptr) {
    VectorXd innov;
    dense_correct(db, *y, model, &innov);
    report.innovation = innov;
  }

  if (cfg.hyperopt && adam != nullptr && db.num_inducing() >= 2) {
    // evaluate the shared loss gradient on an equivalent square-root belief
    AugmentedBelief tmp;
    tmp.n_x = db.n_x;
    tmp.hyper = db.hyper;
    tmp.inducing_inputs = db.inducing_inputs;
    tmp.mean = db.mean;
    tmp.chol = cholesky_lower_jittered(db.cov, kernel_jitter(db.hyper));
    const HyperLoss loss = hyper_loss(tmp, db.hyper);
    const VectorXd grad = hyper_loss_grad(tmp, db.hyper);
    VectorXd delta = adam_step(*adam, grad);
    if (cfg.max_log_step > 0.0)
      delta = delta.cwiseMax(-cfg.max_log_step).cwiseMin(cfg.max_log_step);
    const Hyperparameters theta_new = Hyperparameters::from_flat(
        db.hyper.flat() + delta, db.hyper.input_dim(), db.hyper.output_dim());
    natural_param_hyper_update(db, theta_new);
    report.hyper_loss_value = loss.value;
  }

  report.hyperparams = db.hyper.flat();
  report.num_inducing = db.num_inducing();
  return report;
}

double gaussian_kl(const VectorXd& mean_p, const MatrixXd& cov_p, const VectorXd& mean_q,
                   const MatrixXd& cov_q) {
  const Eigen::Index n = mean_p.size();
  Eigen::LLT<MatrixXd> llt_q(cov_q);
  Eigen::LLT<MatrixXd> llt_p(cov_p);
  if (llt_q.info() != Eigen::Success || llt_p.info() != Eigen::Success)
    throw std::invalid_argument("gaussian_kl: covariance is not positive definite");
  const double logdet_q = 2.0 * MatrixXd(llt_q.matrixL()).diagonal().array().log().sum();
  const double logdet_p = 2.0 * MatrixXd(llt_p.matrixL()).diagonal().array().log().sum();
  const VectorXd diff = mean_q - mean_p;
  const double quad = diff.dot(llt_q.solve(diff));
  const double tr = llt_q.solve(cov_p).trace();
  return 0.5 * (tr + quad - static_cast<double>(n) + logdet_q - logdet_p);
}

GprPosterior exact_gpr(const InputList& inputs, const VectorXd& targets,
                       const MatrixXd& noise_cov, const Hyperparameters& h,
                       const InputList& queries) {
  const int n = static_cast<int>(inputs.size());
  const int n_f = h.output_dim();
  if (targets.size() != n * n_f)
    throw std::invalid_argument("exact_gpr: target length mismatch");

  MatrixXd k_yy = k_matrix(inputs, inputs, h).full();
  for (int i = 0; i < n; ++i) k_yy.block(i * n_f, i * n_f, n_f, n_f) += noise_cov;
  Eigen::LDLT<MatrixXd> solver(k_yy);
  if (solver.info() != Eigen::Success || !solver.isPositive())
    throw NumericalError("exact_gpr: training system is singular");

  const MatrixXd k_qx = k_matrix(queries, inputs, h).full();
  const MatrixXd k_qq = k_matrix(queries, queries, h).full();
  GprPosterior out;
  out.mean = k_qx * solver.solve(targets);
  out.cov = k_qq - k_qx * solver.solve(k_qx.transpose());
  out.cov = 0.5 * (out.cov + MatrixXd(out.cov.transpose()));
  return out;
}

VectorXd fd_gradient(const std::function<double(const VectorXd&)>& fn, const VectorXd& x,
                     double step) {
  VectorXd g(x.size());
  VectorXd xp = x, xm = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp(i) = x(i) + step;
    xm(i) = x(i) - step;
    const double fp = fn(xp);
    const double fm = fn(xm);
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw std::runtime_error("fd_gradient: non-finite function evaluation");
    g(i) = (fp - fm) / (2.0 * step);
    xp(i) = x(i);
    xm(i) = x(i);
  }
  return g;
}

Hyperparameters offline_gpr_fit(const InputList& inputs, const VectorXd& targets, int n_f,
                                const Hyperparameters& theta0, double noise_var) {
  if (inputs.size() < 10)
    throw std::invalid_argument("offline_gpr_fit: need at least 10 samples");
  const int n_in = theta0.input_dim();
  const int n = static_cast<int>(inputs.size());
  if (targets.size() != n * n_f)
    throw std::invalid_argument("offline_gpr_fit: target length mismatch");

  auto neg_lml_grad = [&](const Hyperparameters& h, VectorXd* grad) {
    MatrixXd k = k_matrix(inputs, inputs, h).full();
    k.diagonal().array() += noise_var + kernel_jitter(h);
    Eigen::LLT<MatrixXd> llt(k);
    if (llt.info() != Eigen::Success)
      throw NumericalError("offline_gpr_fit: kernel system not PD");
    const VectorXd alpha = llt.solve(targets);
    const MatrixXd k_inv = llt.solve(MatrixXd::Identity(k.rows(), k.cols()));
    if (grad) {
      for (int j = 0; j < h.size(); ++j) {
        const MatrixXd dk = k_theta_grad_full(inputs, inputs, h, j);
        (*grad)(j) = -0.5 * alpha.dot(dk * alpha) + 0.5 * k_inv.cwiseProduct(dk).sum();
      }
    }
  };

  Hyperparameters h = theta0;
  AdamState adam = AdamState::init(h.size(), 0.01);
  VectorXd grad(h.size());
  for (int iter = 0; iter < 2000; ++iter) {
    neg_lml_grad(h, &grad);
    const VectorXd delta = adam_step(adam, grad);
    h = Hyperparameters::from_flat(h.flat() + delta, n_in, n_f);
  }
  return h;
}

void natural_param_hyper_update(DenseBelief& db, const Hyperparameters& theta_new) {
  const int m = db.dim() - db.n_x;
  if (m == 0) {
    db.hyper = theta_new;
    return;
  }
  const MatrixXd e = dense_kernel_inv(db.inducing_inputs, theta_new) -
                     dense_kernel_inv(db.inducing_inputs, db.hyper);
  const MatrixXd prec_old = db.cov.inverse();
  const VectorXd info_vec = prec_old * db.mean;
  MatrixXd prec_new = prec_old;
  prec_new.bottomRightCorner(m, m) += e;
  const MatrixXd cov_new = prec_new.inverse();
  db.cov = 0.5 * (cov_new + MatrixXd(cov_new.transpose()));
  db.mean = db.cov * info_vec;
  db.hyper = theta_new;
}

}  // namespace rgpssm::oracle
