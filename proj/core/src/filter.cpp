#include "rgpssm/filter.hpp"

#include <algorithm>
#include <cmath>

namespace rgpssm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Solve B w = rhs through the (jittered) Cholesky factor of the base kernel
// matrix of the inducing inputs.
MatrixXd base_solve(const AugmentedBelief& b, const MatrixXd& rhs) {
  const KernelBlock kb = k_matrix(b.inducing_inputs, b.inducing_inputs, b.hyper);
  MatrixXd base = kb.base;
  base.diagonal().array() += kernel_jitter(b.hyper) / b.hyper.signal_variances().maxCoeff();
  Eigen::LLT<MatrixXd> llt(base);
  if (llt.info() != Eigen::Success)
    throw NumericalError("base kernel matrix is not positive definite; "
                         "novelty threshold too small for this input set");
  return llt.solve(rhs);
}

// Process-noise term of the propagation, floored by the jitter policy so the
// predicted covariance stays nonsingular even for zero process noise.
MatrixXd prediction_noise(const AugmentedBelief& b, const MatrixXd& sigma_f,
                          const MatrixXd& extra) {
  MatrixXd top = sigma_f + extra;
  top = 0.5 * (top + MatrixXd(top.transpose()));
  top.diagonal().array() += kernel_jitter(b.hyper);
  return top;
}

// Kronecker product of a (rows × n_u) weight matrix with I_{n_f}: the
// multi-output conditioning operator k_fu.
MatrixXd expand_weights(const MatrixXd& w, int n_f) {
  MatrixXd out = MatrixXd::Zero(w.rows() * n_f, w.cols() * n_f);
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      out.block(i * n_f, j * n_f, n_f, n_f).diagonal().setConstant(w(i, j));
  return out;
}

}  // namespace

GpPosterior gp_posterior(const AugmentedBelief& b, const InputList& queries) {
  const int n_f = b.output_dim();
  const int n_u = b.num_inducing();
  const int n_q = static_cast<int>(queries.size());
  const VectorXd s2 = b.hyper.signal_variances();

  GpPosterior out;
  if (n_u == 0) {
    out.mean = VectorXd::Zero(n_q * n_f);
    out.cov = k_matrix(queries, queries, b.hyper).full();
    out.cross_state = MatrixXd::Zero(b.n_x, n_q * n_f);
    out.cross_inducing = MatrixXd::Zero(0, n_q * n_f);
    out.base_weights = MatrixXd::Zero(n_q, 0);
    return out;
  }

  const MatrixXd base_qu = k_matrix(queries, b.inducing_inputs, b.hyper).base;
  const MatrixXd w = base_solve(b, base_qu.transpose()).transpose();  // n_q × n_u
  const MatrixXd k_fu = expand_weights(w, n_f);

  const BeliefBlocks blk = blocks(b);
  const MatrixXd k_uu = k_matrix(b.inducing_inputs, b.inducing_inputs, b.hyper).full();
  const MatrixXd k_qq = k_matrix(queries, queries, b.hyper).full();

  out.mean = k_fu * blk.inducing_mean;
  out.cov = k_qq + k_fu * (blk.inducing_cov - k_uu) * k_fu.transpose();
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  out.cross_state = blk.cross_cov * k_fu.transpose();
  out.cross_inducing = blk.inducing_cov * k_fu.transpose();
  out.base_weights = w;
  return out;
}

double novelty(const AugmentedBelief& b, const VectorXd& z) {
  if (b.num_inducing() == 0) return 1.0;
  InputList q{z};
  const MatrixXd base_tu = k_matrix(q, b.inducing_inputs, b.hyper).base;
  const MatrixXd w = base_solve(b, base_tu.transpose());
  const double g = 1.0 - (base_tu * w)(0, 0);
  return std::clamp(g, 0.0, 1.0);
}

LinearizationPoint linearize(const AugmentedBelief& b, const VectorXd& control,
                             const ModelSpec& model) {
  LinearizationPoint lin;
  const VectorXd mu = b.state_mean();
  lin.z = model.gp_input(mu, control);

  const int n_f = b.output_dim();
  const int n_u = b.num_inducing();
  MatrixXd dmf_dz = MatrixXd::Zero(n_f, b.input_dim());
  if (n_u == 0) {
    lin.fn_mean = VectorXd::Zero(n_f);
    lin.base_weights = VectorXd::Zero(0);
    lin.gamma0 = 1.0;
  } else {
    InputList q{lin.z};
    const MatrixXd base_tu = k_matrix(q, b.inducing_inputs, b.hyper).base;
    const MatrixXd w = base_solve(b, base_tu.transpose());  // n_u × 1
    lin.base_weights = w.col(0);
    lin.gamma0 = std::clamp(1.0 - (base_tu * w)(0, 0), 0.0, 1.0);

    // m_u reshaped with one column per inducing block
    const VectorXd m_u = b.inducing_mean();
    MatrixXd m_cols(n_f, n_u);
    for (int j = 0; j < n_u; ++j) m_cols.col(j) = m_u.segment(j * n_f, n_f);
    lin.fn_mean = m_cols * lin.base_weights;

    // slope of the posterior mean: dm_f/dz = M B⁻¹ Gᵀ with G the base-kernel
    // input gradient at z
    const MatrixXd g = k_input_grad(lin.z, b.inducing_inputs, b.hyper);  // n_in × n_u
    dmf_dz = m_cols * base_solve(b, g.transpose());
  }

  lin.predicted = model.transition(mu, lin.fn_mean, control);
  lin.jac_fn = model.jac_f(mu, lin.fn_mean, control);
  const MatrixXd dz_dx = model.jac_h(mu, control);
  lin.jac_state = model.jac_x(mu, lin.fn_mean, control) + lin.jac_fn * dmf_dz * dz_dx;
  return lin;
}

void predict_add(AugmentedBelief& b, const LinearizationPoint& lin, const MatrixXd& sigma_f) {
  const int n_f = b.output_dim();
  const int n_x = b.n_x;
  const int n_old = b.dim();

  // prior-consistent covariance of the new function value with [x; u]
  const GpPosterior post = gp_posterior(b, InputList{lin.z});
  MatrixXd zeta(n_old, n_f);
  zeta.topRows(n_x) = post.cross_state;
  zeta.bottomRows(n_old - n_x) = post.cross_inducing;
  chol_append(b, zeta, post.cov, post.mean, lin.z);

  // propagate [x; u; f_t]: the state row couples to itself and the new block
  const int n = b.dim();
  MatrixXd phi = MatrixXd::Identity(n, n);
  phi.topLeftCorner(n_x, n_x) = lin.jac_state;
  phi.block(0, n - n_f, n_x, n_f) = lin.jac_fn;
  phi.block(0, n_x, n_x, n - n_f - n_x).setZero();

  MatrixXd noise_factor = MatrixXd::Zero(n, n_x);
  noise_factor.topRows(n_x) =
      psd_factor(prediction_noise(b, sigma_f, MatrixXd::Zero(n_x, n_x)));

  b.chol = qr_propagate(b.chol, phi, noise_factor);
  b.mean.head(n_x) = lin.predicted;
}

void predict_noadd(AugmentedBelief& b, const LinearizationPoint& lin, const MatrixXd& sigma_f) {
  const int n_f = b.output_dim();
  const int n_x = b.n_x;
  const int n = b.dim();
  const VectorXd s2 = b.hyper.signal_variances();

  MatrixXd phi = MatrixXd::Identity(n, n);
  phi.topLeftCorner(n_x, n_x) = lin.jac_state;
  if (b.num_inducing() > 0) {
    const MatrixXd k_tu = expand_weights(lin.base_weights.transpose(), n_f);
    phi.topRightCorner(n_x, n - n_x) = lin.jac_fn * k_tu;
  }

  // the marginalized function value adds A_f (γ0 ⊗ diag σ²) A_fᵀ of noise
  const MatrixXd extra =
      lin.gamma0 * lin.jac_fn * s2.asDiagonal() * lin.jac_fn.transpose();
  MatrixXd noise_factor = MatrixXd::Zero(n, n_x);
  noise_factor.topRows(n_x) = psd_factor(prediction_noise(b, sigma_f, extra));

  b.chol = qr_propagate(b.chol, phi, noise_factor);
  b.mean.head(n_x) = lin.predicted;
}

CorrectionInfo correct(AugmentedBelief& b, const VectorXd& y, const ModelSpec& model) {
  const int n_x = b.n_x;
  const VectorXd mu = b.state_mean();
  const MatrixXd c = model.jac_g(mu);
  const VectorXd residual = y - model.measurement(mu);

  // Σ Hᵀ with H = [C 0]: only the state columns of Σ enter
  const MatrixXd sigma_hx = b.chol * b.chol.topRows(n_x).transpose();  // n × n_x
  const MatrixXd sigma_ht = sigma_hx * c.transpose();                  // n × n_y
  MatrixXd psi = c * sigma_hx.topRows(n_x) * c.transpose() + model.sigma_g;
  psi = 0.5 * (psi + MatrixXd(psi.transpose()));
  MatrixXd rho;
  try {
    rho = cholesky_lower(psi);
  } catch (const NumericalError&) {
    throw NumericalError("correct: innovation covariance is not PD; check sigma_g");
  }

  const MatrixXd eta =
      rho.triangularView<Eigen::Lower>().solve(sigma_ht.transpose()).transpose();
  const MatrixXd gain = rho.transpose().triangularView<Eigen::Upper>().solve(eta.transpose())
                            .transpose();  // Σ Hᵀ Ψ⁻¹

  CorrectionInfo info;
  info.innovation = residual;
  b.mean += gain * residual;
  try {
    MatrixXd l = b.chol;
    for (Eigen::Index j = 0; j < eta.cols(); ++j) chol_rank1_update(l, eta.col(j), -1);
    b.chol = std::move(l);
  } catch (const DowndateError&) {
    // exact-arithmetic posterior covariance is PD, so recover it densely
    MatrixXd sigma = b.covariance() - eta * eta.transpose();
    sigma = 0.5 * (sigma + MatrixXd(sigma.transpose()));
    b.chol = cholesky_lower_jittered(sigma, kernel_jitter(b.hyper));
    info.downdate_repaired = true;
  }
  return info;
}

std::vector<DiscardScore> score_all(const AugmentedBelief& b) {
  const int n_u = b.num_inducing();
  if (n_u < 1) throw std::invalid_argument("score_all: no inducing blocks");
  const int n_f = b.output_dim();
  const int n_x = b.n_x;
  const VectorXd s2 = b.hyper.signal_variances();
  const VectorXd inv_s2 = s2.cwiseInverse();
  const double logdet_d = b.hyper.log_signal_variances.sum();

  const KernelBlock kb = k_matrix(b.inducing_inputs, b.inducing_inputs, b.hyper);
  Eigen::LLT<MatrixXd> llt(kb.base);
  if (llt.info() != Eigen::Success) {
    // identify the closest input pair for the error message
    int bi = 0, bj = 1;
    double best = -1.0;
    for (int i = 0; i < n_u; ++i)
      for (int j = i + 1; j < n_u; ++j)
        if (kb.base(i, j) > best) { best = kb.base(i, j); bi = i; bj = j; }
    throw NumericalError("score_all: kernel matrix is singular; blocks " +
                         std::to_string(bi) + " and " + std::to_string(bj) +
                         " are nearly duplicate inputs");
  }
  const MatrixXd base_inv = llt.solve(MatrixXd::Identity(n_u, n_u));

  const VectorXd m_u = b.inducing_mean();
  MatrixXd m_cols(n_f, n_u);
  for (int j = 0; j < n_u; ++j) m_cols.col(j) = m_u.segment(j * n_f, n_f);
  const MatrixXd s_uu = b.inducing_cov();

  // Ω_dd via triangular solves against L, or one dense inversion when the
  // inducing set is large enough to amortize it
  const bool dense_omega = n_u > 32;
  MatrixXd omega;
  if (dense_omega) {
    const MatrixXd linv = b.chol.triangularView<Eigen::Lower>().solve(
        MatrixXd::Identity(b.dim(), b.dim()));
    omega = linv.transpose() * linv;
  }

  std::vector<DiscardScore> scores(n_u);
  for (int d = 0; d < n_u; ++d) {
    DiscardScore& s = scores[d];
    const double qdd_base = base_inv(d, d);

    // Δ1: Q_du m_u = D⁻¹ M B⁻¹ e_d on the Kronecker structure
    const VectorXd v = inv_s2.asDiagonal() * (m_cols * base_inv.col(d));
    s.mean_term = (v.array().square() * s2.array()).sum() / qdd_base;

    // Δ2: tr(Q_du S Q_duᵀ Q_dd⁻¹) with Q_du = B⁻¹_d ⊗ D⁻¹
    MatrixXd t = MatrixXd::Zero(n_f, n_f);
    for (int j = 0; j < n_u; ++j)
      for (int k = 0; k < n_u; ++k) {
        const double w = base_inv(d, j) * base_inv(d, k);
        if (w == 0.0) continue;
        t += w * inv_s2.asDiagonal() * s_uu.block(j * n_f, k * n_f, n_f, n_f) *
             inv_s2.asDiagonal();
      }
    s.cov_term = (t * (s2 / qdd_base).asDiagonal()).trace();

    // Δ3: log|Ω_dd| − log|Q_dd|
    MatrixXd omega_dd(n_f, n_f);
    if (dense_omega) {
      omega_dd = omega.block(n_x + d * n_f, n_x + d * n_f, n_f, n_f);
    } else {
      MatrixXd sel = MatrixXd::Zero(b.dim(), n_f);
      sel.block(n_x + d * n_f, 0, n_f, n_f).setIdentity();
      const MatrixXd w = b.chol.triangularView<Eigen::Lower>().solve(sel);
      omega_dd = w.transpose() * w;
    }
    const double logdet_omega = 2.0 * MatrixXd(omega_dd.llt().matrixL())
                                           .diagonal().array().log().sum();
    const double logdet_qdd = n_f * std::log(qdd_base) - logdet_d;
    s.entropy_term = logdet_omega - logdet_qdd;
  }
  return scores;
}

void discard(AugmentedBelief& b, int block_index) { chol_drop(b, block_index); }

StepReport step(AugmentedBelief& b, const VectorXd& control, const VectorXd* y,
                const ModelSpec& model, const FilterConfig& cfg, AdamState* adam) {
  StepReport report;
  const LinearizationPoint lin = linearize(b, control, model);
  report.gamma0 = lin.gamma0;

  if (lin.gamma0 > cfg.eps_tol && cfg.budget > 0) {
    predict_add(b, lin, model.sigma_f);
    report.added = true;
  } else {
    predict_noadd(b, lin, model.sigma_f);
  }

  while (b.num_inducing() > cfg.budget) {
    const std::vector<DiscardScore> scores = score_all(b);
    int worst = 0;
    for (int d = 1; d < static_cast<int>(scores.size()); ++d)
      if (scores[d].total() < scores[worst].total()) worst = d;
    discard(b, worst);
    report.discarded.push_back(worst);
  }

  if (y != nullptr) {
    const CorrectionInfo info = correct(b, *y, model);
    report.innovation = info.innovation;
  }

  if (cfg.hyperopt && adam != nullptr && b.num_inducing() >= 2) {
    const HyperLoss loss = hyper_loss(b, b.hyper);
    const VectorXd grad = hyper_loss_grad(b, b.hyper);
    VectorXd delta = adam_step(*adam, grad);
    if (cfg.max_log_step > 0.0)
      delta = delta.cwiseMax(-cfg.max_log_step).cwiseMin(cfg.max_log_step);
    const Hyperparameters theta_new =
        Hyperparameters::from_flat(b.hyper.flat() + delta, b.input_dim(), b.output_dim());
    apply_hyperparams(b, theta_new);
    report.hyper_loss_value = loss.value;
  }

  report.hyperparams = b.hyper.flat();
  report.num_inducing = b.num_inducing();
  return report;
}

std::vector<StatePrediction> forecast(const AugmentedBelief& b,
                                      const std::vector<VectorXd>& controls, int steps,
                                      const ModelSpec& model) {
  AugmentedBelief roll = b;
  std::vector<StatePrediction> out;
  out.reserve(steps);
  for (int t = 0; t < steps; ++t) {
    const VectorXd control =
        controls.empty() ? VectorXd::Zero(0)
                         : controls[std::min<size_t>(t, controls.size() - 1)];
    const LinearizationPoint lin = linearize(roll, control, model);
    predict_noadd(roll, lin, model.sigma_f);
    out.push_back({roll.state_mean(), roll.state_cov()});
  }
  return out;
}

}  // namespace rgpssm
