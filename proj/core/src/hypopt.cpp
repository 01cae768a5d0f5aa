#include "rgpssm/hypopt.hpp"

#include <cmath>

namespace rgpssm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Inverse of the multi-output kernel matrix through its Kronecker structure,
// with the base matrix jittered before factorization.
MatrixXd kernel_inverse(const InputList& z, const Hyperparameters& h) {
  const int n_u = static_cast<int>(z.size());
  const int n_f = h.output_dim();
  MatrixXd base = k_matrix(z, z, h).base;
  base.diagonal().array() += 1e-10;
  Eigen::LLT<MatrixXd> llt(base);
  if (llt.info() != Eigen::Success)
    throw NumericalError("hyperparameter update: kernel matrix is not PD");
  const MatrixXd base_inv = llt.solve(MatrixXd::Identity(n_u, n_u));
  const VectorXd inv_s2 = h.signal_variances().cwiseInverse();
  MatrixXd out = MatrixXd::Zero(n_u * n_f, n_u * n_f);
  for (int i = 0; i < n_u; ++i)
    for (int j = 0; j < n_u; ++j)
      out.block(i * n_f, j * n_f, n_f, n_f).diagonal() = base_inv(i, j) * inv_s2;
  return out;
}

double kernel_logdet(const InputList& z, const Hyperparameters& h) {
  const int n_u = static_cast<int>(z.size());
  MatrixXd base = k_matrix(z, z, h).base;
  base.diagonal().array() += 1e-10;
  const MatrixXd l = cholesky_lower(base);
  const double logdet_base = 2.0 * l.diagonal().array().log().sum();
  return h.output_dim() * logdet_base + n_u * h.log_signal_variances.sum();
}

struct LossWork {
  MatrixXd e;        // K_new⁻¹ − K_old⁻¹
  MatrixXd a;        // E S_uu + I
  Eigen::PartialPivLU<MatrixXd> a_lu;
  MatrixXd k_new_inv;
  VectorXd m_u;
  MatrixXd s_uu;
};

LossWork loss_work(const AugmentedBelief& b, const Hyperparameters& theta_new) {
  LossWork w;
  w.k_new_inv = kernel_inverse(b.inducing_inputs, theta_new);
  w.e = w.k_new_inv - kernel_inverse(b.inducing_inputs, b.hyper);
  w.m_u = b.inducing_mean();
  w.s_uu = b.inducing_cov();
  w.a = w.e * w.s_uu + MatrixXd::Identity(w.e.rows(), w.e.cols());
  w.a_lu.compute(w.a);
  return w;
}

}  // namespace

AdamState AdamState::init(int dim, double lr, double b1, double b2, double e) {
  AdamState s;
  s.first_moment = VectorXd::Zero(dim);
  s.second_moment = VectorXd::Zero(dim);
  s.learning_rate = lr;
  s.beta1 = b1;
  s.beta2 = b2;
  s.eps = e;
  return s;
}

VectorXd adam_step(AdamState& state, const VectorXd& grad) {
  if (state.first_moment.size() != grad.size())
    throw std::invalid_argument("adam_step: gradient size mismatch");
  state.step_count += 1;
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grad;
  state.second_moment =
      state.beta2 * state.second_moment + (1.0 - state.beta2) * grad.array().square().matrix();
  const double bc1 = 1.0 - std::pow(state.beta1, state.step_count);
  const double bc2 = 1.0 - std::pow(state.beta2, state.step_count);
  const VectorXd m_hat = state.first_moment / bc1;
  const VectorXd v_hat = state.second_moment / bc2;
  return (-state.learning_rate * m_hat.array() / (v_hat.array().sqrt() + state.eps)).matrix();
}

HyperLoss hyper_loss(const AugmentedBelief& b, const Hyperparameters& theta_new) {
  HyperLoss out;
  if (b.num_inducing() == 0) return out;
  const LossWork w = loss_work(b, theta_new);

  out.quad_term = w.m_u.dot(w.a_lu.solve(w.e * w.m_u));
  // log|K_new (I + E S)| with a signed determinant for the second factor
  const double logdet_a = w.a_lu.matrixLU().diagonal().array().abs().log().sum();
  out.logdet_term = kernel_logdet(b.inducing_inputs, theta_new) + logdet_a;
  out.value = out.quad_term + out.logdet_term;
  return out;
}

VectorXd hyper_loss_grad(const AugmentedBelief& b, const Hyperparameters& theta_new) {
  VectorXd grad = VectorXd::Zero(theta_new.size());
  if (b.num_inducing() == 0) return grad;
  const LossWork w = loss_work(b, theta_new);
  const Eigen::Index m = w.e.rows();

  const VectorXd x = w.a_lu.solve(w.e * w.m_u);          // A⁻¹ E m
  const VectorXd y = w.a_lu.transpose().solve(w.m_u);    // A⁻ᵀ m
  const MatrixXd a_inv = w.a_lu.solve(MatrixXd::Identity(m, m));

  for (int j = 0; j < theta_new.size(); ++j) {
    const MatrixXd dk =
        k_theta_grad_full(b.inducing_inputs, b.inducing_inputs, theta_new, j);
    const MatrixXd de = -w.k_new_inv * dk * w.k_new_inv;
    const MatrixXd da = de * w.s_uu;
    const double d_quad = -y.dot(da * x) + y.dot(de * w.m_u);
    const double d_logdet =
        (w.k_new_inv.cwiseProduct(dk)).sum() + (a_inv.transpose().cwiseProduct(da)).sum();
    grad(j) = d_quad + d_logdet;
  }
  return grad;
}

void apply_hyperparams(AugmentedBelief& b, const Hyperparameters& theta_new) {
  if (theta_new.input_dim() != b.input_dim() || theta_new.output_dim() != b.output_dim())
    throw std::invalid_argument("apply_hyperparams: hyperparameter shape mismatch");
  if (b.num_inducing() == 0) {
    b.hyper = theta_new;
    return;
  }
  const LossWork w = loss_work(b, theta_new);
  if (w.e.isZero(0.0)) {  // θ_new = θ_old is an exact no-op
    b.hyper = theta_new;
    return;
  }

  const Eigen::Index m = w.e.rows();
  const MatrixXd sigma = b.covariance();

  // gain G̃ = Σ H̃ᵀ (E S + I)⁻¹ E with H̃ selecting the inducing rows
  const MatrixXd adj = w.a_lu.solve(w.e);             // (E S + I)⁻¹ E
  const MatrixXd gain = sigma.rightCols(m) * adj;     // n × m
  b.mean -= gain * w.m_u;
  MatrixXd sigma_new = sigma - gain * sigma.bottomRows(m);
  sigma_new = 0.5 * (sigma_new + MatrixXd(sigma_new.transpose()));

  b.hyper = theta_new;
  b.chol = cholesky_lower_jittered(sigma_new, kernel_jitter(theta_new));
}

}  // namespace rgpssm
