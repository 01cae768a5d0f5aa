#pragma once

#include <vector>
#include <Eigen/Dense>

namespace rgpssm {

using InputList = std::vector<Eigen::VectorXd>;

/// Log-space hyperparameters of the squared-exponential ARD kernel with a
/// diagonal multi-output scale. Storing logs keeps length scales and signal
/// variances strictly positive under unconstrained optimization.
struct Hyperparameters {
  Eigen::VectorXd log_length_scales;    ///< one per input dimension
  Eigen::VectorXd log_signal_variances; ///< one per output dimension

  int input_dim() const { return static_cast<int>(log_length_scales.size()); }
  int output_dim() const { return static_cast<int>(log_signal_variances.size()); }
  int size() const { return input_dim() + output_dim(); }

  Eigen::VectorXd length_scales() const { return log_length_scales.array().exp(); }
  Eigen::VectorXd signal_variances() const { return log_signal_variances.array().exp(); }

  /// Flat parameter vector [log length scales, log signal variances].
  Eigen::VectorXd flat() const;
  static Hyperparameters from_flat(const Eigen::VectorXd& v, int n_in, int n_f);

  static Hyperparameters isotropic(int n_in, int n_f, double length_scale = 1.0,
                                   double signal_variance = 1.0);

  bool finite() const;
};

/// Kernel matrix in factored form: the full multi-output block is
/// base ⊗ diag(output_scale) and is only materialized on demand.
struct KernelBlock {
  Eigen::MatrixXd base;          ///< base-kernel values, one per input pair
  Eigen::VectorXd output_scale;  ///< signal variances σ²

  Eigen::MatrixXd full() const;
  Eigen::Index rows() const { return base.rows() * output_scale.size(); }
  Eigen::Index cols() const { return base.cols() * output_scale.size(); }
};

/// Base kernel value exp(-½ Σ_i (z_i - z'_i)² / l_i²), in (0, 1].
double k_base(const Eigen::VectorXd& z, const Eigen::VectorXd& z_prime,
              const Hyperparameters& h);

/// Base kernel matrix for two input lists, with the output scale carried
/// alongside for Kronecker assembly.
KernelBlock k_matrix(const InputList& a, const InputList& b, const Hyperparameters& h);

/// Derivative of the base kernel with respect to the first argument.
/// Column j holds ∂k(z, Z_j)/∂z = k(z, Z_j) · Λ⁻¹ (Z_j - z).
Eigen::MatrixXd k_input_grad(const Eigen::VectorXd& z, const InputList& zs,
                             const Hyperparameters& h);

/// Elementwise derivative of the base matrix with respect to log-hyperparameter j.
/// For a log length scale (j < n_in) this is K0 ∘ d_j²/l_j²; for a log signal
/// variance it is the derivative of the output scale, a diagonal n_f×n_f matrix
/// with σ_i² in the corresponding slot.
Eigen::MatrixXd k_theta_grad(const InputList& a, const InputList& b,
                             const Hyperparameters& h, int j);

/// Derivative of the assembled multi-output block with respect to
/// log-hyperparameter j (used by the hyperparameter loss gradient).
Eigen::MatrixXd k_theta_grad_full(const InputList& a, const InputList& b,
                                  const Hyperparameters& h, int j);

/// Jitter added to self-covariance blocks before factorization.
double kernel_jitter(const Hyperparameters& h);

}  // namespace rgpssm
