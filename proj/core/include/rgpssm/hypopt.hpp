#pragma once

#include <Eigen/Dense>

#include "rgpssm/belief.hpp"

namespace rgpssm {

/// Bias-corrected Adam optimizer state over the flat log-hyperparameter
/// vector.
struct AdamState {
  Eigen::VectorXd first_moment;
  Eigen::VectorXd second_moment;
  long step_count = 0;
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState init(int dim, double lr = 0.01, double beta1 = 0.9, double beta2 = 0.999,
                        double eps = 1e-8);
};

/// One Adam iteration; mutates the state and returns the parameter update
/// (to be added to the current parameters).
Eigen::VectorXd adam_step(AdamState& state, const Eigen::VectorXd& grad);

/// Loss for candidate hyperparameters given the current posterior, plus the
/// pieces the gradient reuses. All algebra is routed through
/// E = K_new⁻¹ − K_old⁻¹, which stays well defined at θ_new = θ_old.
struct HyperLoss {
  double value = 0.0;
  double quad_term = 0.0;     ///< mean misfit part
  double logdet_term = 0.0;   ///< volume part
};

HyperLoss hyper_loss(const AugmentedBelief& b, const Hyperparameters& theta_new);

/// Analytic gradient of hyper_loss over the flat log-hyperparameter vector.
Eigen::VectorXd hyper_loss_grad(const AugmentedBelief& b, const Hyperparameters& theta_new);

/// Replace the belief's hyperparameters and adjust the joint moments so the
/// posterior keeps encoding the same measurement information under the new
/// prior. The factor is rebuilt by direct factorization of the adjusted
/// covariance.
void apply_hyperparams(AugmentedBelief& b, const Hyperparameters& theta_new);

}  // namespace rgpssm
