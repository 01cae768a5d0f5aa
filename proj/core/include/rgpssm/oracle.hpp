#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "rgpssm/filter.hpp"
#include "rgpssm/kernel.hpp"
#include "rgpssm/model.hpp"

namespace rgpssm::oracle {

/// Reference belief carried in plain moment form: no factorization, updates
/// are the literal textbook equations. Used by tests and the acceptance suite
/// at small sizes only.
struct DenseBelief {
  int n_x = 0;
  Hyperparameters hyper;
  InputList inducing_inputs;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  int output_dim() const { return hyper.output_dim(); }
  int num_inducing() const { return static_cast<int>(inducing_inputs.size()); }
  int dim() const { return n_x + output_dim() * num_inducing(); }
};

DenseBelief dense_init(const Eigen::VectorXd& x0_mean, const Eigen::MatrixXd& x0_cov,
                       const Hyperparameters& h);

/// Same contract as filter step (novelty gate, budget, correction,
/// hyperparameter iteration) with all covariance arithmetic done densely.
StepReport dense_step(DenseBelief& db, const Eigen::VectorXd& control, const Eigen::VectorXd* y,
                      const ModelSpec& model, const FilterConfig& cfg, AdamState* adam = nullptr);

/// KL(p || q) between Gaussians in closed form.
double gaussian_kl(const Eigen::VectorXd& mean_p, const Eigen::MatrixXd& cov_p,
                   const Eigen::VectorXd& mean_q, const Eigen::MatrixXd& cov_q);

/// Textbook GP regression posterior at query inputs. `noise_cov` is the
/// per-observation noise covariance (n_f × n_f), applied blockwise.
struct GprPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};
GprPosterior exact_gpr(const InputList& inputs, const Eigen::VectorXd& targets,
                       const Eigen::MatrixXd& noise_cov, const Hyperparameters& h,
                       const InputList& queries);

/// Central-difference gradient of a scalar function.
Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& fn,
                            const Eigen::VectorXd& x, double step);

/// Offline GP hyperparameter fit: maximizes the regression log marginal
/// likelihood by Adam (fixed 2000 iterations, learning rate 0.01).
Hyperparameters offline_gpr_fit(const InputList& inputs, const Eigen::VectorXd& targets,
                                int n_f, const Hyperparameters& theta0,
                                double noise_var = 1e-6);

/// Natural-parameter reference for the hyperparameter posterior adjustment:
/// adds K_new⁻¹ − K_old⁻¹ to the inducing-block precision and leaves the
/// information vector unchanged.
void natural_param_hyper_update(DenseBelief& db, const Hyperparameters& theta_new);

}  // namespace rgpssm::oracle
