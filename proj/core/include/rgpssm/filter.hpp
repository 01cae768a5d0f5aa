#pragma once

#include <optional>
#include <vector>

#include "rgpssm/belief.hpp"
#include "rgpssm/hypopt.hpp"
#include "rgpssm/model.hpp"

namespace rgpssm {

/// GP posterior moments at a list of query inputs, jointly with the state.
struct GpPosterior {
  Eigen::VectorXd mean;          ///< m_f, n_f per query stacked
  Eigen::MatrixXd cov;           ///< S_ff
  Eigen::MatrixXd cross_state;   ///< V_xf (n_x rows)
  Eigen::MatrixXd cross_inducing;  ///< S_uf (n_f·n_u rows)
  Eigen::MatrixXd base_weights;  ///< K0 conditioning weights, queries × n_u
};

GpPosterior gp_posterior(const AugmentedBelief& b, const InputList& queries);

/// Prior conditional variance of the candidate function value on the base
/// kernel scale; 1 for an empty inducing set, 0 for a duplicated input.
double novelty(const AugmentedBelief& b, const Eigen::VectorXd& z);

/// First-order linearization of the transition around the current posterior
/// mean. `jac_state` differentiates through the GP posterior mean, so it
/// carries both the explicit state dependence and the mean-function slope.
struct LinearizationPoint {
  Eigen::VectorXd z;            ///< GP input at the state mean
  Eigen::VectorXd predicted;    ///< F_t = F(μ, m_f, control)
  Eigen::MatrixXd jac_state;    ///< A_x, n_x × n_x
  Eigen::MatrixXd jac_fn;       ///< A_f, n_x × n_f
  Eigen::VectorXd fn_mean;      ///< m_f at z
  Eigen::VectorXd base_weights; ///< K0 conditioning row at z (length n_u)
  double gamma0 = 1.0;          ///< novelty at z
};

LinearizationPoint linearize(const AugmentedBelief& b, const Eigen::VectorXd& control,
                             const ModelSpec& model);

/// Prediction that first inserts the current function value as a new inducing
/// block (prior-consistent augmentation) and then propagates through the
/// linearized transition.
void predict_add(AugmentedBelief& b, const LinearizationPoint& lin,
                 const Eigen::MatrixXd& sigma_f);

/// Prediction that keeps the inducing set fixed; the discarded function value
/// contributes extra process noise A_f γ A_fᵀ.
void predict_noadd(AugmentedBelief& b, const LinearizationPoint& lin,
                   const Eigen::MatrixXd& sigma_f);

/// Measurement update in square-root form. The posterior factor comes from a
/// Cholesky downdate; if round-off breaks the downdate the covariance is
/// re-factorized densely with jitter.
struct CorrectionInfo {
  Eigen::VectorXd innovation;
  bool downdate_repaired = false;
};
CorrectionInfo correct(AugmentedBelief& b, const Eigen::VectorXd& y, const ModelSpec& model);

/// Accuracy-loss surrogate for discarding one inducing block.
struct DiscardScore {
  double mean_term = 0.0;       ///< Δ1
  double cov_term = 0.0;        ///< Δ2
  double entropy_term = 0.0;    ///< Δ3
  double total() const { return mean_term + cov_term + entropy_term; }
};

std::vector<DiscardScore> score_all(const AugmentedBelief& b);

/// Marginalize one inducing block out (row/column deletion in moment space).
void discard(AugmentedBelief& b, int block_index);

struct FilterConfig {
  int budget = 20;             ///< max retained inducing points M
  double eps_tol = 1e-4;       ///< novelty threshold on the base-kernel scale
  bool hyperopt = true;        ///< one optimizer iteration per step
  double learning_rate = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double max_log_step = 0.1;   ///< per-step clip on |Δθ| in log space; 0 disables
};

struct StepReport {
  double gamma0 = 1.0;
  bool added = false;
  std::vector<int> discarded;      ///< block indices at the time of removal
  Eigen::VectorXd innovation;      ///< empty when no measurement arrived
  double hyper_loss_value = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd hyperparams;     ///< flat log hyperparameters at step exit
  int num_inducing = 0;
};

/// One full filter iteration: novelty-gated prediction, budget enforcement,
/// optional correction, optional hyperparameter step. `y` may be null for
/// measurement-less steps; `adam` carries optimizer state across steps and may
/// be null when cfg.hyperopt is false.
StepReport step(AugmentedBelief& b, const Eigen::VectorXd& control,
                const Eigen::VectorXd* y, const ModelSpec& model, const FilterConfig& cfg,
                AdamState* adam = nullptr);

/// Free-running rollout of the prediction step, without additions, discards,
/// corrections, or hyperparameter updates. The input belief is not modified.
struct StatePrediction {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};
std::vector<StatePrediction> forecast(const AugmentedBelief& b,
                                      const std::vector<Eigen::VectorXd>& controls,
                                      int steps, const ModelSpec& model);

}  // namespace rgpssm
