#pragma once

#include <stdexcept>
#include <vector>
#include <Eigen/Dense>

#include "rgpssm/kernel.hpp"

namespace rgpssm {

/// Thrown when a covariance factorization or downdate loses positive
/// definiteness beyond what the jitter policy can absorb.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Downdate failure; `column` identifies the offending downdate column.
struct DowndateError : NumericalError {
  explicit DowndateError(int col)
      : NumericalError("Cholesky downdate lost positive definiteness at column " +
                       std::to_string(col)),
        column(col) {}
  int column;
};

/// Joint Gaussian over the augmented state [x; u] in square-root form.
///
/// The mean is stored flat as [state | inducing blocks in Z order], with
/// `output_dim` function values per inducing input. The covariance is carried
/// as a lower-triangular Cholesky factor L with Σ = L Lᵀ; all updates
/// manipulate L directly so positive definiteness survives round-off.
struct AugmentedBelief {
  int n_x = 0;                 ///< latent state dimension
  Hyperparameters hyper;       ///< kernel hyperparameters (fix n_f, n_in)
  InputList inducing_inputs;   ///< ordered inducing inputs Z
  Eigen::VectorXd mean;        ///< [μ; m_u], length n_x + n_f·n_u
  Eigen::MatrixXd chol;        ///< lower-triangular L, Σ = L Lᵀ

  int state_dim() const { return n_x; }
  int output_dim() const { return hyper.output_dim(); }
  int input_dim() const { return hyper.input_dim(); }
  int num_inducing() const { return static_cast<int>(inducing_inputs.size()); }
  int dim() const { return n_x + output_dim() * num_inducing(); }

  /// Row offset of inducing block d in the flat layout.
  int block_offset(int d) const { return n_x + d * output_dim(); }

  Eigen::MatrixXd covariance() const { return chol * chol.transpose(); }

  Eigen::VectorXd state_mean() const { return mean.head(n_x); }
  Eigen::VectorXd inducing_mean() const { return mean.tail(dim() - n_x); }
  Eigen::MatrixXd state_cov() const;       ///< P_t
  Eigen::MatrixXd state_inducing_cov() const;  ///< V_xu
  Eigen::MatrixXd inducing_cov() const;    ///< S_uu

  /// True when L is lower-triangular with strictly positive diagonal.
  bool factor_valid() const;
};

/// Moment blocks of the augmented joint, in dense form.
struct BeliefBlocks {
  Eigen::VectorXd state_mean;        // μ_t
  Eigen::MatrixXd state_cov;         // P_t
  Eigen::MatrixXd cross_cov;         // V_xu
  Eigen::VectorXd inducing_mean;     // m_u
  Eigen::MatrixXd inducing_cov;      // S_uu
};

BeliefBlocks blocks(const AugmentedBelief& b);

/// Start a belief from a Gaussian state prior and an empty inducing set.
AugmentedBelief init_belief(const Eigen::VectorXd& x0_mean, const Eigen::MatrixXd& x0_cov,
                            const Hyperparameters& h);

/// Append one inducing block: Z gains z_new, the mean gains new_mean, and the
/// factor is extended to [[L, 0], [α, β]] where L αᵀ = ζ and
/// β β ᵀ = S_tt - α αᵀ. ζ is the cross-covariance of the existing augmented
/// state with the new block; S_tt is the new block's self-covariance.
void chol_append(AugmentedBelief& b, const Eigen::MatrixXd& zeta, const Eigen::MatrixXd& s_tt,
                 const Eigen::VectorXd& new_mean, const Eigen::VectorXd& z_new);

/// Remove inducing block `block_index`, restoring a valid factor for the
/// marginal over the remaining variables via rank updates on the trailing
/// partition.
void chol_drop(AugmentedBelief& b, int block_index);

// ---- factor-level primitives -------------------------------------------

/// Cholesky factor of a symmetric positive definite matrix (throws
/// NumericalError if the factorization fails).
Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& s);

/// Cholesky with jitter escalation: retries with jitter, 10·jitter, ... up to
/// a relative cap before giving up.
Eigen::MatrixXd cholesky_lower_jittered(const Eigen::MatrixXd& s, double jitter);

/// Any factor D with D Dᵀ = S for symmetric PSD S (Cholesky when PD,
/// eigenvalue-clamped square root otherwise; rank deficiency is fine).
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& s);

/// In-place rank-1 Cholesky update (sign +1) or downdate (sign -1) of a
/// lower-triangular factor. Downdates throw DowndateError when positive
/// definiteness would be lost.
void chol_rank1_update(Eigen::MatrixXd& chol, Eigen::VectorXd v, int sign);

/// Multi-column wrapper: L' L'ᵀ = L Lᵀ + sign · V Vᵀ.
Eigen::MatrixXd chol_rank_update(const Eigen::MatrixXd& chol, const Eigen::MatrixXd& v, int sign);

/// Square-root covariance propagation: returns the lower-triangular factor of
/// Φ L Lᵀ Φᵀ + D_f D_fᵀ via QR of the stacked matrix [(Φ L)ᵀ; D_fᵀ], with the
/// diagonal sign-normalized to be nonnegative.
Eigen::MatrixXd qr_propagate(const Eigen::MatrixXd& chol, const Eigen::MatrixXd& phi,
                             const Eigen::MatrixXd& noise_factor);

}  // namespace rgpssm
