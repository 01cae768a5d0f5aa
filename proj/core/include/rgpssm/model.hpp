#pragma once

#include <functional>
#include <Eigen/Dense>

namespace rgpssm {

/// Central-difference Jacobian of fn at x, one column per input coordinate.
/// The step per coordinate is scale·(1 + |x_i|).
Eigen::MatrixXd numeric_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& fn,
                                 const Eigen::VectorXd& x, double scale = -1.0);

/// User-supplied system structure: known transition skeleton F with an
/// unknown component f, known measurement g, and the map from (state,
/// control) to the GP input. Jacobian providers are optional; missing ones
/// fall back to central differences.
struct ModelSpec {
  int n_x = 0;   ///< state dimension
  int n_y = 0;   ///< measurement dimension
  int n_f = 0;   ///< GP output dimension
  int n_in = 0;  ///< GP input dimension

  using Transition =
      std::function<Eigen::VectorXd(const Eigen::VectorXd& x, const Eigen::VectorXd& f,
                                    const Eigen::VectorXd& control)>;
  using Measurement = std::function<Eigen::VectorXd(const Eigen::VectorXd& x)>;
  using GpInput = std::function<Eigen::VectorXd(const Eigen::VectorXd& x,
                                                const Eigen::VectorXd& control)>;
  using TransitionJac =
      std::function<Eigen::MatrixXd(const Eigen::VectorXd& x, const Eigen::VectorXd& f,
                                    const Eigen::VectorXd& control)>;
  using MeasurementJac = std::function<Eigen::MatrixXd(const Eigen::VectorXd& x)>;
  using GpInputJac = std::function<Eigen::MatrixXd(const Eigen::VectorXd& x,
                                                   const Eigen::VectorXd& control)>;

  Transition transition;    ///< F(x, f, control)
  Measurement measurement;  ///< g(x)
  GpInput gp_input;         ///< h(x, control) -> z

  TransitionJac transition_jac_x;   ///< ∂F/∂x with f held fixed (optional)
  TransitionJac transition_jac_f;   ///< ∂F/∂f (optional)
  MeasurementJac measurement_jac;   ///< ∂g/∂x (optional)
  GpInputJac gp_input_jac;          ///< ∂h/∂x (optional)

  Eigen::MatrixXd sigma_f;  ///< process noise covariance, PSD
  Eigen::MatrixXd sigma_g;  ///< measurement noise covariance, PD

  /// Jacobians with FD fallback.
  Eigen::MatrixXd jac_x(const Eigen::VectorXd& x, const Eigen::VectorXd& f,
                        const Eigen::VectorXd& control) const;
  Eigen::MatrixXd jac_f(const Eigen::VectorXd& x, const Eigen::VectorXd& f,
                        const Eigen::VectorXd& control) const;
  Eigen::MatrixXd jac_g(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd jac_h(const Eigen::VectorXd& x, const Eigen::VectorXd& control) const;

  /// Throws std::invalid_argument when dimensions or noise shapes are
  /// inconsistent.
  void validate() const;
};

}  // namespace rgpssm
