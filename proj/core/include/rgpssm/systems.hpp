#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rgpssm/belief.hpp"
#include "rgpssm/model.hpp"

namespace rgpssm {

// ---- wing rock ------------------------------------------------------------

/// Wing-rock roll dynamics: θ̇ = p, ṗ = L_δa δ_a + Δ(θ, p), with the
/// polynomial uncertainty Δ fixed to the standard coefficients.
struct WingRockParams {
  double l_delta_a = 3.0;
  Eigen::Matrix<double, 6, 1> w{0.8, 0.2314, 0.6918, -0.6245, 0.0095, 0.0214};
  double dt = 0.02;                              ///< seconds
  double meas_noise_std = 0.2 * M_PI / 180.0;    ///< roll-angle noise, radians
};

/// Δ(θ, p) = W0 + W1 θ + W2 p + W3 |θ| p + W4 |p| p + W5 θ².
double wingrock_delta(double theta, double p, const WingRockParams& params);

struct WingRockDataset {
  std::vector<double> t;
  std::vector<Eigen::Vector2d> x_true;   ///< (θ, p)
  std::vector<double> delta_true;
  std::vector<double> aileron;           ///< δ_a applied over [t, t+dt)
  std::vector<double> y;                 ///< noisy roll-angle measurements
  double dt = 0.02;
};

using ControlLaw = std::function<double(double t, double theta, double p)>;

/// Proportional-derivative tracking of a slow square-wave roll reference;
/// keeps the trajectory bounded while sweeping the (θ, p) plane.
ControlLaw default_wingrock_control(const WingRockParams& params);

/// Euler-discretized simulation with additive measurement noise; fixed seeds
/// give bit-identical datasets.
WingRockDataset wingrock_simulate(const WingRockParams& params, const ControlLaw& control_law,
                                  double duration, double dt, uint64_t seed);

/// Filter-side model: state (θ, p), scalar GP output on the roll-rate
/// derivative, GP input z = (θ, p).
ModelSpec wingrock_modelspec(const WingRockParams& params);

// ---- planar switching-linear limit cycle ----------------------------------

/// Two-regime oval generator: straights translate the state, the curved ends
/// rotate it about (±half_length, 0); a hysteresis rule on the first
/// coordinate switches regimes.
struct SwitchingLdsConfig {
  double straight_speed = 0.15;   ///< displacement per step on straights
  double turn_rate = 0.15;        ///< radians per step on the ends
  double half_length = 1.0;       ///< |x1| where the turns begin
  double radius = 1.0;            ///< straight offset from the centerline
  int n_meas = 4;
  double noise_std = 0.1;
  bool identity_c = false;        ///< first two measurement rows = I (testing)
  Eigen::Vector2d x0{0.0, -1.0};
};

struct SwitchingLdsDataset {
  std::vector<Eigen::Vector2d> x_true;
  std::vector<Eigen::VectorXd> y;
  Eigen::MatrixXd c;   ///< measurement matrix used
};

SwitchingLdsDataset switching_lds_simulate(const SwitchingLdsConfig& config, int steps,
                                           uint64_t seed);

/// Filter-side model for the limit-cycle task: x_{t+1} = f(x_t), y = C x.
ModelSpec switching_lds_modelspec(const Eigen::MatrixXd& c, double meas_noise_std,
                                  double process_noise_var = 1e-6);

// ---- GPR reduction ---------------------------------------------------------

/// Degenerate model x_t = f(c_t) with exogenous GP input, identity
/// measurement and zero process noise; under it the filter reduces to online
/// GP regression.
ModelSpec gpr_reduction_modelspec(int gp_input_dim, int out_dim,
                                  const Eigen::MatrixXd& sigma_g);

// ---- latent system identification ------------------------------------------

/// 4-dimensional latent model x_{t+1} = f(x_t, u_{t+1}) with y = x_1;
/// GP input is the state joined with the scalar control.
ModelSpec sysid_modelspec(int n_lat = 4, double sigma_f_var = 1e-4, double sigma_g_var = 1e-2);

/// Insert one prior-consistent inducing point and nudge its mean block so the
/// state-transition Jacobian is nonzero from the first step.
void seed_inducing_point(AugmentedBelief& b, const Eigen::VectorXd& z,
                         const Eigen::VectorXd& mean_block);

/// Draw the standard initialization for the latent system-identification
/// task: z ~ N(0, 0.1² I), mean block ~ N(0, 0.1² I).
void seed_sysid_inducing_point(AugmentedBelief& b, uint64_t seed);

}  // namespace rgpssm
