#include "rgpssm/systems.hpp"

#include <cmath>
#include <random>

namespace rgpssm {

using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

double wingrock_delta(double theta, double p, const WingRockParams& params) {
  const auto& w = params.w;
  return w(0) + w(1) * theta + w(2) * p + w(3) * std::abs(theta) * p +
         w(4) * std::abs(p) * p + w(5) * theta * theta;
}

ControlLaw default_wingrock_control(const WingRockParams& params) {
  const double kp = 9.0, kd = 6.0;
  const double amplitude = 0.3, period = 10.0;
  const double l_da = params.l_delta_a;
  return [=](double t, double theta, double p) {
    const double ref = amplitude * (std::sin(2.0 * M_PI * t / period) >= 0.0 ? 1.0 : -1.0);
    return (-kp * (theta - ref) - kd * p) / l_da;
  };
}

WingRockDataset wingrock_simulate(const WingRockParams& params, const ControlLaw& control_law,
                                  double duration, double dt, uint64_t seed) {
  if (dt <= 0.0) throw std::invalid_argument("wingrock_simulate: dt must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  WingRockDataset data;
  data.dt = dt;
  const int steps = static_cast<int>(std::llround(duration / dt));
  double theta = 0.0, p = 0.0;
  for (int k = 0; k < steps; ++k) {
    const double t = k * dt;
    const double delta = wingrock_delta(theta, p, params);
    const double aileron = control_law(t, theta, p);
    data.t.push_back(t);
    data.x_true.emplace_back(theta, p);
    data.delta_true.push_back(delta);
    data.aileron.push_back(aileron);
    data.y.push_back(theta + params.meas_noise_std * noise(rng));
    theta += p * dt;
    p += (params.l_delta_a * aileron + delta) * dt;
  }
  return data;
}

ModelSpec wingrock_modelspec(const WingRockParams& params) {
  ModelSpec m;
  m.n_x = 2;
  m.n_y = 1;
  m.n_f = 1;
  m.n_in = 2;
  const double dt = params.dt;
  const double l_da = params.l_delta_a;
  m.transition = [dt, l_da](const VectorXd& x, const VectorXd& f, const VectorXd& u) {
    VectorXd out(2);
    out(0) = x(0) + x(1) * dt;
    out(1) = x(1) + (l_da * u(0) + f(0)) * dt;
    return out;
  };
  m.measurement = [](const VectorXd& x) { return x.head(1).eval(); };
  m.gp_input = [](const VectorXd& x, const VectorXd&) { return x; };
  m.transition_jac_x = [dt](const VectorXd&, const VectorXd&, const VectorXd&) {
    MatrixXd j(2, 2);
    j << 1.0, dt, 0.0, 1.0;
    return j;
  };
  m.transition_jac_f = [dt](const VectorXd&, const VectorXd&, const VectorXd&) {
    MatrixXd j(2, 1);
    j << 0.0, dt;
    return j;
  };
  m.measurement_jac = [](const VectorXd&) {
    MatrixXd j(1, 2);
    j << 1.0, 0.0;
    return j;
  };
  m.gp_input_jac = [](const VectorXd&, const VectorXd&) { return MatrixXd::Identity(2, 2).eval(); };
  m.sigma_f = 1e-8 * MatrixXd::Identity(2, 2);
  m.sigma_g = params.meas_noise_std * params.meas_noise_std * MatrixXd::Identity(1, 1);
  return m;
}

SwitchingLdsDataset switching_lds_simulate(const SwitchingLdsConfig& config, int steps,
                                           uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  SwitchingLdsDataset data;
  data.c = MatrixXd(config.n_meas, 2);
  if (config.identity_c) {
    data.c.setZero();
    data.c.topLeftCorner(2, 2).setIdentity();
  } else {
    for (int i = 0; i < data.c.size(); ++i) data.c(i / 2, i % 2) = noise(rng);
  }

  Vector2d x = config.x0;
  bool turning = false;
  double center_x = 0.0;
  const double cw = std::cos(config.turn_rate), sw = std::sin(config.turn_rate);
  for (int k = 0; k < steps; ++k) {
    data.x_true.push_back(x);
    VectorXd y = data.c * x;
    for (int i = 0; i < y.size(); ++i) y(i) += config.noise_std * noise(rng);
    data.y.push_back(y);

    if (!turning && std::abs(x(0)) >= config.half_length) {
      turning = true;
      center_x = (x(0) > 0.0 ? config.half_length : -config.half_length);
    } else if (turning && std::abs(x(0)) < config.half_length) {
      turning = false;
    }

    if (turning) {
      const double dx = x(0) - center_x, dy = x(1);
      x(0) = center_x + cw * dx - sw * dy;
      x(1) = sw * dx + cw * dy;
    } else {
      x(0) += (x(1) < 0.0 ? 1.0 : -1.0) * config.straight_speed;
    }
  }
  return data;
}

ModelSpec switching_lds_modelspec(const MatrixXd& c, double meas_noise_std,
                                  double process_noise_var) {
  ModelSpec m;
  m.n_x = 2;
  m.n_y = static_cast<int>(c.rows());
  m.n_f = 2;
  m.n_in = 2;
  m.transition = [](const VectorXd&, const VectorXd& f, const VectorXd&) { return f; };
  m.measurement = [c](const VectorXd& x) { return (c * x).eval(); };
  m.gp_input = [](const VectorXd& x, const VectorXd&) { return x; };
  m.transition_jac_x = [](const VectorXd&, const VectorXd&, const VectorXd&) {
    return MatrixXd::Zero(2, 2).eval();
  };
  m.transition_jac_f = [](const VectorXd&, const VectorXd&, const VectorXd&) {
    return MatrixXd::Identity(2, 2).eval();
  };
  m.measurement_jac = [c](const VectorXd&) { return c; };
  m.gp_input_jac = [](const VectorXd&, const VectorXd&) { return MatrixXd::Identity(2, 2).eval(); };
  m.sigma_f = process_noise_var * MatrixXd::Identity(2, 2);
  m.sigma_g = meas_noise_std * meas_noise_std * MatrixXd::Identity(m.n_y, m.n_y);
  return m;
}

ModelSpec gpr_reduction_modelspec(int gp_input_dim, int out_dim, const MatrixXd& sigma_g) {
  ModelSpec m;
  m.n_x = out_dim;
  m.n_y = out_dim;
  m.n_f = out_dim;
  m.n_in = gp_input_dim;
  m.transition = [](const VectorXd&, const VectorXd& f, const VectorXd&) { return f; };
  m.measurement = [](const VectorXd& x) { return x; };
  m.gp_input = [](const VectorXd&, const VectorXd& c) { return c; };
  m.transition_jac_x = [out_dim](const VectorXd&, const VectorXd&, const VectorXd&) {
    return MatrixXd::Zero(out_dim, out_dim).eval();
  };
  m.transition_jac_f = [out_dim](const VectorXd&, const VectorXd&, const VectorXd&) {
    return MatrixXd::Identity(out_dim, out_dim).eval();
  };
  m.measurement_jac = [out_dim](const VectorXd&) {
    return MatrixXd::Identity(out_dim, out_dim).eval();
  };
  m.gp_input_jac = [gp_input_dim, out_dim](const VectorXd&, const VectorXd&) {
    return MatrixXd::Zero(gp_input_dim, out_dim).eval();
  };
  m.sigma_f = MatrixXd::Zero(out_dim, out_dim);
  m.sigma_g = sigma_g;
  return m;
}

ModelSpec sysid_modelspec(int n_lat, double sigma_f_var, double sigma_g_var) {
  ModelSpec m;
  m.n_x = n_lat;
  m.n_y = 1;
  m.n_f = n_lat;
  m.n_in = n_lat + 1;
  m.transition = [](const VectorXd&, const VectorXd& f, const VectorXd&) { return f; };
  m.measurement = [](const VectorXd& x) { return x.head(1).eval(); };
  m.gp_input = [n_lat](const VectorXd& x, const VectorXd& u) {
    VectorXd z(n_lat + 1);
    z << x, u(0);
    return z;
  };
  m.transition_jac_x = [n_lat](const VectorXd&, const VectorXd&, const VectorXd&) {
    return MatrixXd::Zero(n_lat, n_lat).eval();
  };
  m.transition_jac_f = [n_lat](const VectorXd&, const VectorXd&, const VectorXd&) {
    return MatrixXd::Identity(n_lat, n_lat).eval();
  };
  m.measurement_jac = [n_lat](const VectorXd&) {
    MatrixXd j = MatrixXd::Zero(1, n_lat);
    j(0, 0) = 1.0;
    return j;
  };
  m.gp_input_jac = [n_lat](const VectorXd&, const VectorXd&) {
    MatrixXd j = MatrixXd::Zero(n_lat + 1, n_lat);
    j.topRows(n_lat).setIdentity();
    return j;
  };
  m.sigma_f = sigma_f_var * MatrixXd::Identity(n_lat, n_lat);
  m.sigma_g = sigma_g_var * MatrixXd::Identity(1, 1);
  return m;
}

void seed_inducing_point(AugmentedBelief& b, const VectorXd& z, const VectorXd& mean_block) {
  const int n_f = b.output_dim();
  if (mean_block.size() != n_f)
    throw std::invalid_argument("seed_inducing_point: mean block size mismatch");
  if (b.num_inducing() != 0)
    throw std::invalid_argument("seed_inducing_point: inducing set is not empty");
  const MatrixXd zeta = MatrixXd::Zero(b.dim(), n_f);
  const MatrixXd s_tt = b.hyper.signal_variances().asDiagonal();
  chol_append(b, zeta, s_tt, mean_block, z);
}

void seed_sysid_inducing_point(AugmentedBelief& b, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.1);
  VectorXd z(b.input_dim());
  for (int i = 0; i < z.size(); ++i) z(i) = noise(rng);
  VectorXd mean_block(b.output_dim());
  for (int i = 0; i < mean_block.size(); ++i) mean_block(i) = noise(rng);
  seed_inducing_point(b, z, mean_block);
}

}  // namespace rgpssm
