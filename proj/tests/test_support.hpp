#pragma once

#include <random>
#include <Eigen/Dense>

#include "rgpssm/belief.hpp"
#include "rgpssm/model.hpp"

namespace test_support {

struct Rng {
  std::mt19937_64 gen;
  explicit Rng(uint64_t seed) : gen(seed) {}
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(gen);
  }
  double normal(double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(gen); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen); }
  Eigen::VectorXd vector(int n, double sd = 1.0) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = normal(sd);
    return v;
  }
  Eigen::MatrixXd matrix(int r, int c, double sd = 1.0) {
    Eigen::MatrixXd m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = normal(sd);
    return m;
  }
  Eigen::MatrixXd spd(int n, double diag_boost = 0.5) {
    const Eigen::MatrixXd a = matrix(n, n);
    return a * a.transpose() + diag_boost * n * Eigen::MatrixXd::Identity(n, n);
  }
  Eigen::MatrixXd lower_factor(int n, double offdiag_sd = 0.2) {
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      l(i, i) = uniform(0.5, 1.5);
      for (int j = 0; j < i; ++j) l(i, j) = normal(offdiag_sd);
    }
    return l;
  }
};

inline rgpssm::Hyperparameters random_hyper(Rng& rng, int n_in, int n_f) {
  rgpssm::Hyperparameters h;
  h.log_length_scales.resize(n_in);
  h.log_signal_variances.resize(n_f);
  for (int i = 0; i < n_in; ++i) h.log_length_scales(i) = std::log(rng.uniform(0.7, 2.0));
  for (int i = 0; i < n_f; ++i) h.log_signal_variances(i) = std::log(rng.uniform(0.5, 2.0));
  return h;
}

inline rgpssm::InputList spread_inputs(Rng& rng, int n_u, int n_in,
                                       const rgpssm::Hyperparameters& h,
                                       double max_corr = 0.9) {
  // keep pairwise base-kernel correlations moderate, as the novelty gate does
  rgpssm::InputList z;
  int guard = 0;
  while (static_cast<int>(z.size()) < n_u && guard++ < 10000) {
    Eigen::VectorXd cand = rng.vector(n_in, 1.5);
    bool ok = true;
    for (const auto& zi : z)
      if (rgpssm::k_base(cand, zi, h) > max_corr) ok = false;
    if (ok) z.push_back(cand);
  }
  return z;
}

inline rgpssm::AugmentedBelief random_belief(Rng& rng, int n_x, int n_f, int n_in, int n_u,
                                             double max_corr = 0.9,
                                             double offdiag_sd = 0.2) {
  rgpssm::AugmentedBelief b;
  b.n_x = n_x;
  b.hyper = random_hyper(rng, n_in, n_f);
  b.inducing_inputs = spread_inputs(rng, n_u, n_in, b.hyper, max_corr);
  const int n = n_x + n_f * n_u;
  b.mean = rng.vector(n);
  b.chol = rng.lower_factor(n, offdiag_sd);
  return b;
}

/// Random stable affine system F = T x + W f, g = C x, z = x, with analytic
/// Jacobians and a smooth reference function for data generation.
struct RandomSystem {
  rgpssm::ModelSpec model;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> true_fn;
};

inline RandomSystem random_system(Rng& rng, int n_x, int n_f, int n_y) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  MatrixXd t = rng.matrix(n_x, n_x);
  t *= 0.85 / std::max(t.cwiseAbs().rowwise().sum().maxCoeff(), 1e-6);
  const MatrixXd w = rng.matrix(n_x, n_f, 0.3);
  const MatrixXd c = rng.matrix(n_y, n_x);

  RandomSystem sys;
  rgpssm::ModelSpec& m = sys.model;
  m.n_x = n_x;
  m.n_y = n_y;
  m.n_f = n_f;
  m.n_in = n_x;
  m.transition = [t, w](const VectorXd& x, const VectorXd& f, const VectorXd&) {
    return (t * x + w * f).eval();
  };
  m.measurement = [c](const VectorXd& x) { return (c * x).eval(); };
  m.gp_input = [](const VectorXd& x, const VectorXd&) { return x; };
  m.transition_jac_x = [t](const VectorXd&, const VectorXd&, const VectorXd&) { return t; };
  m.transition_jac_f = [w](const VectorXd&, const VectorXd&, const VectorXd&) { return w; };
  m.measurement_jac = [c](const VectorXd&) { return c; };
  m.gp_input_jac = [n_x](const VectorXd&, const VectorXd&) {
    return MatrixXd::Identity(n_x, n_x).eval();
  };
  m.sigma_f = 0.01 * MatrixXd::Identity(n_x, n_x);
  m.sigma_g = 0.04 * MatrixXd::Identity(n_y, n_y);
  sys.true_fn = [n_f](const VectorXd& z) {
    VectorXd f(n_f);
    for (int i = 0; i < n_f; ++i) f(i) = std::sin(z(i % z.size()) + 0.3 * i);
    return f;
  };
  return sys;
}

inline double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

/// A hyperparameter change is admissible only if the adjusted joint precision
/// stays comfortably positive definite.
inline bool hyper_step_valid(const rgpssm::AugmentedBelief& b, const Eigen::VectorXd& delta) {
  using Eigen::MatrixXd;
  const auto h_new = rgpssm::Hyperparameters::from_flat(b.hyper.flat() + delta,
                                                        b.input_dim(), b.output_dim());
  auto kernel_inv = [&](const rgpssm::Hyperparameters& h) {
    rgpssm::KernelBlock kb = rgpssm::k_matrix(b.inducing_inputs, b.inducing_inputs, h);
    kb.base.diagonal().array() += 1e-10;
    return kb.full().inverse().eval();
  };
  const MatrixXd e = kernel_inv(h_new) - kernel_inv(b.hyper);
  MatrixXd prec = b.covariance().inverse();
  const int m = b.dim() - b.n_x;
  prec.bottomRightCorner(m, m) += e;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (prec + MatrixXd(prec.transpose())));
  return es.eigenvalues().minCoeff() > 1e-4;
}

}  // namespace test_support
