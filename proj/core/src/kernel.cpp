#include "rgpssm/kernel.hpp"

#include <cmath>
#include <stdexcept>

namespace rgpssm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd Hyperparameters::flat() const {
  VectorXd v(size());
  v << log_length_scales, log_signal_variances;
  return v;
}

Hyperparameters Hyperparameters::from_flat(const VectorXd& v, int n_in, int n_f) {
  if (v.size() != n_in + n_f)
    throw std::invalid_argument("Hyperparameters::from_flat: size mismatch");
  Hyperparameters h;
  h.log_length_scales = v.head(n_in);
  h.log_signal_variances = v.tail(n_f);
  return h;
}

Hyperparameters Hyperparameters::isotropic(int n_in, int n_f, double length_scale,
                                           double signal_variance) {
  Hyperparameters h;
  h.log_length_scales = VectorXd::Constant(n_in, std::log(length_scale));
  h.log_signal_variances = VectorXd::Constant(n_f, std::log(signal_variance));
  return h;
}

bool Hyperparameters::finite() const {
  return log_length_scales.allFinite() && log_signal_variances.allFinite();
}

MatrixXd KernelBlock::full() const {
  const Eigen::Index nf = output_scale.size();
  MatrixXd out(base.rows() * nf, base.cols() * nf);
  out.setZero();
  for (Eigen::Index i = 0; i < base.rows(); ++i)
    for (Eigen::Index j = 0; j < base.cols(); ++j)
      out.block(i * nf, j * nf, nf, nf).diagonal() = base(i, j) * output_scale;
  return out;
}

double k_base(const VectorXd& z, const VectorXd& z_prime, const Hyperparameters& h) {
  if (z.size() != h.input_dim() || z_prime.size() != h.input_dim())
    throw std::invalid_argument("k_base: input dimension mismatch");
  const VectorXd inv_l2 = (-2.0 * h.log_length_scales).array().exp();
  const double q = ((z - z_prime).array().square() * inv_l2.array()).sum();
  return std::exp(-0.5 * q);
}

KernelBlock k_matrix(const InputList& a, const InputList& b, const Hyperparameters& h) {
  KernelBlock blk;
  blk.output_scale = h.signal_variances();
  blk.base.resize(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  const VectorXd inv_l2 = (-2.0 * h.log_length_scales).array().exp();
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != h.input_dim())
      throw std::invalid_argument("k_matrix: input dimension mismatch");
    for (size_t j = 0; j < b.size(); ++j) {
      if (b[j].size() != h.input_dim())
        throw std::invalid_argument("k_matrix: input dimension mismatch");
      const double q = ((a[i] - b[j]).array().square() * inv_l2.array()).sum();
      blk.base(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::exp(-0.5 * q);
    }
  }
  return blk;
}

MatrixXd k_input_grad(const VectorXd& z, const InputList& zs, const Hyperparameters& h) {
  if (z.size() != h.input_dim())
    throw std::invalid_argument("k_input_grad: input dimension mismatch");
  const VectorXd inv_l2 = (-2.0 * h.log_length_scales).array().exp();
  MatrixXd g(h.input_dim(), static_cast<Eigen::Index>(zs.size()));
  for (size_t j = 0; j < zs.size(); ++j) {
    const double k = k_base(z, zs[j], h);
    g.col(static_cast<Eigen::Index>(j)) = k * (inv_l2.array() * (zs[j] - z).array()).matrix();
  }
  return g;
}

MatrixXd k_theta_grad(const InputList& a, const InputList& b, const Hyperparameters& h, int j) {
  if (j < 0 || j >= h.size())
    throw std::out_of_range("k_theta_grad: hyperparameter index out of range");
  if (j >= h.input_dim()) {
    // d(diag σ²)/d(log σ_i²): σ_i² in slot i, zero elsewhere.
    const int i = j - h.input_dim();
    MatrixXd d = MatrixXd::Zero(h.output_dim(), h.output_dim());
    d(i, i) = std::exp(h.log_signal_variances(i));
    return d;
  }
  const KernelBlock blk = k_matrix(a, b, h);
  const double inv_l2 = std::exp(-2.0 * h.log_length_scales(j));
  MatrixXd g(blk.base.rows(), blk.base.cols());
  for (size_t r = 0; r < a.size(); ++r)
    for (size_t c = 0; c < b.size(); ++c) {
      const double d = a[r](j) - b[c](j);
      g(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          blk.base(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * d * d * inv_l2;
    }
  return g;
}

MatrixXd k_theta_grad_full(const InputList& a, const InputList& b,
                           const Hyperparameters& h, int j) {
  if (j < 0 || j >= h.size())
    throw std::out_of_range("k_theta_grad_full: hyperparameter index out of range");
  KernelBlock blk;
  if (j < h.input_dim()) {
    blk.base = k_theta_grad(a, b, h, j);
    blk.output_scale = h.signal_variances();
  } else {
    blk.base = k_matrix(a, b, h).base;
    blk.output_scale = VectorXd::Zero(h.output_dim());
    const int i = j - h.input_dim();
    blk.output_scale(i) = std::exp(h.log_signal_variances(i));
  }
  return blk.full();
}

double kernel_jitter(const Hyperparameters& h) {
  return 1e-10 * h.signal_variances().maxCoeff();
}

}  // namespace rgpssm
