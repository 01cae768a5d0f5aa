#include "rgpssm/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace rgpssm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd numeric_jacobian(const std::function<VectorXd(const VectorXd&)>& fn,
                          const VectorXd& x, double scale) {
  // cube-root step balances truncation and round-off for central differences
  if (scale <= 0.0) scale = std::cbrt(std::numeric_limits<double>::epsilon());
  const VectorXd f0 = fn(x);
  MatrixXd jac(f0.size(), x.size());
  VectorXd xp = x, xm = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double step = scale * (1.0 + std::abs(x(i)));
    xp(i) = x(i) + step;
    xm(i) = x(i) - step;
    const VectorXd fp = fn(xp);
    const VectorXd fm = fn(xm);
    if (!fp.allFinite() || !fm.allFinite())
      throw std::runtime_error("numeric_jacobian: non-finite function evaluation");
    jac.col(i) = (fp - fm) / (2.0 * step);
    xp(i) = x(i);
    xm(i) = x(i);
  }
  return jac;
}

MatrixXd ModelSpec::jac_x(const VectorXd& x, const VectorXd& f, const VectorXd& control) const {
  if (transition_jac_x) return transition_jac_x(x, f, control);
  return numeric_jacobian([&](const VectorXd& xi) { return transition(xi, f, control); }, x);
}

MatrixXd ModelSpec::jac_f(const VectorXd& x, const VectorXd& f, const VectorXd& control) const {
  if (transition_jac_f) return transition_jac_f(x, f, control);
  return numeric_jacobian([&](const VectorXd& fi) { return transition(x, fi, control); }, f);
}

MatrixXd ModelSpec::jac_g(const VectorXd& x) const {
  if (measurement_jac) return measurement_jac(x);
  return numeric_jacobian([&](const VectorXd& xi) { return measurement(xi); }, x);
}

MatrixXd ModelSpec::jac_h(const VectorXd& x, const VectorXd& control) const {
  if (gp_input_jac) return gp_input_jac(x, control);
  return numeric_jacobian([&](const VectorXd& xi) { return gp_input(xi, control); }, x);
}

void ModelSpec::validate() const {
  if (n_x <= 0 || n_y <= 0 || n_f <= 0 || n_in <= 0)
    throw std::invalid_argument("ModelSpec: dimensions must be positive");
  if (!transition || !measurement || !gp_input)
    throw std::invalid_argument("ModelSpec: transition, measurement, gp_input are required");
  if (sigma_f.rows() != n_x || sigma_f.cols() != n_x)
    throw std::invalid_argument("ModelSpec: sigma_f must be n_x by n_x");
  if (sigma_g.rows() != n_y || sigma_g.cols() != n_y)
    throw std::invalid_argument("ModelSpec: sigma_g must be n_y by n_y");
  if (!sigma_f.isApprox(sigma_f.transpose()) || !sigma_g.isApprox(sigma_g.transpose()))
    throw std::invalid_argument("ModelSpec: noise covariances must be symmetric");
}

}  // namespace rgpssm
