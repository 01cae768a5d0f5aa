#include "rgpssm/belief.hpp"

#include <cmath>

namespace rgpssm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd AugmentedBelief::state_cov() const {
  const MatrixXd lx = chol.topRows(n_x);
  return lx * lx.transpose();
}

MatrixXd AugmentedBelief::state_inducing_cov() const {
  const int m = dim() - n_x;
  return (chol.topRows(n_x) * chol.bottomRows(m).transpose());
}

MatrixXd AugmentedBelief::inducing_cov() const {
  const int m = dim() - n_x;
  const MatrixXd lu = chol.bottomRows(m);
  return lu * lu.transpose();
}

bool AugmentedBelief::factor_valid() const {
  if (chol.rows() != dim() || chol.cols() != dim()) return false;
  for (int i = 0; i < chol.rows(); ++i) {
    if (!(chol(i, i) > 0.0)) return false;
    for (int j = i + 1; j < chol.cols(); ++j)
      if (chol(i, j) != 0.0) return false;
  }
  return true;
}

BeliefBlocks blocks(const AugmentedBelief& b) {
  BeliefBlocks out;
  out.state_mean = b.state_mean();
  out.inducing_mean = b.inducing_mean();
  out.state_cov = b.state_cov();
  out.cross_cov = b.state_inducing_cov();
  out.inducing_cov = b.inducing_cov();
  return out;
}

AugmentedBelief init_belief(const VectorXd& x0_mean, const MatrixXd& x0_cov,
                            const Hyperparameters& h) {
  if (x0_cov.rows() != x0_mean.size() || x0_cov.cols() != x0_mean.size())
    throw std::invalid_argument("init_belief: covariance / mean size mismatch");
  AugmentedBelief b;
  b.n_x = static_cast<int>(x0_mean.size());
  b.hyper = h;
  b.mean = x0_mean;
  b.chol = cholesky_lower(x0_cov);
  return b;
}

MatrixXd cholesky_lower(const MatrixXd& s) {
  Eigen::LLT<MatrixXd> llt(s);
  if (llt.info() != Eigen::Success)
    throw NumericalError("cholesky_lower: matrix is not positive definite");
  return llt.matrixL();
}

MatrixXd cholesky_lower_jittered(const MatrixXd& s, double jitter) {
  Eigen::LLT<MatrixXd> llt(s);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  const double scale = std::max(s.diagonal().cwiseAbs().maxCoeff(), 1.0);
  double j = std::max(jitter, 1e-300);
  const MatrixXd eye = MatrixXd::Identity(s.rows(), s.cols());
  while (j <= 1e-4 * scale) {
    llt.compute(s + j * eye);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    j *= 10.0;
  }
  throw NumericalError("cholesky_lower_jittered: matrix not PD within jitter budget");
}

MatrixXd psd_factor(const MatrixXd& s) {
  Eigen::LLT<MatrixXd> llt(s);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(s);
  const VectorXd lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * lam.asDiagonal();
}

void chol_rank1_update(MatrixXd& chol, VectorXd v, int sign) {
  const Eigen::Index n = chol.rows();
  for (Eigen::Index k = 0; k < n; ++k) {
    const double lkk = chol(k, k);
    const double vk = v(k);
    double r;
    if (sign > 0) {
      r = std::hypot(lkk, vk);
    } else {
      const double d = (lkk - vk) * (lkk + vk);
      if (d <= 0.0) throw DowndateError(static_cast<int>(k));
      r = std::sqrt(d);
    }
    const double c = r / lkk;
    const double s = vk / lkk;
    chol(k, k) = r;
    if (k + 1 < n) {
      auto tail = chol.col(k).segment(k + 1, n - k - 1);
      auto vtail = v.segment(k + 1, n - k - 1);
      if (sign > 0)
        tail = (tail + s * vtail) / c;
      else
        tail = (tail - s * vtail) / c;
      vtail = c * vtail - s * tail;
    }
  }
}

MatrixXd chol_rank_update(const MatrixXd& chol, const MatrixXd& v, int sign) {
  MatrixXd out = chol;
  for (Eigen::Index j = 0; j < v.cols(); ++j) chol_rank1_update(out, v.col(j), sign);
  return out;
}

MatrixXd qr_propagate(const MatrixXd& chol, const MatrixXd& phi, const MatrixXd& noise_factor) {
  const Eigen::Index n = phi.rows();
  MatrixXd stacked(chol.cols() + noise_factor.cols(), n);
  stacked.topRows(chol.cols()) = (phi * chol).transpose();
  stacked.bottomRows(noise_factor.cols()) = noise_factor.transpose();
  Eigen::HouseholderQR<MatrixXd> qr(stacked);
  MatrixXd r = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
  MatrixXd l = r.transpose();
  for (Eigen::Index i = 0; i < n; ++i)
    if (l(i, i) < 0.0) l.col(i) = -l.col(i);
  return l;
}

void chol_append(AugmentedBelief& b, const MatrixXd& zeta, const MatrixXd& s_tt,
                 const VectorXd& new_mean, const VectorXd& z_new) {
  const int n = b.dim();
  const int nf = b.output_dim();
  if (zeta.rows() != n || zeta.cols() != nf)
    throw std::invalid_argument("chol_append: cross-covariance shape mismatch");
  if (s_tt.rows() != nf || s_tt.cols() != nf || new_mean.size() != nf)
    throw std::invalid_argument("chol_append: new-block shape mismatch");

  // α from L αᵀ = ζ, then β β ᵀ = S_tt − α αᵀ.
  const MatrixXd alpha_t =
      b.chol.triangularView<Eigen::Lower>().solve(zeta);  // n × n_f, equals αᵀ
  MatrixXd schur = s_tt - alpha_t.transpose() * alpha_t;
  schur = 0.5 * (schur + schur.transpose());
  MatrixXd beta;
  try {
    beta = cholesky_lower(schur);
  } catch (const NumericalError&) {
    // the Schur complement is PD in exact arithmetic whenever the novelty
    // gate admitted the point; treat failure as round-off and jitter
    beta = cholesky_lower_jittered(schur, kernel_jitter(b.hyper));
  }

  MatrixXd lbar = MatrixXd::Zero(n + nf, n + nf);
  lbar.topLeftCorner(n, n) = b.chol;
  lbar.bottomLeftCorner(nf, n) = alpha_t.transpose();
  lbar.bottomRightCorner(nf, nf) = beta;

  VectorXd mean(n + nf);
  mean << b.mean, new_mean;

  b.chol = std::move(lbar);
  b.mean = std::move(mean);
  b.inducing_inputs.push_back(z_new);
}

void chol_drop(AugmentedBelief& b, int block_index) {
  const int nu = b.num_inducing();
  if (block_index < 0 || block_index >= nu)
    throw std::out_of_range("chol_drop: block index out of range");
  const int nf = b.output_dim();
  const int n = b.dim();
  const int off = b.block_offset(block_index);
  const int ntail = n - off - nf;

  // L = [[A,0,0],[a,b,0],[B,c,C]]; the marginal factor is
  // [[A,0],[B, cholupdate(C, c)]].
  MatrixXd out = MatrixXd::Zero(n - nf, n - nf);
  out.topLeftCorner(off, off) = b.chol.topLeftCorner(off, off);
  if (ntail > 0) {
    out.bottomLeftCorner(ntail, off) = b.chol.bottomLeftCorner(ntail, off);
    MatrixXd c_tail = b.chol.bottomRightCorner(ntail, ntail);
    const MatrixXd c_cols = b.chol.block(off + nf, off, ntail, nf);
    for (int j = 0; j < nf; ++j) chol_rank1_update(c_tail, c_cols.col(j), +1);
    out.bottomRightCorner(ntail, ntail) = c_tail;
  }

  VectorXd mean(n - nf);
  mean << b.mean.head(off), b.mean.tail(ntail);

  b.chol = std::move(out);
  b.mean = std::move(mean);
  b.inducing_inputs.erase(b.inducing_inputs.begin() + block_index);
}

}  // namespace rgpssm
