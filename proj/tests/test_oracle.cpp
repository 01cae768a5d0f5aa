#include <doctest.h>

#include "rgpssm/oracle.hpp"
#include "test_support.hpp"

using namespace rgpssm;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using test_support::max_abs_diff;
using test_support::Rng;

TEST_CASE("dense and square-root filters track each other") {
  Rng rng(139);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const int n_x = rng.integer(1, 4);
    const int n_f = rng.integer(1, 2);
    const int n_y = rng.integer(1, n_x);
    auto sys = test_support::random_system(rng, n_x, n_f, n_y);
    const Hyperparameters h = test_support::random_hyper(rng, n_x, n_f);

    auto b = init_belief(rng.vector(n_x, 0.5), MatrixXd::Identity(n_x, n_x), h);
    auto db = oracle::dense_init(b.mean, b.covariance(), h);
    db.n_x = n_x;

    FilterConfig cfg;
    cfg.budget = 10;
    cfg.hyperopt = false;

    VectorXd x_true = rng.vector(n_x, 0.5);
    for (int t = 0; t < 10; ++t) {
      x_true = sys.model.transition(x_true, sys.true_fn(x_true), VectorXd());
      VectorXd y = sys.model.measurement(x_true) + 0.2 * rng.vector(n_y);
      const VectorXd* y_ptr = (t % 4 == 3) ? nullptr : &y;
      const auto r1 = step(b, VectorXd(), y_ptr, sys.model, cfg, nullptr);
      const auto r2 = oracle::dense_step(db, VectorXd(), y_ptr, sys.model, cfg, nullptr);
      CHECK(r1.added == r2.added);
      CHECK(r1.discarded == r2.discarded);
      worst = std::max(worst, (b.mean - db.mean).cwiseAbs().maxCoeff());
      worst = std::max(worst, max_abs_diff(b.covariance(), db.cov));
    }
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("dense and square-root filters agree with hyperparameter adaptation") {
  Rng rng(141);
  auto sys = test_support::random_system(rng, 2, 1, 1);
  const Hyperparameters h = test_support::random_hyper(rng, 2, 1);
  auto b = init_belief(rng.vector(2, 0.5), MatrixXd::Identity(2, 2), h);
  auto db = oracle::dense_init(b.mean, b.covariance(), h);

  FilterConfig cfg;
  cfg.budget = 6;
  cfg.hyperopt = true;
  AdamState adam1 = AdamState::init(h.size());
  AdamState adam2 = AdamState::init(h.size());

  VectorXd x_true = rng.vector(2, 0.5);
  double worst = 0.0;
  for (int t = 0; t < 30; ++t) {
    x_true = sys.model.transition(x_true, sys.true_fn(x_true), VectorXd());
    VectorXd y = sys.model.measurement(x_true) + 0.2 * rng.vector(1);
    step(b, VectorXd(), &y, sys.model, cfg, &adam1);
    oracle::dense_step(db, VectorXd(), &y, sys.model, cfg, &adam2);
    worst = std::max(worst, (b.mean - db.mean).cwiseAbs().maxCoeff());
    worst = std::max(worst, max_abs_diff(b.covariance(), db.cov));
    worst = std::max(worst, (b.hyper.flat() - db.hyper.flat()).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-8);  // the two routes re-factorize differently
}

TEST_CASE("gaussian_kl") {
  Rng rng(149);
  SUBCASE("identical distributions have zero divergence") {
    const MatrixXd s = rng.spd(3);
    const VectorXd m = rng.vector(3);
    CHECK(oracle::gaussian_kl(m, s, m, s) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("unit-variance scalars with unit mean gap") {
    const MatrixXd eye = MatrixXd::Identity(1, 1);
    CHECK(oracle::gaussian_kl(VectorXd::Zero(1), eye, VectorXd::Ones(1), eye) ==
          doctest::Approx(0.5));
  }
  SUBCASE("matches Gauss-Hermite quadrature on a random 2-d instance") {
    const VectorXd mp = Eigen::Vector2d(0.3, -0.2);
    const VectorXd mq = Eigen::Vector2d(-0.1, 0.4);
    MatrixXd sp(2, 2), sq(2, 2);
    sp << 1.0, 0.3, 0.3, 0.8;
    sq << 1.2, -0.2, -0.2, 0.9;

    // E_p[log p - log q] by a tensor-product Hermite rule
    const int nodes = 40;
    std::vector<double> xs(nodes), ws(nodes);
    // Golub-Welsch for Hermite weights via the Jacobi matrix
    {
      MatrixXd jac = MatrixXd::Zero(nodes, nodes);
      for (int i = 1; i < nodes; ++i) {
        const double off = std::sqrt(i / 2.0);
        jac(i, i - 1) = off;
        jac(i - 1, i) = off;
      }
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(jac);
      for (int i = 0; i < nodes; ++i) {
        xs[i] = es.eigenvalues()(i);
        const double v0 = es.eigenvectors()(0, i);
        ws[i] = v0 * v0 * std::sqrt(M_PI);
      }
    }
    const MatrixXd lp = Eigen::LLT<MatrixXd>(sp).matrixL();
    auto log_density = [](const VectorXd& x, const VectorXd& mean, const MatrixXd& cov) {
      const VectorXd d = x - mean;
      const double q = d.dot(cov.inverse() * d);
      return -0.5 * (q + std::log(cov.determinant()) + 2.0 * std::log(2.0 * M_PI));
    };
    double kl_quad = 0.0;
    for (int i = 0; i < nodes; ++i)
      for (int j = 0; j < nodes; ++j) {
        const VectorXd xi =
            mp + std::sqrt(2.0) * (lp * Eigen::Vector2d(xs[i], xs[j]));
        kl_quad += ws[i] * ws[j] / M_PI *
                   (log_density(xi, mp, sp) - log_density(xi, mq, sq));
      }
    CHECK(oracle::gaussian_kl(mp, sp, mq, sq) ==
          doctest::Approx(kl_quad).epsilon(1e-4));
  }
  SUBCASE("nonnegative on random pairs") {
    for (int trial = 0; trial < 50; ++trial) {
      const int n = rng.integer(1, 4);
      const double kl = oracle::gaussian_kl(rng.vector(n), rng.spd(n), rng.vector(n),
                                            rng.spd(n));
      CHECK(kl >= -1e-12);
    }
  }
  SUBCASE("rejects indefinite covariance") {
    MatrixXd bad = -MatrixXd::Identity(2, 2);
    CHECK_THROWS(oracle::gaussian_kl(VectorXd::Zero(2), bad, VectorXd::Zero(2),
                                     MatrixXd::Identity(2, 2)));
  }
}

TEST_CASE("exact_gpr") {
  Rng rng(151);
  const Hyperparameters h = Hyperparameters::isotropic(1, 1, 1.0, 2.0);
  InputList x;
  VectorXd y(3);
  for (int i = 0; i < 3; ++i) {
    x.push_back(VectorXd::Constant(1, static_cast<double>(i)));
    y(i) = std::sin(i);
  }
  SUBCASE("zero-noise query at a training input interpolates") {
    const auto post = oracle::exact_gpr(x, y, MatrixXd::Zero(1, 1), h, {x[1]});
    CHECK(post.mean(0) == doctest::Approx(y(1)).epsilon(1e-8));
    CHECK(post.cov(0, 0) < 1e-8);
  }
  SUBCASE("distant query reverts to the prior") {
    const auto post =
        oracle::exact_gpr(x, y, 0.01 * MatrixXd::Identity(1, 1), h,
                          {VectorXd::Constant(1, 100.0)});
    CHECK(post.mean(0) == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(post.cov(0, 0) == doctest::Approx(2.0).epsilon(1e-10));
  }
}

TEST_CASE("fd_gradient") {
  SUBCASE("linear functional is exact") {
    const VectorXd a = Eigen::Vector3d(1.0, -2.0, 0.5);
    const VectorXd g = oracle::fd_gradient(
        [&](const VectorXd& x) { return a.dot(x); }, VectorXd::Zero(3), 1e-6);
    CHECK((g - a).cwiseAbs().maxCoeff() < 1e-9);
  }
  SUBCASE("quadratic form") {
    const VectorXd g = oracle::fd_gradient(
        [](const VectorXd& x) { return x.squaredNorm(); }, VectorXd::Ones(2), 1e-6);
    CHECK(g(0) == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(g(1) == doctest::Approx(2.0).epsilon(1e-8));
  }
}

TEST_CASE("offline_gpr_fit") {
  Rng rng(157);
  SUBCASE("recovers hyperparameters of a synthetic draw") {
    const Hyperparameters h_true = Hyperparameters::isotropic(1, 1, 0.8, 1.5);
    const int n = 60;
    InputList z;
    for (int i = 0; i < n; ++i) z.push_back(VectorXd::Constant(1, -3.0 + 6.0 * i / (n - 1)));
    MatrixXd k = k_matrix(z, z, h_true).full();
    k.diagonal().array() += 1e-10;
    const VectorXd f = cholesky_lower(k) * rng.vector(n);
    VectorXd y = f;
    for (int i = 0; i < n; ++i) y(i) += 0.05 * rng.normal();

    const Hyperparameters fit = oracle::offline_gpr_fit(
        z, y, 1, Hyperparameters::isotropic(1, 1, 2.0, 1.0), 0.0025);
    CHECK(std::abs(fit.log_length_scales(0) - h_true.log_length_scales(0)) < 0.3);
  }
  SUBCASE("duplicate samples do not break the fit") {
    InputList z;
    VectorXd y(12);
    for (int i = 0; i < 12; ++i) {
      z.push_back(VectorXd::Constant(1, static_cast<double>(i % 4)));
      y(i) = std::cos(i % 4);
    }
    const Hyperparameters fit =
        oracle::offline_gpr_fit(z, y, 1, Hyperparameters::isotropic(1, 1), 1e-3);
    CHECK(fit.finite());
  }
  SUBCASE("deterministic for identical inputs") {
    InputList z;
    VectorXd y(10);
    for (int i = 0; i < 10; ++i) {
      z.push_back(VectorXd::Constant(1, 0.37 * i));
      y(i) = std::sin(0.37 * i);
    }
    const auto f1 = oracle::offline_gpr_fit(z, y, 1, Hyperparameters::isotropic(1, 1), 1e-4);
    const auto f2 = oracle::offline_gpr_fit(z, y, 1, Hyperparameters::isotropic(1, 1), 1e-4);
    CHECK(f1.flat() == f2.flat());
  }
}
