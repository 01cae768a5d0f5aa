#include <doctest.h>

#include "rgpssm/belief.hpp"
#include "rgpssm/serialization.hpp"
#include "test_support.hpp"

using namespace rgpssm;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using test_support::max_abs_diff;
using test_support::Rng;

TEST_CASE("init_belief") {
  const Hyperparameters h = Hyperparameters::isotropic(1, 1);
  SUBCASE("identity covariance gives identity factor") {
    const auto b = init_belief(VectorXd::Zero(2), MatrixXd::Identity(2, 2), h);
    CHECK(max_abs_diff(b.chol, MatrixXd::Identity(2, 2)) == 0.0);
    CHECK(b.num_inducing() == 0);
  }
  SUBCASE("scalar square root") {
    const auto b = init_belief(VectorXd::Zero(1), 4.0 * MatrixXd::Identity(1, 1), h);
    CHECK(b.chol(0, 0) == doctest::Approx(2.0));
  }
  SUBCASE("random SPD reconstructs") {
    Rng rng(3);
    const MatrixXd s = rng.spd(4);
    const auto b = init_belief(rng.vector(4), s, h);
    CHECK(max_abs_diff(b.covariance(), s) < 1e-12);
  }
  SUBCASE("rejects non-PD covariance") {
    MatrixXd bad = -MatrixXd::Identity(2, 2);
    CHECK_THROWS_AS(init_belief(VectorXd::Zero(2), bad, h), NumericalError);
  }
}

TEST_CASE("blocks") {
  SUBCASE("empty inducing set") {
    Rng rng(5);
    const MatrixXd s = rng.spd(3);
    const auto b = init_belief(rng.vector(3), s, Hyperparameters::isotropic(2, 1));
    const auto blk = blocks(b);
    CHECK(blk.inducing_mean.size() == 0);
    CHECK(blk.cross_cov.cols() == 0);
    CHECK(blk.inducing_cov.rows() == 0);
    CHECK(max_abs_diff(blk.state_cov, s) < 1e-12);
  }
  SUBCASE("identity covariance with one block") {
    AugmentedBelief b;
    b.n_x = 1;
    b.hyper = Hyperparameters::isotropic(1, 1);
    b.inducing_inputs = {VectorXd::Zero(1)};
    b.mean = Eigen::Vector2d(0.5, -0.5);
    b.chol = MatrixXd::Identity(2, 2);
    const auto blk = blocks(b);
    CHECK(blk.state_cov(0, 0) == doctest::Approx(1.0));
    CHECK(blk.cross_cov(0, 0) == doctest::Approx(0.0));
    CHECK(blk.inducing_cov(0, 0) == doctest::Approx(1.0));
    CHECK(blk.inducing_mean(0) == doctest::Approx(-0.5));
  }
  SUBCASE("random factor matches dense partition") {
    Rng rng(7);
    const auto b = test_support::random_belief(rng, 2, 2, 2, 3);
    const MatrixXd sigma = b.covariance();
    const auto blk = blocks(b);
    CHECK(max_abs_diff(blk.state_cov, sigma.topLeftCorner(2, 2)) < 1e-12);
    CHECK(max_abs_diff(blk.cross_cov, sigma.topRightCorner(2, 6)) < 1e-12);
    CHECK(max_abs_diff(blk.inducing_cov, sigma.bottomRightCorner(6, 6)) < 1e-12);
  }
}

TEST_CASE("chol_append") {
  SUBCASE("independent new block") {
    Rng rng(9);
    auto b = test_support::random_belief(rng, 2, 1, 1, 1);
    const int n = b.dim();
    const MatrixXd sigma_before = b.covariance();
    chol_append(b, MatrixXd::Zero(n, 1), 3.0 * MatrixXd::Identity(1, 1),
                VectorXd::Zero(1), VectorXd::Zero(1));
    const MatrixXd sigma = b.covariance();
    CHECK(max_abs_diff(sigma.topLeftCorner(n, n), sigma_before) < 1e-12);
    CHECK(sigma(n, n) == doctest::Approx(3.0));
    CHECK(sigma.topRightCorner(n, 1).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("two by two closed form") {
    AugmentedBelief b;
    b.n_x = 1;
    b.hyper = Hyperparameters::isotropic(1, 1);
    b.mean = VectorXd::Zero(1);
    b.chol = MatrixXd::Identity(1, 1);
    chol_append(b, MatrixXd::Constant(1, 1, 0.5), MatrixXd::Identity(1, 1),
                VectorXd::Zero(1), VectorXd::Zero(1));
    CHECK(b.chol(1, 0) == doctest::Approx(0.5));
    CHECK(b.chol(1, 1) == doctest::Approx(std::sqrt(0.75)));
  }
  SUBCASE("random case matches dense augmented covariance") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      const int n_f = rng.integer(1, 2);
      auto b = test_support::random_belief(rng, rng.integer(1, 3), n_f, 2, rng.integer(0, 3));
      const int n = b.dim();
      // a consistent augmented covariance: draw a bigger SPD and carve blocks
      const MatrixXd big = rng.spd(n + n_f);
      AugmentedBelief base = b;
      base.chol = cholesky_lower(big.topLeftCorner(n, n));
      const MatrixXd zeta = big.topRightCorner(n, n_f);
      const MatrixXd s_tt = big.bottomRightCorner(n_f, n_f);
      chol_append(base, zeta, s_tt, rng.vector(n_f), rng.vector(2));
      CHECK(max_abs_diff(base.covariance(), big) < 1e-12);
    }
  }
  SUBCASE("rejects inconsistent augmentation") {
    AugmentedBelief b;
    b.n_x = 1;
    b.hyper = Hyperparameters::isotropic(1, 1);
    b.mean = VectorXd::Zero(1);
    b.chol = MatrixXd::Identity(1, 1);
    // cross-covariance too large for the stated self-covariance
    CHECK_THROWS_AS(chol_append(b, MatrixXd::Constant(1, 1, 5.0),
                                MatrixXd::Identity(1, 1), VectorXd::Zero(1),
                                VectorXd::Zero(1)),
                    NumericalError);
  }
}

TEST_CASE("chol_drop") {
  Rng rng(13);
  SUBCASE("dropping the trailing block truncates") {
    auto b = test_support::random_belief(rng, 2, 1, 1, 3);
    const MatrixXd l_before = b.chol;
    chol_drop(b, 2);
    CHECK(max_abs_diff(b.chol, l_before.topLeftCorner(4, 4)) == 0.0);
  }
  SUBCASE("identity factor, drop middle") {
    AugmentedBelief b;
    b.n_x = 1;
    b.hyper = Hyperparameters::isotropic(1, 1);
    b.inducing_inputs = {VectorXd::Zero(1), VectorXd::Ones(1)};
    b.mean = Eigen::Vector3d(1, 2, 3);
    b.chol = MatrixXd::Identity(3, 3);
    chol_drop(b, 0);
    CHECK(max_abs_diff(b.chol, MatrixXd::Identity(2, 2)) < 1e-14);
    CHECK(b.mean(1) == doctest::Approx(3.0));
  }
  SUBCASE("interior drop matches dense deletion") {
    for (int trial = 0; trial < 20; ++trial) {
      const int n_f = rng.integer(1, 2);
      auto b = test_support::random_belief(rng, 2, n_f, 2, 3);
      const MatrixXd sigma = b.covariance();
      const VectorXd mean = b.mean;
      chol_drop(b, 1);
      const int off = 2 + n_f;
      const int n = static_cast<int>(sigma.rows());
      MatrixXd expect(n - n_f, n - n_f);
      expect.topLeftCorner(off, off) = sigma.topLeftCorner(off, off);
      expect.topRightCorner(off, n - off - n_f) = sigma.topRightCorner(off, n - off - n_f);
      expect.bottomLeftCorner(n - off - n_f, off) = sigma.bottomLeftCorner(n - off - n_f, off);
      expect.bottomRightCorner(n - off - n_f, n - off - n_f) =
          sigma.bottomRightCorner(n - off - n_f, n - off - n_f);
      CHECK(max_abs_diff(b.covariance(), expect) < 1e-12);
      CHECK((b.mean.head(off) - mean.head(off)).cwiseAbs().maxCoeff() == 0.0);
    }
  }
  SUBCASE("index out of range") {
    auto b = test_support::random_belief(rng, 1, 1, 1, 2);
    CHECK_THROWS_AS(chol_drop(b, 2), std::out_of_range);
  }
}

TEST_CASE("chol_rank_update") {
  SUBCASE("diagonal closed-form downdate") {
    MatrixXd l = MatrixXd::Identity(2, 2);
    const MatrixXd v = (MatrixXd(2, 1) << 0.6, 0.0).finished();
    const MatrixXd out = chol_rank_update(l, v, -1);
    CHECK(out(0, 0) == doctest::Approx(0.8));
    CHECK(out(1, 1) == doctest::Approx(1.0));
  }
  SUBCASE("zero vector is a no-op") {
    Rng rng(15);
    const MatrixXd l = rng.lower_factor(4);
    const MatrixXd out = chol_rank_update(l, MatrixXd::Zero(4, 2), -1);
    CHECK(max_abs_diff(out, l) == 0.0);
  }
  SUBCASE("random update matches dense recomputation") {
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
      const int n = rng.integer(2, 6);
      const MatrixXd l = rng.lower_factor(n);
      const MatrixXd v = rng.matrix(n, rng.integer(1, 2), 0.4);
      const MatrixXd up = chol_rank_update(l, v, +1);
      CHECK(max_abs_diff(up * up.transpose(), l * l.transpose() + v * v.transpose()) < 1e-11);
      // downdating what was just added must restore the original covariance
      const MatrixXd down = chol_rank_update(up, v, -1);
      CHECK(max_abs_diff(down * down.transpose(), l * l.transpose()) < 1e-11);
    }
  }
  SUBCASE("downdate failure reports the offending column") {
    MatrixXd l = MatrixXd::Identity(2, 2);
    const MatrixXd v = (MatrixXd(2, 1) << 0.0, 2.0).finished();
    try {
      chol_rank_update(l, v, -1);
      FAIL("expected DowndateError");
    } catch (const DowndateError& e) {
      CHECK(e.column == 1);
    }
  }
}

TEST_CASE("qr_propagate") {
  Rng rng(19);
  SUBCASE("identity propagation returns the factor unchanged") {
    const MatrixXd l = rng.lower_factor(4);
    const MatrixXd out = qr_propagate(l, MatrixXd::Identity(4, 4), MatrixXd::Zero(4, 4));
    CHECK(max_abs_diff(out, l) < 1e-12);
    for (int i = 0; i < 4; ++i) CHECK(out(i, i) > 0.0);
  }
  SUBCASE("scalar closed form") {
    const MatrixXd l = MatrixXd::Identity(1, 1);
    const MatrixXd phi = 0.9 * MatrixXd::Identity(1, 1);
    const MatrixXd noise = std::sqrt(0.1) * MatrixXd::Identity(1, 1);
    const MatrixXd out = qr_propagate(l, phi, noise);
    CHECK(out(0, 0) == doctest::Approx(std::sqrt(0.91)));
  }
  SUBCASE("random propagation matches dense arithmetic") {
    for (int trial = 0; trial < 50; ++trial) {
      const int n = rng.integer(1, 6);
      const MatrixXd l = rng.lower_factor(n);
      const MatrixXd phi = rng.matrix(n, n);
      const MatrixXd noise = rng.lower_factor(n);
      const MatrixXd out = qr_propagate(l, phi, noise);
      const MatrixXd expect =
          phi * l * l.transpose() * phi.transpose() + noise * noise.transpose();
      CHECK(max_abs_diff(out * out.transpose(), expect) < 1e-11);
    }
  }
}

TEST_CASE("factor operations preserve reconstruction on random sequences") {
  Rng rng(23);
  // 200 random instances per operation via mixed trials
  for (int trial = 0; trial < 200; ++trial) {
    const int n_f = rng.integer(1, 2);
    auto b = test_support::random_belief(rng, rng.integer(1, 3), n_f, 2, rng.integer(1, 4));
    const int n = b.dim();

    const MatrixXd big = rng.spd(n + n_f);
    AugmentedBelief appended = b;
    appended.chol = cholesky_lower(big.topLeftCorner(n, n));
    const MatrixXd sigma_before = appended.covariance();
    const VectorXd mean_before = appended.mean;
    chol_append(appended, big.topRightCorner(n, n_f), big.bottomRightCorner(n_f, n_f),
                rng.vector(n_f), rng.vector(2));
    const double rel =
        (appended.covariance() - big).norm() / big.norm();
    CHECK(rel < 1e-10);

    // appending then dropping the same block is the identity on the moments
    chol_drop(appended, appended.num_inducing() - 1);
    CHECK(max_abs_diff(appended.covariance(), sigma_before) < 1e-10);
    CHECK((appended.mean - mean_before).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("factor diagonal stays positive over interleaved operations") {
  Rng rng(29);
  auto b = test_support::random_belief(rng, 2, 1, 2, 2);
  for (int t = 0; t < 1000; ++t) {
    const int n = b.dim();
    const int action = rng.integer(0, 3);
    if (action == 0 && b.num_inducing() < 8) {
      const MatrixXd big = rng.spd(n + 1);
      b.chol = cholesky_lower(big.topLeftCorner(n, n));
      chol_append(b, big.topRightCorner(n, 1), big.bottomRightCorner(1, 1), rng.vector(1),
                  rng.vector(2));
    } else if (action == 1 && b.num_inducing() > 0) {
      chol_drop(b, rng.integer(0, b.num_inducing() - 1));
    } else if (action == 2) {
      b.chol = qr_propagate(b.chol, MatrixXd::Identity(n, n) * rng.uniform(0.8, 1.2),
                            0.1 * MatrixXd::Identity(n, n));
    } else {
      // a safe downdate: remove a fraction of an existing column direction
      const VectorXd v = 0.5 * b.chol.col(rng.integer(0, n - 1));
      b.chol = chol_rank_update(b.chol, v, -1);
    }
    bool positive = true;
    for (int i = 0; i < b.dim(); ++i) positive = positive && b.chol(i, i) > 0.0;
    REQUIRE(positive);
  }
}

TEST_CASE("belief snapshot JSON round-trips bit-exactly") {
  Rng rng(31);
  const auto b = test_support::random_belief(rng, 2, 2, 3, 4);
  const std::string text = belief_to_json(b);
  const AugmentedBelief back = belief_from_json(text);
  CHECK(back.n_x == b.n_x);
  REQUIRE(back.num_inducing() == b.num_inducing());
  CHECK(back.mean == b.mean);
  CHECK(back.chol == b.chol);
  CHECK(back.hyper.log_length_scales == b.hyper.log_length_scales);
  CHECK(back.hyper.log_signal_variances == b.hyper.log_signal_variances);
  for (int i = 0; i < b.num_inducing(); ++i)
    CHECK(back.inducing_inputs[i] == b.inducing_inputs[i]);
}
