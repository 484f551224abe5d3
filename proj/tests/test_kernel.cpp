#include "doctest.h"

#include <Eigen/Eigenvalues>
#include <random>

#include "gpde/kernel.hpp"
#include "oracles.hpp"

using gpde::Hyperparams;

TEST_CASE("kernel_eval at zero distance is the signal variance") {
  const Eigen::Vector2d x(0.5, -1.0);
  CHECK(gpde::kernel_eval(x, x, Hyperparams<>{0.7, 2.0, 0.1}) == doctest::Approx(4.0).epsilon(1e-15));
}

TEST_CASE("kernel_eval at squared distance 2 l^2 is sigma_f^2 / e") {
  const Hyperparams<> h{1.5, 1.3, 0.1};
  const Eigen::Vector2d x(0.0, 0.0);
  const Eigen::Vector2d y(1.5, 1.5);  // |x - y|^2 = 2 * 1.5^2
  CHECK(gpde::kernel_eval(x, y, h) == doctest::Approx(1.69 * std::exp(-1.0)).epsilon(1e-14));
}

TEST_CASE("kernel_eval is symmetric and translation invariant") {
  std::mt19937_64 rng(1);
  const Hyperparams<> h{0.9, 1.1, 0.2};
  for (int i = 0; i < 20; ++i) {
    const Eigen::VectorXd x = oracle::normal(rng, 3, 1), y = oracle::normal(rng, 3, 1);
    const Eigen::VectorXd shift = oracle::normal(rng, 3, 1, 5.0);
    CHECK(gpde::kernel_eval(x, y, h) == gpde::kernel_eval(y, x, h));
    CHECK(gpde::kernel_eval(Eigen::VectorXd(x + shift), Eigen::VectorXd(y + shift), h) ==
          doctest::Approx(gpde::kernel_eval(x, y, h)).epsilon(1e-12));
  }
}

TEST_CASE("kernel_eval rejects mismatched dimensions") {
  CHECK_THROWS_AS(gpde::kernel_eval(Eigen::Vector2d(0, 0), Eigen::Vector3d(0, 0, 0), Hyperparams<>{}),
                  gpde::InvalidInput);
}

TEST_CASE("kernel_matrix of a single row is [sigma_f^2]") {
  const Eigen::MatrixXd x = Eigen::RowVector3d(1.0, 2.0, 3.0);
  const Eigen::MatrixXd k = gpde::kernel_matrix(x, Hyperparams<>{1.0, 3.0, 0.1});
  REQUIRE(k.rows() == 1);
  CHECK(k(0, 0) == 9.0);
}

TEST_CASE("kernel_matrix matches naive loops, is symmetric PSD") {
  std::mt19937_64 rng(2);
  const Hyperparams<> h{0.8, 1.7, 0.1};
  const Eigen::MatrixXd x = oracle::normal(rng, 5, 3);
  const Eigen::MatrixXd k = gpde::kernel_matrix(x, h);
  CHECK(k.isApprox(oracle::gram(x, x, {0.8, 1.7, 0.1}), 1e-13));
  CHECK((k - k.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((k.diagonal().array() == h.signal_variance()).all());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k);
  CHECK(eig.eigenvalues().minCoeff() >= -1e-10 * h.signal_variance());
}

TEST_CASE("cross kernel matrix transposes") {
  std::mt19937_64 rng(3);
  const Hyperparams<> h{1.2, 0.9, 0.1};
  const Eigen::MatrixXd a = oracle::normal(rng, 4, 2), b = oracle::normal(rng, 3, 2);
  CHECK(gpde::kernel_matrix(a, b, h).isApprox(gpde::kernel_matrix(b, a, h).transpose(), 1e-15));
  CHECK_THROWS_AS(gpde::kernel_matrix(a, oracle::normal(rng, 3, 3), h), gpde::InvalidInput);
}

TEST_CASE("scaling inputs and length scale together leaves K unchanged") {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd x = oracle::normal(rng, 6, 2);
  const double c = 3.7;
  const Eigen::MatrixXd k1 = gpde::kernel_matrix(x, Hyperparams<>{0.6, 1.0, 0.1});
  const Eigen::MatrixXd k2 = gpde::kernel_matrix(Eigen::MatrixXd(c * x), Hyperparams<>{0.6 * c, 1.0, 0.1});
  CHECK(((k1 - k2).cwiseAbs().array() <= 1e-12 * k1.cwiseAbs().array()).all());
}

TEST_CASE("noisy gram admits a Cholesky factor") {
  std::mt19937_64 rng(5);
  // near-duplicate rows make K itself nearly singular
  Eigen::MatrixXd x = oracle::normal(rng, 8, 2);
  x.row(1) = x.row(0) + Eigen::RowVector2d(1e-9, 0.0);
  Eigen::MatrixXd a = gpde::kernel_matrix(x, Hyperparams<>{1.0, 1.0, 1e-3});
  a.diagonal().array() += 1e-6;
  const auto chol = gpde::robust_cholesky(a);
  CHECK((chol.lower * chol.lower.transpose() - a).norm() <= 1e-8 * a.norm());
}

TEST_CASE("robust_cholesky reports the jitter it needed and fails past the ladder") {
  Eigen::Matrix2d singular;
  singular << 1.0, 1.0, 1.0, 1.0;
  const auto chol = gpde::robust_cholesky(singular);
  CHECK(chol.jitter > 0.0);
  CHECK(chol.jitter <= 1e-4);

  Eigen::Matrix2d indefinite;
  indefinite << 1.0, 0.0, 0.0, -1.0;
  try {
    gpde::robust_cholesky(indefinite);
    FAIL("expected NumericalFailure");
  } catch (const gpde::NumericalFailure& e) {
    CHECK(e.attempted_jitter() == doctest::Approx(1e-4).epsilon(1e-6));
  }
}

TEST_CASE("kernel gradients: structure and finite differences") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd x = oracle::normal(rng, 6, 2);
    const Hyperparams<> h{oracle::uniform(rng, 0.3, 2.0), oracle::uniform(rng, 0.5, 2.0), 0.1};
    const auto g = gpde::kernel_matrix_gradients(x, h);
    const Eigen::MatrixXd k = gpde::kernel_matrix(x, h);
    CHECK(g.d_log_length.diagonal().cwiseAbs().maxCoeff() == 0.0);
    CHECK(g.d_log_signal.isApprox(2.0 * k, 1e-15));

    const double step = 1e-5;
    auto at = [&](double log_l, double log_f) {
      return oracle::gram(x, x, {std::exp(log_l), std::exp(log_f), 0.1});
    };
    const double ll = std::log(h.length_scale), lf = std::log(h.signal_std);
    const Eigen::MatrixXd fd_l = (at(ll + step, lf) - at(ll - step, lf)) / (2 * step);
    const Eigen::MatrixXd fd_f = (at(ll, lf + step) - at(ll, lf - step)) / (2 * step);
    for (Eigen::Index i = 0; i < k.size(); ++i) {
      if (std::abs(fd_l.data()[i]) > 1e-8)
        CHECK(std::abs(g.d_log_length.data()[i] - fd_l.data()[i]) / std::abs(fd_l.data()[i]) < 1e-6);
      CHECK(std::abs(g.d_log_signal.data()[i] - fd_f.data()[i]) / std::abs(fd_f.data()[i]) < 1e-6);
    }
  }
}

TEST_CASE("hyperparameters round-trip through log space") {
  const Hyperparams<> h{0.123, 4.56, 7.8e-3};
  const auto back = Hyperparams<>::from_log(h.to_log());
  CHECK(std::abs(back.length_scale - h.length_scale) <= 1e-12 * h.length_scale);
  CHECK(std::abs(back.signal_std - h.signal_std) <= 1e-12 * h.signal_std);
  CHECK(std::abs(back.noise_std - h.noise_std) <= 1e-12 * h.noise_std);
  CHECK_FALSE((Hyperparams<>{0.0, 1.0, 1.0}).valid());
  CHECK_THROWS_AS((Hyperparams<>{1.0, -1.0, 1.0}).validate(), gpde::InvalidInput);
}

TEST_CASE("single precision instantiation") {
  const Eigen::MatrixXf x = Eigen::MatrixXf::Random(4, 2);
  const Eigen::MatrixXf k = gpde::kernel_matrix(x, Hyperparams<float>{1.0f, 1.0f, 0.1f});
  CHECK(k(0, 0) == 1.0f);
  CHECK(k.isApprox(k.transpose()));
}
