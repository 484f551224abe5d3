#include "doctest.h"

#include <random>

#include "gpde/adaptation.hpp"
#include "oracles.hpp"

using gpde::Dataset;
using gpde::Hyperparams;

namespace {

Dataset<> random_dataset(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d, Eigen::Index c,
                         double spread = 1.0) {
  return Dataset<>{oracle::normal(rng, n, d, spread), oracle::signs(rng, n, c), "rand"};
}

Dataset<> empty_like(const Dataset<>& d) {
  return Dataset<>{Eigen::MatrixXd(0, d.dims()), Eigen::MatrixXd(0, d.outputs()), "empty"};
}

}  // namespace

TEST_CASE("conditional prior far from the source reverts to K_tt") {
  std::mt19937_64 rng(30);
  const Hyperparams<> h{0.6, 1.2, 0.2};
  const auto src = gpde::train_expert(random_dataset(rng, 8, 2, 2), h);
  const Eigen::MatrixXd xt = oracle::normal(rng, 4, 2).array() + 200.0;
  const auto prior = gpde::conditional_prior(src, xt);
  CHECK(prior.mean.cwiseAbs().maxCoeff() < 1e-6);
  CHECK((prior.cov - oracle::gram(xt, xt, {0.6, 1.2, 0.2})).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("conditional prior at the source inputs equals the dense formula") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    const Hyperparams<> h{oracle::uniform(rng, 0.5, 1.5), oracle::uniform(rng, 0.5, 1.5), 0.3};
    const Dataset<> d = random_dataset(rng, 7, 3, 1);
    const auto prior = gpde::conditional_prior(gpde::train_expert(d, h), d.X);
    const Eigen::MatrixXd ref = oracle::dense_conditioned_cov(d.X, {h.length_scale, h.signal_std, h.noise_std});
    CHECK((prior.cov - ref).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("conditional prior covariance is symmetric and shrinks the prior diagonal") {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 20; ++trial) {
    const Hyperparams<> h{oracle::uniform(rng, 0.3, 2.0), oracle::uniform(rng, 0.5, 2.0), 0.2};
    const auto src = gpde::train_expert(random_dataset(rng, 10, 2, 1), h);
    const Eigen::MatrixXd xt = oracle::normal(rng, 6, 2);
    const auto prior = gpde::conditional_prior(src, xt);
    CHECK((prior.cov - prior.cov.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((prior.cov.diagonal().array() <= h.signal_variance() + 1e-8).all());
    CHECK((prior.cov.diagonal().array() >= -1e-12).all());
  }
  CHECK_THROWS_AS(gpde::conditional_prior(gpde::train_expert(random_dataset(rng, 3, 2, 1), Hyperparams<>{}),
                                          Eigen::MatrixXd::Zero(2, 4)),
                  gpde::InvalidInput);
}

TEST_CASE("adapted posterior with no target data is the source posterior") {
  std::mt19937_64 rng(33);
  const auto src = gpde::train_expert(random_dataset(rng, 9, 2, 2), Hyperparams<>{0.8, 1.0, 0.2});
  const Eigen::MatrixXd xs = oracle::normal(rng, 5, 2);
  const auto a = gpde::adapted_posterior(src, empty_like(src.data), xs);
  const auto b = gpde::posterior(src, xs);
  CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((a.variance - b.variance).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("adapted posterior equals joint conditioning on source and target") {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 20; ++trial) {
    const Hyperparams<> h{oracle::uniform(rng, 0.4, 2.0), oracle::uniform(rng, 0.5, 2.0),
                          oracle::uniform(rng, 0.1, 0.7)};
    const Dataset<> s = random_dataset(rng, 5, 2, 2);
    const Dataset<> t = random_dataset(rng, 3, 2, 2);
    const Eigen::MatrixXd xs = oracle::normal(rng, 2, 2);
    const auto adapted = gpde::adapted_posterior(gpde::train_expert(s, h), t, xs);
    const auto joint = gpde::concatenate(std::vector{s, t}, "union");
    const auto ref = oracle::joint_condition(joint.X, joint.Y, xs, {h.length_scale, h.signal_std, h.noise_std});
    CHECK((adapted.mean - ref.mean).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((adapted.variance - ref.variance).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("sequential conditioning holds for every split of a 30-point set") {
  std::mt19937_64 rng(35);
  const Hyperparams<> h{1.0, 1.0, 0.3};
  const Dataset<> all = random_dataset(rng, 30, 2, 1, 1.5);
  const Eigen::MatrixXd xs = oracle::normal(rng, 4, 2);
  const auto ref = oracle::joint_condition(all.X, all.Y, xs, {1.0, 1.0, 0.3});
  for (Eigen::Index split = 1; split < 30; split += 4) {
    const Dataset<> s = all.head(split);
    const Dataset<> t{all.X.bottomRows(30 - split), all.Y.bottomRows(30 - split), "t"};
    const auto p = gpde::adapted_posterior(gpde::train_expert(s, h), t, xs);
    CHECK((p.mean - ref.mean).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((p.variance - ref.variance).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("adaptation never increases variance") {
  std::mt19937_64 rng(36);
  for (int trial = 0; trial < 20; ++trial) {
    const Hyperparams<> h{oracle::uniform(rng, 0.4, 2.0), 1.0, oracle::uniform(rng, 0.1, 0.5)};
    const auto src = gpde::train_expert(random_dataset(rng, 8, 2, 1), h);
    const Dataset<> t = random_dataset(rng, 6, 2, 1);
    const Eigen::MatrixXd xs = oracle::normal(rng, 5, 2);
    Eigen::VectorXd previous = gpde::posterior(src, xs).variance;
    for (Eigen::Index n = 1; n <= t.size(); ++n) {
      const auto v = gpde::adapted_posterior(src, t.head(n), xs).variance;
      CHECK((v.array() <= previous.array() + 1e-8).all());
      previous = v;
    }
  }
}

TEST_CASE("adapted mean interpolates target labels as the source noise vanishes") {
  std::mt19937_64 rng(37);
  const Hyperparams<> h{0.7, 1.0, 1e-5};
  const auto src = gpde::train_expert(random_dataset(rng, 6, 2, 1, 3.0), h);
  const Dataset<> t = random_dataset(rng, 4, 2, 1, 3.0);
  const auto p = gpde::adapted_posterior(src, t, t.X);
  CHECK((p.mean - t.Y).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("AdaptedExpert caches the target side across batches") {
  std::mt19937_64 rng(38);
  const Hyperparams<> h{0.9, 1.1, 0.25};
  auto src = std::make_shared<const gpde::Expert<>>(gpde::train_expert(random_dataset(rng, 10, 2, 2), h));
  const Dataset<> t = random_dataset(rng, 5, 2, 2);
  const gpde::AdaptedExpert<> adapted(src, t);
  CHECK(adapted.target_size() == 5);
  const Eigen::MatrixXd xs = oracle::normal(rng, 6, 2);
  const auto whole = adapted.predict(xs);
  const auto top = adapted.predict(xs.topRows(3));
  CHECK((whole.mean.topRows(3) - top.mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(gpde::AdaptedExpert<>(src, random_dataset(rng, 3, 3, 2)), gpde::InvalidInput);
}
