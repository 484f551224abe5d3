#ifndef GPDE_GP_HPP
#define GPDE_GP_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "gpde/kernel.hpp"

namespace gpde {

/// Features X (N x D) with targets Y (N x C). Classification data carries
/// labels in {-1, +1}; the regression core only needs finite targets.
template <typename Scalar = double>
struct Dataset {
  Matrix<Scalar> X;
  Matrix<Scalar> Y;
  std::string domain_id;

  Eigen::Index size() const { return X.rows(); }
  Eigen::Index dims() const { return X.cols(); }
  Eigen::Index outputs() const { return Y.cols(); }
  bool empty() const { return X.rows() == 0; }

  /// Checks shapes and finiteness. Empty datasets are accepted only when
  /// `allow_empty` is set.
  void validate(bool allow_empty = false) const {
    if (X.rows() != Y.rows()) throw InvalidInput("dataset '" + domain_id + "': X and Y row counts differ");
    if (X.cols() < 1 || Y.cols() < 1)
      throw InvalidInput("dataset '" + domain_id + "': need at least one feature and one output");
    if (X.rows() < 1 && !allow_empty) throw InvalidInput("dataset '" + domain_id + "' is empty");
    if (!X.allFinite()) throw InvalidInput("dataset '" + domain_id + "': non-finite feature");
    if (!Y.allFinite()) throw InvalidInput("dataset '" + domain_id + "': non-finite target");
  }

  bool has_sign_labels() const { return ((Y.array() == Scalar(1)) || (Y.array() == Scalar(-1))).all(); }

  /// validate() plus the {-1,+1} label alphabet.
  void validate_labels(bool allow_empty = false) const {
    validate(allow_empty);
    if (!has_sign_labels()) throw InvalidInput("dataset '" + domain_id + "': labels must be -1 or +1");
  }

  Dataset head(Eigen::Index n) const {
    return Dataset{X.topRows(n), Y.topRows(n), domain_id};
  }
};

template <typename Scalar>
Dataset<Scalar> concatenate(const std::vector<Dataset<Scalar>>& parts, std::string domain_id) {
  if (parts.empty()) throw InvalidInput("concatenate: no datasets");
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.dims() != parts.front().dims() || p.outputs() != parts.front().outputs())
      throw InvalidInput("concatenate: datasets disagree on D or C");
    rows += p.size();
  }
  Dataset<Scalar> out{Matrix<Scalar>(rows, parts.front().dims()),
                      Matrix<Scalar>(rows, parts.front().outputs()), std::move(domain_id)};
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    out.X.middleRows(at, p.size()) = p.X;
    out.Y.middleRows(at, p.size()) = p.Y;
    at += p.size();
  }
  return out;
}

/// Trained GP over one domain. Immutable once built by train_expert.
template <typename Scalar = double>
struct Expert {
  Dataset<Scalar> data;
  Hyperparams<Scalar> hyper;
  Cholesky<Scalar> chol;  // of K + sigma_v^2 I
  Matrix<Scalar> alpha;   // (K + sigma_v^2 I)^-1 Y

  const std::string& domain_id() const { return data.domain_id; }
};

/// Latent posterior at M test points. One variance per point, shared by all
/// C outputs since the kernel is shared.
template <typename Scalar = double>
struct PosteriorPrediction {
  Matrix<Scalar> mean;
  Vector<Scalar> variance;
};

template <typename Derived, typename Scalar>
Matrix<Scalar> noisy_gram(const Eigen::MatrixBase<Derived>& x, const Hyperparams<Scalar>& h) {
  Matrix<Scalar> a = kernel_matrix(x, h);
  a.diagonal().array() += h.noise_variance();
  return a;
}

template <typename Scalar>
Expert<Scalar> train_expert(Dataset<Scalar> data, const Hyperparams<Scalar>& h) {
  data.validate();
  h.validate();
  Expert<Scalar> e{std::move(data), h, {}, {}};
  e.chol = robust_cholesky(noisy_gram(e.data.X, h));
  e.alpha = e.chol.solve(e.data.Y);
  return e;
}

template <typename Scalar, typename Derived>
PosteriorPrediction<Scalar> posterior(const Expert<Scalar>& e, const Eigen::MatrixBase<Derived>& x_star) {
  if (x_star.cols() != e.data.dims()) throw InvalidInput("posterior: test feature dimension mismatch");
  const Matrix<Scalar> k_cross = kernel_matrix(e.data.X, x_star, e.hyper);
  PosteriorPrediction<Scalar> out;
  out.mean = k_cross.transpose() * e.alpha;
  const Matrix<Scalar> v = e.chol.solve_lower(k_cross);
  out.variance = (e.hyper.signal_variance() - v.colwise().squaredNorm().transpose().array())
                     .cwiseMax(Scalar(0))
                     .matrix();
  return out;
}

template <typename Scalar>
struct LogMarginal {
  Scalar value;
  Eigen::Matrix<Scalar, 3, 1> grad;  // w.r.t. (log l, log sigma_f, log sigma_v)
};

/// Multi-output log marginal likelihood with the full -(NC/2) log 2 pi
/// constant, and its gradient in log-hyperparameter space.
template <typename Scalar>
LogMarginal<Scalar> log_marginal_likelihood(const Dataset<Scalar>& data, const Hyperparams<Scalar>& h) {
  data.validate();
  h.validate();
  const auto n = static_cast<Scalar>(data.size());
  const auto c = static_cast<Scalar>(data.outputs());

  const KernelGradients<Scalar> dk = kernel_matrix_gradients(data.X, h);
  Matrix<Scalar> a = Scalar(0.5) * dk.d_log_signal;  // = K
  a.diagonal().array() += h.noise_variance();
  const Cholesky<Scalar> chol = robust_cholesky(a);
  const Matrix<Scalar> alpha = chol.solve(data.Y);

  LogMarginal<Scalar> out;
  out.value = Scalar(-0.5) * data.Y.cwiseProduct(alpha).sum() - Scalar(0.5) * c * chol.log_determinant() -
              Scalar(0.5) * n * c * std::log(Scalar(2) * std::numbers::pi_v<Scalar>);

  // d/dtheta = 1/2 tr(W dA/dtheta),  W = alpha alpha^T - C A^-1
  Matrix<Scalar> w = alpha * alpha.transpose() - c * chol.inverse();
  out.grad(0) = Scalar(0.5) * w.cwiseProduct(dk.d_log_length).sum();
  out.grad(1) = Scalar(0.5) * w.cwiseProduct(dk.d_log_signal).sum();
  out.grad(2) = h.noise_variance() * w.trace();
  return out;
}

/// Median pairwise distance for l, label std for sigma_f, sigma_f / 10 for noise.
template <typename Scalar>
Hyperparams<Scalar> default_init(const Dataset<Scalar>& data) {
  data.validate();
  Hyperparams<Scalar> h;
  std::vector<Scalar> dists;
  if (data.size() > 1) {
    const Matrix<Scalar> d2 = squared_distances(data.X);
    dists.reserve(static_cast<std::size_t>(data.size() * (data.size() - 1) / 2));
    for (Eigen::Index j = 0; j < d2.cols(); ++j)
      for (Eigen::Index i = j + 1; i < d2.rows(); ++i) dists.push_back(std::sqrt(d2(i, j)));
    auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
    std::nth_element(dists.begin(), mid, dists.end());
    h.length_scale = *mid;
  }
  if (!(h.length_scale > Scalar(0))) h.length_scale = Scalar(1);

  // spread about the zero prior mean, so exactly 1 for +-1 labels
  const Scalar var = data.Y.array().square().mean();
  h.signal_std = var > Scalar(0) ? std::sqrt(var) : Scalar(1);
  h.noise_std = Scalar(0.1) * h.signal_std;
  return h;
}

}  // namespace gpde

#endif  // GPDE_GP_HPP
