#ifndef GPDE_KERNEL_HPP
#define GPDE_KERNEL_HPP

#include <cmath>
#include <string>

#include "gpde/linalg.hpp"

namespace gpde {

/// Isotropic RBF hyperparameters {length scale, signal std, noise std}.
/// Optimizers work on the log of these three values.
template <typename Scalar = double>
struct Hyperparams {
  Scalar length_scale = Scalar(1);
  Scalar signal_std = Scalar(1);
  Scalar noise_std = Scalar(0.1);

  using LogVector = Eigen::Matrix<Scalar, 3, 1>;

  bool valid() const {
    return std::isfinite(length_scale) && std::isfinite(signal_std) && std::isfinite(noise_std) &&
           length_scale > Scalar(0) && signal_std > Scalar(0) && noise_std > Scalar(0);
  }

  void validate() const {
    if (!valid()) throw InvalidInput("hyperparameters must be finite and strictly positive");
  }

  LogVector to_log() const {
    return LogVector(std::log(length_scale), std::log(signal_std), std::log(noise_std));
  }

  static Hyperparams from_log(const LogVector& v) {
    return Hyperparams{std::exp(v(0)), std::exp(v(1)), std::exp(v(2))};
  }

  Scalar signal_variance() const { return signal_std * signal_std; }
  Scalar noise_variance() const { return noise_std * noise_std; }

  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

template <typename Derived1, typename Derived2, typename Scalar>
Scalar kernel_eval(const Eigen::MatrixBase<Derived1>& x, const Eigen::MatrixBase<Derived2>& x_prime,
                   const Hyperparams<Scalar>& h) {
  if (x.size() != x_prime.size() || x.size() == 0)
    throw InvalidInput("kernel_eval: dimension mismatch");
  Scalar d2 = Scalar(0);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const Scalar diff = x.derived().reshaped()(i) - x_prime.derived().reshaped()(i);
    d2 += diff * diff;
  }
  return h.signal_variance() * std::exp(-d2 / (Scalar(2) * h.length_scale * h.length_scale));
}

/// Pairwise squared distances between rows via |x|^2 + |x'|^2 - 2 x.x',
/// clamped at zero.
template <typename Derived1, typename Derived2>
Matrix<typename Derived1::Scalar> squared_distances(const Eigen::MatrixBase<Derived1>& a,
                                                    const Eigen::MatrixBase<Derived2>& b) {
  using Scalar = typename Derived1::Scalar;
  if (a.cols() != b.cols()) throw InvalidInput("squared_distances: column count mismatch");
  const Vector<Scalar> na = a.rowwise().squaredNorm();
  const Vector<Scalar> nb = b.rowwise().squaredNorm();
  Matrix<Scalar> d2 = a * b.transpose();
  d2 *= Scalar(-2);
  d2.colwise() += na;
  d2.rowwise() += nb.transpose();
  return d2.cwiseMax(Scalar(0));
}

/// Symmetric variant: exact zeros on the diagonal and bitwise symmetry.
template <typename Derived>
Matrix<typename Derived::Scalar> squared_distances(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  Matrix<Scalar> d2 = squared_distances(a, a);
  d2.diagonal().setZero();
  d2.template triangularView<Eigen::StrictlyUpper>() = d2.transpose();
  return d2;
}

template <typename Derived, typename Scalar>
Matrix<Scalar> rbf_from_squared_distances(const Eigen::MatrixBase<Derived>& d2,
                                          const Hyperparams<Scalar>& h) {
  const Scalar inv = Scalar(-0.5) / (h.length_scale * h.length_scale);
  return h.signal_variance() * (d2.array() * inv).exp().matrix();
}

template <typename Derived1, typename Derived2, typename Scalar>
Matrix<Scalar> kernel_matrix(const Eigen::MatrixBase<Derived1>& x,
                             const Eigen::MatrixBase<Derived2>& x_prime,
                             const Hyperparams<Scalar>& h) {
  if (x.cols() != x_prime.cols()) throw InvalidInput("kernel_matrix: dimension mismatch");
  return rbf_from_squared_distances(squared_distances(x, x_prime), h);
}

/// K(X, X): symmetric with diagonal exactly sigma_f^2.
template <typename Derived, typename Scalar>
Matrix<Scalar> kernel_matrix(const Eigen::MatrixBase<Derived>& x, const Hyperparams<Scalar>& h) {
  return rbf_from_squared_distances(squared_distances(x), h);
}

template <typename Scalar>
struct KernelGradients {
  Matrix<Scalar> d_log_length;  // K_ij * |x_i - x_j|^2 / l^2
  Matrix<Scalar> d_log_signal;  // 2 K
};

template <typename Derived, typename Scalar>
KernelGradients<Scalar> kernel_matrix_gradients(const Eigen::MatrixBase<Derived>& x,
                                                const Hyperparams<Scalar>& h) {
  if (x.rows() == 0 || x.cols() == 0) throw InvalidInput("kernel_matrix_gradients: empty input");
  const Matrix<Scalar> d2 = squared_distances(x);
  const Matrix<Scalar> k = rbf_from_squared_distances(d2, h);
  KernelGradients<Scalar> g;
  g.d_log_length = k.cwiseProduct(d2) / (h.length_scale * h.length_scale);
  g.d_log_signal = Scalar(2) * k;
  return g;
}

}  // namespace gpde

#endif  // GPDE_KERNEL_HPP
