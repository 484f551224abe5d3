#ifndef GPDE_LINALG_HPP
#define GPDE_LINALG_HPP

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <sstream>

#include "gpde/errors.hpp"

namespace gpde {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Lower Cholesky factor of a symmetric positive-definite matrix plus the
/// diagonal jitter that had to be added to obtain it (0 when none).
template <typename Scalar>
struct Cholesky {
  Matrix<Scalar> lower;
  Scalar jitter = Scalar(0);

  Eigen::Index size() const { return lower.rows(); }

  /// Solves L X = B.
  template <typename Derived>
  Matrix<Scalar> solve_lower(const Eigen::MatrixBase<Derived>& rhs) const {
    return lower.template triangularView<Eigen::Lower>().solve(rhs);
  }

  /// Solves (L L^T) X = B.
  template <typename Derived>
  Matrix<Scalar> solve(const Eigen::MatrixBase<Derived>& rhs) const {
    Matrix<Scalar> out = solve_lower(rhs);
    lower.template triangularView<Eigen::Lower>().transpose().solveInPlace(out);
    return out;
  }

  Scalar log_determinant() const {
    return Scalar(2) * lower.diagonal().array().log().sum();
  }

  Matrix<Scalar> inverse() const {
    return solve(Matrix<Scalar>::Identity(size(), size()));
  }

};

namespace detail {

template <typename Scalar>
bool try_llt(const Matrix<Scalar>& a, Matrix<Scalar>& lower) {
  Eigen::LLT<Matrix<Scalar>> llt(a);
  if (llt.info() != Eigen::Success) return false;
  lower = llt.matrixL();
  return lower.diagonal().allFinite() && (lower.diagonal().array() > Scalar(0)).all();
}

}  // namespace detail

/// Jitter ladder: first without jitter, then 1e-10 * mean(diag) growing by
/// 10x up to 1e-4 * mean(diag). Throws NumericalFailure past the last rung.
template <typename Derived>
Cholesky<typename Derived::Scalar> robust_cholesky(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  if (a.rows() != a.cols()) throw InvalidInput("robust_cholesky: matrix is not square");
  Cholesky<Scalar> out;
  const Matrix<Scalar> base = a;
  if (base.size() == 0) return out;
  if (!base.allFinite()) throw InvalidInput("robust_cholesky: non-finite entries");
  if (detail::try_llt(base, out.lower)) return out;

  const Scalar mean_diag = base.diagonal().mean();
  const Scalar scale = mean_diag > Scalar(0) ? mean_diag : Scalar(1);
  Scalar jitter = Scalar(1e-10) * scale;
  const Scalar max_jitter = Scalar(1e-4) * scale * Scalar(1.0000001);
  for (; jitter <= max_jitter; jitter *= Scalar(10)) {
    Matrix<Scalar> shifted = base;
    shifted.diagonal().array() += jitter;
    if (detail::try_llt(shifted, out.lower)) {
      out.jitter = jitter;
      return out;
    }
  }
  std::ostringstream msg;
  msg << "Cholesky factorization failed after jitter " << jitter / Scalar(10)
      << " (mean diagonal " << mean_diag << ")";
  throw NumericalFailure(msg.str(), static_cast<double>(jitter / Scalar(10)));
}

}  // namespace gpde

#endif  // GPDE_LINALG_HPP
