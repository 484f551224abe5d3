#ifndef GPDE_ADAPTATION_HPP
#define GPDE_ADAPTATION_HPP

#include <memory>

#include "gpde/gp.hpp"

namespace gpde {

/// Source posterior evaluated jointly at the target inputs; used as the prior
/// for the target observations.
template <typename Scalar = double>
struct ConditionedPrior {
  Matrix<Scalar> mean;  // N_t x C
  Matrix<Scalar> cov;   // N_t x N_t
};

template <typename Scalar, typename Derived>
ConditionedPrior<Scalar> conditional_prior(const Expert<Scalar>& source,
                                           const Eigen::MatrixBase<Derived>& x_target) {
  if (x_target.cols() != source.data.dims())
    throw InvalidInput("conditional_prior: target feature dimension mismatch");
  const Matrix<Scalar> k_st = kernel_matrix(source.data.X, x_target, source.hyper);
  const Matrix<Scalar> w = source.chol.solve_lower(k_st);
  ConditionedPrior<Scalar> out;
  out.mean = k_st.transpose() * source.alpha;
  out.cov = kernel_matrix(x_target, source.hyper);
  out.cov.noalias() -= w.transpose() * w;
  out.cov = Scalar(0.5) * (out.cov + out.cov.transpose()).eval();
  return out;
}

/// A source expert corrected by a fixed set of labeled target points.
/// The target-side factorization is computed once; cross terms are built per
/// prediction batch. Holds the source expert by shared pointer so the same
/// source pool can be adapted to many targets without copies or refits.
template <typename Scalar = double>
class AdaptedExpert {
 public:
  AdaptedExpert(std::shared_ptr<const Expert<Scalar>> source, const Dataset<Scalar>& target)
      : source_(std::move(source)), target_x_(target.X) {
    if (!source_) throw InvalidInput("AdaptedExpert: null source expert");
    if (target.empty()) return;
    target.validate();
    if (target.dims() != source_->data.dims() || target.outputs() != source_->data.outputs())
      throw InvalidInput("AdaptedExpert: target D or C differs from the source expert");

    const Matrix<Scalar> k_st = kernel_matrix(source_->data.X, target_x_, source_->hyper);
    source_solve_t_ = source_->chol.solve_lower(k_st);
    Matrix<Scalar> v = kernel_matrix(target_x_, source_->hyper);
    v.noalias() -= source_solve_t_.transpose() * source_solve_t_;
    v = Scalar(0.5) * (v + v.transpose()).eval();
    v.diagonal().array() += source_->hyper.noise_variance();
    chol_ = robust_cholesky(v);
    const Matrix<Scalar> prior_mean = k_st.transpose() * source_->alpha;
    residual_ = chol_.solve(target.Y - prior_mean);
  }

  const Expert<Scalar>& source() const { return *source_; }
  Eigen::Index target_size() const { return target_x_.rows(); }

  template <typename Derived>
  PosteriorPrediction<Scalar> predict(const Eigen::MatrixBase<Derived>& x_star) const {
    PosteriorPrediction<Scalar> out = posterior(*source_, x_star);
    if (target_size() == 0) return out;

    const Matrix<Scalar> k_ss = kernel_matrix(source_->data.X, x_star, source_->hyper);
    const Matrix<Scalar> source_solve_star = source_->chol.solve_lower(k_ss);
    Matrix<Scalar> cross = kernel_matrix(target_x_, x_star, source_->hyper);  // N_t x M
    cross.noalias() -= source_solve_t_.transpose() * source_solve_star;

    out.mean.noalias() += cross.transpose() * residual_;
    const Matrix<Scalar> w = chol_.solve_lower(cross);
    out.variance = (out.variance.array() - w.colwise().squaredNorm().transpose().array())
                       .cwiseMax(Scalar(0))
                       .matrix();
    return out;
  }

 private:
  std::shared_ptr<const Expert<Scalar>> source_;
  Matrix<Scalar> target_x_;
  Matrix<Scalar> source_solve_t_;  // L_s^-1 K_st
  Cholesky<Scalar> chol_;          // of V^(t|s) + sigma_s^2 I
  Matrix<Scalar> residual_;        // (V^(t|s) + sigma_s^2 I)^-1 (Y_t - mu^(t|s))
};

template <typename Scalar, typename Derived>
PosteriorPrediction<Scalar> adapted_posterior(const Expert<Scalar>& source, const Dataset<Scalar>& target,
                                              const Eigen::MatrixBase<Derived>& x_star) {
  if (x_star.cols() != source.data.dims())
    throw InvalidInput("adapted_posterior: test feature dimension mismatch");
  if (target.empty()) return posterior(source, x_star);
  // non-owning alias; the AdaptedExpert does not outlive this call
  const std::shared_ptr<const Expert<Scalar>> alias(std::shared_ptr<void>(), &source);
  return AdaptedExpert<Scalar>(alias, target).predict(x_star);
}

}  // namespace gpde

#endif  // GPDE_ADAPTATION_HPP
