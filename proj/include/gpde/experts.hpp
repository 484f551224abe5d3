#ifndef GPDE_EXPERTS_HPP
#define GPDE_EXPERTS_HPP

#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "gpde/adaptation.hpp"
#include "gpde/optimize.hpp"

namespace gpde {

enum class DecisionMode { MultiLabel, MultiClass };

/// Variances below this are raised to it before being inverted.
inline constexpr double kVarianceFloor = 1e-10;

template <typename Scalar = double>
struct FusedMoments {
  Matrix<Scalar> mean;
  Vector<Scalar> variance;
};

/// Precision-weighted product of experts:
///   1/V = sum_i beta_i / V_i,   mu = V * sum_i beta_i mu_i / V_i.
/// When a single expert carries all the weight its prediction is returned
/// unchanged (apart from the variance floor).
template <typename Scalar>
FusedMoments<Scalar> fuse(std::span<const Matrix<Scalar>> means, std::span<const Vector<Scalar>> variances,
                          const Vector<Scalar>& betas) {
  const auto n = means.size();
  if (n == 0 || variances.size() != n || static_cast<std::size_t>(betas.size()) != n)
    throw InvalidInput("fuse: expert lists are empty or misaligned");
  if ((betas.array() < Scalar(0)).any() || !betas.allFinite())
    throw InvalidInput("fuse: betas must be finite and nonnegative");
  if (std::abs(betas.sum() - Scalar(1)) > Scalar(1e-9)) throw InvalidInput("fuse: betas must sum to 1");
  const Eigen::Index rows = means[0].rows();
  const Eigen::Index cols = means[0].cols();
  for (std::size_t i = 0; i < n; ++i) {
    if (means[i].rows() != rows || means[i].cols() != cols || variances[i].size() != rows)
      throw InvalidInput("fuse: expert prediction shapes differ");
  }
  const Scalar floor = Scalar(kVarianceFloor);

  std::optional<std::size_t> sole;
  int active = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (betas(static_cast<Eigen::Index>(i)) > Scalar(0)) {
      sole = i;
      ++active;
    }
  if (active == 1) return {means[*sole], variances[*sole].cwiseMax(floor)};

  Vector<Scalar> precision = Vector<Scalar>::Zero(rows);
  for (std::size_t i = 0; i < n; ++i)
    precision.array() += betas(static_cast<Eigen::Index>(i)) / variances[i].array().max(floor);

  FusedMoments<Scalar> out{Matrix<Scalar>::Zero(rows, cols), precision.cwiseInverse()};
  for (std::size_t i = 0; i < n; ++i) {
    const Vector<Scalar> weight =
        (betas(static_cast<Eigen::Index>(i)) / variances[i].array().max(floor)) * out.variance.array();
    out.mean.noalias() += weight.asDiagonal() * means[i];
  }
  return out;
}

/// sign() per entry with sign(0) = +1, or a one-hot {-1,+1} row at the argmax
/// (first index on ties) in multi-class mode.
template <typename Derived>
Matrix<typename Derived::Scalar> decide(const Eigen::MatrixBase<Derived>& mean, DecisionMode mode) {
  using Scalar = typename Derived::Scalar;
  Matrix<Scalar> labels(mean.rows(), mean.cols());
  if (mode == DecisionMode::MultiLabel) {
    labels = (mean.array() >= Scalar(0)).select(Scalar(1), Matrix<Scalar>::Constant(mean.rows(), mean.cols(), -1));
    return labels;
  }
  labels.setConstant(Scalar(-1));
  for (Eigen::Index r = 0; r < mean.rows(); ++r) {
    Eigen::Index best = 0;
    mean.row(r).maxCoeff(&best);
    labels(r, best) = Scalar(1);
  }
  return labels;
}

template <typename Scalar = double>
struct FusedPrediction {
  Matrix<Scalar> mean;
  Vector<Scalar> variance;
  std::vector<Matrix<Scalar>> per_expert_means;  // sources first, then target
  std::vector<Vector<Scalar>> per_expert_variances;
  Matrix<Scalar> labels;
};

/// Source experts trained under one shared set of hyperparameters. Reusable
/// across any number of target domains.
template <typename Scalar = double>
struct SourcePool {
  Hyperparams<Scalar> hyper;
  std::vector<std::shared_ptr<const Expert<Scalar>>> experts;
  FitResult<Scalar> fit;
};

template <typename Scalar>
Hyperparams<Scalar> default_init(std::span<const Dataset<Scalar>> datasets) {
  if (datasets.size() == 1) return default_init(datasets.front());
  return default_init(concatenate(std::vector<Dataset<Scalar>>(datasets.begin(), datasets.end()), "pooled"));
}

template <typename Scalar>
SourcePool<Scalar> train_source_pool(std::span<const Dataset<Scalar>> sources,
                                     std::optional<Hyperparams<Scalar>> init = std::nullopt,
                                     const FitOptions& opts = {}) {
  if (sources.empty()) throw InvalidInput("train_source_pool: no source datasets");
  SourcePool<Scalar> pool;
  pool.fit = fit(sources, init ? *init : default_init(sources), opts);
  pool.hyper = pool.fit.hyper;
  for (const auto& d : sources)
    pool.experts.push_back(std::make_shared<const Expert<Scalar>>(train_expert(d, pool.hyper)));
  return pool;
}

/// M source experts (one shared theta), adapted to a labeled target set, plus
/// an optional standalone target expert, fused with normalized betas.
template <typename Scalar = double>
class GpdeModel {
 public:
  using ExpertPtr = std::shared_ptr<const Expert<Scalar>>;

  /// `betas` defaults to uniform 1/(number of experts); order is sources then
  /// target. `target_data` may be empty (plain fusion of source posteriors).
  GpdeModel(std::vector<ExpertPtr> sources, Dataset<Scalar> target_data, ExpertPtr target,
            DecisionMode mode = DecisionMode::MultiLabel, std::optional<Vector<Scalar>> betas = std::nullopt)
      : sources_(std::move(sources)), target_data_(std::move(target_data)), target_(std::move(target)), mode_(mode) {
    const auto count = static_cast<Eigen::Index>(sources_.size() + (target_ ? 1 : 0));
    if (count == 0) throw InvalidInput("GpdeModel: no experts");
    for (const auto& s : sources_)
      if (!s) throw InvalidInput("GpdeModel: null source expert");
    const Expert<Scalar>& first = sources_.empty() ? *target_ : *sources_.front();
    for (const auto& s : sources_) {
      if (!(s->hyper == first.hyper)) throw InvalidInput("GpdeModel: source experts must share hyperparameters");
    }
    auto check_shape = [&](const Expert<Scalar>& e) {
      if (e.data.dims() != first.data.dims() || e.data.outputs() != first.data.outputs())
        throw InvalidInput("GpdeModel: experts disagree on D or C");
    };
    for (const auto& s : sources_) check_shape(*s);
    if (target_) check_shape(*target_);

    if (betas) {
      if (betas->size() != count) throw InvalidInput("GpdeModel: betas length must equal the expert count");
      if ((betas->array() < Scalar(0)).any() || std::abs(betas->sum() - Scalar(1)) > Scalar(1e-12))
        throw InvalidInput("GpdeModel: betas must be nonnegative and sum to 1");
      betas_ = *betas;
    } else {
      betas_ = Vector<Scalar>::Constant(count, Scalar(1) / static_cast<Scalar>(count));
    }
    adapted_.reserve(sources_.size());
    for (const auto& s : sources_) adapted_.emplace_back(s, target_data_);
  }

  std::size_t num_sources() const { return sources_.size(); }
  std::size_t num_experts() const { return sources_.size() + (target_ ? 1 : 0); }
  const std::vector<ExpertPtr>& sources() const { return sources_; }
  const ExpertPtr& target() const { return target_; }
  const Dataset<Scalar>& target_data() const { return target_data_; }
  const Vector<Scalar>& betas() const { return betas_; }
  DecisionMode mode() const { return mode_; }
  Eigen::Index dims() const { return (sources_.empty() ? *target_ : *sources_.front()).data.dims(); }

  template <typename Derived>
  FusedPrediction<Scalar> predict(const Eigen::MatrixBase<Derived>& x_star) const {
    if (x_star.cols() != dims()) throw InvalidInput("predict: test feature dimension mismatch");
    FusedPrediction<Scalar> out;
    for (const auto& a : adapted_) {
      PosteriorPrediction<Scalar> p = a.predict(x_star);
      out.per_expert_means.push_back(std::move(p.mean));
      out.per_expert_variances.push_back(std::move(p.variance));
    }
    if (target_) {
      PosteriorPrediction<Scalar> p = posterior(*target_, x_star);
      out.per_expert_means.push_back(std::move(p.mean));
      out.per_expert_variances.push_back(std::move(p.variance));
    }
    FusedMoments<Scalar> fused = fuse<Scalar>(out.per_expert_means, out.per_expert_variances, betas_);
    out.mean = std::move(fused.mean);
    out.variance = std::move(fused.variance);
    out.labels = decide(out.mean, mode_);
    return out;
  }

  /// Normalized precisions beta_i / V_i(x) per test row (sources, then target).
  template <typename Derived>
  Matrix<Scalar> expert_weights(const Eigen::MatrixBase<Derived>& x_star) const {
    const FusedPrediction<Scalar> p = predict(x_star);
    Matrix<Scalar> w(x_star.rows(), static_cast<Eigen::Index>(num_experts()));
    for (std::size_t i = 0; i < num_experts(); ++i) {
      const auto col = static_cast<Eigen::Index>(i);
      w.col(col) = betas_(col) / p.per_expert_variances[i].array().max(Scalar(kVarianceFloor));
    }
    w.array().colwise() /= w.rowwise().sum().array();
    return w;
  }

 private:
  std::vector<ExpertPtr> sources_;
  Dataset<Scalar> target_data_;
  ExpertPtr target_;
  DecisionMode mode_;
  Vector<Scalar> betas_;
  std::vector<AdaptedExpert<Scalar>> adapted_;
};

template <typename Scalar>
struct GpdeTrainOptions {
  FitOptions fit;
  std::optional<Hyperparams<Scalar>> source_init;
  std::optional<Hyperparams<Scalar>> target_init;
  DecisionMode mode = DecisionMode::MultiLabel;
  std::optional<Vector<Scalar>> betas;
};

template <typename Scalar>
std::shared_ptr<const Expert<Scalar>> train_target_expert(const Dataset<Scalar>& target,
                                                          const GpdeTrainOptions<Scalar>& opts = {},
                                                          FitResult<Scalar>* report = nullptr) {
  FitResult<Scalar> r = fit(target, opts.target_init ? *opts.target_init : default_init(target), opts.fit);
  auto expert = std::make_shared<const Expert<Scalar>>(train_expert(target, r.hyper));
  if (report) *report = std::move(r);
  return expert;
}

/// Adapts an existing source pool to a target domain: the pool is reused as is.
template <typename Scalar>
GpdeModel<Scalar> train_gpde(const SourcePool<Scalar>& pool, const Dataset<Scalar>& target,
                             const GpdeTrainOptions<Scalar>& opts = {}) {
  return GpdeModel<Scalar>(pool.experts, target, train_target_expert(target, opts), opts.mode, opts.betas);
}

template <typename Scalar>
GpdeModel<Scalar> train_gpde(std::span<const Dataset<Scalar>> sources, const Dataset<Scalar>& target,
                             const GpdeTrainOptions<Scalar>& opts = {}) {
  for (const auto& s : sources)
    if (s.dims() != target.dims() || s.outputs() != target.outputs())
      throw InvalidInput("train_gpde: source and target disagree on D or C");
  return train_gpde(train_source_pool(sources, opts.source_init, opts.fit), target, opts);
}

}  // namespace gpde

#endif  // GPDE_EXPERTS_HPP
