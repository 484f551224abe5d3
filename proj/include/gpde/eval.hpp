#ifndef GPDE_EVAL_HPP
#define GPDE_EVAL_HPP

#include <optional>

#include <Eigen/Dense>

#include "gpde/errors.hpp"

namespace gpde::eval {

/// Fraction of exact matches between predicted and true class indices.
double classification_rate(const Eigen::VectorXi& predicted, const Eigen::VectorXi& truth);

/// 2TP / (2TP + FP + FN) over {-1,+1} labels; 0 when the denominator is 0.
double f1_score(const Eigen::VectorXd& predicted, const Eigen::VectorXd& truth);

/// Mann-Whitney AUC: P(score_pos > score_neg) with ties counted 1/2.
/// Throws UndefinedMetric if only one class is present.
double auc_roc(const Eigen::VectorXd& scores, const Eigen::VectorXd& truth);

/// Row-wise argmax (first index on ties).
Eigen::VectorXi argmax_rows(const Eigen::MatrixXd& m);

struct MetricReport {
  std::optional<double> classification_rate;
  double label_accuracy = 0.0;  // elementwise agreement of {-1,+1} labels
  Eigen::VectorXd per_label_f1;
  Eigen::VectorXd per_label_auc;  // NaN for labels with a single class in truth
  double macro_f1 = 0.0;
  double macro_auc = 0.0;  // mean over labels where AUC is defined; NaN if none
};

/// `scores` are the fused means, `labels` the decided {-1,+1} outputs, `truth`
/// the reference {-1,+1} matrix. Classification rate is filled in multi-class
/// mode (argmax of scores vs argmax of truth).
MetricReport evaluate(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& labels, const Eigen::MatrixXd& truth,
                      bool multiclass);

}  // namespace gpde::eval

#endif  // GPDE_EVAL_HPP
