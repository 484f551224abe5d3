#include "gpde/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "gpde/errors.hpp"

namespace gpde::eval {

double classification_rate(const Eigen::VectorXi& predicted, const Eigen::VectorXi& truth) {
  if (predicted.size() != truth.size()) throw InvalidInput("classification_rate: length mismatch");
  if (truth.size() == 0) throw InvalidInput("classification_rate: empty input");
  return static_cast<double>((predicted.array() == truth.array()).count()) / static_cast<double>(truth.size());
}

double f1_score(const Eigen::VectorXd& predicted, const Eigen::VectorXd& truth) {
  if (predicted.size() != truth.size()) throw InvalidInput("f1_score: length mismatch");
  long tp = 0, fp = 0, fn = 0;
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    const bool p = predicted(i) > 0.0;
    const bool t = truth(i) > 0.0;
    tp += p && t;
    fp += p && !t;
    fn += !p && t;
  }
  const long denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

double auc_roc(const Eigen::VectorXd& scores, const Eigen::VectorXd& truth) {
  if (scores.size() != truth.size()) throw InvalidInput("auc_roc: length mismatch");
  const auto n = static_cast<std::size_t>(scores.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores(static_cast<Eigen::Index>(a)) < scores(static_cast<Eigen::Index>(b));
  });

  // average ranks over tie groups, then the Mann-Whitney U statistic
  double positive_rank_sum = 0.0;
  double positives = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores(static_cast<Eigen::Index>(order[j])) == scores(static_cast<Eigen::Index>(order[i]))) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (truth(static_cast<Eigen::Index>(order[k])) > 0.0) {
        positive_rank_sum += rank;
        positives += 1.0;
      }
    i = j;
  }
  const double negatives = static_cast<double>(n) - positives;
  if (positives == 0.0 || negatives == 0.0) throw UndefinedMetric("auc_roc: both classes must be present");
  return (positive_rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

Eigen::VectorXi argmax_rows(const Eigen::MatrixXd& m) {
  Eigen::VectorXi out(m.rows());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Eigen::Index best = 0;
    m.row(r).maxCoeff(&best);
    out(r) = static_cast<int>(best);
  }
  return out;
}

MetricReport evaluate(const Eigen::MatrixXd& scores, const Eigen::MatrixXd& labels, const Eigen::MatrixXd& truth,
                      bool multiclass) {
  if (scores.rows() != truth.rows() || scores.cols() != truth.cols() || labels.rows() != truth.rows() ||
      labels.cols() != truth.cols())
    throw InvalidInput("evaluate: prediction and truth shapes differ");
  if (truth.size() == 0) throw InvalidInput("evaluate: empty input");

  MetricReport r;
  const auto c = truth.cols();
  r.per_label_f1.resize(c);
  r.per_label_auc.resize(c);
  double auc_sum = 0.0;
  int auc_count = 0;
  for (Eigen::Index j = 0; j < c; ++j) {
    r.per_label_f1(j) = f1_score(labels.col(j), truth.col(j));
    try {
      r.per_label_auc(j) = auc_roc(scores.col(j), truth.col(j));
      auc_sum += r.per_label_auc(j);
      ++auc_count;
    } catch (const UndefinedMetric&) {
      r.per_label_auc(j) = std::numeric_limits<double>::quiet_NaN();
    }
  }
  r.macro_f1 = r.per_label_f1.mean();
  r.macro_auc = auc_count ? auc_sum / auc_count : std::numeric_limits<double>::quiet_NaN();
  r.label_accuracy = static_cast<double>(((labels.array() > 0.0) == (truth.array() > 0.0)).count()) /
                     static_cast<double>(truth.size());
  if (multiclass) r.classification_rate = classification_rate(argmax_rows(scores), argmax_rows(truth));
  return r;
}

}  // namespace gpde::eval
