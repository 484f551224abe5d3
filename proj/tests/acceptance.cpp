// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "gpde/benchmark.hpp"
#include "gpde/eval.hpp"
#include "oracles.hpp"

using namespace gpde;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void run(const std::string& name, double budget_seconds, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool in_time = secs <= budget_seconds;
  const bool pass = o.pass && in_time;
  if (!pass) ++failures;
  std::printf("%s  %-44s %7.2fs (limit %gs)  %s%s\n", pass ? "PASS" : "FAIL", name.c_str(), secs, budget_seconds,
              o.detail.c_str(), in_time ? "" : " [over time limit]");
  std::fflush(stdout);
}

oracle::Theta random_theta(std::mt19937_64& rng) {
  return {oracle::uniform(rng, 0.3, 2.5), oracle::uniform(rng, 0.3, 2.0), oracle::uniform(rng, 0.05, 0.8)};
}

Hyperparams<> to_hyper(const oracle::Theta& t) { return {t.length_scale, t.signal_std, t.noise_std}; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

Outcome posterior_oracle() {
  std::mt19937_64 rng(1001);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const int n = oracle::uniform_int(rng, 1, 10), d = oracle::uniform_int(rng, 1, 3), c = oracle::uniform_int(rng, 1, 2);
    const oracle::Theta t = random_theta(rng);
    const Dataset<> data{oracle::normal(rng, n, d), oracle::normal(rng, n, c), "p"};
    const Eigen::MatrixXd xs = oracle::normal(rng, oracle::uniform_int(rng, 1, 6), d, 1.5);
    const auto p = posterior(train_expert(data, to_hyper(t)), xs);
    const auto ref = oracle::joint_condition(data.X, data.Y, xs, t);
    worst = std::max({worst, (p.mean - ref.mean).cwiseAbs().maxCoeff(), (p.variance - ref.variance).cwiseAbs().maxCoeff()});
  }
  return {worst <= 1e-8, fmt("max abs error %.2e", worst)};
}

Outcome adaptation_oracle() {
  std::mt19937_64 rng(1002);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const int d = oracle::uniform_int(rng, 1, 3), c = oracle::uniform_int(rng, 1, 2);
    const int ns = oracle::uniform_int(rng, 1, 8), nt = oracle::uniform_int(rng, 1, 5);
    const oracle::Theta t = random_theta(rng);
    const Dataset<> s{oracle::normal(rng, ns, d), oracle::normal(rng, ns, c), "s"};
    const Dataset<> tg{oracle::normal(rng, nt, d), oracle::normal(rng, nt, c), "t"};
    const Eigen::MatrixXd xs = oracle::normal(rng, oracle::uniform_int(rng, 1, 6), d, 1.5);
    const auto p = adapted_posterior(train_expert(s, to_hyper(t)), tg, xs);
    Eigen::MatrixXd xj(ns + nt, d), yj(ns + nt, c);
    xj << s.X, tg.X;
    yj << s.Y, tg.Y;
    const auto ref = oracle::joint_condition(xj, yj, xs, t);
    worst = std::max({worst, (p.mean - ref.mean).cwiseAbs().maxCoeff(), (p.variance - ref.variance).cwiseAbs().maxCoeff()});
  }
  return {worst <= 1e-8, fmt("max abs error %.2e", worst)};
}

Outcome gradient_check() {
  std::mt19937_64 rng(1003);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int n = oracle::uniform_int(rng, 3, 25), d = oracle::uniform_int(rng, 1, 3), c = oracle::uniform_int(rng, 1, 3);
    const oracle::Theta t = random_theta(rng);
    const Dataset<> data{oracle::normal(rng, n, d), oracle::signs(rng, n, c), "g"};
    const Eigen::Vector3d at = to_hyper(t).to_log();
    const auto lm = log_marginal_likelihood(data, to_hyper(t));
    const Eigen::Vector3d fd = oracle::central_difference(
        [&](const Eigen::Vector3d& v) {
          const auto h = Hyperparams<>::from_log(v);
          return oracle::log_marginal(data.X, data.Y, {h.length_scale, h.signal_std, h.noise_std});
        },
        at);
    worst = std::max(worst, (lm.grad - fd).norm() / std::max(fd.norm(), 1e-12));
  }
  return {worst < 1e-5, fmt("max relative error %.2e", worst)};
}

Outcome fusion_identities() {
  std::mt19937_64 rng(1004);
  double precision_err = 0.0;
  bool hull = true, single = true, target_only = true;
  for (int i = 0; i < 1000; ++i) {
    const int k = oracle::uniform_int(rng, 1, 8), m = oracle::uniform_int(rng, 1, 5), c = oracle::uniform_int(rng, 1, 3);
    std::vector<Eigen::MatrixXd> means;
    std::vector<Eigen::VectorXd> vars;
    for (int e = 0; e < k; ++e) {
      means.push_back(oracle::normal(rng, m, c));
      vars.push_back((oracle::normal(rng, m, 1, 1.5).array().exp()).matrix());
    }
    Eigen::VectorXd betas = (oracle::normal(rng, k, 1).array().abs() + 1e-3).matrix();
    betas /= betas.sum();
    const auto f = fuse<double>(means, vars, betas);
    Eigen::VectorXd precision = Eigen::VectorXd::Zero(m);
    for (int e = 0; e < k; ++e) precision.array() += betas(e) / vars[static_cast<std::size_t>(e)].array();
    precision_err = std::max(precision_err, ((f.variance.cwiseInverse() - precision).array() / precision.array()).abs().maxCoeff());
    for (Eigen::Index r = 0; r < m; ++r)
      for (Eigen::Index j = 0; j < c; ++j) {
        double lo = 1e300, hi = -1e300;
        for (const auto& mu : means) lo = std::min(lo, mu(r, j)), hi = std::max(hi, mu(r, j));
        hull = hull && f.mean(r, j) >= lo - 1e-12 && f.mean(r, j) <= hi + 1e-12;
      }
    const auto one = fuse<double>(std::vector{means[0]}, std::vector{vars[0]}, Eigen::VectorXd::Ones(1));
    single = single && (one.mean.array() == means[0].array()).all() && (one.variance.array() == vars[0].array()).all();

    // M = 0: the model is exactly the target GP
    if (i % 20 == 0) {
      const int d = oracle::uniform_int(rng, 1, 3);
      const Dataset<> t{oracle::normal(rng, 6, d), oracle::signs(rng, 6, c), "t"};
      const auto expert = std::make_shared<const Expert<>>(train_expert(t, to_hyper(random_theta(rng))));
      const Eigen::MatrixXd xs = oracle::normal(rng, m, d);
      const auto p = GpdeModel<>({}, t, expert).predict(xs);
      const auto ref = posterior(*expert, xs);
      target_only = target_only && (p.mean.array() == ref.mean.array()).all() &&
                    (p.variance.array() == ref.variance.cwiseMax(kVarianceFloor).array()).all();
    }
  }
  const bool pass = precision_err <= 1e-12 && hull && single && target_only;
  return {pass, fmt("precision rel err %.1e", precision_err) + (hull ? ", hull ok" : ", hull VIOLATED") +
                    (single ? ", single ok" : ", single differs") + (target_only ? ", M=0 ok" : ", M=0 differs")};
}

Outcome variance_monotonicity() {
  std::mt19937_64 rng(1005);
  double worst = -1e300;
  for (int i = 0; i < 50; ++i) {
    const int d = oracle::uniform_int(rng, 1, 3);
    const oracle::Theta t = random_theta(rng);
    const int ns = oracle::uniform_int(rng, 1, 10);
    const auto src = train_expert(Dataset<>{oracle::normal(rng, ns, d), oracle::signs(rng, ns, 1), "s"}, to_hyper(t));
    const Dataset<> tg{oracle::normal(rng, 6, d), oracle::signs(rng, 6, 1), "t"};
    const Eigen::MatrixXd xs = oracle::normal(rng, 10, d, 1.5);
    Eigen::VectorXd previous = posterior(src, xs).variance;
    for (Eigen::Index n = 1; n <= tg.size(); ++n) {
      const Eigen::VectorXd v = adapted_posterior(src, tg.head(n), xs).variance;
      worst = std::max(worst, (v - previous).maxCoeff());
      previous = v;
    }
  }
  return {worst <= 1e-8, fmt("max variance increase %.2e", worst)};
}

struct TrendData {
  bench::BenchmarkResult result;
  std::vector<int> schedule{10, 30, 50, 100};
};

const TrendData& trend() {
  static const TrendData data = [] {
    TrendData t;
    bench::BenchmarkSpec spec;
    spec.schedule = t.schedule;
    spec.folds = 10;  // ten seeds
    spec.seed = 0;
    t.result = bench::run_benchmark(spec, bench::SynthSource{data::ShiftConfig{}});
    return t;
  }();
  return data;
}

double acc(bench::Method m, int n) { return trend().result.mean(m, n, "accuracy"); }

Outcome trend_table() {
  const auto& t = trend();
  std::printf("      n_t   gp_source  gp_target  gpa     gpde_ss  gpde\n");
  for (int n : t.schedule)
    std::printf("      %-5d %.4f     %.4f     %.4f  %.4f   %.4f\n", n, acc(bench::Method::GpSource, n),
                acc(bench::Method::GpTarget, n), acc(bench::Method::Gpa, n), acc(bench::Method::GpdeSs, n),
                acc(bench::Method::Gpde, n));
  return {true, "10 seeds, default synthetic configuration"};
}

Outcome trend_target_monotone() {
  int inversions = 0;
  double worst = 0.0;
  const auto& s = trend().schedule;
  for (std::size_t i = 1; i < s.size(); ++i) {
    const double drop = acc(bench::Method::GpTarget, s[i - 1]) - acc(bench::Method::GpTarget, s[i]);
    if (drop > 0.0) ++inversions, worst = std::max(worst, drop);
  }
  return {inversions == 0 || (inversions == 1 && worst <= 0.01),
          std::to_string(inversions) + " inversion(s), largest " + fmt("%.4f", worst)};
}

Outcome trend_gpde_vs_baselines() {
  double worst = 1e300;
  for (int n : trend().schedule)
    worst = std::min(worst, acc(bench::Method::Gpde, n) -
                                std::max(acc(bench::Method::GpSource, n), acc(bench::Method::GpTarget, n)));
  return {worst >= -0.02, fmt("min gpde - max(source, target) = %+.4f", worst)};
}

Outcome trend_gpde_vs_gpa() {
  const double diff = acc(bench::Method::Gpde, 100) - acc(bench::Method::Gpa, 100);
  return {diff >= 0.0, fmt("gpde - gpa at n_t=100 = %+.4f", diff)};
}

Outcome expert_weights() {
  double w10 = 0.0, w50 = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    data::ShiftConfig cfg;
    cfg.seed = seed;
    const auto dom = data::synth_shift(cfg);
    const auto pca = data::pca_fit(concatenate(dom.sources, "all").X, 0.99);
    std::vector<Dataset<>> sources;
    for (const auto& s : dom.sources) sources.push_back(data::pca_apply(pca, s));
    const Dataset<> train = data::pca_apply(pca, dom.target_train);
    const Eigen::MatrixXd test = data::pca_apply(pca, dom.target_test.X);
    const auto pool = train_source_pool<double>(sources);
    const Eigen::Index target_col = static_cast<Eigen::Index>(sources.size());
    w10 += train_gpde(pool, train.head(10)).expert_weights(test).col(target_col).mean() / 10.0;
    w50 += train_gpde(pool, train.head(50)).expert_weights(test).col(target_col).mean() / 10.0;
  }
  return {w50 > w10, fmt("target weight %.4f at n_t=10", w10) + fmt(", %.4f at n_t=50", w50)};
}

Outcome metric_units() {
  using eval::auc_roc;
  using eval::classification_rate;
  using eval::f1_score;
  auto vi = [](std::vector<int> v) { return Eigen::VectorXi(Eigen::Map<Eigen::VectorXi>(v.data(), static_cast<Eigen::Index>(v.size()))); };
  auto vd = [](std::vector<double> v) { return Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()))); };
  int bad = 0;
  bad += classification_rate(vi({0, 1, 2}), vi({0, 1, 2})) != 1.0;
  bad += classification_rate(vi({0, 1}), vi({0, 0})) != 0.5;
  bad += classification_rate(vi({1, 2, 2, 3}), vi({1, 2, 3, 3})) != 0.75;
  bad += f1_score(vd({1, -1, 1}), vd({1, -1, 1})) != 1.0;
  bad += f1_score(vd({-1, 1}), vd({1, -1})) != 0.0;
  bad += f1_score(vd({1, 1, 1, -1, -1}), vd({1, 1, -1, 1, -1})) != 2.0 * 2.0 / (2.0 * 2.0 + 1.0 + 1.0);
  bad += auc_roc(vd({0.1, 0.2, 0.8, 0.9}), vd({-1, -1, 1, 1})) != 1.0;
  bad += auc_roc(vd({0.5, 0.5, 0.5, 0.5}), vd({-1, 1, -1, 1})) != 0.5;
  bad += auc_roc(vd({0.9, 0.4, 0.6, 0.1}), vd({1, -1, 1, -1})) != 1.0;
  return {bad == 0, std::to_string(9 - bad) + "/9 exact"};
}

Outcome hyper_recovery() {
  const oracle::Theta truth{1.0, 1.0, 0.1};
  std::vector<double> ls, sf, sv;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(2000 + seed);
    Eigen::MatrixXd x(200, 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = oracle::uniform(rng, 0.0, 10.0);
    const Dataset<> d{x, oracle::sample_gp(rng, x, truth, 1), "rec"};
    const auto r = fit(d, default_init(d));
    ls.push_back(r.hyper.length_scale);
    sf.push_back(r.hyper.signal_std);
    sv.push_back(r.hyper.noise_std);
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return 0.5 * (v[4] + v[5]);
  };
  const double el = std::abs(median(ls) / truth.length_scale - 1.0);
  const double es = std::abs(median(sf) / truth.signal_std - 1.0);
  const double en = std::abs(median(sv) / truth.noise_std - 1.0);
  return {el <= 0.25 && es <= 0.25 && en <= 0.25,
          fmt("median rel err: length %.3f", el) + fmt(", signal %.3f", es) + fmt(", noise %.3f", en)};
}

}  // namespace

int main() {
  run("posterior matches joint conditioning", 10, posterior_oracle);
  run("adaptation matches joint conditioning", 10, adaptation_oracle);
  run("log-marginal gradient vs finite differences", 30, gradient_check);
  run("fusion identities", 5, fusion_identities);
  run("variance monotonicity", 60, variance_monotonicity);
  std::printf("      synthetic trend, mean accuracy:\n");
  run("synthetic benchmark run", 300, trend_table);
  run("trend (a) gp_target monotone in n_t", 300, trend_target_monotone);
  run("trend (b) gpde >= best single domain - 0.02", 300, trend_gpde_vs_baselines);
  run("trend (c) gpde >= gpa at n_t=100", 300, trend_gpde_vs_gpa);
  run("target expert weight grows 10 -> 50", 120, expert_weights);
  run("metric unit examples", 1, metric_units);
  run("hyperparameter recovery", 120, hyper_recovery);
  std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
