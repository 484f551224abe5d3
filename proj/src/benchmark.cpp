#include "gpde/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <sstream>
#include <tuple>

#include "gpde/eval.hpp"
#include "gpde/io.hpp"

namespace gpde::bench {

namespace {

struct FoldData {
  std::vector<Dataset<>> sources;
  Dataset<> target_pool;
  Dataset<> target_test;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

Dataset<> take_rows(const Dataset<>& d, const std::vector<Eigen::Index>& rows, std::string id) {
  Dataset<> out{Eigen::MatrixXd(static_cast<Eigen::Index>(rows.size()), d.dims()),
                Eigen::MatrixXd(static_cast<Eigen::Index>(rows.size()), d.outputs()), std::move(id)};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.X.row(static_cast<Eigen::Index>(i)) = d.X.row(rows[i]);
    out.Y.row(static_cast<Eigen::Index>(i)) = d.Y.row(rows[i]);
  }
  return out;
}

Dataset<> one_hot_from_latent(const data::LatentFunction& f, Dataset<> d) {
  d.Y = f.class_labels(d.X);
  return d;
}

std::vector<FoldData> prepare_folds(const BenchmarkSpec& spec, const DataSource& source) {
  std::vector<FoldData> folds;
  if (const auto* synth = std::get_if<SynthSource>(&source)) {
    for (int f = 0; f < spec.folds; ++f) {
      data::ShiftConfig cfg = synth->config;
      cfg.seed = spec.seed + static_cast<std::uint64_t>(f);
      data::SyntheticDomains dom = data::synth_shift(cfg);
      FoldData fd{std::move(dom.sources), std::move(dom.target_train), std::move(dom.target_test)};
      if (spec.mode == DecisionMode::MultiClass) {
        for (auto& s : fd.sources) s = one_hot_from_latent(dom.latent, std::move(s));
        fd.target_pool = one_hot_from_latent(dom.latent, std::move(fd.target_pool));
        fd.target_test = one_hot_from_latent(dom.latent, std::move(fd.target_test));
      }
      folds.push_back(std::move(fd));
    }
    return folds;
  }

  const auto& files = std::get<FileSource>(source);
  std::vector<Dataset<>> sources;
  for (const auto& p : files.sources) sources.push_back(data::load_dataset(p));
  const Dataset<> target = data::load_dataset(files.target);
  if (files.target_test) {
    const Dataset<> test = data::load_dataset(*files.target_test);
    for (int f = 0; f < spec.folds; ++f) folds.push_back({sources, target, test});
    return folds;
  }
  if (spec.folds < 2) throw ConfigError("bench: without a target test file at least 2 folds are required");
  const Eigen::Index n = target.size();
  if (n < spec.folds) throw ConfigError("bench: fewer target rows than folds");
  for (int f = 0; f < spec.folds; ++f) {
    const Eigen::Index begin = n * f / spec.folds;
    const Eigen::Index end = n * (f + 1) / spec.folds;
    std::vector<Eigen::Index> train, test;
    for (Eigen::Index i = 0; i < n; ++i) (i >= begin && i < end ? test : train).push_back(i);
    folds.push_back({sources, take_rows(target, train, target.domain_id + "_train"),
                     take_rows(target, test, target.domain_id + "_test")});
  }
  return folds;
}

std::string canonical_text(const BenchmarkSpec& spec, const DataSource& source) {
  std::ostringstream out;
  out << "methods=";
  for (auto m : spec.methods) out << method_name(m) << ';';
  out << "\nschedule=";
  for (int n : spec.schedule) out << n << ';';
  out << "\nfolds=" << spec.folds << "\nmode=" << io::mode_name(spec.mode)
      << "\nenergy=" << data::format_double(spec.energy) << "\nseed=" << spec.seed << '\n';
  if (const auto* synth = std::get_if<SynthSource>(&source)) {
    data::ShiftConfig cfg = synth->config;
    cfg.seed = 0;  // per-fold seeds derive from spec.seed
    out << cfg.to_text();
  } else {
    const auto& files = std::get<FileSource>(source);
    for (const auto& p : files.sources) out << "source=" << p.string() << '\n';
    out << "target=" << files.target.string() << '\n';
    if (files.target_test) out << "test=" << files.target_test->string() << '\n';
  }
  return out.str();
}

bool needs_sources(const std::vector<Method>& methods) {
  return std::any_of(methods.begin(), methods.end(), [](Method m) { return m != Method::GpTarget; });
}

bool needs_target_expert(const std::vector<Method>& methods) {
  return std::any_of(methods.begin(), methods.end(),
                     [](Method m) { return m == Method::GpTarget || m == Method::GpdeSs || m == Method::Gpde; });
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::GpSource: return "gp_source";
    case Method::GpTarget: return "gp_target";
    case Method::Gpa: return "gpa";
    case Method::GpdeSs: return "gpde_ss";
    case Method::Gpde: return "gpde";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  for (Method m : kAllMethods)
    if (method_name(m) == name) return m;
  throw ConfigError("unknown method '" + name + "'");
}

std::vector<Method> parse_methods(const std::string& comma_list) {
  std::vector<Method> out;
  for (const auto& s : split_list(comma_list)) {
    const Method m = parse_method(s);
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  return out;
}

std::vector<int> parse_schedule(const std::string& comma_list) {
  std::vector<int> out;
  for (const auto& s : split_list(comma_list)) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size()) throw ConfigError("bad cardinality '" + s + "' in schedule");
    out.push_back(v);
  }
  return out;
}

std::string primary_metric(DecisionMode mode) { return mode == DecisionMode::MultiClass ? "cr" : "accuracy"; }

void BenchmarkSpec::validate() const {
  if (methods.empty()) throw ConfigError("bench: no methods selected");
  if (schedule.empty()) throw ConfigError("bench: empty target-cardinality schedule");
  if (schedule.front() < 1) throw ConfigError("bench: cardinalities must be >= 1");
  for (std::size_t i = 1; i < schedule.size(); ++i)
    if (schedule[i] <= schedule[i - 1]) throw ConfigError("bench: schedule must be strictly increasing");
  if (folds < 1) throw ConfigError("bench: folds must be >= 1");
  if (!(energy > 0.0 && energy <= 1.0)) throw ConfigError("bench: energy must be in (0, 1]");
}

double BenchmarkResult::mean(Method m, int n_t, const std::string& metric) const {
  const std::string name = method_name(m);
  for (const auto& r : rows)
    if (r.fold < 0 && r.method == name && r.n_t == n_t && r.metric == metric) return r.value;
  throw InvalidInput("no aggregate row for " + name + " n_t=" + std::to_string(n_t) + " " + metric);
}

BenchmarkResult run_benchmark(const BenchmarkSpec& spec, const DataSource& source) {
  spec.validate();
  const std::vector<FoldData> folds = prepare_folds(spec, source);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (spec.schedule.back() > folds[f].target_pool.size())
      throw ConfigError("bench: cardinality " + std::to_string(spec.schedule.back()) + " exceeds the target pool (" +
                        std::to_string(folds[f].target_pool.size()) + " rows) in fold " + std::to_string(f));
    if (needs_sources(spec.methods) && folds[f].sources.empty())
      throw ConfigError("bench: selected methods need at least one source dataset");
  }

  BenchmarkResult result;
  result.seed = spec.seed;
  result.config_hash = io::hex_hash(data::config_hash(canonical_text(spec, source)));
  const bool multiclass = spec.mode == DecisionMode::MultiClass;
  const bool same_sources_every_fold = std::holds_alternative<FileSource>(source);

  auto emit = [&](Method m, int n_t, int fold, const FusedPrediction<>& p, const Dataset<>& test) {
    const eval::MetricReport rep = eval::evaluate(p.mean, p.labels, test.Y, multiclass);
    const std::string name = method_name(m);
    if (multiclass) {
      result.rows.push_back({name, n_t, fold, "cr", *rep.classification_rate});
    } else {
      result.rows.push_back({name, n_t, fold, "accuracy", rep.label_accuracy});
      result.rows.push_back({name, n_t, fold, "f1", rep.macro_f1});
      result.rows.push_back({name, n_t, fold, "auc", rep.macro_auc});
    }
  };

  std::optional<SourcePool<>> cached_pool;
  std::optional<data::PcaProjector> cached_pca;
  for (std::size_t fi = 0; fi < folds.size(); ++fi) {
    const int fold = static_cast<int>(fi);
    const FoldData& raw = folds[fi];

    // PCA on source rows only (the target pool when there are no sources)
    if (!cached_pca || !same_sources_every_fold) {
      const Dataset<> fit_on = raw.sources.empty() ? raw.target_pool : concatenate(raw.sources, "pca");
      cached_pca = data::pca_fit(fit_on.X, spec.energy);
    }
    const data::PcaProjector& pca = *cached_pca;
    std::vector<Dataset<>> sources;
    for (const auto& s : raw.sources) sources.push_back(data::pca_apply(pca, s));
    const Dataset<> pool_t = data::pca_apply(pca, raw.target_pool);
    const Dataset<> test = data::pca_apply(pca, raw.target_test);

    std::shared_ptr<const Expert<>> pooled;
    if (needs_sources(spec.methods)) {
      if (!cached_pool || !same_sources_every_fold) {
        cached_pool = train_source_pool<double>(sources, std::nullopt, spec.fit);
        ++result.source_fits;
        if (!cached_pool->fit.converged)
          std::cerr << "warning: fold " << fold << " source fit stopped before convergence\n";
      }
      pooled = std::make_shared<const Expert<>>(train_expert(concatenate(sources, "all_sources"), cached_pool->hyper));
    }
    const Dataset<> no_target{Eigen::MatrixXd(0, test.dims()), Eigen::MatrixXd(0, test.outputs()), "none"};

    for (Method m : spec.methods) {
      if (m != Method::GpSource) continue;
      const FusedPrediction<> p = GpdeModel<>({pooled}, no_target, nullptr, spec.mode).predict(test.X);
      for (int n_t : spec.schedule) emit(m, n_t, fold, p, test);
    }

    for (int n_t : spec.schedule) {
      const Dataset<> target = pool_t.head(n_t);
      std::shared_ptr<const Expert<>> target_expert;
      if (needs_target_expert(spec.methods)) {
        GpdeTrainOptions<double> topts;
        topts.fit = spec.fit;
        target_expert = train_target_expert(target, topts);
        ++result.target_fits;
      }
      for (Method m : spec.methods) {
        std::optional<GpdeModel<>> model;
        switch (m) {
          case Method::GpSource: continue;
          case Method::GpTarget: model.emplace(std::vector<std::shared_ptr<const Expert<>>>{}, target, target_expert, spec.mode); break;
          case Method::Gpa: model.emplace(std::vector{pooled}, target, nullptr, spec.mode); break;
          case Method::GpdeSs: model.emplace(std::vector{pooled}, target, target_expert, spec.mode); break;
          case Method::Gpde: model.emplace(cached_pool->experts, target, target_expert, spec.mode); break;
        }
        emit(m, n_t, fold, model->predict(test.X), test);
      }
    }
    std::cerr << "fold " << fold + 1 << "/" << folds.size() << " done\n";
  }

  // across-fold means, skipping undefined (NaN) values
  std::map<std::tuple<std::size_t, int, std::string>, std::pair<double, int>> acc;
  std::vector<std::tuple<std::size_t, int, std::string>> order;
  for (const auto& r : result.rows) {
    const auto mi = static_cast<std::size_t>(
        std::find_if(spec.methods.begin(), spec.methods.end(), [&](Method m) { return method_name(m) == r.method; }) -
        spec.methods.begin());
    const auto key = std::make_tuple(mi, r.n_t, r.metric);
    auto [it, inserted] = acc.try_emplace(key, 0.0, 0);
    if (inserted) order.push_back(key);
    if (std::isfinite(r.value)) {
      it->second.first += r.value;
      ++it->second.second;
    }
  }
  std::sort(order.begin(), order.end());
  for (const auto& key : order) {
    const auto& [sum, count] = acc.at(key);
    result.rows.push_back({method_name(spec.methods[std::get<0>(key)]), std::get<1>(key), -1, std::get<2>(key),
                           count ? sum / count : std::nan("")});
  }
  return result;
}

void write_table(std::ostream& out, const BenchmarkResult& r) {
  out << "# seed=" << r.seed << " config_hash=" << r.config_hash << " source_fits=" << r.source_fits
      << " target_fits=" << r.target_fits << '\n';
  out << "method,n_t,fold,metric,value\n";
  for (const auto& row : r.rows) {
    out << row.method << ',' << row.n_t << ',' << (row.fold < 0 ? std::string("mean") : std::to_string(row.fold))
        << ',' << row.metric << ',' << data::format_double(row.value) << '\n';
  }
}

}  // namespace gpde::bench
