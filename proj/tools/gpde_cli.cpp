#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gpde/benchmark.hpp"
#include "gpde/eval.hpp"
#include "gpde/io.hpp"

namespace fs = std::filesystem;
using namespace gpde;

namespace {

// Hash over the options that determine an artifact, in a fixed order.
class Canon {
 public:
  template <typename T>
  Canon& add(const std::string& key, const T& value) {
    text_ << key << '=' << value << '\n';
    return *this;
  }
  Canon& add_path(const std::string& key, const fs::path& p) { return add(key, fs::absolute(p).string()); }
  std::string hash() const { return io::hex_hash(data::config_hash(text_.str())); }

 private:
  std::ostringstream text_;
};

FitOptions fit_options(int max_iterations) {
  FitOptions opts;
  opts.max_iterations = max_iterations;
  return opts;
}

void report_fit(const std::string& what, const FitResult<>& fit) {
  std::cerr << what << ": length_scale=" << fit.hyper.length_scale << " signal_std=" << fit.hyper.signal_std
            << " noise_std=" << fit.hyper.noise_std << " log_marginal=" << fit.objective
            << " iterations=" << fit.iterations << (fit.converged ? "" : " (not converged)") << '\n';
}

std::vector<double> parse_betas(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw ConfigError("bad beta value '" + item + "'");
    out.push_back(v);
  }
  return out;
}

// Writes the first n rows of a dataset next to `artifact` and returns the
// new path, so model files keep pointing at exactly what was trained on.
fs::path write_subset(const Dataset<>& d, Eigen::Index n, const fs::path& artifact, const std::string& tag) {
  if (n > d.size())
    throw ConfigError("--nt " + std::to_string(n) + " exceeds the " + std::to_string(d.size()) + " available rows");
  fs::path out = artifact;
  out.replace_extension("." + tag + ".csv");
  data::save_dataset(out, d.head(n));
  return out;
}

std::ostream& open_out(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw LoadError("cannot write " + path);
  return file;
}

// ---- subcommands --------------------------------------------------------------

struct SynthArgs {
  std::string config;
  std::uint64_t seed = 0;
  std::string mode = "multilabel";
  std::string out;
};

void run_synth(const SynthArgs& a) {
  data::ShiftConfig cfg = a.config.empty() ? data::ShiftConfig{} : data::load_shift_config(a.config);
  cfg.seed = a.seed;
  const DecisionMode mode = io::parse_mode(a.mode);
  const data::SyntheticDomains dom = data::synth_shift(cfg);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  auto relabel = [&](Dataset<> d) {
    if (mode == DecisionMode::MultiClass) d.Y = dom.latent.class_labels(d.X);
    return d;
  };
  nlohmann::json manifest;
  manifest["format"] = "gpde-synthetic-domains";
  manifest["seed"] = cfg.seed;
  manifest["config_hash"] = io::hex_hash(data::config_hash(cfg.to_text() + "mode=" + a.mode + '\n'));
  manifest["config"] = cfg.to_text();
  manifest["mode"] = a.mode;
  for (std::size_t k = 0; k < dom.sources.size(); ++k) {
    const std::string name = "source_" + std::to_string(k) + ".csv";
    data::save_dataset(dir / name, relabel(dom.sources[k]));
    manifest["sources"].push_back(name);
  }
  data::save_dataset(dir / "target_train.csv", relabel(dom.target_train));
  data::save_dataset(dir / "target_test.csv", relabel(dom.target_test));
  manifest["target_train"] = "target_train.csv";
  manifest["target_test"] = "target_test.csv";
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
  std::cerr << "wrote " << dom.sources.size() << " source domains and the target split to " << dir.string() << '\n';
}

struct TrainSourceArgs {
  std::vector<std::string> sources;
  double energy = 0.99;
  std::uint64_t seed = 0;
  int max_iterations = 200;
  std::string out;
};

void run_train_source(const TrainSourceArgs& a) {
  std::vector<Dataset<>> raw;
  for (const auto& p : a.sources) raw.push_back(data::load_dataset(p));
  io::PoolFile pool;
  pool.kind = "source";
  pool.pca = data::pca_fit(concatenate(raw, "all_sources").X, a.energy);
  std::cerr << "pca: " << pool.pca->input_dims() << " -> " << pool.pca->output_dims() << " dims, retained energy "
            << pool.pca->retained << '\n';
  std::vector<Dataset<>> projected;
  for (const auto& d : raw) projected.push_back(data::pca_apply(*pool.pca, d));
  const SourcePool<> trained = train_source_pool<double>(projected, std::nullopt, fit_options(a.max_iterations));
  report_fit("source fit", trained.fit);

  Canon canon;
  for (const auto& p : a.sources) canon.add_path("source", p);
  canon.add("energy", data::format_double(a.energy)).add("max_iterations", a.max_iterations).add("seed", a.seed);
  pool.hyper = trained.hyper;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    pool.datasets.push_back(a.sources[i]);
    pool.domain_ids.push_back(raw[i].domain_id);
  }
  pool.seed = a.seed;
  pool.config_hash = canon.hash();
  pool.objective = trained.fit.objective;
  pool.iterations = trained.fit.iterations;
  pool.converged = trained.fit.converged;
  io::save_pool(a.out, pool);
}

struct TrainTargetArgs {
  std::string target;
  std::string pool;
  int nt = 0;
  double energy = 0.99;
  std::uint64_t seed = 0;
  int max_iterations = 200;
  std::string out;
};

io::PoolFile train_target_pool(const TrainTargetArgs& a) {
  Dataset<> raw = data::load_dataset(a.target);
  fs::path data_path = a.target;
  if (a.nt > 0) {
    data_path = write_subset(raw, a.nt, a.out, "target");
    raw = raw.head(a.nt);
  }
  io::PoolFile pool;
  pool.kind = "target";
  if (!a.pool.empty()) {
    pool.pca = io::load_pool(a.pool).pca;
  } else {
    pool.pca = data::pca_fit(raw.X, a.energy);
  }
  const Dataset<> projected = pool.pca ? data::pca_apply(*pool.pca, raw) : raw;
  GpdeTrainOptions<double> opts;
  opts.fit = fit_options(a.max_iterations);
  FitResult<> fit;
  train_target_expert(projected, opts, &fit);
  report_fit("target fit", fit);

  Canon canon;
  canon.add_path("target", a.target).add("nt", a.nt).add("max_iterations", a.max_iterations).add("seed", a.seed);
  if (a.pool.empty()) canon.add("energy", data::format_double(a.energy));
  else canon.add_path("pool", a.pool);
  pool.hyper = fit.hyper;
  pool.datasets = {data_path};
  pool.domain_ids = {raw.domain_id};
  pool.seed = a.seed;
  pool.config_hash = canon.hash();
  pool.objective = fit.objective;
  pool.iterations = fit.iterations;
  pool.converged = fit.converged;
  io::save_pool(a.out, pool);
  return pool;
}

struct AdaptArgs {
  std::string pool;
  std::string target;
  std::string target_pool;
  bool no_target_expert = false;
  int nt = 0;
  std::string betas;
  std::string mode = "multilabel";
  std::uint64_t seed = 0;
  int max_iterations = 200;
  std::string out;
};

void run_adapt(const AdaptArgs& a) {
  io::BundleFile b;
  b.source_pool = fs::path(a.pool);
  b.mode = io::parse_mode(a.mode);
  b.seed = a.seed;
  if (!a.betas.empty()) b.betas = parse_betas(a.betas);

  Dataset<> target = data::load_dataset(a.target);
  b.target_data = fs::path(a.target);
  if (a.nt > 0) b.target_data = write_subset(target, a.nt, a.out, "adapt");

  if (!a.target_pool.empty()) {
    if (a.no_target_expert) throw ConfigError("--target-pool and --no-target-expert are mutually exclusive");
    b.target_pool = fs::path(a.target_pool);
  } else if (!a.no_target_expert) {
    TrainTargetArgs t;
    t.target = b.target_data->string();
    t.pool = a.pool;
    t.seed = a.seed;
    t.max_iterations = a.max_iterations;
    t.out = fs::path(a.out).replace_extension(".target.json").string();
    train_target_pool(t);
    b.target_pool = fs::path(t.out);
  }

  Canon canon;
  canon.add_path("pool", a.pool).add_path("target", a.target).add("nt", a.nt).add("mode", a.mode);
  canon.add("betas", a.betas).add("target_expert", b.target_pool ? b.target_pool->filename().string() : "none");
  canon.add("seed", a.seed);
  b.config_hash = canon.hash();

  // validate the full model before writing anything that points at it
  const io::LoadedModel loaded = io::materialize_bundle(b);
  std::cerr << "model: " << loaded.model.sources().size() << " source experts"
            << (loaded.model.target() ? " + target expert" : "") << ", " << loaded.model.target_data().size()
            << " adaptation rows\n";
  io::save_bundle(a.out, b);
}

struct PredictArgs {
  std::string model;
  std::string input;
  std::string out;
};

Dataset<> load_input(const std::string& path, const std::optional<data::PcaProjector>& pca) {
  data::CsvSchema schema;
  schema.allow_unlabeled = true;
  Dataset<> d = data::load_dataset(path, schema);
  return pca ? data::pca_apply(*pca, d) : d;
}

void run_predict(const PredictArgs& a) {
  const io::BundleFile b = io::load_bundle(a.model);
  const io::LoadedModel loaded = io::materialize_bundle(b);
  const Dataset<> in = load_input(a.input, loaded.pca);
  const FusedPrediction<> p = loaded.model.predict(in.X);

  std::ofstream file;
  std::ostream& out = open_out(a.out, file);
  out << "# seed=" << b.seed << " config_hash=" << b.config_hash << '\n';
  const Eigen::Index c = p.mean.cols();
  for (Eigen::Index j = 0; j < c; ++j) out << "mean" << j << ',';
  out << "variance";
  for (Eigen::Index j = 0; j < c; ++j) out << ",label" << j;
  out << '\n';
  for (Eigen::Index i = 0; i < p.mean.rows(); ++i) {
    for (Eigen::Index j = 0; j < c; ++j) out << data::format_double(p.mean(i, j)) << ',';
    out << data::format_double(p.variance(i));
    for (Eigen::Index j = 0; j < c; ++j) out << ',' << static_cast<int>(p.labels(i, j));
    out << '\n';
  }

  if (in.outputs() == c) {
    const auto rep = eval::evaluate(p.mean, p.labels, in.Y, b.mode == DecisionMode::MultiClass);
    if (rep.classification_rate) std::cerr << "classification_rate=" << *rep.classification_rate << '\n';
    std::cerr << "accuracy=" << rep.label_accuracy << " macro_f1=" << rep.macro_f1 << " macro_auc=" << rep.macro_auc
              << '\n';
  }
}

void run_weights(const PredictArgs& a) {
  const io::BundleFile b = io::load_bundle(a.model);
  const io::LoadedModel loaded = io::materialize_bundle(b);
  const Dataset<> in = load_input(a.input, loaded.pca);
  const Eigen::MatrixXd w = loaded.model.expert_weights(in.X);

  std::ofstream file;
  std::ostream& out = open_out(a.out, file);
  out << "# seed=" << b.seed << " config_hash=" << b.config_hash << '\n';
  std::vector<std::string> names;
  for (const auto& s : loaded.model.sources()) names.push_back(s->data.domain_id);
  if (loaded.model.target()) names.push_back("target");
  for (std::size_t j = 0; j < names.size(); ++j) out << (j ? "," : "") << names[j];
  out << '\n';
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) out << (j ? "," : "") << data::format_double(w(i, j));
    out << '\n';
  }
  const Eigen::RowVectorXd mean = w.colwise().mean();
  for (std::size_t j = 0; j < names.size(); ++j)
    std::cerr << "mean weight " << names[j] << "=" << mean(static_cast<Eigen::Index>(j)) << '\n';
}

struct BenchArgs {
  std::vector<std::string> sources;
  std::string target;
  std::string test;
  std::string config;
  bool synthetic = false;
  std::string nt = "10,30,50,100";
  std::string methods = "gp_source,gp_target,gpa,gpde_ss,gpde";
  std::string mode = "multilabel";
  std::uint64_t seed = 0;
  double energy = 0.99;
  int folds = 5;
  int max_iterations = 200;
  std::string out;
};

void run_bench(const BenchArgs& a) {
  bench::BenchmarkSpec spec;
  spec.methods = bench::parse_methods(a.methods);
  spec.schedule = bench::parse_schedule(a.nt);
  spec.mode = io::parse_mode(a.mode);
  spec.seed = a.seed;
  spec.energy = a.energy;
  spec.folds = a.folds;
  spec.fit = fit_options(a.max_iterations);

  bench::DataSource source;
  if (a.synthetic || !a.config.empty()) {
    if (!a.sources.empty() || !a.target.empty())
      throw ConfigError("bench: use either --synthetic/--config or --source/--target, not both");
    source = bench::SynthSource{a.config.empty() ? data::ShiftConfig{} : data::load_shift_config(a.config)};
  } else {
    if (a.target.empty()) throw ConfigError("bench: --target is required unless --synthetic or --config is given");
    bench::FileSource files;
    for (const auto& s : a.sources) files.sources.emplace_back(s);
    files.target = a.target;
    if (!a.test.empty()) files.target_test = fs::path(a.test);
    source = files;
  }

  const bench::BenchmarkResult r = bench::run_benchmark(spec, source);
  std::ofstream file;
  bench::write_table(open_out(a.out, file), r);

  const std::string metric = bench::primary_metric(spec.mode);
  std::cerr << "mean " << metric << " by method and n_t:\n";
  for (auto m : spec.methods) {
    std::cerr << "  " << bench::method_name(m);
    for (int n : spec.schedule) std::cerr << "  " << n << ':' << r.mean(m, n, metric);
    std::cerr << '\n';
  }
  std::cerr << "source fits=" << r.source_fits << " target fits=" << r.target_fits << '\n';
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const InvalidInput*>(&e)) return 2;
  if (dynamic_cast<const LoadError*>(&e)) return 3;
  if (dynamic_cast<const NumericalFailure*>(&e)) return 4;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian-process domain experts: train, adapt, predict and benchmark"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate seeded synthetic source and target domains");
  s->add_option("--config", synth.config, "key=value shift configuration file")->check(CLI::ExistingFile);
  s->add_option("--seed", synth.seed, "Random seed");
  s->add_option("--mode", synth.mode, "multilabel or multiclass labels");
  s->add_option("--out", synth.out, "Output directory")->required();

  TrainSourceArgs ts;
  auto* tsrc = app.add_subcommand("train-source", "Fit shared hyperparameters over source domains");
  tsrc->add_option("--source", ts.sources, "Source domain CSV files")->required()->expected(1, -1);
  tsrc->add_option("--energy", ts.energy, "PCA energy to retain")->capture_default_str();
  tsrc->add_option("--seed", ts.seed, "Random seed recorded in the artifact");
  tsrc->add_option("--max-iter", ts.max_iterations, "Optimizer iteration cap")->capture_default_str();
  tsrc->add_option("--out", ts.out, "Output pool file")->required();

  TrainTargetArgs tt;
  auto* ttgt = app.add_subcommand("train-target", "Fit a target-domain expert");
  ttgt->add_option("--target", tt.target, "Target CSV")->required();
  ttgt->add_option("--pool", tt.pool, "Source pool whose feature projection to reuse");
  ttgt->add_option("--nt", tt.nt, "Use only the first N target rows");
  ttgt->add_option("--energy", tt.energy, "PCA energy when no --pool is given")->capture_default_str();
  ttgt->add_option("--seed", tt.seed, "Random seed recorded in the artifact");
  ttgt->add_option("--max-iter", tt.max_iterations, "Optimizer iteration cap")->capture_default_str();
  ttgt->add_option("--out", tt.out, "Output pool file")->required();

  AdaptArgs ad;
  auto* adapt = app.add_subcommand("adapt", "Adapt a source pool to target data and write a model");
  adapt->add_option("--pool", ad.pool, "Source pool file")->required();
  adapt->add_option("--target", ad.target, "Labeled target CSV")->required();
  adapt->add_option("--target-pool", ad.target_pool, "Pretrained target expert");
  adapt->add_flag("--no-target-expert", ad.no_target_expert, "Adapted sources only");
  adapt->add_option("--nt", ad.nt, "Use only the first N target rows");
  adapt->add_option("--betas", ad.betas, "Comma-separated expert weights (sources, then target)");
  adapt->add_option("--mode", ad.mode, "multilabel or multiclass")->capture_default_str();
  adapt->add_option("--seed", ad.seed, "Random seed recorded in the artifact");
  adapt->add_option("--max-iter", ad.max_iterations, "Optimizer iteration cap")->capture_default_str();
  adapt->add_option("--out", ad.out, "Output model file")->required();

  PredictArgs pr;
  auto* predict = app.add_subcommand("predict", "Fused predictions for an input CSV");
  predict->add_option("--model", pr.model, "Model file")->required();
  predict->add_option("--input", pr.input, "Input CSV (labels optional)")->required();
  predict->add_option("--out", pr.out, "Output CSV (default stdout)");

  PredictArgs wt;
  auto* weights = app.add_subcommand("weights", "Per-point normalized expert weights");
  weights->add_option("--model", wt.model, "Model file")->required();
  weights->add_option("--input", wt.input, "Input CSV (labels optional)")->required();
  weights->add_option("--out", wt.out, "Output CSV (default stdout)");

  BenchArgs bn;
  auto* bench_cmd = app.add_subcommand("bench", "Run the increasing-target-cardinality benchmark");
  bench_cmd->add_option("--source", bn.sources, "Source domain CSV files")->expected(1, -1);
  bench_cmd->add_option("--target", bn.target, "Target CSV (train pool, or folded when --test is absent)");
  bench_cmd->add_option("--test", bn.test, "Held-out target CSV");
  bench_cmd->add_option("--config", bn.config, "Synthetic shift configuration file")->check(CLI::ExistingFile);
  bench_cmd->add_flag("--synthetic", bn.synthetic, "Use the default synthetic configuration");
  bench_cmd->add_option("--nt", bn.nt, "Target cardinality schedule")->capture_default_str();
  bench_cmd->add_option("--methods", bn.methods, "Methods to compare")->capture_default_str();
  bench_cmd->add_option("--mode", bn.mode, "multilabel or multiclass")->capture_default_str();
  bench_cmd->add_option("--seed", bn.seed, "Base random seed");
  bench_cmd->add_option("--energy", bn.energy, "PCA energy to retain")->capture_default_str();
  bench_cmd->add_option("--folds", bn.folds, "Folds (synthetic: seeds)")->capture_default_str();
  bench_cmd->add_option("--max-iter", bn.max_iterations, "Optimizer iteration cap")->capture_default_str();
  bench_cmd->add_option("--out", bn.out, "Result table (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*s) run_synth(synth);
    else if (*tsrc) run_train_source(ts);
    else if (*ttgt) train_target_pool(tt);
    else if (*adapt) run_adapt(ad);
    else if (*predict) run_predict(pr);
    else if (*weights) run_weights(wt);
    else if (*bench_cmd) run_bench(bn);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return EXIT_SUCCESS;
}
