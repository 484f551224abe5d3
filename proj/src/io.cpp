#include "gpde/io.hpp"

#include <cstdio>
#include <fstream>

#include "json.hpp"

namespace gpde::io {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kFormatVersion = 1;

json write_matrix(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd read_matrix(const json& rows) {
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = r ? static_cast<Eigen::Index>(rows.at(0).size()) : 0;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    const json& row = rows.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != c) throw LoadError("ragged matrix in model file");
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = row.at(static_cast<std::size_t>(j)).get<double>();
  }
  return m;
}

json read_json(const fs::path& path, const std::string& format) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
  if (j.value("format", "") != format) throw LoadError(path.string() + ": not a " + format + " file");
  if (j.value("version", 0) != kFormatVersion) throw LoadError(path.string() + ": unsupported version");
  return j;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// Relative paths inside a model file are resolved against its directory.
fs::path resolve(const fs::path& base_file, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base_file.parent_path() / path;
}

}  // namespace

std::string mode_name(DecisionMode mode) { return mode == DecisionMode::MultiClass ? "multiclass" : "multilabel"; }

DecisionMode parse_mode(const std::string& name) {
  if (name == "multiclass") return DecisionMode::MultiClass;
  if (name == "multilabel") return DecisionMode::MultiLabel;
  throw ConfigError("unknown mode '" + name + "' (expected multiclass or multilabel)");
}

std::string hex_hash(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void save_pool(const fs::path& path, const PoolFile& pool) {
  json j;
  j["format"] = "gpde-expert-pool";
  j["version"] = kFormatVersion;
  j["kind"] = pool.kind;
  j["hyperparams"] = {{"length_scale", pool.hyper.length_scale},
                      {"signal_std", pool.hyper.signal_std},
                      {"noise_std", pool.hyper.noise_std}};
  json experts = json::array();
  for (std::size_t i = 0; i < pool.datasets.size(); ++i)
    experts.push_back({{"domain_id", pool.domain_ids.at(i)}, {"dataset", fs::absolute(pool.datasets[i]).string()}});
  j["experts"] = std::move(experts);
  if (pool.pca) {
    j["pca"] = {{"energy", pool.pca->energy},
                {"retained", pool.pca->retained},
                {"mean", std::vector<double>(pool.pca->mean.data(), pool.pca->mean.data() + pool.pca->mean.size())},
                {"basis", write_matrix(pool.pca->basis)}};
  } else {
    j["pca"] = nullptr;
  }
  j["seed"] = pool.seed;
  j["config_hash"] = pool.config_hash;
  j["fit"] = {{"objective", pool.objective}, {"iterations", pool.iterations}, {"converged", pool.converged}};
  write_json(path, j);
}

PoolFile load_pool(const fs::path& path) {
  const json j = read_json(path, "gpde-expert-pool");
  PoolFile pool;
  try {
    pool.kind = j.at("kind").get<std::string>();
    const json& h = j.at("hyperparams");
    pool.hyper = {h.at("length_scale").get<double>(), h.at("signal_std").get<double>(),
                  h.at("noise_std").get<double>()};
    for (const json& e : j.at("experts")) {
      pool.domain_ids.push_back(e.at("domain_id").get<std::string>());
      pool.datasets.push_back(resolve(path, e.at("dataset").get<std::string>()));
    }
    if (!j.at("pca").is_null()) {
      const json& p = j.at("pca");
      data::PcaProjector proj;
      proj.energy = p.at("energy").get<double>();
      proj.retained = p.at("retained").get<double>();
      const auto mean = p.at("mean").get<std::vector<double>>();
      proj.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
      proj.basis = read_matrix(p.at("basis"));
      if (proj.basis.rows() != proj.mean.size()) throw LoadError(path.string() + ": PCA shape mismatch");
      pool.pca = std::move(proj);
    }
    pool.seed = j.at("seed").get<std::uint64_t>();
    pool.config_hash = j.at("config_hash").get<std::string>();
    pool.objective = j.at("fit").at("objective").get<double>();
    pool.iterations = j.at("fit").at("iterations").get<int>();
    pool.converged = j.at("fit").at("converged").get<bool>();
  } catch (const json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
  pool.hyper.validate();
  return pool;
}

std::vector<Dataset<>> load_pool_datasets(const PoolFile& pool) {
  std::vector<Dataset<>> out;
  for (std::size_t i = 0; i < pool.datasets.size(); ++i) {
    Dataset<> d = data::load_dataset(pool.datasets[i]);
    d.domain_id = pool.domain_ids.at(i);
    out.push_back(pool.pca ? data::pca_apply(*pool.pca, d) : std::move(d));
  }
  return out;
}

std::vector<std::shared_ptr<const Expert<>>> materialize_pool(const PoolFile& pool) {
  std::vector<std::shared_ptr<const Expert<>>> experts;
  for (auto& d : load_pool_datasets(pool)) experts.push_back(std::make_shared<const Expert<>>(train_expert(d, pool.hyper)));
  return experts;
}

void save_bundle(const fs::path& path, const BundleFile& b) {
  auto opt_path = [](const std::optional<fs::path>& p) -> json {
    return p ? json(fs::absolute(*p).string()) : json(nullptr);
  };
  json j;
  j["format"] = "gpde-model-bundle";
  j["version"] = kFormatVersion;
  j["source_pool"] = opt_path(b.source_pool);
  j["target_pool"] = opt_path(b.target_pool);
  j["target_data"] = opt_path(b.target_data);
  j["betas"] = b.betas;
  j["mode"] = mode_name(b.mode);
  j["seed"] = b.seed;
  j["config_hash"] = b.config_hash;
  write_json(path, j);
}

BundleFile load_bundle(const fs::path& path) {
  const json j = read_json(path, "gpde-model-bundle");
  BundleFile b;
  auto opt_path = [&](const char* key) -> std::optional<fs::path> {
    const json& v = j.at(key);
    if (v.is_null()) return std::nullopt;
    return resolve(path, v.get<std::string>());
  };
  try {
    b.source_pool = opt_path("source_pool");
    b.target_pool = opt_path("target_pool");
    b.target_data = opt_path("target_data");
    b.betas = j.at("betas").get<std::vector<double>>();
    b.mode = parse_mode(j.at("mode").get<std::string>());
    b.seed = j.at("seed").get<std::uint64_t>();
    b.config_hash = j.at("config_hash").get<std::string>();
  } catch (const json::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
  return b;
}

LoadedModel materialize_bundle(const BundleFile& b) {
  std::vector<std::shared_ptr<const Expert<>>> sources;
  std::shared_ptr<const Expert<>> target;
  std::optional<data::PcaProjector> pca;
  if (b.source_pool) {
    const PoolFile pool = load_pool(*b.source_pool);
    pca = pool.pca;
    sources = materialize_pool(pool);
  }
  if (b.target_pool) {
    const PoolFile pool = load_pool(*b.target_pool);
    if (pool.datasets.size() != 1) throw LoadError("target pool must hold exactly one expert");
    const bool same_space = pca.has_value() == pool.pca.has_value() &&
                            (!pca || (pca->mean == pool.pca->mean && pca->basis == pool.pca->basis));
    if (b.source_pool && !same_space)
      throw LoadError("target pool was not trained in the source pool's feature space");
    pca = pool.pca;
    target = materialize_pool(pool).front();
  }
  Dataset<> target_data;
  if (b.target_data) {
    target_data = data::load_dataset(*b.target_data);
    if (pca) target_data = data::pca_apply(*pca, target_data);
  }
  std::optional<Eigen::VectorXd> betas;
  if (!b.betas.empty())
    betas = Eigen::Map<const Eigen::VectorXd>(b.betas.data(), static_cast<Eigen::Index>(b.betas.size()));
  return LoadedModel{GpdeModel<>(std::move(sources), std::move(target_data), std::move(target), b.mode, betas),
                     std::move(pca)};
}

}  // namespace gpde::io
