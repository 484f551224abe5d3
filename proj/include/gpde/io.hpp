#ifndef GPDE_IO_HPP
#define GPDE_IO_HPP

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gpde/data.hpp"
#include "gpde/experts.hpp"

namespace gpde::io {

/// One trained expert pool on disk. Features are not embedded; each expert
/// names the CSV it was trained on and is rebuilt from it on load.
struct PoolFile {
  std::string kind = "source";  // "source" or "target"
  Hyperparams<> hyper;
  std::vector<std::string> domain_ids;
  std::vector<std::filesystem::path> datasets;
  std::optional<data::PcaProjector> pca;  // applied to every dataset before use
  std::uint64_t seed = 0;
  std::string config_hash;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

void save_pool(const std::filesystem::path& path, const PoolFile& pool);
PoolFile load_pool(const std::filesystem::path& path);

/// Loads (and projects) the referenced datasets.
std::vector<Dataset<>> load_pool_datasets(const PoolFile& pool);
std::vector<std::shared_ptr<const Expert<>>> materialize_pool(const PoolFile& pool);

/// A GPDE model: source pool + target adaptation set + optional target pool.
struct BundleFile {
  std::optional<std::filesystem::path> source_pool;
  std::optional<std::filesystem::path> target_pool;
  std::optional<std::filesystem::path> target_data;
  std::vector<double> betas;  // empty = uniform
  DecisionMode mode = DecisionMode::MultiLabel;
  std::uint64_t seed = 0;
  std::string config_hash;
};

void save_bundle(const std::filesystem::path& path, const BundleFile& bundle);
BundleFile load_bundle(const std::filesystem::path& path);

struct LoadedModel {
  GpdeModel<> model;
  std::optional<data::PcaProjector> pca;
};

LoadedModel materialize_bundle(const BundleFile& bundle);

std::string mode_name(DecisionMode mode);
DecisionMode parse_mode(const std::string& name);
std::string hex_hash(std::uint64_t h);

}  // namespace gpde::io

#endif  // GPDE_IO_HPP
