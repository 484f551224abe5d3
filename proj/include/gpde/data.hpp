#ifndef GPDE_DATA_HPP
#define GPDE_DATA_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gpde/gp.hpp"

namespace gpde::data {

// ---- CSV ingestion ---------------------------------------------------------
//
// Header row f0..f{D-1},y0..y{C-1}; one sample per line. Labels are -1/+1;
// files labeled 0/1 are accepted and mapped to -1/+1.

struct CsvSchema {
  std::optional<Eigen::Index> dims;
  std::optional<Eigen::Index> outputs;
  bool allow_unlabeled = false;  // accept a header with no y* columns
};

struct LoadInfo {
  bool mapped_zero_one = false;
};

Dataset<> load_dataset(const std::filesystem::path& path, const CsvSchema& schema = {}, LoadInfo* info = nullptr);
Dataset<> parse_dataset(std::istream& in, std::string domain_id, const CsvSchema& schema = {},
                        LoadInfo* info = nullptr);
void save_dataset(const std::filesystem::path& path, const Dataset<>& d);
void write_dataset(std::ostream& out, const Dataset<>& d);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

// ---- PCA -------------------------------------------------------------------

struct PcaProjector {
  Eigen::VectorXd mean;   // D
  Eigen::MatrixXd basis;  // D x d, orthonormal columns, leading components first
  double energy = 1.0;    // requested fraction
  double retained = 1.0;  // achieved fraction of total variance

  Eigen::Index input_dims() const { return basis.rows(); }
  Eigen::Index output_dims() const { return basis.cols(); }
};

/// Smallest leading eigenbasis of the centered covariance whose cumulative
/// eigenvalue fraction reaches `energy`. Numerically null directions are
/// dropped before counting.
PcaProjector pca_fit(const Eigen::MatrixXd& x, double energy);
Eigen::MatrixXd pca_apply(const PcaProjector& p, const Eigen::MatrixXd& x);
Dataset<> pca_apply(const PcaProjector& p, const Dataset<>& d);

// ---- synthetic covariate shift ----------------------------------------------

struct ShiftConfig {
  int n_source_domains = 5;
  int samples_per_domain = 100;
  int target_train_size = 200;
  int target_test_size = 300;
  int dims = 3;
  int outputs = 2;
  double shift_magnitude = 1.0;
  double label_complexity = 1.0;  // length scale of the latent label function
  std::uint64_t seed = 0;

  void validate() const;
  /// key=value lines in a fixed order; parse_shift_config(to_text()) == *this.
  std::string to_text() const;
  friend bool operator==(const ShiftConfig&, const ShiftConfig&) = default;
};

ShiftConfig parse_shift_config(std::istream& in);
ShiftConfig load_shift_config(const std::filesystem::path& path);

/// Smooth random function R^D -> R^C (random Fourier features of an RBF
/// process). Labels are its sign, with 0 mapped to +1.
struct LatentFunction {
  Eigen::MatrixXd frequencies;  // F x D
  Eigen::VectorXd phases;       // F
  Eigen::MatrixXd weights;      // F x C

  Eigen::MatrixXd values(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd labels(const Eigen::MatrixXd& x) const;
  /// One-hot {-1,+1} rows at the argmax over outputs.
  Eigen::MatrixXd class_labels(const Eigen::MatrixXd& x) const;
};

/// Affine map applied to standard-normal draws to produce a domain's inputs.
struct DomainTransform {
  Eigen::MatrixXd rotation;
  Eigen::VectorXd translation;

  Eigen::MatrixXd apply(const Eigen::MatrixXd& z) const;
};

struct SyntheticDomains {
  std::vector<Dataset<>> sources;
  Dataset<> target_train;
  Dataset<> target_test;
  LatentFunction latent;
  std::vector<DomainTransform> source_transforms;
  DomainTransform target_transform;
};

SyntheticDomains synth_shift(const ShiftConfig& cfg);

/// FNV-1a over a config's canonical text; embedded in artifacts.
std::uint64_t config_hash(const std::string& canonical_text);

}  // namespace gpde::data

#endif  // GPDE_DATA_HPP
