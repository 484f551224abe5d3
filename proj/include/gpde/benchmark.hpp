#ifndef GPDE_BENCHMARK_HPP
#define GPDE_BENCHMARK_HPP

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gpde/data.hpp"
#include "gpde/experts.hpp"

namespace gpde::bench {

enum class Method { GpSource, GpTarget, Gpa, GpdeSs, Gpde };

inline constexpr Method kAllMethods[] = {Method::GpSource, Method::GpTarget, Method::Gpa, Method::GpdeSs,
                                         Method::Gpde};

std::string method_name(Method m);
Method parse_method(const std::string& name);
std::vector<Method> parse_methods(const std::string& comma_list);
std::vector<int> parse_schedule(const std::string& comma_list);

struct BenchmarkSpec {
  std::vector<Method> methods{std::begin(kAllMethods), std::end(kAllMethods)};
  std::vector<int> schedule{10, 30, 50, 100};
  int folds = 5;
  DecisionMode mode = DecisionMode::MultiLabel;
  double energy = 0.99;  // PCA energy, fit on source data only
  std::uint64_t seed = 0;
  FitOptions fit;

  void validate() const;
};

/// Sources plus a target pool read from CSV files. Without `target_test`,
/// the target file is cut into `folds` contiguous blocks; each block serves
/// once as the test set and the remaining rows, in file order, form the
/// training pool from which the first n_t rows are taken.
struct FileSource {
  std::vector<std::filesystem::path> sources;
  std::filesystem::path target;
  std::optional<std::filesystem::path> target_test;
};

/// Fresh synthetic domains per fold, generated with seed = spec.seed + fold.
struct SynthSource {
  data::ShiftConfig config;
};

using DataSource = std::variant<FileSource, SynthSource>;

struct ResultRow {
  std::string method;
  int n_t = 0;
  int fold = -1;  // -1 marks the across-fold mean
  std::string metric;
  double value = 0.0;
};

struct BenchmarkResult {
  std::vector<ResultRow> rows;
  int source_fits = 0;
  int target_fits = 0;
  std::uint64_t seed = 0;
  std::string config_hash;

  /// Across-fold mean for (method, n_t, metric); throws if absent.
  double mean(Method m, int n_t, const std::string& metric) const;
};

BenchmarkResult run_benchmark(const BenchmarkSpec& spec, const DataSource& source);

/// Header comment lines carry seed and config hash; then
/// method,n_t,fold,metric,value with fold "mean" for aggregate rows.
void write_table(std::ostream& out, const BenchmarkResult& r);

/// Primary metric name for a mode: "cr" (multi-class) or "accuracy".
std::string primary_metric(DecisionMode mode);

}  // namespace gpde::bench

#endif  // GPDE_BENCHMARK_HPP
