#include "gpde/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace gpde::data {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_number(const std::string& s, double& v) {
  if (s.empty()) return false;
  const char* first = s.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

Dataset<> parse_dataset(std::istream& in, std::string domain_id, const CsvSchema& schema, LoadInfo* info) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw LoadError("dataset '" + domain_id + "': missing header row");
  ++line_no;
  const auto header = split_commas(line);
  Eigen::Index dims = 0, outputs = 0;
  for (const auto& h : header) {
    if (h.size() > 1 && h[0] == 'f' && outputs == 0 && h == "f" + std::to_string(dims)) {
      ++dims;
    } else if (h.size() > 1 && h[0] == 'y' && h == "y" + std::to_string(outputs)) {
      ++outputs;
    } else {
      throw LoadError("dataset '" + domain_id + "': unexpected header column '" + h + "'", 1);
    }
  }
  if (dims == 0 || (outputs == 0 && !schema.allow_unlabeled)) throw LoadError("dataset '" + domain_id + "': header needs f* and y* columns", 1);
  if (schema.dims && *schema.dims != dims)
    throw LoadError("dataset '" + domain_id + "': expected " + std::to_string(*schema.dims) + " features", 1);
  if (schema.outputs && *schema.outputs != outputs)
    throw LoadError("dataset '" + domain_id + "': expected " + std::to_string(*schema.outputs) + " labels", 1);

  std::vector<double> xs, ys;
  std::vector<std::size_t> rows;
  bool saw_zero = false, saw_minus = false;
  std::size_t first_zero = 0, first_minus = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_commas(line);
    if (static_cast<Eigen::Index>(cells.size()) != dims + outputs)
      throw LoadError("dataset '" + domain_id + "' row " + std::to_string(line_no) + ": expected " +
                          std::to_string(dims + outputs) + " columns, got " + std::to_string(cells.size()),
                      line_no);
    for (Eigen::Index j = 0; j < dims + outputs; ++j) {
      double v = 0.0;
      if (!parse_number(cells[static_cast<std::size_t>(j)], v) || !std::isfinite(v))
        throw LoadError("dataset '" + domain_id + "' row " + std::to_string(line_no) + ": bad value '" +
                            cells[static_cast<std::size_t>(j)] + "'",
                        line_no);
      if (j < dims) {
        xs.push_back(v);
        continue;
      }
      if (v != -1.0 && v != 0.0 && v != 1.0)
        throw LoadError("dataset '" + domain_id + "' row " + std::to_string(line_no) + ": label " +
                            cells[static_cast<std::size_t>(j)] + " is not one of -1, 0, 1",
                        line_no);
      if (v == 0.0 && !saw_zero) saw_zero = true, first_zero = line_no;
      if (v == -1.0 && !saw_minus) saw_minus = true, first_minus = line_no;
      ys.push_back(v);
    }
  }
  if (saw_zero && saw_minus) {
    const std::size_t row = std::max(first_zero, first_minus);
    throw LoadError("dataset '" + domain_id + "' row " + std::to_string(row) + ": mixes 0 and -1 labels", row);
  }
  const auto n = static_cast<Eigen::Index>(xs.size()) / dims;
  Dataset<> d{Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(xs.data(), n, dims),
              Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(ys.data(), n, outputs),
              std::move(domain_id)};
  if (saw_zero) {
    d.Y = (d.Y.array() == 0.0).select(-1.0, d.Y);
    std::cerr << "notice: dataset '" << d.domain_id << "' uses 0/1 labels; mapped to -1/+1\n";
  }
  if (info) info->mapped_zero_one = saw_zero;
  if (n == 0) throw LoadError("dataset '" + d.domain_id + "' has no rows");
  return d;
}

Dataset<> load_dataset(const std::filesystem::path& path, const CsvSchema& schema, LoadInfo* info) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open dataset file " + path.string());
  return parse_dataset(in, path.stem().string(), schema, info);
}

void write_dataset(std::ostream& out, const Dataset<>& d) {
  for (Eigen::Index j = 0; j < d.dims(); ++j) out << (j ? "," : "") << 'f' << j;
  for (Eigen::Index j = 0; j < d.outputs(); ++j) out << ",y" << j;
  out << '\n';
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    for (Eigen::Index j = 0; j < d.dims(); ++j) out << (j ? "," : "") << format_double(d.X(i, j));
    for (Eigen::Index j = 0; j < d.outputs(); ++j) out << ',' << format_double(d.Y(i, j));
    out << '\n';
  }
}

void save_dataset(const std::filesystem::path& path, const Dataset<>& d) {
  std::ofstream out(path);
  if (!out) throw LoadError("cannot write dataset file " + path.string());
  write_dataset(out, d);
}

// ---- PCA --------------------------------------------------------------------

PcaProjector pca_fit(const Eigen::MatrixXd& x, double energy) {
  if (x.rows() < 2) throw InvalidInput("pca_fit: need at least two samples");
  if (!(energy > 0.0 && energy <= 1.0)) throw InvalidInput("pca_fit: energy must be in (0, 1]");
  if (!x.allFinite()) throw InvalidInput("pca_fit: non-finite input");

  PcaProjector p;
  p.energy = energy;
  p.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - p.mean.transpose();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(x.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericalFailure("pca_fit: eigendecomposition failed", 0.0);

  // ascending from Eigen; walk from the top
  const Eigen::VectorXd values = solver.eigenvalues().reverse();
  const Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();
  const double top = std::max(values(0), 0.0);
  const double cutoff = top * 1e-12 * static_cast<double>(x.cols());
  Eigen::Index rank = 0;
  while (rank < values.size() && values(rank) > cutoff) ++rank;
  if (rank == 0) {
    // constant data: keep one direction so downstream shapes stay valid
    p.basis = vectors.leftCols(1);
    p.retained = 1.0;
    return p;
  }
  const double total = values.head(rank).sum();
  double cumulative = 0.0;
  Eigen::Index d = 0;
  while (d < rank) {
    cumulative += values(d++);
    if (cumulative / total >= energy - 1e-12) break;
  }
  p.basis = vectors.leftCols(d);
  p.retained = cumulative / std::max(values.cwiseMax(0.0).sum(), total);
  return p;
}

Eigen::MatrixXd pca_apply(const PcaProjector& p, const Eigen::MatrixXd& x) {
  if (x.cols() != p.input_dims()) throw InvalidInput("pca_apply: feature dimension mismatch");
  return (x.rowwise() - p.mean.transpose()) * p.basis;
}

Dataset<> pca_apply(const PcaProjector& p, const Dataset<>& d) {
  return Dataset<>{pca_apply(p, d.X), d.Y, d.domain_id};
}

// ---- config -----------------------------------------------------------------

void ShiftConfig::validate() const {
  if (n_source_domains < 0) throw ConfigError("n_source_domains must be >= 0");
  if (samples_per_domain < 1) throw ConfigError("samples_per_domain must be >= 1");
  if (target_train_size < 1) throw ConfigError("target_train_size must be >= 1");
  if (target_test_size < 1) throw ConfigError("target_test_size must be >= 1");
  if (dims < 1) throw ConfigError("dims must be >= 1");
  if (outputs < 1) throw ConfigError("outputs must be >= 1");
  if (!(shift_magnitude >= 0.0) || !std::isfinite(shift_magnitude))
    throw ConfigError("shift_magnitude must be finite and >= 0");
  if (!(label_complexity > 0.0) || !std::isfinite(label_complexity))
    throw ConfigError("label_complexity must be finite and > 0");
}

std::string ShiftConfig::to_text() const {
  std::ostringstream out;
  out << "n_source_domains=" << n_source_domains << '\n'
      << "samples_per_domain=" << samples_per_domain << '\n'
      << "target_train_size=" << target_train_size << '\n'
      << "target_test_size=" << target_test_size << '\n'
      << "dims=" << dims << '\n'
      << "outputs=" << outputs << '\n'
      << "shift_magnitude=" << format_double(shift_magnitude) << '\n'
      << "label_complexity=" << format_double(label_complexity) << '\n'
      << "seed=" << seed << '\n';
  return out.str();
}

ShiftConfig parse_shift_config(std::istream& in) {
  ShiftConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    double v = 0.0;
    if (!parse_number(value, v))
      throw ConfigError("config line " + std::to_string(line_no) + ": bad number '" + value + "'");
    auto as_int = [&]() {
      if (v != std::floor(v)) throw ConfigError("config key '" + key + "' must be an integer");
      return static_cast<int>(v);
    };
    if (key == "n_source_domains") cfg.n_source_domains = as_int();
    else if (key == "samples_per_domain") cfg.samples_per_domain = as_int();
    else if (key == "target_train_size") cfg.target_train_size = as_int();
    else if (key == "target_test_size") cfg.target_test_size = as_int();
    else if (key == "dims") cfg.dims = as_int();
    else if (key == "outputs") cfg.outputs = as_int();
    else if (key == "shift_magnitude") cfg.shift_magnitude = v;
    else if (key == "label_complexity") cfg.label_complexity = v;
    else if (key == "seed") {
      std::uint64_t s = 0;
      const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), s);
      if (ec != std::errc() || ptr != value.data() + value.size())
        throw ConfigError("config key 'seed' must be a nonnegative integer");
      cfg.seed = s;
    } else {
      throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

ShiftConfig load_shift_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_shift_config(in);
}

std::uint64_t config_hash(const std::string& canonical_text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : canonical_text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// ---- synthetic domains --------------------------------------------------------

Eigen::MatrixXd LatentFunction::values(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd arg = x * frequencies.transpose();
  arg.rowwise() += phases.transpose();
  const double scale = std::sqrt(2.0 / static_cast<double>(frequencies.rows()));
  return scale * arg.array().cos().matrix() * weights;
}

Eigen::MatrixXd LatentFunction::labels(const Eigen::MatrixXd& x) const {
  const Eigen::MatrixXd v = values(x);
  return (v.array() >= 0.0).select(Eigen::MatrixXd::Ones(v.rows(), v.cols()), -1.0);
}

Eigen::MatrixXd LatentFunction::class_labels(const Eigen::MatrixXd& x) const {
  const Eigen::MatrixXd v = values(x);
  Eigen::MatrixXd out = Eigen::MatrixXd::Constant(v.rows(), v.cols(), -1.0);
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    Eigen::Index best = 0;
    v.row(i).maxCoeff(&best);
    out(i, best) = 1.0;
  }
  return out;
}

Eigen::MatrixXd DomainTransform::apply(const Eigen::MatrixXd& z) const {
  Eigen::MatrixXd x = z * rotation.transpose();
  x.rowwise() += translation.transpose();
  return x;
}

namespace {

constexpr int kFourierFeatures = 256;
constexpr int kMaxRegenerations = 100;

Eigen::MatrixXd normal_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n01;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n01(rng);
  return m;
}

// Rotation by an angle in (-shift * pi/4, shift * pi/4) within a random
// plane, plus a translation of length `shift` in a random direction.
DomainTransform draw_transform(std::mt19937_64& rng, int dims, double shift) {
  DomainTransform t;
  t.rotation = Eigen::MatrixXd::Identity(dims, dims);
  t.translation = Eigen::VectorXd::Zero(dims);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const Eigen::VectorXd direction = normal_matrix(rng, dims, 1);
  const double angle = shift * std::numbers::pi / 4.0 * unit(rng);
  if (dims >= 2) {
    const Eigen::MatrixXd frame = normal_matrix(rng, dims, 2).householderQr().householderQ() *
                                  Eigen::MatrixXd::Identity(dims, 2);
    const Eigen::VectorXd u = frame.col(0), v = frame.col(1);
    t.rotation += (std::cos(angle) - 1.0) * (u * u.transpose() + v * v.transpose()) +
                  std::sin(angle) * (v * u.transpose() - u * v.transpose());
  }
  const double norm = direction.norm();
  if (norm > 0.0) t.translation = shift * direction / norm;
  return t;
}

bool both_classes(const Eigen::MatrixXd& y) {
  for (Eigen::Index j = 0; j < y.cols(); ++j)
    if ((y.col(j).array() > 0.0).all() || (y.col(j).array() < 0.0).all()) return false;
  return true;
}

// Per-domain stream keyed on (seed, domain, attempt) so domains are
// independent of one another and regeneration stays reproducible.
std::mt19937_64 domain_rng(std::uint64_t seed, std::uint64_t domain, std::uint64_t attempt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(domain), static_cast<std::uint32_t>(attempt)};
  return std::mt19937_64(seq);
}

Dataset<> draw_domain(const LatentFunction& f, const DomainTransform& t, std::uint64_t seed, std::uint64_t domain,
                      int samples, int dims, std::string id) {
  for (int attempt = 0; attempt < kMaxRegenerations; ++attempt) {
    auto rng = domain_rng(seed, domain, static_cast<std::uint64_t>(attempt) + 1);
    Eigen::MatrixXd x = t.apply(normal_matrix(rng, samples, dims));
    Eigen::MatrixXd y = f.labels(x);
    if (both_classes(y) || samples < 2) return Dataset<>{std::move(x), std::move(y), std::move(id)};
    std::cerr << "notice: domain '" << id << "' drew a single class; regenerating with sub-seed " << attempt + 1
              << '\n';
  }
  throw ConfigError("synth_shift: domain '" + id + "' never produced both classes");
}

}  // namespace

SyntheticDomains synth_shift(const ShiftConfig& cfg) {
  cfg.validate();
  SyntheticDomains out;
  auto rng = domain_rng(cfg.seed, 0xFFFF, 0);
  out.latent.frequencies = normal_matrix(rng, kFourierFeatures, cfg.dims) / cfg.label_complexity;
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  out.latent.phases.resize(kFourierFeatures);
  for (auto& p : out.latent.phases) p = phase(rng);
  out.latent.weights = normal_matrix(rng, kFourierFeatures, cfg.outputs);

  for (int k = 0; k < cfg.n_source_domains; ++k) out.source_transforms.push_back(draw_transform(rng, cfg.dims, cfg.shift_magnitude));
  out.target_transform = draw_transform(rng, cfg.dims, cfg.shift_magnitude);

  for (int k = 0; k < cfg.n_source_domains; ++k)
    out.sources.push_back(draw_domain(out.latent, out.source_transforms[static_cast<std::size_t>(k)], cfg.seed,
                                      static_cast<std::uint64_t>(k), cfg.samples_per_domain, cfg.dims,
                                      "source_" + std::to_string(k)));
  const auto target_id = static_cast<std::uint64_t>(cfg.n_source_domains);
  out.target_train = draw_domain(out.latent, out.target_transform, cfg.seed, target_id, cfg.target_train_size,
                                 cfg.dims, "target_train");
  out.target_test = draw_domain(out.latent, out.target_transform, cfg.seed, target_id + 1, cfg.target_test_size,
                                cfg.dims, "target_test");
  return out;
}

}  // namespace gpde::data
