#ifndef GPDE_ERRORS_HPP
#define GPDE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace gpde {

/// Bad shapes, non-finite values or out-of-domain arguments.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A factorization that could not be stabilized by the jitter ladder.
class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(const std::string& what, double attempted_jitter)
      : std::runtime_error(what), attempted_jitter_(attempted_jitter) {}
  double attempted_jitter() const { return attempted_jitter_; }

 private:
  double attempted_jitter_;
};

/// Malformed dataset or config file. `row` is 1-based, 0 when not row-specific.
class LoadError : public std::runtime_error {
 public:
  LoadError(const std::string& what, std::size_t row = 0)
      : std::runtime_error(what), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Metric not defined for the given input (e.g. AUC with one class only).
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace gpde

#endif  // GPDE_ERRORS_HPP
