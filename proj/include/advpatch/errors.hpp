#pragma once

#include <stdexcept>
#include <string>

namespace advpatch {

struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A loss term or gradient went non-finite.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A metric has no defined value for the given inputs (zero ground truth,
// zero-norm vectors, zero baselines).
struct UndefinedMetric : std::domain_error {
  using std::domain_error::domain_error;
};

// Raised when a detector adapter is asked for something its capabilities
// do not cover, e.g. a gradient from a non-differentiable adapter.
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

class DetectorError : public std::runtime_error {
 public:
  DetectorError(std::string adapter, const std::string& what)
      : std::runtime_error(adapter + ": " + what), adapter_(std::move(adapter)) {}
  const std::string& adapter() const noexcept { return adapter_; }

 private:
  std::string adapter_;
};

}  // namespace advpatch
