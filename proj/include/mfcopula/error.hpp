#pragma once

#include <stdexcept>
#include <string>

namespace mfcopula {

// Argument outside the mathematical domain of an operation.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Coefficient configuration the closed forms cannot evaluate.
struct UnsupportedConfiguration : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Correlation matrix could not be factorized.
struct AssemblyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Problem exceeds the configured dense-factorization cap.
struct SizeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad input files (rows are 1-based, header is row 1).
struct IngestError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Broken numerical invariant, e.g. a CDF that is not monotone.
struct InternalError : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace mfcopula
