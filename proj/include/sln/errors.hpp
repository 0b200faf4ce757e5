#pragma once

#include <stdexcept>

namespace sln {

// invalid argument value (probability outside (0,1), bad power, ...)
struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DimensionMismatch : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NotPositiveDefinite : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// truncated-normal region has zero mass (upper bound is -inf)
struct EmptyRegion : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotIid : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// not enough samples for the requested statistic
struct InsufficientData : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// an optimizer the result depends on for correctness did not converge
struct NoConvergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// low-discrepancy table problems: missing or corrupt direction-number file
struct SobolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// requested more low-discrepancy dimensions than the table provides
struct DimTooLarge : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// model description file failed to parse or validate
struct ModelFileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace sln
