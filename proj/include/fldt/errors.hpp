#pragma once

#include <stdexcept>
#include <string>

namespace fldt {

// Base class for every error thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define FLDT_DEFINE_ERROR(NAME)                          \
  struct NAME : Error {                                  \
    explicit NAME(const std::string& msg) : Error(msg) {} \
  }

// Linear algebra / sampling.
FLDT_DEFINE_ERROR(NonSymmetricError);
FLDT_DEFINE_ERROR(IndefiniteCovarianceError);
FLDT_DEFINE_ERROR(SingularCovarianceError);
FLDT_DEFINE_ERROR(DegenerateCovarianceError);
FLDT_DEFINE_ERROR(DimensionTooSmallError);
FLDT_DEFINE_ERROR(DimensionMismatchError);
FLDT_DEFINE_ERROR(ZeroVectorError);
FLDT_DEFINE_ERROR(DegenerateDrawError);

// Estimation.
FLDT_DEFINE_ERROR(MissingClassError);
FLDT_DEFINE_ERROR(ZeroSignalError);

// Source aggregation.
FLDT_DEFINE_ERROR(EmptySourcesError);
FLDT_DEFINE_ERROR(ZeroResultantError);

// Dataset handling and statistics.
FLDT_DEFINE_ERROR(TooFewWindowsError);
FLDT_DEFINE_ERROR(TooFewPairsError);
FLDT_DEFINE_ERROR(ParseError);
FLDT_DEFINE_ERROR(InvariantViolationError);

// CLI / configuration.
FLDT_DEFINE_ERROR(ConfigError);

#undef FLDT_DEFINE_ERROR

}  // namespace fldt
