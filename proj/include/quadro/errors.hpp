#pragma once

#include <stdexcept>
#include <string>

namespace quadro {

/// Base class for every error raised by the library. Callers that only need
/// coarse handling can catch this; the concrete subclasses below exist so
/// callers (and tests) can react to specific failure modes.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what_arg) : std::runtime_error(what_arg) {}
};

#define QUADRO_DEFINE_ERROR(NAME)                                        \
  class NAME : public Error {                                            \
   public:                                                               \
    explicit NAME(const std::string& what_arg) : Error(what_arg) {}      \
  }

// Model / input validation.
QUADRO_DEFINE_ERROR(DimensionMismatch);
QUADRO_DEFINE_ERROR(NotPositiveSemidefinite);
QUADRO_DEFINE_ERROR(InvalidKurtosis);
QUADRO_DEFINE_ERROR(InvalidConfig);

// Moments.
QUADRO_DEFINE_ERROR(DegenerateProjection);
QUADRO_DEFINE_ERROR(SingularPooledCovariance);

// Estimation.
QUADRO_DEFINE_ERROR(EmptyDataset);
QUADRO_DEFINE_ERROR(EmptyClass);
QUADRO_DEFINE_ERROR(TooFewRows);
QUADRO_DEFINE_ERROR(SingularCovariance);

// Solver.
QUADRO_DEFINE_ERROR(NonconvexObjective);

// Classification.
QUADRO_DEFINE_ERROR(UnequalCovariances);
QUADRO_DEFINE_ERROR(WrongOrientation);
QUADRO_DEFINE_ERROR(UnsupportedDimension);
QUADRO_DEFINE_ERROR(NonGaussianClass);

// Oracles.
QUADRO_DEFINE_ERROR(InvalidDf);
QUADRO_DEFINE_ERROR(DimensionTooLarge);

// Command-line front end.
QUADRO_DEFINE_ERROR(ParseError);
QUADRO_DEFINE_ERROR(InvalidSpec);
QUADRO_DEFINE_ERROR(IoError);
QUADRO_DEFINE_ERROR(FoldTooSmall);

#undef QUADRO_DEFINE_ERROR

}  // namespace quadro
